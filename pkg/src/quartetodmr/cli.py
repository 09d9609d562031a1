"""Command-line front end: config parsing, subcommands, CSV emission.

Config files are plain ``key = value`` text with '#' comments. Values
accept unit suffixes (ns us ms s, Hz kHz MHz GHz, nT uT mT T, %); bare
numbers are SI base units. Unknown keys are rejected and every physical
invariant is checked at load time.
"""

from __future__ import annotations

import argparse
import math
import re
import sys
from dataclasses import dataclass, fields, replace

import numpy as np

from .core import QuartetParams, resonance_frequencies
from .experiments import (
    FitError,
    ScanResult,
    ac_response_amplitude_scan,
    ac_response_tau_scan,
    cw_spectrum,
    echo_envelope_scan,
    fit_echo_envelope,
    fit_rabi,
    min_detectable_field,
    rabi_scan,
    sensitivity,
    simulated_field_estimates,
    write_csv,
)
from .photophysics import ReadoutModel
from .sequence import MODES, READOUT_SCHEMES, SequenceError

COMMANDS = ("rabi", "echo", "acmag", "cw", "sensitivity", "scaling")

_READOUT_TOKENS = {
    "x": "plus_minus_x",
    "y": "plus_minus_y",
    "commony": "common_plus_y",
}

_UNIT_FACTORS = {
    "": 1.0,
    "s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9,
    "Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9,
    "T": 1.0, "mT": 1e-3, "uT": 1e-6, "µT": 1e-6, "nT": 1e-9,
    "%": 0.01,
}

_VALUE_RE = re.compile(r"^([-+]?[0-9.]+(?:[eE][-+]?[0-9]+)?)\s*([a-zA-Zµ%]*)$")


class ConfigError(ValueError):
    """Invalid configuration text or value."""


def parse_quantity(token: str) -> float:
    """Parse a number with an optional unit suffix into SI base units."""
    match = _VALUE_RE.match(token.strip())
    if match is None:
        raise ConfigError(f"cannot parse value '{token}'")
    number, unit = match.groups()
    if unit not in _UNIT_FACTORS:
        raise ConfigError(f"unknown unit suffix '{unit}'")
    return float(number) * _UNIT_FACTORS[unit]


@dataclass(frozen=True)
class RunConfig:
    """All knobs of a run; defaults reproduce the reference parameter set."""

    d_over_h: float = 35e6
    gamma_over_2pi: float = 28.024e9          # Hz per tesla
    b0: float = 0.046
    chi: float = 0.014
    t2: float = 2.1e-6
    t2_star: float = 1.0e-6
    sigma_f_1s: float = 0.0014
    omega1_over_2pi: float = 10e6             # calibrated Rabi frequency
    engine: str = "block"
    mode: str = "duplex"
    readout: str = "plus_minus_y"
    tau: float = 0.6e-6
    b: float = 5.75e-6
    nu: float | None = None                   # None selects the synchronized value
    ac_parity: str = "magnetic"
    ac_phase: float = 0.0
    seed: int = 1
    integration_time: float = 1.0
    out: str | None = None
    t_max: float = 250e-9
    t_points: int = 126
    tau_min: float = 0.05e-6
    tau_max: float = 2.2e-6
    tau_points: int = 44
    b_min: float = 0.0
    b_max: float = 12e-6
    b_points: int = 49
    f_min: float | None = None
    f_max: float | None = None
    f_points: int = 601
    linewidth: float = 4e6
    acmag_sweep: str = "amplitude"
    scaling_times: tuple[float, ...] = (1.0, 10.0, 100.0)
    scaling_runs: int = 3000

    def params(self) -> QuartetParams:
        return QuartetParams(
            d_over_h=self.d_over_h,
            gamma=2.0 * math.pi * self.gamma_over_2pi,
            b0=self.b0,
            chi=self.chi,
            t2_star=self.t2_star,
            t2=self.t2,
            sigma_f_1s=self.sigma_f_1s,
        )

    def readout_model(self) -> ReadoutModel:
        return ReadoutModel(chi=self.chi, sigma_f_1s=self.sigma_f_1s)

    @property
    def omega1(self) -> float:
        return 2.0 * math.pi * self.omega1_over_2pi


_INT_KEYS = {"seed", "t_points", "tau_points", "b_points", "f_points", "scaling_runs"}
_STR_KEYS = {"engine", "mode", "readout", "ac_parity", "out", "acmag_sweep"}
_AUTO_KEYS = {"nu", "f_min", "f_max"}
_LIST_KEYS = {"scaling_times"}


def parse_config(text: str) -> RunConfig:
    """Parse and validate config text; defaults fill every missing key."""
    known = {f.name for f in fields(RunConfig)}
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        try:
            if key in _STR_KEYS:
                values[key] = value
            elif key in _INT_KEYS:
                values[key] = int(value)
            elif key in _AUTO_KEYS:
                values[key] = None if value == "auto" else parse_quantity(value)
            elif key in _LIST_KEYS:
                values[key] = tuple(parse_quantity(v) for v in value.split(","))
            else:
                values[key] = parse_quantity(value)
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    return validate_config(RunConfig(**values))


def validate_config(cfg: RunConfig) -> RunConfig:
    if cfg.engine not in ("block", "numeric"):
        raise ConfigError("engine must be 'block' or 'numeric'")
    if cfg.mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}")
    readout = _READOUT_TOKENS.get(cfg.readout, cfg.readout)
    if readout not in READOUT_SCHEMES:
        raise ConfigError(
            f"readout must be one of x|y|commony or {READOUT_SCHEMES}"
        )
    cfg = replace(cfg, readout=readout)
    if cfg.ac_parity not in ("magnetic", "even-order"):
        raise ConfigError("ac_parity must be 'magnetic' or 'even-order'")
    if cfg.acmag_sweep not in ("amplitude", "tau"):
        raise ConfigError("acmag_sweep must be 'amplitude' or 'tau'")
    if cfg.omega1_over_2pi <= 0:
        raise ConfigError("omega1_over_2pi must be positive")
    if cfg.integration_time <= 0:
        raise ConfigError("integration_time must be positive")
    try:
        params = cfg.params()
    except ValueError as exc:
        raise ConfigError(f"invalid physical parameters: {exc}") from None
    if cfg.engine == "block" and not params.lac_guard_ok():
        raise ConfigError(
            "b0 violates the level-anti-crossing guard "
            "(gamma*b0/2pi must exceed 2*d_over_h, or b0 = 0) "
            "required by the block engine"
        )
    return cfg


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return validate_config(RunConfig())
    with open(path, "r", encoding="utf-8") as handle:
        return parse_config(handle.read())


# --- subcommands -------------------------------------------------------------


def _out_path(cfg: RunConfig, command: str) -> str:
    return cfg.out or f"quartetodmr_{command}.csv"


def _run_rabi(cfg: RunConfig) -> ScanResult:
    t_range = np.linspace(0.0, cfg.t_max, cfg.t_points)
    params, model = cfg.params(), cfg.readout_model()
    merged = None
    amplitudes = {}
    for mode in ("duplex", "simplex+", "simplex-"):
        scan = rabi_scan(
            t_range, mode, params, model, omega1=cfg.omega1, engine=cfg.engine
        )
        fit = fit_rabi(t_range, scan.signals["contrast"])
        amplitudes[mode] = fit.params["a_r"]
        if merged is None:
            merged = ScanResult(scan.axis_name, scan.axis, {}, {}, scan.metadata)
        merged.signals[f"contrast_{mode}"] = scan.signals["contrast"]
        merged.fits[f"contrast_{mode}"] = fit
        print(f"{mode}: 2A_R = {200 * fit.params['a_r']:.4g} %  "
              f"omega1/2pi = {fit.params['omega1'] / (2e6 * math.pi):.6g} MHz")
    gain = amplitudes["duplex"] / (
        0.5 * (amplitudes["simplex+"] + amplitudes["simplex-"])
    )
    merged.metadata["mode"] = "all"
    print(f"duplex/simplex amplitude gain = {gain:.4g}")
    return merged


def _run_echo(cfg: RunConfig) -> ScanResult:
    tau_range = np.linspace(cfg.tau_min, cfg.tau_max, cfg.tau_points)
    scan = echo_envelope_scan(
        tau_range, cfg.mode, cfg.params(), cfg.readout_model(),
        omega1=cfg.omega1, readout_scheme="plus_minus_x", engine=cfg.engine,
    )
    fit = fit_echo_envelope(tau_range, scan.signals["echo"])
    scan.fits["echo"] = fit
    print(f"echo envelope: A = {100 * fit.params['a']:.4g} %  "
          f"T2 = {1e6 * fit.params['t2']:.4g} us")
    return scan


def _acmag_scan(cfg: RunConfig, mode: str) -> ScanResult:
    if cfg.acmag_sweep == "tau":
        tau_range = np.linspace(cfg.tau_min, cfg.tau_max, cfg.tau_points)
        return ac_response_tau_scan(
            tau_range, cfg.b, cfg.readout, mode, cfg.params(), cfg.readout_model(),
            omega1=cfg.omega1, nu=cfg.nu, nominal_tau=cfg.tau,
            engine=cfg.engine, parity=cfg.ac_parity,
        )
    b_range = np.linspace(cfg.b_min, cfg.b_max, cfg.b_points)
    return ac_response_amplitude_scan(
        b_range, cfg.tau, cfg.readout, mode, cfg.params(), cfg.readout_model(),
        omega1=cfg.omega1, nu=cfg.nu, engine=cfg.engine,
        parity=cfg.ac_parity, ac_phase=cfg.ac_phase,
    )


def _report_line(report) -> str:
    return (f"{report.mode:9s} {report.readout:13s} "
            f"delta_F = {report.delta_f:.4g} %/uT  "
            f"sigma_F(1) = {report.sigma_f_1s:.4g} %/sqrt(Hz)  "
            f"eta = {report.eta:.4g} uT/sqrt(Hz)")


def _run_acmag(cfg: RunConfig) -> ScanResult:
    scan = _acmag_scan(cfg, cfg.mode)
    fit = scan.fits.get("response")
    if fit is not None and fit.params["a"] > 0:
        report = sensitivity(
            fit.params["a"], cfg.sigma_f_1s, scan.metadata["nu"],
            cfg.params().gamma, mode=cfg.mode, readout=cfg.readout,
        )
        print(_report_line(report))
    return scan


def _run_cw(cfg: RunConfig) -> ScanResult:
    params = cfg.params()
    f_plus, f_minus = resonance_frequencies(params)
    lines = sorted({abs(f_plus), abs(f_minus)})
    f_min = cfg.f_min if cfg.f_min is not None else max(lines[0] - 15 * cfg.linewidth, 0.0)
    f_max = cfg.f_max if cfg.f_max is not None else lines[-1] + 15 * cfg.linewidth
    f_range = np.linspace(f_min, f_max, cfg.f_points)
    scan = cw_spectrum(params, f_range, cfg.linewidth)
    print("resonance lines at " + ", ".join(f"{f / 1e6:.6g} MHz" for f in lines))
    return scan


def _run_sensitivity(cfg: RunConfig) -> ScanResult:
    merged = None
    reports = {}
    for mode in ("duplex", "simplex+", "simplex-"):
        scan = _acmag_scan(cfg, mode)
        fit = scan.fits["response"]
        reports[mode] = sensitivity(
            fit.params["a"], cfg.sigma_f_1s, scan.metadata["nu"],
            cfg.params().gamma, mode=mode, readout=cfg.readout,
        )
        print(_report_line(reports[mode]))
        if merged is None:
            merged = ScanResult(scan.axis_name, scan.axis, {}, {}, scan.metadata)
        merged.signals[f"response_{mode}"] = scan.signals["response"]
        merged.fits[f"response_{mode}"] = scan.fits["response"]
    merged.metadata["mode"] = "all"
    gain = 0.5 * (reports["simplex+"].eta + reports["simplex-"].eta) / reports["duplex"].eta
    print(f"duplex sensitivity gain = {gain:.4g}")
    return merged


def _run_scaling(cfg: RunConfig) -> ScanResult:
    params, model = cfg.params(), cfg.readout_model()
    amp_cfg = replace(cfg, acmag_sweep="amplitude", readout="plus_minus_y")
    scan = _acmag_scan(amp_cfg, cfg.mode)
    fit = scan.fits["response"]
    nu = scan.metadata["nu"]
    report = sensitivity(
        fit.params["a"], cfg.sigma_f_1s, nu, params.gamma,
        mode=cfg.mode, readout="plus_minus_y",
    )
    t_values = np.asarray(cfg.scaling_times)
    delta_b = min_detectable_field(report.eta, t_values)
    mc = np.array(
        [
            1e6 * np.std(
                simulated_field_estimates(
                    params, model, cfg.tau, cfg.mode, t, cfg.scaling_runs,
                    cfg.seed + i, omega1=cfg.omega1, nu=nu,
                )
            )
            for i, t in enumerate(t_values)
        ]
    )
    slope = np.polyfit(np.log10(t_values), np.log10(mc), 1)[0]
    print(_report_line(report))
    print(f"monte-carlo scaling exponent = {slope:.4g} (ideal -0.5)")
    return ScanResult(
        axis_name="integration_time_s",
        axis=t_values,
        signals={"delta_b_ut": delta_b, "delta_b_monte_carlo_ut": mc},
        metadata={
            "scan": "scaling",
            "eta_ut": report.eta,
            "mode": cfg.mode,
            "seed": cfg.seed,
            "runs": cfg.scaling_runs,
            "nu": nu,
        },
    )


_RUNNERS = {
    "rabi": _run_rabi,
    "echo": _run_echo,
    "acmag": _run_acmag,
    "cw": _run_cw,
    "sensitivity": _run_sensitivity,
    "scaling": _run_scaling,
}


def run_subcommand(command: str, cfg: RunConfig) -> int:
    """Run one subcommand: writes its CSV, prints fitted parameters,
    returns a process exit status."""
    if command not in COMMANDS:
        print(f"unknown command '{command}'", file=sys.stderr)
        return 2
    try:
        result = _RUNNERS[command](cfg)
        path = _out_path(cfg, command)
        write_csv(result, path)
        print(f"wrote {path}")
    except (ConfigError, SequenceError, FitError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


# --- recipes -----------------------------------------------------------------

RECIPES = {
    "rabi-gain": ("rabi", {"t_max": "250 ns", "t_points": "126"}),
    "echo-envelope": ("echo", {"tau_min": "0.05 us", "tau_max": "2.2 us", "tau_points": "44"}),
    "acmag-x": ("acmag", {"readout": "x", "tau": "0.6 us", "b_max": "12 uT", "b_points": "49"}),
    "acmag-y": ("acmag", {"readout": "y", "tau": "0.6 us", "b_max": "12 uT", "b_points": "49"}),
    "acmag-tau-x": ("acmag", {
        "readout": "x", "acmag_sweep": "tau", "b": "5.75 uT",
        "tau_min": "0.2 us", "tau_max": "1.2 us", "tau_points": "51",
    }),
    "acmag-tau-y": ("acmag", {
        "readout": "y", "acmag_sweep": "tau", "b": "5.75 uT",
        "tau_min": "0.2 us", "tau_max": "1.2 us", "tau_points": "51",
    }),
    "cw-zero-field": ("cw", {"b0": "0 T", "engine": "block"}),
    "cw-split": ("cw", {"b0": "46 mT"}),
    "sensitivity-table": ("sensitivity", {"readout": "y"}),
    "scaling": ("scaling", {"scaling_times": "1 s, 10 s, 100 s", "scaling_runs": "3000"}),
}


def recipe_text(name: str) -> str:
    if name not in RECIPES:
        raise ConfigError(
            f"unknown recipe '{name}'; available: {', '.join(sorted(RECIPES))}"
        )
    command, overrides = RECIPES[name]
    lines = [
        f"# quartetodmr recipe '{name}'",
        f"# run with: quartetodmr {command} --config <this file>",
    ]
    lines += [f"{key} = {value}" for key, value in overrides.items()]
    return "\n".join(lines) + "\n"


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="quartetodmr",
        description="Pulse-ODMR simulation and AC-magnetometry analysis "
        "for a spin-3/2 qubit quartet with duplex two-tone drive.",
    )
    parser.add_argument("command", nargs="?", choices=COMMANDS)
    parser.add_argument("--config", help="path to a key = value config file")
    parser.add_argument("--seed", type=int, help="override the RNG seed")
    parser.add_argument("--out", help="output CSV path")
    parser.add_argument("--engine", choices=("block", "numeric"))
    parser.add_argument("--mode", choices=MODES)
    parser.add_argument("--readout", choices=("x", "y", "commony"))
    parser.add_argument("--recipe", help="print a named scan recipe config and exit")
    args = parser.parse_args(argv)

    try:
        if args.recipe is not None:
            text = recipe_text(args.recipe)
            if args.out:
                with open(args.out, "w", encoding="utf-8") as handle:
                    handle.write(text)
                print(f"wrote {args.out}")
            else:
                print(text, end="")
            return 0
        cfg = load_config(args.config)
        overrides = {}
        for key in ("seed", "out", "engine", "mode", "readout"):
            value = getattr(args, key)
            if value is not None:
                overrides[key] = value
        if overrides:
            cfg = validate_config(replace(cfg, **overrides))
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    return run_subcommand(args.command, cfg)


if __name__ == "__main__":
    sys.exit(main())
