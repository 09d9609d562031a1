"""High-level scans, curve fits and sensitivity analysis.

Every scan returns a ``ScanResult`` carrying the sweep axis, one or more
signal traces, optional fits and enough metadata to re-run it; results
serialize to CSV with a '#'-prefixed metadata header.

Fits use bounded Levenberg-Marquardt style least squares (max 500 model
evaluations, 1e-10 relative tolerance) seeded from spectral / log-linear
estimates.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .core import QuartetParams, resonance_frequencies
from .photophysics import ReadoutModel, add_readout_noise, contrast_trace
from .sequence import (
    OMEGA1_DEFAULT,
    AcField,
    build_rabi_sequence,
    duration_for_angle,
    echo_signal,
    run_sequence,
    synchronized_ac_frequency,
)


class FitError(RuntimeError):
    """Curve fit failed to converge or the data cannot constrain it."""


@dataclass
class FitResult:
    model: str
    params: dict[str, float]
    stderr: dict[str, float]
    curve: np.ndarray | None = None


@dataclass
class ScanResult:
    """Sweep axis + signal traces + fits + reproducibility metadata."""

    axis_name: str
    axis: np.ndarray
    signals: dict[str, np.ndarray]
    fits: dict[str, FitResult] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.axis = np.asarray(self.axis, dtype=float)
        for name, values in self.signals.items():
            values = np.asarray(values, dtype=float)
            if values.shape != self.axis.shape:
                raise ValueError(f"signal '{name}' length differs from axis")
            self.signals[name] = values


@dataclass(frozen=True)
class SensitivityReport:
    """Sensitivity summary in display units.

    delta_f: response slope in %/uT, sigma_f_1s in %/sqrt(Hz) and eta in
    uT/sqrt(Hz), so that eta = sigma_f_1s / delta_f exactly.
    slope_field: field at which the slope is evaluated (T).
    """

    delta_f: float
    sigma_f_1s: float
    eta: float
    mode: str = ""
    readout: str = ""
    slope_field: float = 0.0

    def __post_init__(self) -> None:
        if not math.isclose(self.eta * self.delta_f, self.sigma_f_1s, rel_tol=1e-9):
            raise ValueError("eta must equal sigma_f_1s / delta_f")


def _base_metadata(params: QuartetParams, **extra) -> dict:
    meta = {f"params_{k}": v for k, v in asdict(params).items()}
    meta.update(extra)
    return meta


def rabi_scan(
    t_range: np.ndarray,
    mode: str,
    params: QuartetParams,
    readout_model: ReadoutModel | None = None,
    omega1: float = OMEGA1_DEFAULT,
    engine: str = "block",
    noise_time: float | None = None,
    seed: int | None = None,
) -> ScanResult:
    """Contrast trace C(t) over microwave pulse durations.

    ``noise_time`` switches on additive readout noise for the given
    per-point integration time (s); None keeps the trace noiseless.
    """
    t_range = np.asarray(t_range, dtype=float)
    if t_range.size == 0:
        raise ValueError("t_range is empty")
    if readout_model is None:
        readout_model = ReadoutModel(chi=params.chi, sigma_f_1s=params.sigma_f_1s)
    intensities = np.array(
        [
            run_sequence(
                build_rabi_sequence(t, mode, params, omega1),
                params,
                readout_model,
                engine=engine,
            )
            for t in t_range
        ]
    )
    contrast = contrast_trace(intensities)
    if noise_time is not None:
        contrast = add_readout_noise(contrast, readout_model, noise_time, seed)
    return ScanResult(
        axis_name="mw_duration_s",
        axis=t_range,
        signals={"contrast": contrast},
        metadata=_base_metadata(
            params,
            scan="rabi",
            mode=mode,
            engine=engine,
            omega1=omega1,
            noise_time=noise_time,
            seed=seed,
        ),
    )


def _fit(residual_fn, x0, bounds, n_points):
    result = least_squares(
        residual_fn, x0, bounds=bounds, max_nfev=500, xtol=1e-10, ftol=1e-10, gtol=1e-10
    )
    if result.status <= 0:
        raise FitError("fit did not converge within the iteration budget")
    dof = max(n_points - len(x0), 1)
    variance = 2.0 * result.cost / dof
    # Covariance through the SVD of the jacobian itself; forming J^T J first
    # squares its conditioning and corrupts the small-singular directions.
    _, sv, vt = np.linalg.svd(result.jac, full_matrices=False)
    threshold = np.finfo(float).eps * max(result.jac.shape) * sv[0]
    keep = sv > threshold
    cov = (vt[keep].T / sv[keep] ** 2) @ vt[keep] * variance
    stderr = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return result.x, stderr


def _dominant_angular_freq(t: np.ndarray, y: np.ndarray) -> float:
    """Peak of the discrete spectrum (excluding DC), rad/s."""
    dt = float(np.mean(np.diff(t)))
    amp = np.abs(np.fft.rfft(y - y.mean()))
    freqs = np.fft.rfftfreq(len(y), dt)
    if len(amp) < 2:
        raise FitError("trace too short for a spectral frequency estimate")
    k = 1 + int(np.argmax(amp[1:]))
    return 2.0 * math.pi * freqs[k]


def fit_rabi(t: np.ndarray, contrast: np.ndarray) -> FitResult:
    """Fit C(t) = -A cos(w1 t) exp(-t/T2*).

    The decay is parametrized by the rate 1/T2* bounded at zero, so an
    undamped trace fits cleanly with T2* = inf.
    """
    t = np.asarray(t, dtype=float)
    contrast = np.asarray(contrast, dtype=float)
    if np.ptp(contrast) < 1e-12:
        raise FitError("flat trace: Rabi parameters are unconstrained")
    omega1_init = _dominant_angular_freq(t, contrast)
    if omega1_init <= 0:
        raise FitError("could not estimate a Rabi frequency from the trace")
    if t.max() * omega1_init < 4.0 * math.pi:
        raise FitError("trace spans fewer than two Rabi periods")
    a_init = 0.5 * np.ptp(contrast)

    def model(p, tt):
        a, w1, rate = p
        return -a * np.cos(w1 * tt) * np.exp(-rate * tt)

    x0 = np.array([a_init, omega1_init, 0.1 / t.max()])
    popt, perr = _fit(
        lambda p: model(p, t) - contrast,
        x0,
        bounds=([0.0, 0.0, 0.0], [np.inf, np.inf, np.inf]),
        n_points=len(t),
    )
    a, w1, rate = popt
    t2_star = 1.0 / rate if rate > 0 else math.inf
    t2_star_err = perr[2] / rate**2 if rate > 0 else math.inf
    return FitResult(
        model="rabi_damped_cosine",
        params={"a_r": a, "omega1": w1, "t2_star": t2_star},
        stderr={"a_r": perr[0], "omega1": perr[1], "t2_star": t2_star_err},
        curve=model(popt, t),
    )


def echo_envelope_scan(
    tau_range: np.ndarray,
    mode: str,
    params: QuartetParams,
    readout_model: ReadoutModel | None = None,
    omega1: float = OMEGA1_DEFAULT,
    readout_scheme: str = "plus_minus_x",
    engine: str = "block",
    noise_time: float | None = None,
    seed: int | None = None,
) -> ScanResult:
    """Echo amplitude F(tau) at tau' = tau (no test field)."""
    tau_range = np.asarray(tau_range, dtype=float)
    if tau_range.max() < 0.75 * params.t2:
        raise ValueError("tau range must extend to at least 0.75 * t2 for a decay fit")
    if readout_model is None:
        readout_model = ReadoutModel(chi=params.chi, sigma_f_1s=params.sigma_f_1s)
    signal = np.array(
        [
            echo_signal(
                params, readout_model, tau, tau, mode, readout_scheme,
                engine=engine, omega1=omega1,
            )
            for tau in tau_range
        ]
    )
    if noise_time is not None:
        signal = add_readout_noise(signal, readout_model, noise_time, seed)
    return ScanResult(
        axis_name="tau_s",
        axis=tau_range,
        signals={"echo": signal},
        metadata=_base_metadata(
            params,
            scan="echo_envelope",
            mode=mode,
            readout=readout_scheme,
            engine=engine,
            omega1=omega1,
            noise_time=noise_time,
            seed=seed,
        ),
    )


def fit_echo_envelope(tau: np.ndarray, signal: np.ndarray) -> FitResult:
    """Fit F(tau) = A exp(-2 tau / T2)."""
    tau = np.asarray(tau, dtype=float)
    signal = np.asarray(signal, dtype=float)
    positive = signal > 0
    if positive.sum() < 2:
        raise FitError("echo envelope has too few positive points")
    slope, intercept = np.polyfit(tau[positive], np.log(signal[positive]), 1)
    t2_init = -2.0 / slope if slope < 0 else np.ptp(tau)
    a_init = math.exp(intercept)

    def model(p, tt):
        a, t2 = p
        return a * np.exp(-2.0 * tt / t2)

    popt, perr = _fit(
        lambda p: model(p, tau) - signal,
        np.array([a_init, t2_init]),
        bounds=([0.0, 1e-12], [np.inf, np.inf]),
        n_points=len(tau),
    )
    return FitResult(
        model="echo_exponential",
        params={"a": popt[0], "t2": popt[1]},
        stderr={"a": perr[0], "t2": perr[1]},
        curve=model(popt, tau),
    )


def accumulated_phase(b: float, nu: float, gamma: float) -> float:
    """Phase gamma*b/(pi*nu) collected over one half period of the test
    field (rad)."""
    if nu <= 0:
        raise ValueError("nu must be positive")
    return gamma * b / (math.pi * nu)


def _ac_field(b: float, nu: float, phase: float, parity: str) -> AcField | None:
    """Signed amplitudes are folded into a pi phase shift."""
    if b == 0.0:
        return None
    if b < 0:
        return AcField(-b, nu, phase + math.pi, parity)
    return AcField(b, nu, phase, parity)


def ac_response_amplitude_scan(
    b_range: np.ndarray,
    tau: float,
    readout_scheme: str,
    mode: str,
    params: QuartetParams,
    readout_model: ReadoutModel | None = None,
    omega1: float = OMEGA1_DEFAULT,
    nu: float | None = None,
    engine: str = "block",
    parity: str = "magnetic",
    ac_phase: float = 0.0,
    noise_time: float | None = None,
    seed: int | None = None,
) -> ScanResult:
    """Echo signal versus test-field amplitude at fixed tau, with a fit of
    the sinusoidal response F = A sin/cos(2 gamma b / (pi nu))."""
    b_range = np.asarray(b_range, dtype=float)
    if readout_model is None:
        readout_model = ReadoutModel(chi=params.chi, sigma_f_1s=params.sigma_f_1s)
    if nu is None:
        nu = synchronized_ac_frequency(tau, duration_for_angle(math.pi, omega1))
    signal = np.array(
        [
            echo_signal(
                params, readout_model, tau, tau, mode, readout_scheme,
                ac=_ac_field(b, nu, ac_phase, parity), engine=engine, omega1=omega1,
            )
            for b in b_range
        ]
    )
    if noise_time is not None:
        signal = add_readout_noise(signal, readout_model, noise_time, seed)
    result = ScanResult(
        axis_name="b_t",
        axis=b_range,
        signals={"response": signal},
        metadata=_base_metadata(
            params,
            scan="ac_response_amplitude",
            mode=mode,
            readout=readout_scheme,
            engine=engine,
            omega1=omega1,
            nu=nu,
            tau=tau,
            parity=parity,
            noise_time=noise_time,
            seed=seed,
        ),
    )
    if readout_scheme in ("plus_minus_x", "plus_minus_y"):
        result.fits["response"] = fit_ac_response(
            b_range, signal, nu, params.gamma, readout_scheme
        )
    return result


def fit_ac_response(
    b: np.ndarray, signal: np.ndarray, nu: float, gamma: float, readout_scheme: str
) -> FitResult:
    """Extract the amplitude A of F = A cos/sin(2 gamma b / (pi nu)).

    Linear in A, solved by projection onto the fixed-phase basis curve.
    """
    b = np.asarray(b, dtype=float)
    signal = np.asarray(signal, dtype=float)
    x = 2.0 * gamma * b / (math.pi * nu)
    basis = np.cos(x) if readout_scheme == "plus_minus_x" else np.sin(x)
    norm = float(basis @ basis)
    if norm < 1e-30:
        raise FitError("response basis vanishes on this amplitude range")
    a = float(basis @ signal) / norm
    residual = signal - a * basis
    dof = max(len(b) - 1, 1)
    stderr = math.sqrt(float(residual @ residual) / dof / norm)
    return FitResult(
        model="ac_response",
        params={"a": a},
        stderr={"a": stderr},
        curve=a * basis,
    )


def ac_response_tau_scan(
    tau_range: np.ndarray,
    b: float,
    readout_scheme: str,
    mode: str,
    params: QuartetParams,
    readout_model: ReadoutModel | None = None,
    omega1: float = OMEGA1_DEFAULT,
    nu: float | None = None,
    nominal_tau: float = 0.6e-6,
    engine: str = "block",
    parity: str = "magnetic",
) -> ScanResult:
    """Frequency characteristics: echo signal versus tau at a fixed test
    frequency (synchronized at ``nominal_tau`` unless given), plus the
    b = 0 baseline."""
    tau_range = np.asarray(tau_range, dtype=float)
    if readout_model is None:
        readout_model = ReadoutModel(chi=params.chi, sigma_f_1s=params.sigma_f_1s)
    if nu is None:
        nu = synchronized_ac_frequency(nominal_tau, duration_for_angle(math.pi, omega1))
    ac = _ac_field(b, nu, 0.0, parity)
    signal = np.empty_like(tau_range)
    baseline = np.empty_like(tau_range)
    for i, tau in enumerate(tau_range):
        signal[i] = echo_signal(
            params, readout_model, tau, tau, mode, readout_scheme,
            ac=ac, engine=engine, omega1=omega1,
        )
        baseline[i] = echo_signal(
            params, readout_model, tau, tau, mode, readout_scheme,
            ac=None, engine=engine, omega1=omega1,
        )
    return ScanResult(
        axis_name="tau_s",
        axis=tau_range,
        signals={"response": signal, "baseline": baseline},
        metadata=_base_metadata(
            params,
            scan="ac_response_tau",
            mode=mode,
            readout=readout_scheme,
            engine=engine,
            omega1=omega1,
            nu=nu,
            b=b,
            parity=parity,
        ),
    )


def sensitivity(
    a: float,
    sigma_f_1s: float,
    nu: float,
    gamma: float,
    mode: str = "",
    readout: str = "plus_minus_y",
) -> SensitivityReport:
    """Sensitivity eta = sigma_F(1) / delta_F from a fitted response
    amplitude.

    delta_F = 2 A gamma / (pi nu) is the maximum response slope, reached
    at b = 0 for the sine (+-y) readout and at b = pi^2 nu / (4 gamma) for
    the cosine (+-x) readout.
    """
    if a <= 0:
        raise ValueError("amplitude must be positive")
    if nu <= 0:
        raise ValueError("nu must be positive")
    delta_f_si = 2.0 * a * gamma / (math.pi * nu)  # 1/T
    slope_field = 0.0 if readout != "plus_minus_x" else math.pi**2 * nu / (4.0 * gamma)
    sigma_pct = sigma_f_1s * 100.0
    delta_f_pct_ut = delta_f_si * 1e-4
    return SensitivityReport(
        delta_f=delta_f_pct_ut,
        sigma_f_1s=sigma_pct,
        eta=sigma_pct / delta_f_pct_ut,
        mode=mode,
        readout=readout,
        slope_field=slope_field,
    )


def min_detectable_field(eta: float, t_values: np.ndarray) -> np.ndarray:
    """Minimum detectable field dB(T) = eta / sqrt(T) (same units as eta)."""
    t_values = np.asarray(t_values, dtype=float)
    if np.any(t_values <= 0):
        raise ValueError("integration times must be positive")
    return eta / np.sqrt(t_values)


def simulated_field_estimates(
    params: QuartetParams,
    readout_model: ReadoutModel,
    tau: float,
    mode: str,
    integration_time: float,
    n_runs: int,
    seed: int,
    omega1: float = OMEGA1_DEFAULT,
    nu: float | None = None,
    b_true: float = 0.0,
    delta_f_si: float | None = None,
) -> np.ndarray:
    """Small-signal field estimates from repeated noisy echo acquisitions.

    Each run measures the +-y echo signal at ``b_true``, adds readout
    noise for the given integration time and inverts the linear response
    b = F / delta_F. When ``delta_f_si`` is not given it is derived from
    the simulated zero-field envelope amplitude.
    """
    if nu is None:
        nu = synchronized_ac_frequency(tau, duration_for_angle(math.pi, omega1))
    if delta_f_si is None:
        envelope = echo_signal(
            params, readout_model, tau, tau, mode, "plus_minus_x", omega1=omega1
        )
        delta_f_si = 2.0 * envelope * params.gamma / (math.pi * nu)
    f_true = echo_signal(
        params, readout_model, tau, tau, mode, "plus_minus_y",
        ac=_ac_field(b_true, nu, 0.0, "magnetic"), omega1=omega1,
    )
    noisy = add_readout_noise(
        np.full(n_runs, f_true), readout_model, integration_time, seed
    )
    return noisy / delta_f_si


def cw_spectrum(
    params: QuartetParams,
    f_range: np.ndarray,
    linewidth: float,
    drive_scale: float = 1.0,
) -> ScanResult:
    """Simplified continuous-wave line spectrum: one Lorentzian of weight
    ``drive_scale`` per transition at |f+-|, peak-normalized.

    At zero static field both lines coincide at 2*d_over_h and stack to
    double height; the integrated weight is independent of the field.
    """
    if linewidth <= 0:
        raise ValueError("linewidth must be positive")
    f_range = np.asarray(f_range, dtype=float)
    hwhm = 0.5 * linewidth
    spectrum = np.zeros_like(f_range)
    for f0 in resonance_frequencies(params):
        spectrum += drive_scale * hwhm**2 / ((f_range - abs(f0)) ** 2 + hwhm**2)
    return ScanResult(
        axis_name="frequency_hz",
        axis=f_range,
        signals={"contrast": spectrum},
        metadata=_base_metadata(
            params, scan="cw_spectrum", linewidth=linewidth, drive_scale=drive_scale
        ),
    )


# --- CSV output --------------------------------------------------------------


def _fmt(value: float) -> str:
    return format(value, ".9g")


def write_csv(result: ScanResult, path) -> None:
    """Write a scan as UTF-8 CSV with '#'-prefixed metadata header lines.

    Floats carry 9 significant digits; identical scans serialize to
    byte-identical files.
    """
    lines = ["# quartetodmr scan v1"]
    for key in sorted(result.metadata):
        lines.append(f"# {key}={result.metadata[key]!r}")
    for name, fit in sorted(result.fits.items()):
        lines.append(f"# fit_{name}_model={fit.model}")
        for pname in sorted(fit.params):
            lines.append(
                f"# fit_{name}_{pname}={fit.params[pname]!r}"
                f" stderr={fit.stderr.get(pname, float('nan'))!r}"
            )
    header = [result.axis_name]
    columns = [result.axis]
    for name in result.signals:
        header.append(name)
        columns.append(result.signals[name])
    for name, fit in result.fits.items():
        if fit.curve is not None:
            header.append(f"fit_{name}")
            columns.append(fit.curve)
            header.append(f"residual_{name}")
            columns.append(result.signals[name] - fit.curve)
    lines.append(",".join(header))
    for row in zip(*columns):
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


__all__ = [
    "FitError",
    "FitResult",
    "ScanResult",
    "SensitivityReport",
    "ac_response_amplitude_scan",
    "ac_response_tau_scan",
    "accumulated_phase",
    "cw_spectrum",
    "echo_envelope_scan",
    "fit_ac_response",
    "fit_echo_envelope",
    "fit_rabi",
    "min_detectable_field",
    "rabi_scan",
    "sensitivity",
    "simulated_field_estimates",
    "write_csv",
]
