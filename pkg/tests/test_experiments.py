import math

import numpy as np
import pytest
from scipy.integrate import quad

from quartetodmr import (
    FitError,
    add_readout_noise,
    ac_response_amplitude_scan,
    ac_response_tau_scan,
    accumulated_phase,
    cw_spectrum,
    echo_envelope_scan,
    echo_signal,
    fit_ac_response,
    fit_echo_envelope,
    fit_rabi,
    min_detectable_field,
    rabi_scan,
    sensitivity,
    simulated_field_estimates,
    synchronized_ac_frequency,
    write_csv,
)
from quartetodmr.core import QuartetParams

TAU = 0.6e-6
NU = synchronized_ac_frequency(TAU, 50e-9)


# --- Rabi ---------------------------------------------------------------


def test_rabi_first_minimum_at_pi_time(params, readout):
    t = np.linspace(0, 250e-9, 126)  # 2 ns grid contains 50 ns exactly
    scan = rabi_scan(t, "duplex", params, readout)
    c = scan.signals["contrast"]
    assert t[int(np.argmax(c))] == pytest.approx(50e-9, abs=1e-12)
    assert t[int(np.argmin(c[:40]))] == pytest.approx(0.0, abs=1e-12)


def test_rabi_fit_roundtrip_synthetic():
    t = np.linspace(0, 400e-9, 201)
    a, w1, t2s = 0.007, 2 * math.pi * 10e6, 1e-6
    clean = -a * np.cos(w1 * t) * np.exp(-t / t2s)
    fit = fit_rabi(t, clean)
    assert fit.params["a_r"] == pytest.approx(a, rel=1e-3)
    assert fit.params["omega1"] == pytest.approx(w1, rel=1e-3)
    assert fit.params["t2_star"] == pytest.approx(t2s, rel=1e-3)


def test_rabi_fit_statistical_coverage(readout):
    t = np.linspace(0, 400e-9, 201)
    a_true = 0.007
    clean = -a_true * np.cos(2 * math.pi * 10e6 * t) * np.exp(-t / 1e-6)
    hits = 0
    for seed in range(100):
        noisy = add_readout_noise(clean, readout, 1.0, seed)
        fit = fit_rabi(t, noisy)
        if abs(fit.params["a_r"] - a_true) <= 3 * fit.stderr["a_r"]:
            hits += 1
    assert hits >= 95


def test_rabi_fit_rejects_flat_trace():
    t = np.linspace(0, 400e-9, 201)
    with pytest.raises(FitError):
        fit_rabi(t, np.zeros_like(t))


def test_rabi_fit_rejects_short_trace():
    t = np.linspace(0, 60e-9, 31)  # just over one period at 10 MHz... not two
    c = -0.007 * np.cos(2 * math.pi * 10e6 * t)
    with pytest.raises(FitError):
        fit_rabi(t, c)


def test_rabi_duplex_gain_and_amplitudes(params, readout):
    t = np.linspace(0, 250e-9, 126)
    amps = {}
    for mode in ("duplex", "simplex+", "simplex-"):
        scan = rabi_scan(t, mode, params, readout)
        amps[mode] = fit_rabi(t, scan.signals["contrast"]).params["a_r"]
    gain = amps["duplex"] / (0.5 * (amps["simplex+"] + amps["simplex-"]))
    assert 1.98 <= gain <= 2.02
    assert 2 * amps["duplex"] == pytest.approx(0.0140, abs=2e-4)
    assert 2 * amps["simplex+"] == pytest.approx(0.0070, abs=2e-4)


def test_rabi_scan_noise_reproducible(params, readout):
    t = np.linspace(0, 250e-9, 50)
    a = rabi_scan(t, "duplex", params, readout, noise_time=1.0, seed=3)
    b = rabi_scan(t, "duplex", params, readout, noise_time=1.0, seed=3)
    assert np.array_equal(a.signals["contrast"], b.signals["contrast"])


# --- echo envelope -------------------------------------------------------


def test_echo_envelope_recovers_t2(params, readout):
    tau = np.linspace(0.05e-6, 2.2e-6, 44)
    scan = echo_envelope_scan(tau, "duplex", params, readout)
    fit = fit_echo_envelope(tau, scan.signals["echo"])
    assert fit.params["t2"] == pytest.approx(2.1e-6, rel=0.02)
    # extrapolated F(0) equals the full contrast up to the documented
    # pulse-window dephasing exposure (75 ns)
    full = params.chi / (1 + 0.5 * params.chi)
    assert fit.params["a"] == pytest.approx(full * math.exp(-75e-9 / params.t2), rel=1e-6)
    assert fit.params["a"] == pytest.approx(full, rel=0.05)


def test_echo_envelope_duplex_amplitude_twice_simplex(params, readout):
    tau = np.linspace(0.1e-6, 1.8e-6, 18)
    fits = {}
    for mode in ("duplex", "simplex+"):
        scan = echo_envelope_scan(tau, mode, params, readout)
        fits[mode] = fit_echo_envelope(tau, scan.signals["echo"]).params["a"]
    assert fits["duplex"] / fits["simplex+"] == pytest.approx(2.0, rel=0.01)


def test_echo_envelope_range_precondition(params, readout):
    with pytest.raises(ValueError):
        echo_envelope_scan(np.linspace(0.1e-6, 0.5e-6, 5), "duplex", params, readout)


def test_fit_echo_envelope_roundtrip():
    tau = np.linspace(0.05e-6, 2.5e-6, 50)
    sig = 0.0134 * np.exp(-2 * tau / 2.1e-6)
    fit = fit_echo_envelope(tau, sig)
    assert fit.params["a"] == pytest.approx(0.0134, rel=1e-3)
    assert fit.params["t2"] == pytest.approx(2.1e-6, rel=1e-3)


# --- AC magnetometry -------------------------------------------------------


def test_accumulated_phase_against_quadrature(params):
    b, nu = 5.75e-6, 769.23e3
    integral, _ = quad(
        lambda t: params.gamma * b * math.sin(2 * math.pi * nu * t), 0, 1 / (2 * nu)
    )
    assert accumulated_phase(b, nu, params.gamma) == pytest.approx(integral, rel=1e-12)
    assert accumulated_phase(b, nu, params.gamma) == pytest.approx(0.4189, abs=2e-4)
    assert accumulated_phase(0.0, nu, params.gamma) == 0.0
    assert accumulated_phase(2 * b, nu, params.gamma) == pytest.approx(
        2 * accumulated_phase(b, nu, params.gamma)
    )
    with pytest.raises(ValueError):
        accumulated_phase(b, 0.0, params.gamma)


def test_ac_amplitude_scan_matches_response_formula(params, readout):
    b_max = math.pi**2 * NU / (2 * params.gamma)  # phase argument out to pi
    b = np.linspace(-b_max, b_max, 33)
    envelope = echo_signal(params, readout, TAU, TAU, "duplex", "plus_minus_x")
    x = 2 * params.gamma * b / (math.pi * NU)
    for scheme, reference in (
        ("plus_minus_y", envelope * np.sin(x)),
        ("plus_minus_x", envelope * np.cos(x)),
    ):
        scan = ac_response_amplitude_scan(b, TAU, scheme, "duplex", params, readout)
        rms = np.sqrt(np.mean((scan.signals["response"] - reference) ** 2))
        assert rms < 0.01 * envelope
        fitted = scan.fits["response"].params["a"]
        assert fitted == pytest.approx(envelope, rel=0.01)
    # F_y(0) = 0 and F_x(0) = A
    scan_y = ac_response_amplitude_scan(np.array([0.0]), TAU, "plus_minus_y",
                                        "duplex", params, readout)
    scan_x = ac_response_amplitude_scan(np.array([0.0]), TAU, "plus_minus_x",
                                        "duplex", params, readout)
    assert abs(scan_y.signals["response"][0]) < 1e-12
    assert scan_x.signals["response"][0] == pytest.approx(envelope, rel=1e-9)


def test_ac_response_quadrature_sum(params, readout):
    b = np.linspace(0, 10e-6, 11)
    f_x = ac_response_amplitude_scan(b, TAU, "plus_minus_x", "duplex", params, readout)
    f_y = ac_response_amplitude_scan(b, TAU, "plus_minus_y", "duplex", params, readout)
    envelope = echo_signal(params, readout, TAU, TAU, "duplex", "plus_minus_x")
    total = f_x.signals["response"] ** 2 + f_y.signals["response"] ** 2
    assert np.allclose(total, envelope**2, rtol=0.01)


def test_ac_duplex_amplitude_twice_simplex(params, readout):
    b = np.linspace(0, 10e-6, 11)
    amps = {}
    for mode in ("duplex", "simplex+", "simplex-"):
        scan = ac_response_amplitude_scan(b, TAU, "plus_minus_y", mode, params, readout)
        amps[mode] = scan.fits["response"].params["a"]
    assert amps["duplex"] / (0.5 * (amps["simplex+"] + amps["simplex-"])) == pytest.approx(
        2.0, rel=0.01
    )


def test_small_signal_slope_matches_max_slope_formula(params, readout):
    b = np.linspace(-math.pi**2 * NU / (2 * params.gamma),
                    math.pi**2 * NU / (2 * params.gamma), 33)
    scan = ac_response_amplitude_scan(b, TAU, "plus_minus_y", "duplex", params, readout)
    a_fit = scan.fits["response"].params["a"]
    h = 1e-8  # 10 nT finite-difference step
    f_plus = echo_signal(params, readout, TAU, TAU, "duplex", "plus_minus_y",
                         ac=_field(h))
    f_minus = echo_signal(params, readout, TAU, TAU, "duplex", "plus_minus_y",
                          ac=_field(-h))
    slope = (f_plus - f_minus) / (2 * h)
    assert slope == pytest.approx(2 * a_fit * params.gamma / (math.pi * NU), rel=0.005)


def _field(b):
    from quartetodmr.experiments import _ac_field

    return _ac_field(b, NU, 0.0, "magnetic")


def test_ac_tau_scan_shapes(params, readout):
    taus = np.linspace(0.2e-6, 1.0e-6, 41)
    step = taus[1] - taus[0]
    scan_x = ac_response_tau_scan(taus, 5.75e-6, "plus_minus_x", "duplex",
                                  params, readout)
    dip = scan_x.signals["baseline"] - scan_x.signals["response"]
    k = int(np.argmax(dip))
    assert abs(taus[k] - TAU) <= 2 * step  # dip sits at the synchronized tau
    assert np.all(dip[k - 5: k + 6] > 0)  # response below the envelope baseline
    # decoherence skews the response: larger scale on the short-tau side
    k0 = int(np.argmin(np.abs(taus - TAU)))
    assert dip[k0 - 5] > dip[k0 + 5]

    scan_y = ac_response_tau_scan(taus, 5.75e-6, "plus_minus_y", "duplex",
                                  params, readout)
    assert np.max(np.abs(scan_y.signals["baseline"])) < 1e-12  # F = 0 baseline
    ky = int(np.argmax(np.abs(scan_y.signals["response"])))
    assert abs(taus[ky] - TAU) <= 3 * step
    edge = max(abs(scan_y.signals["response"][0]), abs(scan_y.signals["response"][-1]))
    assert edge < 0.25 * abs(scan_y.signals["response"][ky])


# --- sensitivity -----------------------------------------------------------


def test_sensitivity_reference_rows(params):
    # printed slope / noise pairs reproduce the published sensitivities
    nu = 769.23e3
    rows = [
        (0.0998, 0.136, 1.36, "plus_minus_x"),
        (0.1004, 0.144, 1.44, "plus_minus_y"),
        (0.0524, 0.148, 2.83, "plus_minus_y"),
    ]
    for delta_f, sigma_pct, eta, scheme in rows:
        a = delta_f * 1e4 * math.pi * nu / (2 * params.gamma)
        report = sensitivity(a, sigma_pct / 100, nu, params.gamma, readout=scheme)
        assert report.delta_f == pytest.approx(delta_f, rel=1e-6)
        assert report.eta == pytest.approx(eta, abs=0.005)
        assert report.eta * report.delta_f == pytest.approx(report.sigma_f_1s, rel=1e-12)


def test_sensitivity_slope_point_and_scaling(params):
    r_y = sensitivity(0.007, 0.0014, NU, params.gamma, readout="plus_minus_y")
    assert r_y.slope_field == 0.0
    r_x = sensitivity(0.007, 0.0014, NU, params.gamma, readout="plus_minus_x")
    assert r_x.slope_field == pytest.approx(math.pi**2 * NU / (4 * params.gamma))
    halved = sensitivity(0.007, 0.0007, NU, params.gamma)
    assert halved.eta == pytest.approx(0.5 * r_y.eta)
    with pytest.raises(ValueError):
        sensitivity(-1.0, 0.0014, NU, params.gamma)


def test_min_detectable_field():
    t = np.array([1.0, 100.0])
    db = min_detectable_field(1.36, t)
    assert db[0] == pytest.approx(1.36)
    assert db[1] == pytest.approx(0.136)
    with pytest.raises(ValueError):
        min_detectable_field(1.36, np.array([0.0]))


def test_monte_carlo_field_std_matches_eta(params, readout):
    estimates = simulated_field_estimates(
        params, readout, TAU, "duplex", 1.0, 200, seed=12
    )
    envelope = echo_signal(params, readout, TAU, TAU, "duplex", "plus_minus_x")
    delta_f_si = 2 * envelope * params.gamma / (math.pi * NU)
    eta_si = readout.sigma_f_1s / delta_f_si
    assert np.std(estimates) == pytest.approx(eta_si, rel=0.10)


def test_field_estimate_recovers_probe_field(params, readout):
    estimates = simulated_field_estimates(
        params, readout, TAU, "duplex", 1e4, 50, seed=13, b_true=1e-6
    )
    assert np.mean(estimates) == pytest.approx(1e-6, rel=0.02)


# --- CW spectrum -----------------------------------------------------------


def test_cw_single_line_at_zero_field(readout):
    params = QuartetParams(b0=0.0)
    f = np.linspace(30e6, 110e6, 1601)
    scan = cw_spectrum(params, f, linewidth=4e6)
    spectrum = scan.signals["contrast"]
    assert f[int(np.argmax(spectrum))] == pytest.approx(70e6, abs=1e5)
    assert np.max(spectrum) == pytest.approx(2.0, rel=1e-3)  # two stacked lines


def test_cw_split_lines_half_height(params):
    f = np.linspace(1.1e9, 1.5e9, 4001)
    scan = cw_spectrum(params, f, linewidth=4e6)
    spectrum = scan.signals["contrast"]
    for f0 in (1219.104e6, 1359.104e6):
        k = int(np.argmin(np.abs(f - f0)))
        assert spectrum[k] == pytest.approx(1.0, rel=1e-2)  # half of zero-field peak


def test_cw_integrated_weight_field_independent():
    f = np.linspace(0, 2e9, 400001)
    low = cw_spectrum(QuartetParams(b0=0.0), f, 4e6).signals["contrast"]
    high = cw_spectrum(QuartetParams(b0=0.046), f, 4e6).signals["contrast"]
    assert np.trapezoid(low, f) == pytest.approx(np.trapezoid(high, f), rel=1e-3)


def test_cw_validation(params):
    with pytest.raises(ValueError):
        cw_spectrum(params, np.linspace(0, 1e9, 11), linewidth=0.0)


# --- CSV ---------------------------------------------------------------------


def test_csv_round_trip_stable(tmp_path, params, readout):
    t = np.linspace(0, 250e-9, 26)
    scan = rabi_scan(t, "duplex", params, readout, noise_time=1.0, seed=5)
    scan.fits["contrast"] = fit_rabi(t, scan.signals["contrast"])
    path_a = tmp_path / "a.csv"
    path_b = tmp_path / "b.csv"
    write_csv(scan, path_a)
    rerun = rabi_scan(t, "duplex", params, readout, noise_time=1.0, seed=5)
    rerun.fits["contrast"] = fit_rabi(t, rerun.signals["contrast"])
    write_csv(rerun, path_b)
    assert path_a.read_bytes() == path_b.read_bytes()

    lines = path_a.read_text().splitlines()
    rows = [ln for ln in lines if not ln.startswith("#")]
    assert len(rows) == 1 + len(t)  # header + one row per scan point
    header = rows[0].split(",")
    assert header[0] == "mw_duration_s"
    assert "contrast" in header and "fit_contrast" in header and "residual_contrast" in header


def test_fit_ac_response_needs_signal(params):
    with pytest.raises(FitError):
        fit_ac_response(np.zeros(5), np.zeros(5), NU, params.gamma, "plus_minus_y")
