"""Pulse-ODMR simulation for a spin-3/2 color-center qubit quartet.

The quartet hosts two spectrally resolved qubits ({+3/2, +1/2} and
{-1/2, -3/2}) that can be driven simultaneously with a two-tone microwave
field ("duplex" operation), doubling the optical readout contrast and the
AC-magnetometry sensitivity relative to driving one qubit ("simplex").
"""

from .core import (
    GAMMA_DEFAULT,
    QuartetParams,
    SpinOperators,
    Tone,
    qubit_block_hamiltonian,
    resonance_frequencies,
    rotating_frame_hamiltonian,
    spin_matrices,
)
from .dynamics import (
    DT_DEFAULT,
    apply_dephasing,
    bloch_vector,
    ensemble_average,
    propagate_block,
    propagate_numeric,
    purity,
    state_fidelity,
)
from .experiments import (
    FitError,
    FitResult,
    ScanResult,
    SensitivityReport,
    ac_response_amplitude_scan,
    ac_response_tau_scan,
    accumulated_phase,
    cw_spectrum,
    echo_envelope_scan,
    fit_ac_response,
    fit_echo_envelope,
    fit_rabi,
    min_detectable_field,
    rabi_scan,
    sensitivity,
    simulated_field_estimates,
    write_csv,
)
from .photophysics import (
    ReadoutModel,
    add_readout_noise,
    complementary_signal,
    contrast_trace,
    fluorescence,
    initialize,
)
from .sequence import (
    OMEGA1_DEFAULT,
    AcField,
    PulseElement,
    PulseSequence,
    SequenceError,
    build_echo_sequence,
    build_rabi_sequence,
    duration_for_angle,
    echo_signal,
    run_sequence,
    sequence_from_text,
    sequence_to_text,
    synchronized_ac_frequency,
    tones_for_mode,
)

__version__ = "0.1.0"
