"""Spin-3/2 operator algebra, system parameters and drive Hamiltonians.

Level basis is fixed repo-wide to (|+3/2>, |+1/2>, |-1/2>, |-3/2>), so the
"+ qubit" {|+3/2>, |+1/2>} occupies the upper-left 2x2 block and the
"- qubit" {|-1/2>, |-3/2>} the lower-right one.

Units: times in s, linear frequencies in Hz, angular frequencies in rad/s,
magnetic fields in T. ``gamma`` is the (positive) electron gyromagnetic
ratio in rad s^-1 T^-1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TARGETS = ("+", "-")

# 2x2 sub-block of the 4x4 quartet space addressed by each qubit.
BLOCK_SLICES = {"+": slice(0, 2), "-": slice(2, 4)}

# Default free-electron-like gyromagnetic ratio (g ~ 2.00), rad s^-1 T^-1.
GAMMA_DEFAULT = 2.0 * math.pi * 28.024e9

_SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class SpinOperators:
    """S = 3/2 matrices in the (+3/2, +1/2, -1/2, -3/2) basis."""

    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray


def spin_matrices() -> SpinOperators:
    """Return the standard spin-3/2 operators Sx, Sy, Sz (hbar = 1)."""
    ladder = np.zeros((4, 4), dtype=complex)
    # <m+1|S+|m> = sqrt(s(s+1) - m(m+1)) for descending-m ordering.
    ladder[0, 1] = _SQRT3
    ladder[1, 2] = 2.0
    ladder[2, 3] = _SQRT3
    sx = 0.5 * (ladder + ladder.conj().T)
    sy = -0.5j * (ladder - ladder.conj().T)
    sz = np.diag([1.5, 0.5, -0.5, -1.5]).astype(complex)
    return SpinOperators(sx=sx, sy=sy, sz=sz)


_SZ = spin_matrices().sz.real

# Traceless-per-block generator of the even-order (opposite-sign) detuning
# channel: equals +sigma_z in the + block and -sigma_z in the - block.
PARITY_GENERATOR = np.diag([1.0, -1.0, -1.0, 1.0])


@dataclass(frozen=True)
class QuartetParams:
    """Physical parameters of the quartet spin system.

    d_over_h
        Half the zero-field line position in Hz; the zero-field resonance
        sits at 2 * d_over_h.
    gamma
        Gyromagnetic ratio, rad s^-1 T^-1, taken positive.
    b0
        Static field along z in T.
    chi
        Readout contrast coefficient (relative fluorescence increase when
        all population sits in the |+-3/2> levels).
    t2_star, t2
        Inhomogeneous / homogeneous coherence times in s.
    sigma_f_1s
        Std of the contrast signal F for 1 s integration (dimensionless).
    """

    d_over_h: float = 35e6
    gamma: float = GAMMA_DEFAULT
    b0: float = 0.046
    chi: float = 0.014
    t2_star: float = 1.0e-6
    t2: float = 2.1e-6
    sigma_f_1s: float = 0.0014

    def __post_init__(self) -> None:
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.d_over_h <= 0:
            raise ValueError("d_over_h must be positive")
        if not (self.t2 >= self.t2_star > 0):
            raise ValueError("coherence times must satisfy t2 >= t2_star > 0")
        if self.chi < 0:
            raise ValueError("chi must be non-negative")
        if self.sigma_f_1s < 0:
            raise ValueError("sigma_f_1s must be non-negative")
        if self.b0 < 0:
            raise ValueError("b0 must be non-negative")

    def lac_guard_ok(self) -> bool:
        """Whether b0 is safely outside the level-anti-crossing regime.

        The two-block reduction requires the Zeeman splitting to dominate
        the zero-field term (or to vanish entirely at b0 = 0).
        """
        if self.b0 == 0.0:
            return True
        return self.gamma * self.b0 / (2.0 * math.pi) > 2.0 * self.d_over_h


@dataclass(frozen=True)
class Tone:
    """One microwave tone of a (possibly two-tone) drive.

    ``rabi_angular_freq`` is omega_1 = sqrt(3) * gamma * B1 in rad/s, i.e.
    the on-resonance nutation rate inside the targeted 2x2 block.
    """

    frequency: float
    rabi_angular_freq: float
    phase: float = 0.0
    target: str = "+"

    def __post_init__(self) -> None:
        if self.frequency <= 0:
            raise ValueError("tone frequency must be positive")
        if self.rabi_angular_freq < 0:
            raise ValueError("rabi_angular_freq must be non-negative")
        if self.target not in TARGETS:
            raise ValueError(f"tone target must be one of {TARGETS}")


def resonance_frequencies(params: QuartetParams) -> tuple[float, float]:
    """Resonance frequencies (f_plus, f_minus) of the two qubits in Hz.

    f_plus/minus = gamma*B0/(2 pi) +- 2*d_over_h. f_minus is returned
    signed; a negative value means the - transition rotates with the
    opposite circular sense (relevant only near zero field).
    """
    zeeman = params.gamma * params.b0 / (2.0 * math.pi)
    return zeeman + 2.0 * params.d_over_h, zeeman - 2.0 * params.d_over_h


def block_resonance_angular(params: QuartetParams, target: str) -> float:
    """Signed angular transition frequency omega_0 of one qubit block."""
    f_plus, f_minus = resonance_frequencies(params)
    return 2.0 * math.pi * (f_plus if target == "+" else f_minus)


def qubit_block_hamiltonian(
    target: str,
    omega1: float,
    phi1: float = 0.0,
    delta_omega: float = 0.0,
) -> np.ndarray:
    """2x2 drive Hamiltonian (sigma/2).(w1 cos phi, w1 sin phi, dw), rad/s.

    Valid while omega1 and |delta_omega| stay well below the 4 pi d_over_h
    splitting that separates the two blocks.
    """
    if target not in TARGETS:
        raise ValueError(f"target must be one of {TARGETS}")
    off = 0.5 * omega1 * np.exp(-1j * phi1)
    return np.array(
        [[0.5 * delta_omega, off], [np.conj(off), -0.5 * delta_omega]],
        dtype=complex,
    )


def tone_signed_angular_freq(params: QuartetParams, tone: Tone) -> float:
    """Angular drive frequency with the circular sense of the tone's target.

    At zero static field the - transition frequency is negative (opposite
    rotation sense); a tone declared for the - qubit then co-rotates with
    it even though the synthesizer frequency is quoted positive.
    """
    omega0 = block_resonance_angular(params, tone.target)
    sense = -1.0 if omega0 < 0 else 1.0
    return sense * 2.0 * math.pi * tone.frequency


def rotating_frame_hamiltonian(
    params: QuartetParams,
    tones: list[Tone] | tuple[Tone, ...],
    detuning_common: float = 0.0,
    detuning_parity: float = 0.0,
    t: float = 0.0,
    freq_tolerance: float | None = None,
) -> np.ndarray:
    """Drive-frame Hamiltonian H'(t)/hbar of the quartet, rad/s.

    The frame is the interaction picture of the bare diagonal Hamiltonian
    (zero-field term plus static Zeeman term), so a resonant tone appears
    static inside its own block while its cross term in the other block
    oscillates at the block separation 4 pi * 2 * d_over_h. The transition
    between the two blocks (|+1/2> <-> |-1/2>) is excluded from the model.

    detuning_common adds delta*Sz (a magnetic shift, same sign in both
    blocks); detuning_parity adds an equal-magnitude opposite-sign block
    detuning (electric-field / zero-field-splitting shifts).

    Raises ValueError for tones farther than ``freq_tolerance`` (default
    d_over_h) from their target's resonance; such tones are not
    representable in this frame.
    """
    if freq_tolerance is None:
        freq_tolerance = params.d_over_h
    h = np.zeros((4, 4), dtype=complex)
    h += detuning_common * _SZ
    h += 0.5 * detuning_parity * PARITY_GENERATOR

    for tone in tones:
        omega_drive = tone_signed_angular_freq(params, tone)
        omega0_target = block_resonance_angular(params, tone.target)
        if abs(abs(omega_drive) - abs(omega0_target)) > 2.0 * math.pi * freq_tolerance:
            raise ValueError(
                f"tone at {tone.frequency:.6g} Hz is off-resonant from the "
                f"{tone.target} qubit by more than {freq_tolerance:.6g} Hz"
            )
        for target in TARGETS:
            omega0 = block_resonance_angular(params, target)
            residual = omega_drive - omega0
            row = 0 if target == "+" else 2
            elem = 0.5 * tone.rabi_angular_freq * np.exp(
                -1j * (residual * t + tone.phase)
            )
            h[row, row + 1] += elem
            h[row + 1, row] += np.conj(elem)
    return h
