"""Optical initialization, spin-dependent readout and detection noise.

The full optical pumping cycle is collapsed into two facts: a non-resonant
laser pulse polarizes the spin into |+1/2> or |-1/2> with equal
probability, and fluorescence is stronger (by the contrast coefficient
chi) when population sits in the outer |+-3/2> levels. Detection noise is
additive Gaussian on the contrast signal, set by the detection chain and
therefore identical across drive modes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ReadoutModel:
    """chi: relative fluorescence gain of the |+-3/2> levels.
    sigma_f_1s: std of the contrast signal for 1 s integration."""

    chi: float = 0.014
    sigma_f_1s: float = 0.0014

    def __post_init__(self) -> None:
        if self.chi < 0:
            raise ValueError("chi must be non-negative")
        if self.sigma_f_1s < 0:
            raise ValueError("sigma_f_1s must be non-negative")


def initialize() -> np.ndarray:
    """State after the non-resonant init laser: equal |+-1/2> populations,
    zero coherence."""
    return np.diag([0.0, 0.5, 0.5, 0.0]).astype(complex)


def fluorescence(rho: np.ndarray, model: ReadoutModel) -> float:
    """Relative readout intensity 1 + chi * (p(+3/2) + p(-3/2)).

    Linear in the populations; coherences do not contribute.
    """
    bright = (rho[0, 0] + rho[3, 3]).real
    return 1.0 + model.chi * bright


def contrast_trace(intensities: np.ndarray) -> np.ndarray:
    """Relative contrast (I - mean(I)) / mean(I) of an intensity series."""
    values = np.asarray(intensities, dtype=float)
    if values.size == 0:
        raise ValueError("intensity series is empty")
    mean = values.mean()
    if mean <= 0:
        raise ValueError("mean intensity must be positive")
    return (values - mean) / mean


def complementary_signal(i_a, i_b):
    """Complementary-readout signal F = 2 (Ia - Ib) / (Ia + Ib)."""
    i_a = np.asarray(i_a, dtype=float)
    i_b = np.asarray(i_b, dtype=float)
    total = i_a + i_b
    if np.any(total <= 0):
        raise ValueError("Ia + Ib must be positive")
    out = 2.0 * (i_a - i_b) / total
    return float(out) if out.ndim == 0 else out


def add_readout_noise(
    signal,
    model: ReadoutModel,
    integration_time: float,
    seed: int | None = None,
):
    """Add i.i.d. Gaussian noise of std sigma_f_1s / sqrt(T) to a signal."""
    if integration_time <= 0:
        raise ValueError("integration_time must be positive")
    values = np.asarray(signal, dtype=float)
    rng = np.random.default_rng(seed)
    sigma = model.sigma_f_1s / math.sqrt(integration_time)
    noisy = values + sigma * rng.standard_normal(values.shape)
    return float(noisy) if noisy.ndim == 0 else noisy


__all__ = [
    "ReadoutModel",
    "add_readout_noise",
    "complementary_signal",
    "contrast_trace",
    "fluorescence",
    "initialize",
]
