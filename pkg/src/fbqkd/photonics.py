"""Parametric models of the photon-pair source and electro-optic comb.

The pair source is a microring pumped per comb line; its rate follows the
quadratic law a*P^2 rolled off by two-photon/free-carrier absorption. The
phase modulators are described by their Bessel sideband weights, and the
three-tone control interferometer by the closed-form fringe

    I(theta, phi) = I0 * (3 - 4 cos(phi - theta) + 2 cos(2 (phi - theta)))

whose minimum I0 sits at phi = theta. The closed form assumes three equal
comb lines; :func:`exact_bessel_fringe` keeps the full sideband ladder and
is what the higher-fidelity forward model uses.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import jv


@dataclass(frozen=True)
class SourceConfig:
    """Photon-pair source parameters.

    brightness_hz_per_mw2 is the on-chip pair rate coefficient of the
    quadratic fit; pump_power_mw is the power per pump comb line;
    saturation_power_mw sets the absorption roll-off; car_target records
    the coincidence-to-accidental ratio the background calibration aims at.
    """

    brightness_hz_per_mw2: float = 27e6
    pump_power_mw: float = 0.4
    saturation_power_mw: float = 0.17590
    car_target: float = 20.0

    def __post_init__(self):
        for name in ("brightness_hz_per_mw2", "pump_power_mw", "saturation_power_mw", "car_target"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class ModulatorConfig:
    """Electro-optic phase modulator drive parameters."""

    modulation_index: float = 1.4
    bin_spacing_hz: float = 15e9
    rf_phase: float = 0.0

    def __post_init__(self):
        if self.modulation_index < 0:
            raise ValueError("modulation_index must be >= 0")
        if self.bin_spacing_hz <= 0:
            raise ValueError("bin_spacing_hz must be positive")


def pair_rate(cfg: SourceConfig) -> float:
    """On-chip pair generation rate in Hz at the configured pump power.

    a*P^2 / (1 + (P/P_sat)^2); reduces to the quadratic law well below the
    saturation power.
    """
    p = cfg.pump_power_mw
    quadratic = cfg.brightness_hz_per_mw2 * p * p
    return quadratic / (1.0 + (p / cfg.saturation_power_mw) ** 2)


def eom_sidebands(cfg: ModulatorConfig, max_order: int) -> np.ndarray:
    """Complex sideband amplitudes J_k(delta) e^{i k phi} for |k| <= max_order.

    Index 0 of the returned array is order -max_order. Total power converges
    to 1 as max_order grows.
    """
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    orders = np.arange(-max_order, max_order + 1)
    return jv(orders, cfg.modulation_index) * np.exp(1j * orders * cfg.rf_phase)


def fringe_intensity(theta: float, phi: float | np.ndarray, i0: float) -> float | np.ndarray:
    """Three-tone interferometer fringe with offset theta and minimum i0."""
    if i0 < 0:
        raise ValueError("i0 must be >= 0")
    x = np.asarray(phi) - theta
    return i0 * (3.0 - 4.0 * np.cos(x) + 2.0 * np.cos(2.0 * x))


def exact_bessel_fringe(
    modulation_index: float, theta: float, phi: float | np.ndarray, max_order: int = 25
) -> float | np.ndarray:
    """Baseband fringe keeping the full sideband ladder.

    Amplitude sum_k J_k J_{-k} e^{i k (phi - theta)}, returned as intensity.
    Even in (phi - theta), so fits of the three-tone closed form to this
    shape recover theta without bias.
    """
    k = np.arange(-max_order, max_order + 1)
    weights = jv(k, modulation_index) * jv(-k, modulation_index)
    x = np.atleast_1d(np.asarray(phi, dtype=float)) - theta
    amp = (weights * np.exp(1j * np.outer(x, k))).sum(axis=1)
    intensity = np.abs(amp) ** 2
    return intensity if np.ndim(phi) else float(intensity[0])


def accidental_rate(singles_a_hz: float, singles_b_hz: float, window_s: float) -> float:
    """Uncorrelated coincidence rate of two Poissonian click streams."""
    if singles_a_hz < 0 or singles_b_hz < 0 or window_s < 0:
        raise ValueError("rates and window must be nonnegative")
    return singles_a_hz * singles_b_hz * window_s
