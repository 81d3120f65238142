"""Fiber-spool model: attenuation, time of flight, thermal phase drift.

Temperature changes alter the optical path n*L through the thermo-optic
effect and thermal expansion. A path change dL maps to a relative phase
between frequency bins separated by dnu of 2*pi*dnu*dL/c, so the drift per
unit length and temperature is 2*pi*dnu*(alpha_to + n*alpha_exp).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import substream

SPEED_OF_LIGHT_M_S = 2.99792458e8
CM_PER_KM = 1e5


@dataclass(frozen=True)
class FiberSpool:
    """Single fiber spool in Bob's path.

    loss_per_km_db carries the bulk attenuation; excess_loss_db absorbs
    connector and splice losses of a specific spool assembly.
    """

    length_km: float = 0.0
    loss_per_km_db: float = 0.19
    excess_loss_db: float = 0.0
    group_index: float = 1.468
    thermo_optic_per_c: float = 1.1e-5
    expansion_per_c: float = 5e-7

    def __post_init__(self):
        if self.length_km < 0:
            raise ValueError("length_km must be >= 0")
        if self.loss_per_km_db < 0 or self.excess_loss_db < 0:
            raise ValueError("losses must be >= 0")
        if not 1.3 <= self.group_index <= 1.6:
            raise ValueError(f"group_index {self.group_index} outside [1.3, 1.6]")


def spool_transmission(spool: FiberSpool) -> float:
    """Linear power transmission of the spool, in (0, 1]."""
    total_db = spool.loss_per_km_db * spool.length_km + spool.excess_loss_db
    return 10.0 ** (-total_db / 10.0)


def optical_path_shift(spool: FiberSpool, delta_t_c: float) -> float:
    """Effective optical-path change in cm for a temperature change in C."""
    per_km_per_c = (spool.thermo_optic_per_c + spool.group_index * spool.expansion_per_c) * CM_PER_KM
    return per_km_per_c * spool.length_km * delta_t_c


def phase_from_path(delta_l_eff_cm: float, bin_spacing_hz: float) -> float:
    """Relative phase between frequency bins for an optical-path change."""
    if bin_spacing_hz <= 0:
        raise ValueError("bin_spacing_hz must be positive")
    c_cm_s = SPEED_OF_LIGHT_M_S * 100.0
    return 2.0 * np.pi * bin_spacing_hz * delta_l_eff_cm / c_cm_s


def phase_drift_slope(spool: FiberSpool, bin_spacing_hz: float) -> float:
    """Phase drift per unit length and temperature, deg / (km * C)."""
    unit_spool_path_cm = optical_path_shift(
        FiberSpool(
            length_km=1.0,
            group_index=spool.group_index,
            thermo_optic_per_c=spool.thermo_optic_per_c,
            expansion_per_c=spool.expansion_per_c,
        ),
        1.0,
    )
    return np.degrees(phase_from_path(unit_spool_path_cm, bin_spacing_hz))


def time_of_flight(spool: FiberSpool, passes: int) -> float:
    """Propagation time in seconds for the given number of passes."""
    if passes < 1:
        raise ValueError("passes must be >= 1")
    return passes * spool.group_index * spool.length_km * 1e3 / SPEED_OF_LIGHT_M_S


@dataclass
class TemperatureProcess:
    """Mean-reverting random walk of the ambient temperature.

    Calibrated so that, starting from `initial_c`, the mean absolute change
    over 600 s equals step_rms_per_600s. The mean reversion (correlation
    time ~30 min) keeps long runs bounded. Instances hold RNG state and are
    single-owner; use :func:`temperature_step` or :meth:`trajectory`.
    """

    initial_c: float = 22.0
    step_rms_per_600s: float = 0.03
    correlation_time_s: float = 1800.0
    seed: int = 0
    _offset_c: float = field(default=0.0, repr=False, compare=False)
    _rng: np.random.Generator = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.step_rms_per_600s < 0:
            raise ValueError("step_rms_per_600s must be >= 0")
        if self.correlation_time_s <= 0:
            raise ValueError("correlation_time_s must be positive")
        if self._rng is None:
            self._rng = substream(self.seed, "temperature")

    @property
    def current_c(self) -> float:
        return self.initial_c + self._offset_c

    def _stationary_sigma(self) -> float:
        # E|dT(600 s)| from a cold start: dT ~ N(0, sigma^2 (1 - e^{-1200/tau}))
        spread = 1.0 - np.exp(-2.0 * 600.0 / self.correlation_time_s)
        sigma_delta = self.step_rms_per_600s / np.sqrt(2.0 / np.pi)
        return sigma_delta / np.sqrt(spread)

    def step(self, dt_s: float) -> float:
        """Advance by dt_s; return the temperature increment in C."""
        if dt_s <= 0:
            raise ValueError("dt_s must be positive")
        decay = np.exp(-dt_s / self.correlation_time_s)
        sigma = self._stationary_sigma()
        noise = sigma * np.sqrt(1.0 - decay**2) * self._rng.standard_normal()
        new_offset = self._offset_c * decay + noise
        increment = new_offset - self._offset_c
        self._offset_c = new_offset
        return increment

    def trajectory(self, duration_s: float, dt_s: float) -> tuple[np.ndarray, np.ndarray]:
        """Sampled temperature trace (times, temps) including t = 0."""
        n = int(round(duration_s / dt_s))
        times = np.arange(n + 1) * dt_s
        temps = np.empty(n + 1)
        temps[0] = self.current_c
        for i in range(1, n + 1):
            self.step(dt_s)
            temps[i] = self.current_c
        return times, temps


def temperature_step(proc: TemperatureProcess, dt_s: float) -> float:
    """Advance the process by dt_s and return the increment in C."""
    return proc.step(dt_s)


@dataclass
class TemperatureRamp:
    """Deterministic linear temperature drift, for worst-case drift studies."""

    initial_c: float = 22.0
    rate_c_per_600s: float = 0.03
    _elapsed_s: float = field(default=0.0, repr=False)

    @property
    def current_c(self) -> float:
        return self.initial_c + self.rate_c_per_600s * self._elapsed_s / 600.0

    def step(self, dt_s: float) -> float:
        before = self.current_c
        self._elapsed_s += dt_s
        return self.current_c - before

    def trajectory(self, duration_s: float, dt_s: float) -> tuple[np.ndarray, np.ndarray]:
        n = int(round(duration_s / dt_s))
        times = self._elapsed_s + np.arange(n + 1) * dt_s
        temps = self.initial_c + self.rate_c_per_600s * times / 600.0
        self._elapsed_s += n * dt_s
        return times, temps
