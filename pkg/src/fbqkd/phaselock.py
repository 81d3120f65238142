"""Active phase-drift compensation.

The control interferometer records a fringe I(phi) = I0 * (3 - 4 cos(phi -
theta) + 2 cos(2 (phi - theta))) every lock cadence. The single-frequency
term pins theta modulo 2*pi (no pi ambiguity from the double-frequency
term); unwrapping against the previous estimate yields a continuous
trajectory, and the unwrapped value is added to Bob's X-basis analysis
phase, which cancels an equal rotation of the shared state.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from math import tau as TWO_PI

import numpy as np
from scipy.optimize import least_squares

from .errors import UnfittableDataError
from .photonics import fringe_intensity
from .rng import substream


@dataclass(frozen=True)
class FringeSample:
    phi: float
    intensity: float

    def __post_init__(self):
        if not 0.0 <= self.phi < TWO_PI:
            raise ValueError("phi must lie in [0, 2*pi)")
        if self.intensity < 0:
            raise ValueError("intensity must be >= 0")


@dataclass(frozen=True)
class LockState:
    """Tracked unwrapped phase plus fit diagnostics."""

    theta_unwrapped: float = 0.0
    last_fit_residual: float = 0.0
    cadence_s: float = 2.0
    initialized: bool = False

    def __post_init__(self):
        if self.cadence_s <= 0:
            raise ValueError("cadence_s must be positive")


def sweep_fringe(
    theta_true: float,
    n_points: int,
    noise_rel: float,
    seed: int,
    i0: float = 1.0,
) -> list[FringeSample]:
    """Sample one fringe sweep at uniform phases with multiplicative noise."""
    if n_points < 5:
        raise ValueError("need at least 5 sweep points")
    if not 0.0 <= noise_rel < 1.0:
        raise ValueError("noise_rel must lie in [0, 1)")
    rng = substream(seed, "fringe-sweep")
    phis = np.arange(n_points) * TWO_PI / n_points
    values = fringe_intensity(theta_true, phis, i0)
    if noise_rel > 0:
        values = values * (1.0 + noise_rel * rng.standard_normal(n_points))
    values = np.maximum(values, 0.0)
    return [FringeSample(float(p), float(v)) for p, v in zip(phis, values)]


def fit_theta(samples) -> tuple[float, float, float]:
    """Least-squares fit of the fringe model; returns (theta, i0, residual).

    theta is reduced to [0, 2*pi); residual is the RMS misfit over the mean
    intensity. Initialization comes from the first circular harmonic of the
    samples, which lands in the correct basin.
    """
    samples = list(samples)
    phis = np.array([s.phi for s in samples])
    vals = np.array([s.intensity for s in samples])
    if len(samples) < 5:
        raise UnfittableDataError("need at least 5 samples")
    if phis.max() - phis.min() < np.pi:
        raise UnfittableDataError("samples span less than half a period")
    mean = vals.mean()
    if mean <= 0 or np.ptp(vals) < 1e-12 * max(mean, 1.0):
        raise UnfittableDataError("samples are constant; fringe phase is undetermined")

    c_cos = 2.0 * np.mean(vals * np.cos(phis))
    c_sin = 2.0 * np.mean(vals * np.sin(phis))
    theta0 = float(np.arctan2(-c_sin, -c_cos))  # first harmonic is -4 I0 cos(phi - theta)
    i0_0 = max(vals.min(), mean / 3.0, 1e-12)

    def residuals(params):
        i0, theta = params
        return fringe_intensity(theta, phis, i0) - vals

    fit = least_squares(residuals, x0=[i0_0, theta0], method="lm", xtol=1e-15, ftol=1e-15)
    i0_hat, theta_hat = fit.x
    if i0_hat <= 0:
        raise UnfittableDataError("fit collapsed to nonpositive intensity scale")
    rms = float(np.sqrt(np.mean(fit.fun**2)))
    return float(theta_hat % TWO_PI), float(i0_hat), float(rms / mean)


def unwrap(previous: float, new_mod_2pi: float) -> float:
    """Lift a phase known modulo 2*pi to the branch nearest `previous`."""
    return new_mod_2pi + TWO_PI * np.round((previous - new_mod_2pi) / TWO_PI)


def control_step(lock: LockState, samples) -> tuple[LockState, float]:
    """Fit one sweep, unwrap against the lock state, emit the correction.

    The correction is the unwrapped phase estimate, to be added to Bob's
    X-basis analysis phase. On unfittable data the exception propagates and
    the caller keeps its previous state (LockState is immutable).
    """
    theta_mod, _, residual = fit_theta(samples)
    if lock.initialized:
        theta_cont = unwrap(lock.theta_unwrapped, theta_mod)
    else:
        theta_cont = theta_mod if theta_mod < np.pi else theta_mod - TWO_PI
    new_lock = replace(
        lock, theta_unwrapped=float(theta_cont), last_fit_residual=residual, initialized=True
    )
    return new_lock, float(theta_cont)
