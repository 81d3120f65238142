"""Scenario runners tying the link model together.

Each runner is a pure function of (config, arguments): all randomness
flows from the config's root seed through named substreams, so reruns are
bit-identical. Runners return plain result objects; the CLI serializes
them to CSV and JSON.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from math import tau as TWO_PI
from pathlib import Path

import numpy as np

from . import qstate, tomography
from .channel import TemperatureProcess, TemperatureRamp, phase_drift_slope
from .coincidence import CoincidenceSet, find_coincidences
from .config import LinkConfig, spool_for_length
from .detection import iter_stream_segments, read_streams_binary, read_streams_csv
from .errors import InsufficientDataError
from .keyproc import SkrParams, qber, sift, skr_lower_bound
from .model import predict
from .phaselock import LockState, control_step, sweep_fringe
from .rng import substream


def drift_slope_rad_per_km_c(link: LinkConfig) -> float:
    """Phase drift slope in rad/(km C), honoring the config override."""
    if link.drift_slope_deg_per_km_c is not None:
        return float(np.radians(link.drift_slope_deg_per_km_c))
    return float(np.radians(phase_drift_slope(link.spool, link.modulator.bin_spacing_hz)))


def make_temperature(link: LinkConfig, mode: str, ramp_c_per_600s: float, seed: int):
    if mode == "ou":
        return TemperatureProcess(
            initial_c=link.temperature.initial_c,
            step_rms_per_600s=link.temperature.step_rms_per_600s,
            correlation_time_s=link.temperature.correlation_time_s,
            seed=seed,
        )
    if mode == "ramp":
        return TemperatureRamp(initial_c=link.temperature.initial_c, rate_c_per_600s=ramp_c_per_600s)
    raise ValueError(f"unknown temperature mode {mode!r}")


@dataclass
class LockTrace:
    time_s: np.ndarray
    theta_fit_rad: np.ndarray
    theta_unwrapped_rad: np.ndarray
    correction_rad: np.ndarray
    residual: np.ndarray

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time_s", "theta_fit_rad", "theta_unwrapped_rad", "correction_rad", "residual"])
            for row in zip(self.time_s, self.theta_fit_rad, self.theta_unwrapped_rad, self.correction_rad, self.residual):
                writer.writerow([repr(float(v)) for v in row])


@dataclass
class PhasePlan:
    """State phase trajectory and the piecewise-constant applied correction."""

    grid_s: np.ndarray
    theta_state: np.ndarray
    lock_times_s: np.ndarray
    corrections: np.ndarray
    trace: LockTrace | None

    def theta_net(self, t_s: np.ndarray) -> np.ndarray:
        theta = np.interp(t_s, self.grid_s, self.theta_state)
        if len(self.lock_times_s):
            idx = np.clip(np.searchsorted(self.lock_times_s, t_s, side="right") - 1, 0, None)
            theta = theta - self.corrections[idx]
        return theta


def plan_phase(
    link: LinkConfig,
    duration_s: float,
    locked: bool,
    temperature_mode: str = "ou",
    ramp_c_per_600s: float = 0.03,
    seed: int | None = None,
    grid_dt_s: float = 0.5,
) -> PhasePlan:
    """Build the state phase trajectory and, when locked, track it."""
    seed = link.seed if seed is None else seed
    process = make_temperature(link, temperature_mode, ramp_c_per_600s, seed)
    times, temps = process.trajectory(duration_s, grid_dt_s)
    slope = drift_slope_rad_per_km_c(link)
    theta_state = slope * link.spool.length_km * (temps - temps[0])

    if not locked:
        return PhasePlan(times, theta_state, np.empty(0), np.empty(0), None)

    cadence = link.lock.cadence_s
    n_steps = max(1, int(np.floor(duration_s / cadence)) + 1)
    lock_times = np.arange(n_steps) * cadence
    lock = LockState(cadence_s=cadence)
    fits = np.empty(n_steps)
    unwrapped = np.empty(n_steps)
    corrections = np.empty(n_steps)
    residuals = np.empty(n_steps)
    seed_rng = substream(seed, "lock-sweep-seeds")
    for k, t_k in enumerate(lock_times):
        theta_k = float(np.interp(t_k, times, theta_state)) * link.lock.proxy_factor
        samples = sweep_fringe(
            theta_k,
            link.lock.sweep_points,
            link.lock.sweep_noise_rel,
            seed=int(seed_rng.integers(2**62)),
        )
        lock, correction = control_step(lock, samples)
        fits[k] = lock.theta_unwrapped % TWO_PI
        unwrapped[k] = lock.theta_unwrapped
        corrections[k] = correction
        residuals[k] = lock.last_fit_residual
    trace = LockTrace(lock_times, fits, unwrapped, corrections, residuals)
    return PhasePlan(times, theta_state, lock_times, corrections, trace)


@dataclass
class WindowedRun:
    """Windowed error-rate series plus run totals for one link scenario."""

    fiber_km: float
    locked: bool
    duration_s: float
    window_s: float
    window_centers_s: np.ndarray
    eps_z: np.ndarray
    se_z: np.ndarray
    eps_x: np.ndarray
    se_x: np.ndarray
    n_z: np.ndarray
    n_x: np.ndarray
    fidelity: np.ndarray
    outcome_counts: np.ndarray  # (n_windows, 4, 4)
    total_eps_z: float
    total_se_z: float
    total_eps_x: float
    total_se_x: float
    sift_ratio: float
    n_sifted: int
    n_events: int
    skr_bps: float
    lock_trace: LockTrace | None

    def write_timeseries_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time_s", "eps_z", "se_z", "eps_x", "se_x", "n_z", "n_x", "fidelity"])
            for i in range(len(self.window_centers_s)):
                writer.writerow(
                    [
                        repr(float(self.window_centers_s[i])),
                        repr(float(self.eps_z[i])),
                        repr(float(self.se_z[i])),
                        repr(float(self.eps_x[i])),
                        repr(float(self.se_x[i])),
                        int(self.n_z[i]),
                        int(self.n_x[i]),
                        repr(float(self.fidelity[i])),
                    ]
                )


def run_qber_vs_time(
    link: LinkConfig,
    duration_s: float,
    locked: bool = True,
    window_s: float = 20.0,
    temperature_mode: str = "ou",
    ramp_c_per_600s: float = 0.03,
    seed: int | None = None,
) -> WindowedRun:
    """Simulate one link and report windowed error rates over time."""
    seed = link.seed if seed is None else seed
    plan = plan_phase(link, duration_s, locked, temperature_mode, ramp_c_per_600s, seed)

    n_windows = max(1, int(np.ceil(duration_s / window_s - 1e-9)))
    counts = np.zeros((n_windows, 16), dtype=np.int64)
    for _, _, streams in iter_stream_segments(link, duration_s, plan.theta_net, seed):
        events = find_coincidences(streams, link.window_ps, link.delays)
        if not len(events):
            continue
        win = np.clip((events.alice_time_ps * 1e-12 / window_s).astype(np.int64), 0, n_windows - 1)
        np.add.at(counts, (win, events.outcome_idx.astype(np.intp)), 1)

    per_window = counts.reshape(n_windows, 4, 4)
    ideal = qstate.ideal_correlation_matrix()
    centers = (np.arange(n_windows) + 0.5) * window_s
    eps_z = np.full(n_windows, np.nan)
    se_z = np.full(n_windows, np.nan)
    eps_x = np.full(n_windows, np.nan)
    se_x = np.full(n_windows, np.nan)
    fidelity = np.full(n_windows, np.nan)
    n_z = np.zeros(n_windows, dtype=np.int64)
    n_x = np.zeros(n_windows, dtype=np.int64)
    for i in range(n_windows):
        block = per_window[i]
        zz = block[2:4, 2:4]
        xx = block[0:2, 0:2]
        n_z[i] = zz.sum()
        n_x[i] = xx.sum()
        if n_z[i]:
            e = (zz[0, 1] + zz[1, 0]) / n_z[i]
            eps_z[i], se_z[i] = e, np.sqrt(e * (1 - e) / n_z[i])
        if n_x[i]:
            e = (xx[0, 1] + xx[1, 0]) / n_x[i]
            eps_x[i], se_x[i] = e, np.sqrt(e * (1 - e) / n_x[i])
        try:
            fidelity[i] = qstate.correlation_fidelity(qstate.normalize_counts_to_correlation(block), ideal)
        except (InsufficientDataError, ValueError):
            fidelity[i] = np.nan

    total = per_window.sum(axis=0)
    n_events = int(total.sum())
    zz, xx = total[2:4, 2:4], total[0:2, 0:2]
    n_sifted = int(zz.sum() + xx.sum())
    sift_ratio = n_sifted / n_events if n_events else 0.0
    tot_eps_z = (zz[0, 1] + zz[1, 0]) / zz.sum() if zz.sum() else np.nan
    tot_eps_x = (xx[0, 1] + xx[1, 0]) / xx.sum() if xx.sum() else np.nan
    tot_se_z = np.sqrt(tot_eps_z * (1 - tot_eps_z) / zz.sum()) if zz.sum() else np.nan
    tot_se_x = np.sqrt(tot_eps_x * (1 - tot_eps_x) / xx.sum()) if xx.sum() else np.nan
    if n_events and np.isfinite(tot_eps_z) and np.isfinite(tot_eps_x):
        params = SkrParams(
            f=link.skr.f,
            sifting_ratio=sift_ratio,
            qubit_rate_hz=n_events / duration_s,
            alpha=1.0,
            eta=1.0,
        )
        skr = skr_lower_bound(min(tot_eps_z, 0.5), min(tot_eps_x, 0.5), params)
    else:
        skr = 0.0

    return WindowedRun(
        fiber_km=link.spool.length_km,
        locked=locked,
        duration_s=duration_s,
        window_s=window_s,
        window_centers_s=centers,
        eps_z=eps_z,
        se_z=se_z,
        eps_x=eps_x,
        se_x=se_x,
        n_z=n_z,
        n_x=n_x,
        fidelity=fidelity,
        outcome_counts=per_window,
        total_eps_z=float(tot_eps_z),
        total_se_z=float(tot_se_z),
        total_eps_x=float(tot_eps_x),
        total_se_x=float(tot_se_x),
        sift_ratio=float(sift_ratio),
        n_sifted=n_sifted,
        n_events=n_events,
        skr_bps=float(skr),
        lock_trace=plan.trace,
    )


@dataclass
class DistanceScan:
    lengths_km: list
    runs: list  # WindowedRun per length
    model_skr_bps: list
    model_eps_z: list
    model_eps_x: list

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["fiber_km", "eps_z", "eps_x", "skr_bps", "n_sifted"])
            for run in self.runs:
                writer.writerow(
                    [
                        repr(float(run.fiber_km)),
                        repr(run.total_eps_z),
                        repr(run.total_eps_x),
                        repr(run.skr_bps),
                        run.n_sifted,
                    ]
                )

    def write_model_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["fiber_km", "skr_bps_model", "eps_z_model", "eps_x_model"])
            for km, skr, ez, ex in zip(self.lengths_km, self.model_skr_bps, self.model_eps_z, self.model_eps_x):
                writer.writerow([repr(float(km)), repr(float(skr)), repr(float(ez)), repr(float(ex))])


def run_skr_vs_distance(
    link: LinkConfig,
    lengths_km,
    duration_s: float,
    seed: int | None = None,
    durations_s: dict | None = None,
) -> DistanceScan:
    """Locked transmission runs over a list of spool lengths, with the
    analytic model curve for overlay. `durations_s` can extend specific
    lengths for better statistics."""
    runs, skr_model, ez_model, ex_model = [], [], [], []
    for km in lengths_km:
        link_l = replace(link, spool=spool_for_length(km, link.spool))
        dur = (durations_s or {}).get(km, duration_s)
        runs.append(run_qber_vs_time(link_l, dur, locked=True, window_s=dur, seed=seed))
        pred = predict(link_l)
        skr_model.append(pred.skr_bps)
        ez_model.append(pred.eps_z)
        ex_model.append(pred.eps_x)
    return DistanceScan(list(lengths_km), runs, skr_model, ez_model, ex_model)


@dataclass
class TomographyRun:
    rho: np.ndarray
    fidelity: float
    records: list
    iterations: int

    def fidelity_report(self) -> dict:
        return {"fidelity_to_target": self.fidelity, "iterations": self.iterations}


def run_tomography(link: LinkConfig, shots: int, seed: int | None = None) -> TomographyRun:
    """Simulate the full projector set on the calibrated state and reconstruct."""
    seed = link.seed if seed is None else seed
    state = qstate.noisy_state(link.noise.p_werner, 0.0)
    records = tomography.simulate_counts(state, shots, seed=seed)
    rho, info = tomography.mle_reconstruct(records, full_output=True)
    fid = qstate.fidelity_to_pure(rho, qstate.PSI_PLUS_KET)
    return TomographyRun(rho=rho, fidelity=fid, records=records, iterations=info["iterations"])


@dataclass
class FringeDemo:
    theta_true: list
    theta_fit: list
    i0_fit: list
    residuals: list
    samples: list

    def write_csv(self, samples_path, fits_path) -> None:
        with open(samples_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["entry", "phi_rad", "intensity"])
            for i, entry in enumerate(self.samples):
                for s in entry:
                    writer.writerow([i, repr(float(s.phi)), repr(float(s.intensity))])
        with open(fits_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["entry", "theta_true_rad", "theta_fit_rad", "i0_fit", "residual"])
            for i in range(len(self.theta_true)):
                writer.writerow(
                    [
                        i,
                        repr(float(self.theta_true[i])),
                        repr(float(self.theta_fit[i])),
                        repr(float(self.i0_fit[i])),
                        repr(float(self.residuals[i])),
                    ]
                )


def run_fringe_demo(link: LinkConfig, theta_list, seed: int | None = None) -> FringeDemo:
    from .phaselock import fit_theta

    seed = link.seed if seed is None else seed
    seed_rng = substream(seed, "fringe-demo")
    demo = FringeDemo([], [], [], [], [])
    for theta in theta_list:
        samples = sweep_fringe(
            float(theta),
            link.lock.sweep_points,
            link.lock.sweep_noise_rel,
            seed=int(seed_rng.integers(2**62)),
        )
        theta_hat, i0_hat, residual = fit_theta(samples)
        demo.theta_true.append(float(theta))
        demo.theta_fit.append(theta_hat)
        demo.i0_fit.append(i0_hat)
        demo.residuals.append(residual)
        demo.samples.append(samples)
    return demo


def decode_file(path, link: LinkConfig) -> CoincidenceSet:
    """Offline decode of a serialized timestamp file (.bin or .csv)."""
    path = Path(path)
    if path.suffix == ".csv":
        streams = read_streams_csv(path)
    else:
        streams = read_streams_binary(path)
    return find_coincidences(streams, link.window_ps, link.delays)
