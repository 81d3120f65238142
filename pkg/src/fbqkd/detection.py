"""Monte-Carlo generation of time-tagged detection streams.

Six detectors serve sixteen joint projective outcomes. Alice's detectors
are D1 (X+), D2 (X- and Z0) and D3 (Z1); Bob's are D4 (X+), D5 (X- and Z0)
and D6 (Z1). Detectors shared between bases are disambiguated by fiber
delays inserted after passive basis selection: Alice's Z path is delayed by
tau, Bob's Z path by 2*tau, so the relative arrival time (Bob minus Alice)
identifies the basis pair: XX -> 0, XZ -> 2*tau, ZX -> -tau, ZZ -> tau.

Rather than tracking every emitted pair, the simulator draws the detected
processes directly: true coincidences are a thinned Poisson process whose
intensity follows the phase trajectory, and unpaired photon, background and
dark clicks are homogeneous Poisson processes at their analytic rates.
Streams are generated in fixed 20 s segments, each from its own named RNG
substream, so long runs can be processed incrementally and results do not
depend on how segments are dispatched.

Bob's timestamps are referenced after receiver-side offset calibration:
the constant spool time of flight is removed, leaving only the decode
delays of the table above.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .channel import FiberSpool, spool_transmission
from .errors import ConfigError
from .rng import substream

DETECTOR_IDS = ("D1", "D2", "D3", "D4", "D5", "D6")
ALICE_DETECTORS = ("D1", "D2", "D3")
BOB_DETECTORS = ("D4", "D5", "D6")

#: Single-party outcome symbols, in correlation-matrix order.
PARTY_SYMBOLS = ("+", "-", "0", "1")

ALICE_DETECTOR_FOR = {"+": "D1", "-": "D2", "0": "D2", "1": "D3"}
BOB_DETECTOR_FOR = {"+": "D4", "-": "D5", "0": "D5", "1": "D6"}

#: All sixteen joint outcomes (Alice symbol first), correlation-matrix order.
OUTCOMES = tuple(a + b for a in PARTY_SYMBOLS for b in PARTY_SYMBOLS)
OUTCOME_INDEX = {o: i for i, o in enumerate(OUTCOMES)}


def basis_of(symbol: str) -> str:
    return "X" if symbol in "+-" else "Z"


def _alice_path_delay(tau_ps: int, symbol: str) -> int:
    return tau_ps if basis_of(symbol) == "Z" else 0


def _bob_path_delay(tau_ps: int, symbol: str) -> int:
    return 2 * tau_ps if basis_of(symbol) == "Z" else 0


@dataclass(frozen=True)
class DelayMap:
    """Decode table mapping outcomes to detector pairs and relative delays."""

    tau_ps: int = 10_000

    def __post_init__(self):
        if self.tau_ps <= 0:
            raise ConfigError("tau_ps must be positive")

    def detector_pair(self, outcome: str) -> tuple[str, str]:
        a, b = outcome
        return ALICE_DETECTOR_FOR[a], BOB_DETECTOR_FOR[b]

    def delay_ps(self, outcome: str) -> int:
        a, b = outcome
        return _bob_path_delay(self.tau_ps, b) - _alice_path_delay(self.tau_ps, a)

    def entries(self) -> list[tuple[str, str, str, int]]:
        """(alice_det, bob_det, outcome, delay_ps) for all sixteen outcomes."""
        rows = []
        for outcome in OUTCOMES:
            da, db = self.detector_pair(outcome)
            rows.append((da, db, outcome, self.delay_ps(outcome)))
        return rows

    def decode_table(self) -> dict[tuple[str, str], list[tuple[int, str]]]:
        """Per detector pair, the list of (delay, outcome) decode keys."""
        table: dict[tuple[str, str], list[tuple[int, str]]] = {}
        for da, db, outcome, delay in self.entries():
            table.setdefault((da, db), []).append((delay, outcome))
        return table


def delay_for(outcome: str, delay_map: DelayMap | None = None) -> int:
    """Relative arrival time (Bob minus Alice) of one joint outcome, in ps."""
    if outcome not in OUTCOME_INDEX:
        raise ValueError(f"unknown outcome {outcome!r}")
    return (delay_map or DelayMap()).delay_ps(outcome)


@dataclass(frozen=True)
class DetectorConfig:
    """Per-detector properties.

    The default loss table already folds detection efficiency into the
    per-projector path losses, so `efficiency` defaults to 1.0; set it
    below 1 only with a loss table that excludes it.
    """

    id: str
    efficiency: float = 1.0
    dark_rate_hz: float = 120.0
    jitter_sigma_ps: float = 35.0

    def __post_init__(self):
        if self.id not in DETECTOR_IDS:
            raise ConfigError(f"unknown detector id {self.id!r}")
        if not 0.0 <= self.efficiency <= 1.0:
            raise ConfigError("efficiency must be in [0, 1]")
        if self.dark_rate_hz < 0 or self.jitter_sigma_ps < 0:
            raise ConfigError("dark rate and jitter must be >= 0")


def default_detectors() -> dict[str, DetectorConfig]:
    return {did: DetectorConfig(id=did) for did in DETECTOR_IDS}


@dataclass(frozen=True)
class PathLossTable:
    """Receiver losses in dB per single-party projector, detector included.

    Measured from the chip output to a click; the fiber spool in Bob's path
    is accounted separately.
    """

    alice_db: dict = field(
        default_factory=lambda: {"+": 13.0, "-": 13.9, "0": 8.4, "1": 9.1}
    )
    bob_db: dict = field(
        default_factory=lambda: {"+": 22.5, "-": 21.7, "0": 16.7, "1": 16.6}
    )

    def __post_init__(self):
        for table, lo, hi, party in ((self.alice_db, 8.0, 14.0, "alice"), (self.bob_db, 16.0, 23.0, "bob")):
            if set(table) != set(PARTY_SYMBOLS):
                raise ConfigError(f"{party} loss table must cover projectors {PARTY_SYMBOLS}")
            for proj, db in table.items():
                if not lo <= db <= hi:
                    raise ConfigError(f"{party} loss {db} dB for {proj!r} outside [{lo}, {hi}]")

    def db_for(self, party: str, projector: str) -> float:
        table = {"alice": self.alice_db, "bob": self.bob_db}.get(party)
        if table is None or projector not in table:
            raise ValueError(f"unknown projector {party}/{projector}")
        return table[projector]


def path_transmission(
    table: PathLossTable, party: str, projector: str, spool: FiberSpool | None = None
) -> float:
    """Linear survival probability of one projector path.

    Bob's projectors are additionally attenuated by the spool when given.
    """
    trans = 10.0 ** (-table.db_for(party, projector) / 10.0)
    if party == "bob" and spool is not None:
        trans *= spool_transmission(spool)
    return trans


@dataclass(frozen=True)
class BackgroundConfig:
    """Uncorrelated background photon fluxes.

    alice_arm_hz and bob_arm_hz co-propagate with the photons (Bob's share
    passes the spool); bob_receiver_hz enters Bob's receiver downstream of
    the spool. All are referenced before the projector paths and carry a
    random frequency-bin content, so they split evenly over the four
    projectors of the arm.
    """

    alice_arm_hz: float = 0.0
    bob_arm_hz: float = 0.0
    bob_receiver_hz: float = 0.0

    def __post_init__(self):
        for name in ("alice_arm_hz", "bob_arm_hz", "bob_receiver_hz"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")


@dataclass(frozen=True)
class NoiseConfig:
    """State and receiver noise: isotropic mixing plus Bob's X-flip error."""

    p_werner: float = 0.9213
    x_flip_prob: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.p_werner <= 1.0:
            raise ConfigError("p_werner must be in [0, 1]")
        if not 0.0 <= self.x_flip_prob <= 0.5:
            raise ConfigError("x_flip_prob must be in [0, 0.5]")


SEGMENT_SECONDS = 20.0


def _transmissions(link) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(alice, bob_with_spool, bob_path_only) per projector symbol order."""
    t_a = np.array(
        [
            path_transmission(link.losses, "alice", s)
            * link.detectors[ALICE_DETECTOR_FOR[s]].efficiency
            for s in PARTY_SYMBOLS
        ]
    )
    t_b_path = np.array(
        [
            path_transmission(link.losses, "bob", s)
            * link.detectors[BOB_DETECTOR_FOR[s]].efficiency
            for s in PARTY_SYMBOLS
        ]
    )
    alpha = spool_transmission(link.spool)
    return t_a, t_b_path * alpha, t_b_path


def outcome_rate_coefficients(link, pair_rate_hz: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-outcome detected-coincidence intensity, as (constant, cos-theta) parts.

    lambda_o(t) = const_o + cos_o * cos(theta(t)). Only the four XX outcomes
    carry a cosine part.
    """
    t_a, t_b, _ = _transmissions(link)
    p = link.noise.p_werner
    v_eff = p * (1.0 - 2.0 * link.noise.x_flip_prob)
    const = np.zeros(16)
    cosine = np.zeros(16)
    for idx, outcome in enumerate(OUTCOMES):
        a, b = outcome
        ia, ib = PARTY_SYMBOLS.index(a), PARTY_SYMBOLS.index(b)
        t_prod = t_a[ia] * t_b[ib]
        scale = pair_rate_hz * t_prod / 16.0  # 1/4 routing x 1/4 base probability
        ba, bb = basis_of(a), basis_of(b)
        if ba == "Z" and bb == "Z":
            sign = 1.0 if a == b else -1.0
            const[idx] = scale * (1.0 + sign * p)
        elif ba == "X" and bb == "X":
            sign = 1.0 if a == b else -1.0
            const[idx] = scale
            cosine[idx] = scale * sign * v_eff
        else:
            const[idx] = scale
    return const, cosine


def singles_rates(link, pair_rate_hz: float) -> tuple[np.ndarray, np.ndarray]:
    """Unpaired-click rates per projector for (Alice, Bob), photons plus background.

    Pair photons whose partner is lost contribute at rate
    R/4 * T(p) * (1 - E[T_partner | p]); background fluxes split evenly
    over the arm's four projector paths.
    """
    t_a, t_b, t_b_path = _transmissions(link)
    p = link.noise.p_werner
    # conditional mean partner transmission; XX cosine terms average out
    cond_b = np.empty(4)
    cond_a = np.empty(4)
    for i, sym in enumerate(PARTY_SYMBOLS):
        if basis_of(sym) == "Z":
            same = PARTY_SYMBOLS.index(sym)
            other = PARTY_SYMBOLS.index("1" if sym == "0" else "0")
            z_mean_b = 0.5 * ((1 + p) * t_b[same] + (1 - p) * t_b[other])
            z_mean_a = 0.5 * ((1 + p) * t_a[same] + (1 - p) * t_a[other])
        else:
            z_mean_b = 0.5 * (t_b[2] + t_b[3])
            z_mean_a = 0.5 * (t_a[2] + t_a[3])
        x_mean_b = 0.5 * (t_b[0] + t_b[1])
        x_mean_a = 0.5 * (t_a[0] + t_a[1])
        cond_b[i] = 0.5 * (x_mean_b + z_mean_b)
        cond_a[i] = 0.5 * (x_mean_a + z_mean_a)
    alpha = spool_transmission(link.spool)
    alice = 0.25 * (pair_rate_hz * (1.0 - cond_b) + link.background.alice_arm_hz) * t_a
    bob = 0.25 * (
        (pair_rate_hz * (1.0 - cond_a) + link.background.bob_arm_hz) * t_b
        + link.background.bob_receiver_hz * t_b_path
    )
    return alice, bob


def _uniform_sorted_times(rng, rate_hz: float, t0_ps: float, t1_ps: float) -> np.ndarray:
    duration_s = (t1_ps - t0_ps) * 1e-12
    n = rng.poisson(rate_hz * duration_s)
    if n == 0:
        return np.empty(0)
    times = rng.uniform(t0_ps, t1_ps, size=n)
    times.sort()
    return times


def _segment_streams(
    link,
    pair_rate_hz: float,
    t0_s: float,
    t1_s: float,
    theta_of_t: Callable[[np.ndarray], np.ndarray] | None,
    seed: int,
    segment_index: int,
) -> dict[str, np.ndarray]:
    const, cosine = outcome_rate_coefficients(link, pair_rate_hz)
    alice_singles, bob_singles = singles_rates(link, pair_rate_hz)
    tau_ps = link.delays.tau_ps
    t0_ps, t1_ps = t0_s * 1e12, t1_s * 1e12

    clicks: dict[str, list[np.ndarray]] = {det: [] for det in DETECTOR_IDS}
    jitter_of = {det: link.detectors[det].jitter_sigma_ps for det in DETECTOR_IDS}

    # true coincidences via thinning of the bound intensity
    rng = substream(seed, "detection", segment_index, "pairs")
    lam_max = const.sum() + np.abs(cosine).sum()
    emit = _uniform_sorted_times(rng, lam_max, t0_ps, t1_ps)
    if emit.size:
        if theta_of_t is None:
            cos_theta = np.ones(emit.size)
        else:
            cos_theta = np.cos(theta_of_t(emit * 1e-12))
        rates = const[None, :] + cosine[None, :] * cos_theta[:, None]
        total = rates.sum(axis=1)
        keep = rng.uniform(0.0, lam_max, size=emit.size) < total
        emit, rates, total = emit[keep], rates[keep], total[keep]
        if emit.size:
            cdf = np.cumsum(rates, axis=1)
            draw = rng.uniform(0.0, total)
            outcome_idx = (cdf < draw[:, None]).sum(axis=1)
            for idx in range(16):
                sel = outcome_idx == idx
                if not np.any(sel):
                    continue
                outcome = OUTCOMES[idx]
                a_sym, b_sym = outcome
                da, db = ALICE_DETECTOR_FOR[a_sym], BOB_DETECTOR_FOR[b_sym]
                t = emit[sel]
                t_alice = t + _alice_path_delay(tau_ps, a_sym) + jitter_of[da] * rng.standard_normal(t.size)
                t_bob = t + _bob_path_delay(tau_ps, b_sym) + jitter_of[db] * rng.standard_normal(t.size)
                clicks[da].append(t_alice)
                clicks[db].append(t_bob)

    # unpaired photon and background clicks, per projector path
    rng_a = substream(seed, "detection", segment_index, "alice-singles")
    for i, sym in enumerate(PARTY_SYMBOLS):
        det = ALICE_DETECTOR_FOR[sym]
        t = _uniform_sorted_times(rng_a, alice_singles[i], t0_ps, t1_ps)
        if t.size:
            t = t + _alice_path_delay(tau_ps, sym) + jitter_of[det] * rng_a.standard_normal(t.size)
            clicks[det].append(t)
    rng_b = substream(seed, "detection", segment_index, "bob-singles")
    for i, sym in enumerate(PARTY_SYMBOLS):
        det = BOB_DETECTOR_FOR[sym]
        t = _uniform_sorted_times(rng_b, bob_singles[i], t0_ps, t1_ps)
        if t.size:
            t = t + _bob_path_delay(tau_ps, sym) + jitter_of[det] * rng_b.standard_normal(t.size)
            clicks[det].append(t)

    # dark counts originate at the detectors: no path delay
    rng_d = substream(seed, "detection", segment_index, "darks")
    for det in DETECTOR_IDS:
        t = _uniform_sorted_times(rng_d, link.detectors[det].dark_rate_hz, t0_ps, t1_ps)
        if t.size:
            clicks[det].append(t)

    out = {}
    for det in DETECTOR_IDS:
        if clicks[det]:
            merged = np.concatenate(clicks[det])
            merged = np.rint(merged).astype(np.int64)
            merged[merged < 0] = 0
            merged.sort()
            out[det] = merged
        else:
            out[det] = np.empty(0, dtype=np.int64)
    return out


def iter_stream_segments(
    link,
    duration_s: float,
    theta_of_t: Callable[[np.ndarray], np.ndarray] | None = None,
    seed: int | None = None,
    segment_s: float = SEGMENT_SECONDS,
) -> Iterator[tuple[float, float, dict[str, np.ndarray]]]:
    """Yield (t0_s, t1_s, streams) for consecutive segments of a run."""
    from .photonics import pair_rate  # local import avoids a cycle at module load

    if duration_s < 0:
        raise ValueError("duration_s must be >= 0")
    seed = link.seed if seed is None else seed
    rate = pair_rate(link.source)
    n_full, remainder = divmod(duration_s, segment_s)
    bounds = [segment_s * i for i in range(int(n_full) + 1)]
    if remainder > 1e-9:
        bounds.append(duration_s)
    for k in range(len(bounds) - 1):
        yield bounds[k], bounds[k + 1], _segment_streams(
            link, rate, bounds[k], bounds[k + 1], theta_of_t, seed, k
        )


def simulate_streams(
    link,
    duration_s: float,
    theta_of_t: Callable[[np.ndarray], np.ndarray] | None = None,
    seed: int | None = None,
    segment_s: float = SEGMENT_SECONDS,
) -> dict[str, np.ndarray]:
    """Full per-detector timestamp streams (int64 ps, sorted) for one run."""
    parts: dict[str, list[np.ndarray]] = {det: [] for det in DETECTOR_IDS}
    for _, _, segment in iter_stream_segments(link, duration_s, theta_of_t, seed, segment_s):
        for det in DETECTOR_IDS:
            parts[det].append(segment[det])
    out = {}
    for det in DETECTOR_IDS:
        merged = np.concatenate(parts[det]) if parts[det] else np.empty(0, dtype=np.int64)
        merged.sort()  # delays and jitter can cross segment boundaries
        out[det] = merged
    return out


# ---------------------------------------------------------------------------
# stream serialization

_RECORD_DTYPE = np.dtype([("detector", "u1"), ("time_ps", "<u8")])


def write_streams_binary(path, streams: dict[str, np.ndarray]) -> None:
    """Write streams as little-endian (u8 detector index 1..6, u64 time) records.

    Records are merged across detectors and sorted by time, like a raw
    time-tagger dump.
    """
    total = sum(len(v) for v in streams.values())
    records = np.empty(total, dtype=_RECORD_DTYPE)
    pos = 0
    for det, times in streams.items():
        n = len(times)
        records["detector"][pos : pos + n] = DETECTOR_IDS.index(det) + 1
        records["time_ps"][pos : pos + n] = times.astype(np.uint64)
        pos += n
    records = records[np.argsort(records["time_ps"], kind="stable")]
    records.tofile(path)


def read_streams_binary(path) -> dict[str, np.ndarray]:
    records = np.fromfile(path, dtype=_RECORD_DTYPE)
    out = {}
    for i, det in enumerate(DETECTOR_IDS):
        times = records["time_ps"][records["detector"] == i + 1].astype(np.int64)
        times.sort()
        out[det] = times
    return out


def write_streams_csv(path, streams: dict[str, np.ndarray]) -> None:
    """CSV alternative with columns (detector, time_ps), time-sorted."""
    rows = []
    for det, times in streams.items():
        for t in times:
            rows.append((int(t), det))
    rows.sort()
    with open(path, "w", newline="") as fh:
        fh.write("detector,time_ps\n")
        for t, det in rows:
            fh.write(f"{det},{t}\n")


def read_streams_csv(path) -> dict[str, np.ndarray]:
    per_det: dict[str, list[int]] = {det: [] for det in DETECTOR_IDS}
    with open(path, newline="") as fh:
        header = fh.readline().strip()
        if header != "detector,time_ps":
            raise ValueError(f"{path} is not a stream CSV")
        for line in fh:
            det, t = line.rsplit(",", 1)
            per_det[det].append(int(t))
    return {det: np.array(sorted(ts), dtype=np.int64) for det, ts in per_det.items()}
