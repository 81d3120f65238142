"""Streaming coincidence extraction and projector decoding.

A click pairs with at most one partner (greedy one-to-one matching): Alice
records are processed in time order and each takes the earliest unused Bob
record that lies within the window of one of the nominal delays for that
detector pair; ties at equal Bob time go to the smaller residual. The
window is a total width: a pair decodes when |dt - nominal| <= window/2.
Decode is unambiguous because the window is narrower than the delay
spacing, which is enforced up front.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numba
import numpy as np

from .detection import ALICE_DETECTORS, BOB_DETECTORS, DETECTOR_IDS, OUTCOMES, OUTCOME_INDEX, DelayMap, basis_of
from .errors import ConfigError, InsufficientDataError, StreamOrderError


@numba.njit(cache=True)
def _window_candidates(ta: np.ndarray, tb: np.ndarray, lo_shift: int, hi_shift: int):
    """Indices of all (Alice, Bob) record pairs with tb - ta in the window.

    Both streams are time-sorted, so a two-pointer merge enumerates the
    pairs in one linear pass; a counting pass first sizes the output so the
    scan allocates nothing proportional to the stream length.
    """
    total = 0
    j = 0
    k = 0
    for i in range(ta.size):
        t_lo = ta[i] + lo_shift
        while j < tb.size and tb[j] < t_lo:
            j += 1
        if k < j:
            k = j
        t_hi = ta[i] + hi_shift
        while k < tb.size and tb[k] <= t_hi:
            k += 1
        total += k - j
    ia = np.empty(total, np.int64)
    ib = np.empty(total, np.int64)
    pos = 0
    j = 0
    k = 0
    for i in range(ta.size):
        t_lo = ta[i] + lo_shift
        while j < tb.size and tb[j] < t_lo:
            j += 1
        if k < j:
            k = j
        t_hi = ta[i] + hi_shift
        while k < tb.size and tb[k] <= t_hi:
            k += 1
        for b in range(j, k):
            ia[pos] = i
            ib[pos] = b
            pos += 1
    return ia, ib


@numba.njit(cache=True)
def _is_sorted(times: np.ndarray) -> bool:
    for i in range(1, times.size):
        if times[i] < times[i - 1]:
            return False
    return True


@dataclass(frozen=True)
class CoincidenceEvent:
    alice_detector: str
    bob_detector: str
    alice_time_ps: int
    delta_t_ps: int
    outcome: str


class CoincidenceSet:
    """Column-oriented event container; iterates as CoincidenceEvent rows."""

    def __init__(self, alice_det, bob_det, alice_time_ps, delta_t_ps, outcome_idx):
        self.alice_det = np.asarray(alice_det, dtype=np.uint8)
        self.bob_det = np.asarray(bob_det, dtype=np.uint8)
        self.alice_time_ps = np.asarray(alice_time_ps, dtype=np.int64)
        self.delta_t_ps = np.asarray(delta_t_ps, dtype=np.int64)
        self.outcome_idx = np.asarray(outcome_idx, dtype=np.uint8)

    def __len__(self):
        return len(self.alice_time_ps)

    def __iter__(self):
        for i in range(len(self)):
            yield CoincidenceEvent(
                DETECTOR_IDS[self.alice_det[i]],
                DETECTOR_IDS[self.bob_det[i]],
                int(self.alice_time_ps[i]),
                int(self.delta_t_ps[i]),
                OUTCOMES[self.outcome_idx[i]],
            )

    def outcome_counts(self) -> np.ndarray:
        """4x4 matrix of outcome counts in correlation-matrix order."""
        counts = np.bincount(self.outcome_idx, minlength=16)
        return counts.reshape(4, 4)

    @classmethod
    def empty(cls):
        return cls([], [], [], [], [])

    @classmethod
    def concatenate(cls, parts):
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls.empty()
        return cls(
            np.concatenate([p.alice_det for p in parts]),
            np.concatenate([p.bob_det for p in parts]),
            np.concatenate([p.alice_time_ps for p in parts]),
            np.concatenate([p.delta_t_ps for p in parts]),
            np.concatenate([p.outcome_idx for p in parts]),
        )


def _check_window(window_ps: int, delay_map: DelayMap) -> int:
    window_ps = int(window_ps)
    if window_ps <= 0:
        raise ConfigError("window must be positive")
    if window_ps / 2 >= delay_map.tau_ps / 2:
        raise ConfigError(
            f"window {window_ps} ps would make decode ambiguous against tau {delay_map.tau_ps} ps"
        )
    return window_ps


def _check_sorted(streams: dict[str, np.ndarray]) -> None:
    for det, times in streams.items():
        if len(times) > 1 and not _is_sorted(np.ascontiguousarray(times, dtype=np.int64)):
            raise StreamOrderError(f"stream for {det} is not time-sorted")


def _candidates(streams, window_ps, delay_map):
    """All (alice, bob) record pairs within window of a nominal delay.

    Returns parallel arrays: alice key, bob key, alice time, bob time,
    absolute residual, outcome index. Keys are (detector index << 48) +
    record index, unique per record.
    """
    half = window_ps // 2
    cols = {name: [] for name in ("akey", "bkey", "ta", "tb", "res", "outcome")}
    for (da, db), keys in delay_map.decode_table().items():
        ta = streams.get(da)
        tb = streams.get(db)
        if ta is None or tb is None or not len(ta) or not len(tb):
            continue
        ia_base = DETECTOR_IDS.index(da) << 48
        ib_base = DETECTOR_IDS.index(db) << 48
        ta = np.ascontiguousarray(ta, dtype=np.int64)
        tb = np.ascontiguousarray(tb, dtype=np.int64)
        for delay, outcome in keys:
            a_idx, b_idx = _window_candidates(ta, tb, delay - half, delay + half)
            if not len(a_idx):
                continue
            cols["akey"].append(ia_base + a_idx)
            cols["bkey"].append(ib_base + b_idx)
            cols["ta"].append(ta[a_idx])
            cols["tb"].append(tb[b_idx])
            cols["res"].append(np.abs(tb[b_idx] - ta[a_idx] - delay))
            cols["outcome"].append(np.full(len(a_idx), OUTCOME_INDEX[outcome], dtype=np.uint8))
    if not cols["akey"]:
        return None
    return {name: np.concatenate(parts) for name, parts in cols.items()}


def find_coincidences(
    streams: dict[str, np.ndarray], window_ps: int, delay_map: DelayMap | None = None
) -> CoincidenceSet:
    """Match and decode coincidences from per-detector timestamp streams."""
    delay_map = delay_map or DelayMap()
    window_ps = _check_window(window_ps, delay_map)
    _check_sorted(streams)
    cand = _candidates(streams, window_ps, delay_map)
    if cand is None:
        return CoincidenceSet.empty()

    # greedy order: alice time, then alice identity, then bob time, residual
    order = np.lexsort((cand["bkey"], cand["res"], cand["tb"], cand["akey"], cand["ta"]))
    akeys = cand["akey"][order].tolist()
    bkeys = cand["bkey"][order].tolist()
    used_a: set[int] = set()
    used_b: set[int] = set()
    chosen = []
    for pos, (ak, bk) in enumerate(zip(akeys, bkeys)):
        if ak in used_a or bk in used_b:
            continue
        used_a.add(ak)
        used_b.add(bk)
        chosen.append(order[pos])
    chosen = np.array(chosen, dtype=np.intp)
    return CoincidenceSet(
        cand["akey"][chosen] >> 48,
        cand["bkey"][chosen] >> 48,
        cand["ta"][chosen],
        cand["tb"][chosen] - cand["ta"][chosen],
        cand["outcome"][chosen],
    )


def brute_force_coincidences(
    streams: dict[str, np.ndarray], window_ps: int, delay_map: DelayMap | None = None
) -> CoincidenceSet:
    """Reference quadratic matcher with identical semantics, for oracle tests."""
    delay_map = delay_map or DelayMap()
    window_ps = _check_window(window_ps, delay_map)
    _check_sorted(streams)
    half = window_ps // 2
    decode = delay_map.decode_table()

    alice_records = []
    for det in ALICE_DETECTORS:
        for idx, t in enumerate(streams.get(det, ())):
            alice_records.append((int(t), DETECTOR_IDS.index(det), idx, det))
    alice_records.sort()
    bob_records = []
    for det in BOB_DETECTORS:
        for idx, t in enumerate(streams.get(det, ())):
            bob_records.append((int(t), DETECTOR_IDS.index(det), idx, det))
    bob_records.sort()

    all_delays = [d for keys in decode.values() for d, _ in keys]
    min_reach = min(all_delays) - half
    max_reach = max(all_delays) + half

    used_bob = set()
    events = []
    start = 0
    for ta, a_det_i, a_idx, da in alice_records:
        # records are time-sorted, so the reachable bob range only advances
        while start < len(bob_records) and bob_records[start][0] - ta < min_reach:
            start += 1
        best = None
        for tb, b_det_i, b_idx, db in bob_records[start:]:
            if tb - ta > max_reach:
                break
            if tb - ta < min_reach or (b_det_i, b_idx) in used_bob:
                continue
            for delay, outcome in decode.get((da, db), ()):
                if abs(tb - ta - delay) <= half:
                    key = (tb, abs(tb - ta - delay), b_det_i, b_idx)
                    if best is None or key < best[0]:
                        best = (key, b_det_i, b_idx, tb, outcome)
        if best is not None:
            _, b_det_i, b_idx, tb, outcome = best
            used_bob.add((b_det_i, b_idx))
            events.append((a_det_i, b_det_i, ta, tb - ta, OUTCOME_INDEX[outcome]))
    if not events:
        return CoincidenceSet.empty()
    cols = list(zip(*events))
    return CoincidenceSet(*cols)


def find_coincidences_parallel(
    streams: dict[str, np.ndarray],
    window_ps: int,
    delay_map: DelayMap | None = None,
    n_segments: int = 4,
) -> CoincidenceSet:
    """Split-by-time matcher whose output is identical to the sequential one.

    Split points snap forward to gaps in the merged Alice stream larger
    than twice the maximum reach of a match, so greedy decisions cannot
    propagate across segments and each segment can run independently.
    """
    delay_map = delay_map or DelayMap()
    window_ps = _check_window(window_ps, delay_map)
    _check_sorted(streams)
    alice_all = np.sort(np.concatenate([streams.get(d, np.empty(0, np.int64)) for d in ALICE_DETECTORS]))
    if not len(alice_all) or n_segments <= 1:
        return find_coincidences(streams, window_ps, delay_map)

    max_reach = 2 * (2 * delay_map.tau_ps + window_ps)
    targets = np.linspace(alice_all[0], alice_all[-1], n_segments + 1)[1:-1]
    cuts = []
    gaps = np.flatnonzero(np.diff(alice_all) > max_reach)
    for target in targets:
        pos = np.searchsorted(alice_all, target)
        later = gaps[gaps >= pos - 1]
        if len(later):
            cut = alice_all[later[0]] + max_reach // 2
            if not cuts or cut > cuts[-1]:
                cuts.append(int(cut))
    bounds = [np.iinfo(np.int64).min] + cuts + [np.iinfo(np.int64).max]

    parts = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        chunk = {}
        for det in ALICE_DETECTORS:
            t = streams.get(det, np.empty(0, np.int64))
            chunk[det] = t[(t >= lo) & (t < hi)]
        for det in BOB_DETECTORS:
            t = streams.get(det, np.empty(0, np.int64))
            sel = (t >= lo - max_reach) & (t < hi + max_reach)
            chunk[det] = t[sel]
        parts.append(find_coincidences(chunk, window_ps, delay_map))
    merged = CoincidenceSet.concatenate(parts)
    order = np.lexsort((merged.delta_t_ps, merged.alice_det, merged.alice_time_ps))
    return CoincidenceSet(
        merged.alice_det[order],
        merged.bob_det[order],
        merged.alice_time_ps[order],
        merged.delta_t_ps[order],
        merged.outcome_idx[order],
    )


@dataclass
class DelayHistogram:
    centers_ps: np.ndarray
    counts: np.ndarray
    bin_width_ps: int


def delay_histogram(
    alice_streams: dict[str, np.ndarray] | np.ndarray,
    bob_streams: dict[str, np.ndarray] | np.ndarray | None = None,
    bin_width_ps: int = 100,
    span_ps: int = 50_000,
) -> DelayHistogram:
    """Histogram of Bob-minus-Alice time differences within +-span.

    Accepts either two per-detector stream dicts (all cross pairs are
    accumulated) or a full stream dict as the first argument.
    """
    if bin_width_ps <= 0:
        raise ValueError("bin_width_ps must be positive")
    if isinstance(alice_streams, CoincidenceSet):
        n_bins = 2 * (span_ps // bin_width_ps) + 1
        edges = (np.arange(n_bins + 1) - n_bins / 2) * bin_width_ps
        counts, _ = np.histogram(alice_streams.delta_t_ps, bins=edges)
        return DelayHistogram((edges[:-1] + edges[1:]) / 2.0, counts.astype(np.int64), int(bin_width_ps))
    if bob_streams is None:
        all_streams = alice_streams
        alice = np.sort(np.concatenate([all_streams.get(d, np.empty(0, np.int64)) for d in ALICE_DETECTORS]))
        bob = np.sort(np.concatenate([all_streams.get(d, np.empty(0, np.int64)) for d in BOB_DETECTORS]))
    else:
        if isinstance(alice_streams, dict):
            alice = np.sort(np.concatenate(list(alice_streams.values()))) if alice_streams else np.empty(0, np.int64)
        else:
            alice = np.asarray(alice_streams)
        if isinstance(bob_streams, dict):
            bob = np.sort(np.concatenate(list(bob_streams.values()))) if bob_streams else np.empty(0, np.int64)
        else:
            bob = np.asarray(bob_streams)

    n_bins = 2 * (span_ps // bin_width_ps) + 1
    edges = (np.arange(n_bins + 1) - n_bins / 2) * bin_width_ps
    counts = np.zeros(n_bins, dtype=np.int64)
    if len(alice) and len(bob):
        lo = np.searchsorted(bob, alice - span_ps, side="left")
        hi = np.searchsorted(bob, alice + span_ps, side="right")
        pair_counts = hi - lo
        total = int(pair_counts.sum())
        if total:
            a_idx = np.repeat(np.arange(len(alice)), pair_counts)
            starts = np.cumsum(pair_counts) - pair_counts
            b_idx = np.arange(total) - np.repeat(starts, pair_counts) + np.repeat(lo, pair_counts)
            deltas = bob[b_idx] - alice[a_idx]
            counts, _ = np.histogram(deltas, bins=edges)
    centers = (edges[:-1] + edges[1:]) / 2.0
    return DelayHistogram(centers, counts.astype(np.int64), int(bin_width_ps))


def car_estimate(
    hist: DelayHistogram,
    peak_window_ps: int,
    exclude_delays_ps: tuple[int, ...] | None = None,
) -> float:
    """Peak content over mean background at equivalent width.

    The peak is the contiguous region of width peak_window_ps around the
    maximum bin. Background excludes the same width around every nominal
    delay (defaults to the decode delays of a 10 ns delay unit), so other
    true-coincidence peaks do not contaminate it.
    """
    if exclude_delays_ps is None:
        tau = DelayMap().tau_ps
        exclude_delays_ps = (-tau, 0, tau, 2 * tau)
    counts = hist.counts
    centers = hist.centers_ps
    peak_center = centers[int(np.argmax(counts))]
    half = peak_window_ps / 2.0
    peak_sel = np.abs(centers - peak_center) <= half
    background_sel = np.ones(len(centers), dtype=bool)
    for delay in set(exclude_delays_ps) | {int(peak_center)}:
        background_sel &= np.abs(centers - delay) > 2 * half
    if not np.any(background_sel) or counts[background_sel].sum() == 0:
        raise InsufficientDataError("no background bins with counts; cannot form a ratio")
    background_mean = counts[background_sel].mean()
    return float(counts[peak_sel].sum() / (background_mean * peak_sel.sum()))


def write_events_csv(path, events: CoincidenceSet) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alice_det", "bob_det", "delta_t_ps", "outcome", "alice_time_ps"])
        for ev in events:
            writer.writerow([ev.alice_detector, ev.bob_detector, ev.delta_t_ps, ev.outcome, ev.alice_time_ps])
