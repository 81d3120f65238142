"""BBM92 post-processing: sifting, QBER estimation, secure-key bound.

The rate bound is the infinite-key expression

    SKR >= max(0, 1 - H2(eps_Z) * f - H2(eps_X)) * S * R_r * alpha * eta

where f >= 1 is the error-reconciliation efficiency, S the sifting ratio,
R_r the qubit rate, and alpha, eta the channel and detector efficiencies.
Two usages are supported: feed R_r as the detected coincidence rate
entering sifting with alpha = eta = 1 (measured mode), or feed a source
rate with model alpha and eta (projection mode).
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .coincidence import CoincidenceSet
from .detection import OUTCOMES, basis_of
from .errors import InsufficientDataError

_BIT_OF_SYMBOL = {"+": 0, "-": 1, "0": 0, "1": 1}


@dataclass(frozen=True)
class SiftedBit:
    basis: str
    alice_bit: int
    bob_bit: int
    timestamp_ps: int


class SiftedKey:
    """Column-oriented sifted key; iterates as SiftedBit rows."""

    def __init__(self, basis, alice_bits, bob_bits, timestamps_ps):
        self.basis = np.asarray(basis, dtype="U1")
        self.alice_bits = np.asarray(alice_bits, dtype=np.uint8)
        self.bob_bits = np.asarray(bob_bits, dtype=np.uint8)
        self.timestamps_ps = np.asarray(timestamps_ps, dtype=np.int64)

    def __len__(self):
        return len(self.alice_bits)

    def __iter__(self):
        for i in range(len(self)):
            yield SiftedBit(
                str(self.basis[i]), int(self.alice_bits[i]), int(self.bob_bits[i]), int(self.timestamps_ps[i])
            )


# per-outcome sift decision, precomputed over the fixed outcome order
_SIFT_KEEP = np.array([basis_of(o[0]) == basis_of(o[1]) for o in OUTCOMES])
_SIFT_BASIS = np.array([basis_of(o[0]) for o in OUTCOMES], dtype="U1")
_SIFT_ALICE_BIT = np.array([_BIT_OF_SYMBOL[o[0]] for o in OUTCOMES], dtype=np.uint8)
_SIFT_BOB_BIT = np.array([_BIT_OF_SYMBOL[o[1]] for o in OUTCOMES], dtype=np.uint8)


def sift(events: CoincidenceSet) -> tuple[SiftedKey, float]:
    """Keep matched-basis outcomes; return the key and the kept fraction S.

    Bits map as 0 -> 0, 1 -> 1 in Z and + -> 0, - -> 1 in X.
    """
    if len(events) == 0:
        return SiftedKey([], [], [], []), 0.0
    idx = events.outcome_idx
    keep = _SIFT_KEEP[idx]
    key = SiftedKey(
        _SIFT_BASIS[idx[keep]],
        _SIFT_ALICE_BIT[idx[keep]],
        _SIFT_BOB_BIT[idx[keep]],
        events.alice_time_ps[keep],
    )
    return key, float(keep.sum() / len(events))


def qber(key: SiftedKey, basis: str) -> tuple[float, float]:
    """Error fraction in one basis with its binomial standard error."""
    sel = key.basis == basis
    n = int(sel.sum())
    if n == 0:
        raise InsufficientDataError(f"no sifted bits in basis {basis!r}")
    errors = int((key.alice_bits[sel] != key.bob_bits[sel]).sum())
    rate = errors / n
    return rate, float(np.sqrt(rate * (1.0 - rate) / n))


def binary_entropy(x):
    """Binary entropy in bits, with H2(0) = H2(1) = 0 by continuity."""
    arr = np.asarray(x, dtype=float)
    if np.any((arr < 0.0) | (arr > 1.0)):
        raise ValueError("binary entropy argument must lie in [0, 1]")
    out = np.zeros_like(arr)
    interior = (arr > 0.0) & (arr < 1.0)
    xa = arr[interior]
    out[interior] = -xa * np.log2(xa) - (1.0 - xa) * np.log2(1.0 - xa)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


@dataclass(frozen=True)
class SkrParams:
    """Rate-bound inputs: reconciliation efficiency f, sifting ratio S,
    qubit rate R_r, channel transmission alpha, detector efficiency eta."""

    f: float = 1.1
    sifting_ratio: float = 0.5
    qubit_rate_hz: float = 1.0
    alpha: float = 1.0
    eta: float = 1.0

    def __post_init__(self):
        if self.f < 1.0:
            raise ValueError("reconciliation efficiency f must be >= 1")
        if not 0.0 < self.sifting_ratio <= 1.0:
            raise ValueError("sifting_ratio must be in (0, 1]")
        if self.qubit_rate_hz < 0:
            raise ValueError("qubit_rate_hz must be >= 0")
        if not 0.0 < self.alpha <= 1.0 or not 0.0 < self.eta <= 1.0:
            raise ValueError("alpha and eta must be in (0, 1]")


def skr_lower_bound(eps_z: float, eps_x: float, params: SkrParams) -> float:
    """Secure-key-rate lower bound in bits per second; clamped at zero."""
    for name, eps in (("eps_z", eps_z), ("eps_x", eps_x)):
        if not 0.0 <= eps <= 0.5:
            raise ValueError(f"{name} must be in [0, 0.5], got {eps}")
    bracket = 1.0 - binary_entropy(eps_z) * params.f - binary_entropy(eps_x)
    bracket = max(0.0, bracket)
    return bracket * params.sifting_ratio * params.qubit_rate_hz * params.alpha * params.eta


def mann_kendall_pvalue(series) -> float:
    """Two-sided p-value of the Mann-Kendall trend test (normal approximation)."""
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < 3:
        raise InsufficientDataError("need at least 3 points for a trend test")
    s = 0
    for i in range(n - 1):
        s += int(np.sum(np.sign(x[i + 1 :] - x[i])))
    # tie correction over groups of equal values
    _, tie_counts = np.unique(x, return_counts=True)
    var = (n * (n - 1) * (2 * n + 5) - np.sum(tie_counts * (tie_counts - 1) * (2 * tie_counts + 5))) / 18.0
    if var <= 0:
        return 1.0
    if s > 0:
        z = (s - 1) / np.sqrt(var)
    elif s < 0:
        z = (s + 1) / np.sqrt(var)
    else:
        z = 0.0
    return float(2.0 * (1.0 - norm.cdf(abs(z))))


def run_summary_json(
    path,
    fiber_km: float,
    eps_z: float,
    eps_x: float,
    se_z: float,
    se_x: float,
    sift_ratio: float,
    skr_bps: float,
    n_sifted: int,
) -> None:
    """Write the per-run summary in the documented JSON schema."""
    payload = {
        "fiber_km": fiber_km,
        "eps_z": eps_z,
        "eps_x": eps_x,
        "se_z": se_z,
        "se_x": se_x,
        "sift_ratio": sift_ratio,
        "skr_bps": skr_bps,
        "n_sifted": n_sifted,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
