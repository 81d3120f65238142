"""Two-qubit state tomography from projective counts.

The measurement set is the 36 tensor products of the six single-qubit Pauli
eigenvectors (Z+, Z-, X+, X-, Y+, Y-) on each qubit, which is
informationally complete. Reconstruction offers plain linear inversion and
a maximum-likelihood fit on a triangular-factor parameterization that is
positive semidefinite by construction.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, NonConvergenceError
from .rng import substream

_EIGENVECTORS = {
    "Z+": np.array([1.0, 0.0], dtype=complex),
    "Z-": np.array([0.0, 1.0], dtype=complex),
    "X+": np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0),
    "X-": np.array([1.0, -1.0], dtype=complex) / np.sqrt(2.0),
    "Y+": np.array([1.0, 1.0j], dtype=complex) / np.sqrt(2.0),
    "Y-": np.array([1.0, -1.0j], dtype=complex) / np.sqrt(2.0),
}
PROJECTOR_NAMES = tuple(_EIGENVECTORS)


@dataclass(frozen=True)
class TomographySetting:
    """One joint projector (Alice eigenvector, Bob eigenvector) and its shots."""

    alice_projector: str
    bob_projector: str
    shots: int = 0

    def __post_init__(self):
        for name in (self.alice_projector, self.bob_projector):
            if name not in _EIGENVECTORS:
                raise ValueError(f"unknown projector {name!r}")
        if self.shots < 0:
            raise ValueError("shots must be >= 0")

    def joint_ket(self) -> np.ndarray:
        # signal (Bob) qubit first, matching the project-wide basis order
        return np.kron(_EIGENVECTORS[self.bob_projector], _EIGENVECTORS[self.alice_projector])


@dataclass(frozen=True)
class TomographyRecord:
    setting: TomographySetting
    count: int

    def __post_init__(self):
        if not 0 <= self.count <= self.setting.shots:
            raise ValueError("count must be in [0, shots]")


def projector_set(shots: int = 0) -> list[TomographySetting]:
    """All 36 joint Pauli-eigenvector settings, in a fixed order."""
    return [
        TomographySetting(a, b, shots)
        for a in PROJECTOR_NAMES
        for b in PROJECTOR_NAMES
    ]


def _projector_stack(settings) -> np.ndarray:
    mats = []
    for s in settings:
        ket = s.joint_ket()
        mats.append(np.outer(ket, ket.conj()))
    return np.array(mats)


def measurement_matrix(settings) -> np.ndarray:
    """Linear map from vec(rho) to outcome probabilities, one row per setting."""
    return _projector_stack(settings).reshape(len(settings), 16).conj()


def is_informationally_complete(settings) -> bool:
    return np.linalg.matrix_rank(measurement_matrix(settings), tol=1e-10) == 16


def simulate_counts(rho: np.ndarray, shots_per_setting: int, seed: int) -> list[TomographyRecord]:
    """Draw binomial counts for every projector: the forward model for tests."""
    if shots_per_setting < 1:
        raise ValueError("shots_per_setting must be >= 1")
    rng = substream(seed, "tomography")
    records = []
    for setting in projector_set(shots_per_setting):
        ket = setting.joint_ket()
        prob = float(np.real(ket.conj() @ rho @ ket))
        prob = min(1.0, max(0.0, prob))
        count = int(rng.binomial(shots_per_setting, prob))
        records.append(TomographyRecord(setting, count))
    return records


def linear_inversion(records) -> np.ndarray:
    """Least-squares estimate of rho; Hermitian and unit trace, possibly not PSD."""
    settings = [r.setting for r in records]
    mat = measurement_matrix(settings)
    if np.linalg.matrix_rank(mat, tol=1e-10) < 16:
        raise InsufficientDataError("projector set is not informationally complete")
    freqs = np.array([r.count / max(r.setting.shots, 1) for r in records])
    vec, *_ = np.linalg.lstsq(mat, freqs, rcond=None)
    rho = vec.reshape(4, 4)
    rho = (rho + rho.conj().T) / 2.0
    return rho / np.trace(rho).real


def _rho_from_factor(t: np.ndarray) -> np.ndarray:
    rho = t.conj().T @ t
    return rho / np.trace(rho).real


def _log_likelihood(t: np.ndarray, projectors: np.ndarray, counts: np.ndarray) -> float:
    rho = _rho_from_factor(t)
    probs = np.einsum("sij,ji->s", projectors, rho).real
    mask = counts > 0
    if np.any(probs[mask] <= 0):
        return -np.inf
    # per-count log likelihood; zero-count settings contribute nothing
    return float(counts[mask] @ np.log(probs[mask]) / counts.sum())


def mle_reconstruct(
    records,
    tol: float = 1e-9,
    max_iterations: int = 5000,
    full_output: bool = False,
):
    """Maximum-likelihood density matrix from projective counts.

    Ascends the per-count multinomial log likelihood over a triangular
    factor T with rho = T^dag T / Tr(T^dag T), so every iterate is a valid
    state. A backtracking line search makes the likelihood non-decreasing;
    iteration stops when one step improves it by less than ``tol``.

    With ``full_output`` returns (rho, info) where info carries the
    log-likelihood history. Raises NonConvergenceError (with the last
    iterate attached) if the cap is hit first.
    """
    records = list(records)
    settings = [r.setting for r in records]
    mat = measurement_matrix(settings)
    if np.linalg.matrix_rank(mat, tol=1e-10) < 16:
        raise InsufficientDataError("projector set is not informationally complete")
    projectors = _projector_stack(settings)
    counts = np.array([float(r.count) for r in records])
    if counts.sum() <= 0:
        raise InsufficientDataError("all counts are zero")

    # warm start from linear inversion, floored to a physical state
    rho0 = linear_inversion(records)
    eigvals, eigvecs = np.linalg.eigh(rho0)
    eigvals = np.clip(eigvals, 1e-6, None)
    rho0 = (eigvecs * eigvals) @ eigvecs.conj().T
    rho0 /= np.trace(rho0).real
    t = np.linalg.cholesky(rho0).conj().T

    total = counts.sum()
    ll = _log_likelihood(t, projectors, counts)
    history = [ll]
    step = 0.1
    for _ in range(max_iterations):
        rho = _rho_from_factor(t)
        norm = np.trace(t.conj().T @ t).real
        probs = np.einsum("sij,ji->s", projectors, rho).real
        probs = np.clip(probs, 1e-300, None)
        # Wirtinger gradient of the per-count log likelihood wrt conj(T)
        t_pi = np.einsum("ij,sjk->sik", t, projectors)
        grad = (np.einsum("s,sik->ik", counts / probs / total, t_pi) - t) / norm
        improved = False
        for _ in range(40):
            candidate = t + step * grad
            ll_new = _log_likelihood(candidate, projectors, counts)
            if ll_new > ll:
                improvement = ll_new - ll
                t = candidate / np.linalg.norm(candidate)
                ll = ll_new
                history.append(ll)
                step *= 1.3
                improved = True
                break
            step *= 0.5
        if not improved or improvement < tol:
            rho = _rho_from_factor(t)
            if full_output:
                return rho, {"log_likelihood": np.array(history), "iterations": len(history) - 1}
            return rho
    raise NonConvergenceError(
        f"MLE did not converge within {max_iterations} iterations",
        last_iterate=_rho_from_factor(t),
    )


def trace_distance(rho_a: np.ndarray, rho_b: np.ndarray) -> float:
    """Half the sum of absolute eigenvalues of the difference."""
    eigs = np.linalg.eigvalsh(np.asarray(rho_a) - np.asarray(rho_b))
    return 0.5 * float(np.sum(np.abs(eigs)))


def write_records_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alice_projector", "bob_projector", "shots", "count"])
        for r in records:
            writer.writerow([r.setting.alice_projector, r.setting.bob_projector, r.setting.shots, r.count])


def read_records_csv(path) -> list[TomographyRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            setting = TomographySetting(row["alice_projector"], row["bob_projector"], int(row["shots"]))
            records.append(TomographyRecord(setting, int(row["count"])))
    return records


def write_density_csv(path, rho: np.ndarray) -> None:
    """Emit real and imaginary parts as two stacked 4x4 CSV blocks."""
    rho = np.asarray(rho, dtype=complex)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["block", "c0", "c1", "c2", "c3"])
        for row in rho.real:
            writer.writerow(["re"] + [repr(float(v)) for v in row])
        for row in rho.imag:
            writer.writerow(["im"] + [repr(float(v)) for v in row])
