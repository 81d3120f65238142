"""Two-qubit frequency-bin state algebra.

States live on the tensor product of the signal (Bob) and idler (Alice)
qubits with the basis ordered {|00>, |01>, |10>, |11>}, signal qubit first.
That ordering is fixed project-wide. All entangled states used here are
symmetric under qubit exchange, so correlation quantities are unaffected by
the convention; it only matters when building joint projectors.

X-basis projectors use the ket convention

    |x+(phi)> = (|0> + e^{i phi} |1>) / sqrt(2)

so that for the phase-rotated Bell state (|00> + e^{i theta} |11>)/sqrt(2)
the joint ++ probability is (1 + cos(theta - phi_s - phi_i))/4. Adding a
tracked phase estimate to Bob's analysis phase therefore cancels a state
rotation by the same angle, which is exactly how the compensation loop
applies its correction.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import tau as TWO_PI

import numpy as np

from .errors import InsufficientDataError

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
EIGENVALUE_FLOOR = -1e-10

#: Outcome labels for correlation matrices: rows are Alice, columns Bob.
OUTCOME_LABELS = ("+", "-", "0", "1")

KET_0 = np.array([1.0, 0.0], dtype=complex)
KET_1 = np.array([0.0, 1.0], dtype=complex)


@dataclass(frozen=True)
class MeasurementSetting:
    """Per-party basis choice, with the analysis phase used in X.

    The phase is stored reduced to [0, 2*pi). It is ignored for Z.
    """

    basis: str
    analysis_phase: float = 0.0

    def __post_init__(self):
        if self.basis not in ("Z", "X"):
            raise ValueError(f"basis must be 'Z' or 'X', got {self.basis!r}")
        object.__setattr__(self, "analysis_phase", float(self.analysis_phase) % TWO_PI)

    def projectors(self) -> tuple[np.ndarray, np.ndarray]:
        """The two rank-1 projectors of this setting, in outcome order.

        Z order is (|0>, |1>); X order is (|x+>, |x->).
        """
        if self.basis == "Z":
            kets = (KET_0, KET_1)
        else:
            phase = np.exp(1j * self.analysis_phase)
            kets = (
                (KET_0 + phase * KET_1) / np.sqrt(2.0),
                (KET_0 - phase * KET_1) / np.sqrt(2.0),
            )
        return tuple(np.outer(k, k.conj()) for k in kets)


def validate_density_matrix(rho: np.ndarray) -> np.ndarray:
    """Check the density-matrix invariants and return rho as complex ndarray.

    Raises ValueError if rho is not 4x4 Hermitian with unit trace and
    eigenvalues above the numerical floor.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError(f"density matrix must be 4x4, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > HERMITICITY_TOL:
        raise ValueError("density matrix is not Hermitian within tolerance")
    if abs(np.trace(rho).real - 1.0) > TRACE_TOL or abs(np.trace(rho).imag) > TRACE_TOL:
        raise ValueError("density matrix trace differs from 1")
    eigs = np.linalg.eigvalsh(rho)
    if eigs.min() < EIGENVALUE_FLOOR:
        raise ValueError(f"density matrix has negative eigenvalue {eigs.min():.3e}")
    return rho


def bell_ket(theta: float) -> np.ndarray:
    """State vector (|00> + e^{i theta} |11>)/sqrt(2)."""
    ket = np.zeros(4, dtype=complex)
    ket[0] = 1.0 / np.sqrt(2.0)
    ket[3] = np.exp(1j * theta) / np.sqrt(2.0)
    return ket


def bell_state(theta: float) -> np.ndarray:
    """Density matrix of the phase-rotated Bell state.

    theta = 0 gives the target maximally entangled state; theta = pi its
    phase-flipped partner.
    """
    ket = bell_ket(theta)
    return np.outer(ket, ket.conj())


def noisy_state(p_werner: float, theta: float) -> np.ndarray:
    """Isotropic-noise mixture p * bell_state(theta) + (1 - p) * I/4."""
    if not 0.0 <= p_werner <= 1.0:
        raise ValueError(f"p_werner must be in [0, 1], got {p_werner}")
    return p_werner * bell_state(theta) + (1.0 - p_werner) * np.eye(4, dtype=complex) / 4.0


def outcome_probabilities(
    rho: np.ndarray, alice: MeasurementSetting, bob: MeasurementSetting
) -> np.ndarray:
    """Joint outcome probabilities for one basis pair.

    Returns a 2x2 array ``P[a, b]`` where index 0 is the first projector of
    each setting (0 or +) and index 1 the second (1 or -). Rows are Alice.
    """
    rho = validate_density_matrix(rho)
    pa = alice.projectors()
    pb = bob.projectors()
    out = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            # signal (Bob) qubit is the first tensor factor
            joint = np.kron(pb[j], pa[i])
            out[i, j] = np.trace(rho @ joint).real
    return out


def two_photon_fringe(visibility: float, theta_sum: float) -> float:
    """Relative coincidence rate (1 + V cos(theta_sum))/2 of the Bell fringe."""
    if not 0.0 <= visibility <= 1.0:
        raise ValueError(f"visibility must be in [0, 1], got {visibility}")
    return (1.0 + visibility * np.cos(theta_sum)) / 2.0


def fidelity_to_pure(rho: np.ndarray, target_ket: np.ndarray) -> float:
    """Overlap <psi|rho|psi> with a normalized pure target state."""
    rho = validate_density_matrix(rho)
    ket = np.asarray(target_ket, dtype=complex).reshape(4)
    norm = np.linalg.norm(ket)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"target state is not normalized (|psi| = {norm})")
    value = np.real_if_close(ket.conj() @ rho @ ket, tol=1e3)
    return float(min(1.0, max(0.0, float(np.real(value)))))


# Correlation matrices: 4x4, rows Alice outcomes {+,-,0,1}, columns Bob.
# The four 2x2 blocks are the XX, XZ, ZX, ZZ subspaces.

_SUBSPACE_SLICES = {
    "XX": (slice(0, 2), slice(0, 2)),
    "XZ": (slice(0, 2), slice(2, 4)),
    "ZX": (slice(2, 4), slice(0, 2)),
    "ZZ": (slice(2, 4), slice(2, 4)),
}


def subspace(matrix: np.ndarray, name: str) -> np.ndarray:
    """View of one 2x2 basis-combination block of a 4x4 correlation matrix."""
    rows, cols = _SUBSPACE_SLICES[name]
    return matrix[rows, cols]


def ideal_correlation_matrix() -> np.ndarray:
    """Correlation matrix of a perfect link.

    Matched-basis blocks are diag(0.5, 0.5); mismatched blocks are flat 0.25.
    """
    t = np.full((4, 4), 0.25)
    t[0:2, 0:2] = np.diag([0.5, 0.5])
    t[2:4, 2:4] = np.diag([0.5, 0.5])
    return t


def normalize_counts_to_correlation(counts: np.ndarray) -> np.ndarray:
    """Normalize a 4x4 outcome-count matrix per basis-combination block."""
    counts = np.asarray(counts, dtype=float)
    if counts.shape != (4, 4):
        raise ValueError("counts must be 4x4")
    if np.any(counts < 0):
        raise ValueError("counts must be nonnegative")
    out = np.empty((4, 4))
    for name, (rows, cols) in _SUBSPACE_SLICES.items():
        block = counts[rows, cols]
        total = block.sum()
        if total <= 0:
            raise InsufficientDataError(f"no counts in the {name} subspace")
        out[rows, cols] = block / total
    return out


def correlation_fidelity(t_exp: np.ndarray, t_th: np.ndarray) -> float:
    """Scale-invariant overlap between two correlation matrices.

    Tr(A^T B) Tr(B^T A) / (Tr(A^T A) Tr(B^T B)); equals 1 iff the matrices
    are proportional.
    """
    a = np.asarray(t_exp, dtype=float)
    b = np.asarray(t_th, dtype=float)
    aa = np.trace(a.T @ a)
    bb = np.trace(b.T @ b)
    if aa == 0.0 or bb == 0.0:
        raise ValueError("correlation fidelity is undefined for a zero matrix")
    ab = np.trace(a.T @ b)
    ba = np.trace(b.T @ a)
    return float(ab * ba / (aa * bb))


def write_correlation_csv(path, matrix: np.ndarray) -> None:
    """Write a 4x4 correlation matrix as CSV with outcome labels."""
    matrix = np.asarray(matrix, dtype=float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + list(OUTCOME_LABELS))
        for label, row in zip(OUTCOME_LABELS, matrix):
            writer.writerow([label] + [repr(float(v)) for v in row])


def read_correlation_csv(path) -> np.ndarray:
    """Read a correlation matrix written by :func:`write_correlation_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) != 5 or tuple(rows[0][1:]) != OUTCOME_LABELS:
        raise ValueError(f"{path} is not a correlation-matrix CSV")
    return np.array([[float(v) for v in row[1:]] for row in rows[1:]])


#: Useful fixed states.
PSI_PLUS_KET = bell_ket(0.0)
PSI_MINUS_KET = bell_ket(np.pi)
