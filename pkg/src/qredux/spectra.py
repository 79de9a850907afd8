"""Lowest eigenpairs of Hermitian operators and truncation-convergence studies.

The sparse path uses implicitly restarted Lanczos (ARPACK) on the
operator shifted by a Gershgorin lower bound, with a deterministic
starting vector; matrices of dimension <= 512 fall back to a dense
solver.  Every returned pair is residual-checked, eigenvector phases are
normalised so the largest-magnitude component is real positive, and
near-degenerate eigenvalues are flagged.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import eigh

from .operators import OperatorMatrix

DENSE_FALLBACK_DIM = 512
DEFAULT_TOL = 1e-10
DEGENERACY_REL_TOL = 1e-10


class SolverError(RuntimeError):
    """Eigensolver failure; carries the best residuals reached."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


@dataclass(frozen=True)
class EigenSolution:
    """k lowest eigenpairs, ascending, with solver metadata."""

    values: np.ndarray
    vectors: np.ndarray
    residual_norms: np.ndarray
    tol: float
    method: str
    degenerate: np.ndarray = field(default_factory=lambda: np.array([], dtype=bool))

    @property
    def k(self) -> int:
        return self.values.size


def _as_matrix(h):
    if isinstance(h, OperatorMatrix):
        return h.matrix
    return h


def _normalize_phases(vectors: np.ndarray) -> np.ndarray:
    out = vectors.copy()
    for col in range(out.shape[1]):
        idx = int(np.argmax(np.abs(out[:, col])))
        pivot = out[idx, col]
        if pivot != 0:
            out[:, col] *= np.abs(pivot) / pivot
    return out


def _degeneracy_flags(values: np.ndarray, scale: float) -> np.ndarray:
    flags = np.zeros(values.size, dtype=bool)
    tol = DEGENERACY_REL_TOL * max(scale, 1e-300)
    for i in range(values.size - 1):
        if abs(values[i + 1] - values[i]) < tol:
            flags[i] = True
            flags[i + 1] = True
    return flags


def _gershgorin_bounds(matrix: sp.csr_matrix) -> tuple[float, float]:
    diag = matrix.diagonal().real
    absolute = abs(matrix)
    radius = np.asarray(absolute.sum(axis=1)).ravel() - np.abs(matrix.diagonal())
    return float(np.min(diag - radius)), float(np.max(diag + radius))


def lowest_eigenpairs(h, k: int, tol: float = DEFAULT_TOL, v0=None) -> EigenSolution:
    """k lowest eigenpairs of a Hermitian operator.

    Parameters
    ----------
    h
        OperatorMatrix, scipy sparse matrix or ndarray.
    k
        Number of pairs, k < dim.
    tol
        Relative residual tolerance; each pair satisfies
        ``||H v - lambda v|| <= tol * ||H||``.
    v0
        Optional starting vector; defaults to the normalised all-ones
        vector so repeated runs are bit-reproducible.
    """
    matrix = _as_matrix(h)
    dense_input = isinstance(matrix, np.ndarray)
    dim = matrix.shape[0]
    if k >= dim:
        raise ValueError(f"k={k} must be smaller than the dimension {dim}")
    if k < 1:
        raise ValueError("k must be >= 1")

    if not dense_input:
        matrix = matrix.tocsr()

    herm_defect = _hermiticity_defect(matrix)
    scale_guess = _matrix_scale(matrix)
    if herm_defect > 1e-10 * max(scale_guess, 1.0):
        raise ValueError(
            f"operator is not Hermitian (defect {herm_defect:.3e} at scale {scale_guess:.3e})"
        )

    use_dense = dense_input or dim <= DENSE_FALLBACK_DIM or k > dim - 2
    if use_dense:
        full = matrix if dense_input else matrix.toarray()
        full = 0.5 * (full + full.conj().T)
        values, vectors = eigh(full)
        values, vectors = values[:k], vectors[:, :k]
        method = "dense"
    else:
        lower, upper = _gershgorin_bounds(matrix)
        shift = lower
        shifted = matrix - shift * sp.identity(dim, dtype=matrix.dtype, format="csr")
        if v0 is None:
            v0 = np.ones(dim) / np.sqrt(dim)
        ncv = min(dim, max(2 * k + 1, 40))
        try:
            vals, vecs = spla.eigsh(
                shifted, k=k, which="SA", v0=v0, tol=tol, ncv=ncv,
                maxiter=max(5000, 100 * dim // ncv),
            )
        except spla.ArpackNoConvergence as exc:
            got = exc.eigenvalues
            raise SolverError(
                f"Lanczos failed to converge {k} pairs (got {got.size}) at tol {tol}",
                residuals=None,
            ) from exc
        order = np.argsort(vals)
        values = vals[order] + shift
        vectors = vecs[:, order]
        method = "lanczos"

    vectors = _normalize_phases(vectors)

    # Residual check against the operator norm (power-iteration estimate,
    # floored by the largest matrix entry which never exceeds the norm).
    residuals = np.empty(k)
    for i in range(k):
        residuals[i] = np.linalg.norm(matrix @ vectors[:, i] - values[i] * vectors[:, i])
    scale = max(
        operator_norm_estimate(matrix), scale_guess, float(np.max(np.abs(values))), 1e-300
    )
    limit = max(tol, 1e-12) * scale * 10.0
    bad = residuals > limit
    if np.any(bad):
        raise SolverError(
            f"{int(bad.sum())} eigenpairs exceed the residual bound "
            f"{limit:.3e} (worst {residuals.max():.3e})",
            residuals=residuals,
        )

    return EigenSolution(
        values=np.asarray(values, dtype=float),
        vectors=vectors,
        residual_norms=residuals,
        tol=tol,
        method=method,
        degenerate=_degeneracy_flags(np.asarray(values, dtype=float), scale),
    )


def _matrix_scale(matrix) -> float:
    if isinstance(matrix, np.ndarray):
        return float(np.max(np.abs(matrix))) if matrix.size else 0.0
    return float(np.max(np.abs(matrix.data))) if matrix.nnz else 0.0


def _hermiticity_defect(matrix) -> float:
    if isinstance(matrix, np.ndarray):
        return float(np.max(np.abs(matrix - matrix.conj().T))) if matrix.size else 0.0
    delta = (matrix - matrix.getH()).tocsr()
    return float(np.max(np.abs(delta.data))) if delta.nnz else 0.0


def operator_norm_estimate(matrix, steps: int = 20, tol: float = 1e-6) -> float:
    """Operator (spectral) norm of a Hermitian matrix by power iteration."""
    matrix = _as_matrix(matrix)
    dim = matrix.shape[0]
    if dim == 0:
        return 0.0
    vec = np.ones(dim, dtype=complex) / np.sqrt(dim)
    previous = 0.0
    estimate = 0.0
    for _ in range(max(steps, 2)):
        new = matrix @ vec
        norm = np.linalg.norm(new)
        if norm == 0.0:
            return 0.0
        vec = new / norm
        estimate = norm
        if abs(estimate - previous) <= tol * max(estimate, 1e-300):
            break
        previous = estimate
    return float(estimate)


# ---------------------------------------------------------------------------
# Convergence studies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceRow:
    truncations: tuple[int, ...]
    dimension: int
    eigenvalues: np.ndarray | None
    wall_time_s: float
    failed: bool = False
    error: str = ""


@dataclass(frozen=True)
class ConvergenceStudy:
    rows: tuple[ConvergenceRow, ...]
    k: int
    tolerance: float
    #: per-eigenvalue index of the first row already within ``tolerance``
    #: (relative) of the final row, or -1 where never converged
    first_converged_row: tuple[int, ...] = ()

    def converged_at(self, eigen_index: int) -> tuple[int, ...] | None:
        row = self.first_converged_row[eigen_index]
        return None if row < 0 else self.rows[row].truncations


def convergence_study(builder, schedule, k: int, tolerance: float = 1e-6) -> ConvergenceStudy:
    """Solve the same circuit over a schedule of basis truncations.

    Parameters
    ----------
    builder
        Callable mapping a truncation tuple to a Hamiltonian
        (OperatorMatrix or sparse matrix).
    schedule
        Sequence of truncation tuples, non-decreasing in every mode.
    k
        Number of eigenvalues tracked.
    tolerance
        Relative agreement with the final row that counts as converged.
    """
    schedule = [tuple(int(t) for t in row) for row in schedule]
    if not schedule:
        raise ValueError("empty truncation schedule")
    width = len(schedule[0])
    for row in schedule:
        if len(row) != width:
            raise ValueError("inconsistent truncation tuple lengths")
    for prev, cur in zip(schedule, schedule[1:]):
        if any(c < p for p, c in zip(prev, cur)):
            raise ValueError(
                f"truncation schedule must be non-decreasing per mode: {prev} -> {cur}"
            )

    rows: list[ConvergenceRow] = []
    for trunc in schedule:
        start = time.perf_counter()
        try:
            h = builder(trunc)
            matrix = _as_matrix(h)
            solution = lowest_eigenpairs(h, k)
            elapsed = time.perf_counter() - start
            rows.append(
                ConvergenceRow(trunc, matrix.shape[0], solution.values, elapsed)
            )
        except Exception as exc:  # row-level failure keeps the study going
            elapsed = time.perf_counter() - start
            rows.append(ConvergenceRow(trunc, 0, None, elapsed, failed=True, error=str(exc)))

    reference = None
    for row in reversed(rows):
        if not row.failed:
            reference = row.eigenvalues
            break
    first = [-1] * k
    if reference is not None:
        for eig_idx in range(k):
            for row_idx, row in enumerate(rows):
                if row.failed:
                    continue
                ref = reference[eig_idx]
                denom = max(abs(ref), 1e-300)
                if abs(row.eigenvalues[eig_idx] - ref) / denom <= tolerance:
                    first[eig_idx] = row_idx
                    break

    return ConvergenceStudy(tuple(rows), k, tolerance, tuple(first))
