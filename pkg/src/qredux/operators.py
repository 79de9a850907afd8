"""Truncated-basis operators and Hamiltonian assembly.

Node modes are represented either in harmonic-oscillator number states or
in charge number states.  Dimensionless conventions: node flux phi in
units of Phi0, node charge n in units of 2e, so [phi, n] = i / (2 pi).

Harmonic mode with Hamiltonian A n^2 + B phi^2 (A, B in GHz):

    phi = f (a + a^dag),   n = i g (a^dag - a),
    f = sqrt(sqrt(A / B) / (4 pi)),  g = 1 / (4 pi f),
    frequency = sqrt(A B) / pi  (GHz).

Charge mode: n diagonal, exp(2 pi i phi) a unit charge shift.

Cosines of branch-flux combinations factor into per-mode displacement
unitaries; harmonic-mode displacements are dense matrix exponentials of
the small per-mode flux operator, re-sparsified with a 1e-14 drop
tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm

from .circuit import BasisSpec, CircuitError, SymbolicHamiltonian

SPARSE_DROP_TOL = 1e-14


class BasisError(ValueError):
    """Unsupported operator/basis combination or invalid basis."""


@dataclass(frozen=True)
class ModeBasis:
    """Resolved truncated basis for one mode.

    kind "ho": ``dimension = n_max + 1``; ``frequency_ghz`` and
    ``flux_zpf_phi0`` fix the ladder-operator scaling.
    kind "charge": ``dimension = 2 n_max + 1`` with offset charge
    ``offset_2e``.
    """

    kind: str
    n_max: int
    frequency_ghz: float = 0.0
    flux_zpf_phi0: float = 0.0
    offset_2e: float = 0.0

    def __post_init__(self):
        if self.kind not in ("ho", "charge"):
            raise BasisError(f"unknown basis kind {self.kind!r}")
        if self.n_max < 2:
            raise BasisError("basis needs n_max >= 2")
        if self.kind == "ho":
            if self.frequency_ghz <= 0:
                raise BasisError("harmonic basis needs a positive frequency")
            if self.flux_zpf_phi0 <= 0:
                raise BasisError("harmonic basis needs a positive flux zero-point scale")

    @property
    def dimension(self) -> int:
        return self.n_max + 1 if self.kind == "ho" else 2 * self.n_max + 1


def resolve_mode_basis(spec: BasisSpec, sym: SymbolicHamiltonian, mode: int) -> ModeBasis:
    """Fill in oscillator parameters from the local quadratic Hamiltonian."""
    if spec.kind == "charge":
        if sym.effective_inductive_ghz(mode) != 0.0:
            raise BasisError(
                f"mode {mode + 1} carries an inductive (phi^2) term; charge "
                "number states cannot represent its flux operator"
            )
        return ModeBasis("charge", spec.n_max, offset_2e=spec.offset_2e)
    if spec.kind != "ho":
        raise BasisError(f"unknown basis kind {spec.kind!r}")

    a_ghz = sym.effective_charging_ghz(mode)
    b_ghz = sym.effective_inductive_ghz(mode)
    if spec.frequency_ghz is not None and spec.flux_zpf_phi0 is not None:
        return ModeBasis("ho", spec.n_max, spec.frequency_ghz, spec.flux_zpf_phi0)
    if b_ghz <= 0.0:
        raise BasisError(
            f"mode {mode + 1} has no inductive shunt; specify explicit "
            "oscillator parameters or use the charge basis"
        )
    freq = math.sqrt(a_ghz * b_ghz) / math.pi
    zpf = math.sqrt(math.sqrt(a_ghz / b_ghz) / (4.0 * math.pi))
    if spec.frequency_ghz is not None or spec.flux_zpf_phi0 is not None:
        raise BasisError(
            "override either both of frequency and flux_zpf or neither"
        )
    return ModeBasis("ho", spec.n_max, freq, zpf)


def resolve_bases(sym: SymbolicHamiltonian, specs) -> tuple[ModeBasis, ...]:
    if len(specs) != sym.num_modes:
        raise BasisError(f"{len(specs)} basis specs for {sym.num_modes} modes")
    return tuple(resolve_mode_basis(s, sym, m) for m, s in enumerate(specs))


# ---------------------------------------------------------------------------
# OperatorMatrix
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OperatorMatrix:
    """Sparse complex operator with its basis metadata.

    ``bases`` holds the per-mode :class:`ModeBasis` list, or a string label
    for derived bases (eigen-subspaces).  Matrices are CSR with sorted
    indices so that identical inputs reproduce identical storage.
    """

    matrix: sp.csr_matrix
    bases: tuple

    def __post_init__(self):
        m = self.matrix
        if not sp.issparse(m):
            raise TypeError("OperatorMatrix wants a sparse matrix")
        expected = 1
        for b in self.bases:
            expected *= b.dimension
        if m.shape != (expected, expected):
            raise ValueError(
                f"matrix dimension {m.shape[0]} does not match basis product {expected}"
            )

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def hermiticity_defect(self) -> float:
        delta = self.matrix - self.matrix.getH()
        return 0.0 if delta.nnz == 0 else float(np.max(np.abs(delta.data)))

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.matrix.data))) if self.matrix.nnz else 0.0)
        return self.hermiticity_defect() <= tol * scale

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def dump(self, path) -> None:
        """Write dimension plus (row, col, re, im) triples as text."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with open(path, "w") as fh:
            fh.write(f"{self.dimension}\n")
            for idx in order:
                fh.write(
                    f"{coo.row[idx]} {coo.col[idx]} "
                    f"{coo.data[idx].real:.16e} {coo.data[idx].imag:.16e}\n"
                )


def _csr(matrix) -> sp.csr_matrix:
    out = sp.csr_matrix(matrix, dtype=np.complex128)
    out.sum_duplicates()
    out.sort_indices()
    return out


def _drop_small(matrix: sp.csr_matrix, tol: float = SPARSE_DROP_TOL) -> sp.csr_matrix:
    matrix = matrix.copy()
    scale = max(1.0, np.max(np.abs(matrix.data)) if matrix.nnz else 0.0)
    matrix.data[np.abs(matrix.data) < tol * scale] = 0.0
    matrix.eliminate_zeros()
    matrix.sort_indices()
    return matrix


# ---------------------------------------------------------------------------
# Per-mode operators
# ---------------------------------------------------------------------------


def _ladder(dim: int) -> np.ndarray:
    a = np.zeros((dim, dim))
    nvals = np.sqrt(np.arange(1, dim))
    a[np.arange(dim - 1), np.arange(1, dim)] = nvals
    return a


def _mode_flux(basis: ModeBasis) -> np.ndarray:
    if basis.kind != "ho":
        raise BasisError("flux operator is undefined in the charge basis")
    a = _ladder(basis.dimension)
    return basis.flux_zpf_phi0 * (a + a.T)


def _mode_charge(basis: ModeBasis) -> np.ndarray:
    if basis.kind == "ho":
        a = _ladder(basis.dimension)
        g = 1.0 / (4.0 * math.pi * basis.flux_zpf_phi0)
        return 1j * g * (a.T - a)
    n = np.arange(-basis.n_max, basis.n_max + 1, dtype=float) + basis.offset_2e
    return np.diag(n).astype(complex)


def _mode_number(basis: ModeBasis) -> np.ndarray:
    if basis.kind != "ho":
        raise BasisError("occupation operator only exists for harmonic modes")
    return np.diag(np.arange(basis.dimension, dtype=float)).astype(complex)


def _mode_displacement(basis: ModeBasis, coeff: float) -> np.ndarray:
    """Unitary exp(2 pi i coeff phi) in the mode basis."""
    if basis.kind == "ho":
        return expm(2j * math.pi * coeff * _mode_flux(basis))
    if abs(abs(coeff) - 1.0) > 1e-12:
        raise BasisError(
            "cosine with non-unit flux prefactor is not representable in the "
            f"charge basis (got coefficient {coeff})"
        )
    dim = basis.dimension
    shift = np.zeros((dim, dim), dtype=complex)
    if coeff > 0:
        # exp(2 pi i phi) lowers the charge by one Cooper pair
        shift[np.arange(dim - 1), np.arange(1, dim)] = 1.0
    else:
        shift[np.arange(1, dim), np.arange(dim - 1)] = 1.0
    return shift


def mode_operator(basis: ModeBasis, which: str, prefactor: float = 1.0, offset: float = 0.0) -> OperatorMatrix:
    """Single-mode operator in its own truncated basis.

    ``which`` is one of ``"flux"`` (phi, units of Phi0), ``"charge"``
    (n, units of 2e) or ``"cos_flux"`` (cos(2 pi (prefactor phi + offset))).
    """
    if which == "flux":
        dense = _mode_flux(basis).astype(complex)
    elif which == "charge":
        dense = _mode_charge(basis)
    elif which == "cos_flux":
        disp = _mode_displacement(basis, prefactor)
        phase = np.exp(2j * math.pi * offset)
        dense = 0.5 * (phase * disp + np.conj(phase) * disp.conj().T)
    else:
        raise BasisError(f"unknown mode operator {which!r}")
    return OperatorMatrix(_drop_small(_csr(dense)), (basis,))


def tensor_embed(op: OperatorMatrix, mode_index: int, full_basis) -> OperatorMatrix:
    """Kronecker-embed a single-mode operator into the full product space."""
    full_basis = tuple(full_basis)
    if not (0 <= mode_index < len(full_basis)):
        raise IndexError(f"mode index {mode_index} out of range")
    if op.dimension != full_basis[mode_index].dimension:
        raise ValueError(
            f"operator dimension {op.dimension} does not match mode "
            f"{mode_index} dimension {full_basis[mode_index].dimension}"
        )
    return OperatorMatrix(
        _embed_factors({mode_index: op.matrix}, full_basis), full_basis
    )


def _embed_factors(factors: dict[int, sp.spmatrix], bases) -> sp.csr_matrix:
    """Kron product placing ``factors`` at their modes, identities elsewhere."""
    out = None
    for m, basis in enumerate(bases):
        piece = factors.get(m)
        if piece is None:
            piece = sp.identity(basis.dimension, dtype=np.complex128, format="csr")
        out = piece if out is None else sp.kron(out, piece, format="csr")
    out = _csr(out)
    return out


# ---------------------------------------------------------------------------
# Hamiltonian assembly
# ---------------------------------------------------------------------------


def _node_flux_factors(bases, node_coeffs) -> dict[int, sp.csr_matrix]:
    """Displacement factors exp(2 pi i c_k phi_k) per involved mode."""
    factors = {}
    for node, coeff in node_coeffs:
        basis = bases[node - 1]
        factors[node - 1] = _csr(_mode_displacement(basis, coeff))
    return factors


def cosine_operator(bases, node_coeffs, offset_phi0: float) -> sp.csr_matrix:
    """cos(2 pi (sum_k c_k phi_k + offset)) on the full product space.

    Because modes commute the exponential factorises into per-mode
    displacement unitaries.
    """
    factors = _node_flux_factors(bases, node_coeffs)
    half = _embed_factors(factors, bases)
    phase = np.exp(2j * math.pi * offset_phi0)
    full = 0.5 * (phase * half + np.conj(phase) * half.getH())
    return _drop_small(_csr(full))


def assemble_hamiltonian(sym: SymbolicHamiltonian, bases) -> OperatorMatrix:
    """Hermitian circuit Hamiltonian on the tensor-product space (GHz)."""
    bases = tuple(bases)
    if len(bases) != sym.num_modes:
        raise BasisError(
            f"{len(bases)} mode bases supplied for {sym.num_modes} circuit modes"
        )
    dim = 1
    for b in bases:
        dim *= b.dimension

    charge_ops = [_csr(_mode_charge(b)) for b in bases]
    flux_ops = [
        _csr(_mode_flux(b)) if b.kind == "ho" else None for b in bases
    ]

    total = sp.csr_matrix((dim, dim), dtype=np.complex128)

    n = sym.num_modes
    for i in range(n):
        for j in range(i, n):
            weight = 2.0 if j > i else 1.0

            cq = sym.cap_quad[i, j]
            if cq != 0.0:
                if i == j:
                    factors = {i: _csr(charge_ops[i] @ charge_ops[i])}
                else:
                    factors = {i: charge_ops[i], j: charge_ops[j]}
                total = total + weight * cq * _embed_factors(factors, bases)

            fq = sym.flux_quad[i, j]
            if fq != 0.0:
                for mode in {i, j}:
                    if flux_ops[mode] is None:
                        raise BasisError(
                            f"mode {mode + 1} needs a flux operator for its "
                            "inductive term; use a harmonic basis"
                        )
                if i == j:
                    factors = {i: _csr(flux_ops[i] @ flux_ops[i])}
                else:
                    factors = {i: flux_ops[i], j: flux_ops[j]}
                total = total + weight * fq * _embed_factors(factors, bases)

    for term in sym.cosines:
        if term.coefficient_ghz != 0.0:
            total = total + term.coefficient_ghz * cosine_operator(
                bases, term.node_coeffs, term.offset_phi0
            )

    for i in range(n):
        if sym.flux_linear[i] != 0.0:
            if flux_ops[i] is None:
                raise BasisError(
                    f"mode {i + 1} needs a flux operator for its bias term; "
                    "use a harmonic basis"
                )
            total = total + sym.flux_linear[i] * _embed_factors({i: flux_ops[i]}, bases)
        if sym.charge_linear[i] != 0.0:
            total = total + sym.charge_linear[i] * _embed_factors({i: charge_ops[i]}, bases)

    if sym.constant_ghz != 0.0:
        total = total + sym.constant_ghz * sp.identity(dim, format="csr", dtype=np.complex128)

    return OperatorMatrix(_drop_small(_csr(total)), bases)


def branch_flux_operator(bases, node_coeffs, offset_phi0: float = 0.0) -> sp.csr_matrix:
    """Branch flux sum_k c_k phi_k + offset (units of Phi0) on the full space."""
    bases = tuple(bases)
    dim = 1
    for b in bases:
        dim *= b.dimension
    total = sp.csr_matrix((dim, dim), dtype=np.complex128)
    for node, coeff in node_coeffs:
        basis = bases[node - 1]
        total = total + coeff * _embed_factors({node - 1: _csr(_mode_flux(basis))}, bases)
    if offset_phi0 != 0.0:
        total = total + offset_phi0 * sp.identity(dim, format="csr", dtype=np.complex128)
    return _csr(total)


def node_charge_operator(bases, node: int) -> sp.csr_matrix:
    """Node charge n_node (units of 2e) on the full space."""
    bases = tuple(bases)
    return _embed_factors({node - 1: _csr(_mode_charge(bases[node - 1]))}, bases)


# ---------------------------------------------------------------------------
# Low-energy projection of composite systems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EigenSubspace:
    """Basis label for a kept set of low-energy eigenstates."""

    label: str
    dimension: int


def project_low_energy(
    circuit_solutions,
    keep: list[int],
    interactions=(),
    transformed_ops: dict | None = None,
) -> tuple[OperatorMatrix, OperatorMatrix, OperatorMatrix]:
    """Project a composite Hamiltonian onto per-circuit low-energy eigenstates.

    Parameters
    ----------
    circuit_solutions
        Per-circuit ``EigenSolution`` objects (values/vectors), at least
        ``keep[i]`` pairs each.
    keep
        Number of eigenstates N_i kept per circuit.
    interactions
        Iterables of ``(circuit_a, op_a, circuit_b, op_b, coeff_ghz)`` with
        the operators given in each circuit's full basis.
    transformed_ops
        Optional ``{name: (circuit_index, operator)}`` mapping; each entry
        is transformed into the kept eigenbasis and embedded, returned in a
        dict alongside.

    Returns
    -------
    (H_total, H0, H_int) as OperatorMatrix on the product eigenbasis, plus
    a dict of embedded extra operators when requested (then the return is a
    4-tuple).
    """
    num = len(circuit_solutions)
    if len(keep) != num:
        raise ValueError("keep counts must match number of circuits")
    for idx, (sol, n_keep) in enumerate(zip(circuit_solutions, keep)):
        if n_keep > sol.values.size:
            raise ValueError(
                f"circuit {idx}: requested {n_keep} eigenstates, solver "
                f"returned {sol.values.size}"
            )

    bases = tuple(EigenSubspace(f"circuit{idx}", keep[idx]) for idx in range(num))
    dims = [k for k in keep]
    dim = int(np.prod(dims))

    energies = [np.asarray(sol.values[: keep[i]], dtype=float) for i, sol in enumerate(circuit_solutions)]
    vectors = [np.asarray(sol.vectors[:, : keep[i]]) for i, sol in enumerate(circuit_solutions)]

    diag = np.zeros(dim)
    for i in range(num):
        pattern = [np.ones(d) for d in dims]
        pattern[i] = energies[i]
        piece = pattern[0]
        for p in pattern[1:]:
            piece = np.kron(piece, p)
        diag += piece
    h0 = sp.diags(diag.astype(complex), format="csr")

    hint = sp.csr_matrix((dim, dim), dtype=np.complex128)
    for ca, op_a, cb, op_b, coeff in interactions:
        ta = vectors[ca].conj().T @ (op_a @ vectors[ca])
        tb = vectors[cb].conj().T @ (op_b @ vectors[cb])
        hint = hint + coeff * _embed_factors(
            {ca: _csr(ta), cb: _csr(tb)}, bases
        )

    h_total = _csr(h0 + hint)
    result = (
        OperatorMatrix(h_total, bases),
        OperatorMatrix(_csr(h0), bases),
        OperatorMatrix(_csr(hint), bases),
    )
    if transformed_ops is None:
        return result

    embedded = {}
    for name, (ci, op) in transformed_ops.items():
        t = vectors[ci].conj().T @ (op @ vectors[ci])
        embedded[name] = OperatorMatrix(_embed_factors({ci: _csr(t)}, bases), bases)
    return result + (embedded,)
