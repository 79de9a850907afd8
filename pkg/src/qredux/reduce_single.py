"""Single-circuit reductions to a two-level Pauli Hamiltonian.

Local reduction (LR): diagonalise the measurement observable projected on
the two lowest eigenstates; the computational basis follows the bias
point.  Perturbative reduction (PR): freeze the computational basis at an
expansion bias and evaluate the trace formula against the Hamiltonian at
the shifted bias.  The semiclassical instanton route lives in
:mod:`qredux.instanton`.

Sign conventions: after the local gauge rescale the y component vanishes
identically and h_x <= 0 (tunnelling amplitude Delta = -2 h_x >= 0); for
flux-type observables state |0> carries the positive eigenvalue.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectra import EigenSolution
from .units import COOPER_PAIR

CHARGE_KIND_REL_TOL = 0.01  # |o1 - o0| within 1% of one Cooper pair


class ReductionValidityError(ValueError):
    """The circuit cannot be operated as a qubit at this bias."""

    def __init__(self, message, o0=None, o1=None):
        super().__init__(message)
        self.o0 = o0
        self.o1 = o1


@dataclass(frozen=True)
class PauliCoefficients1Q:
    """Single-qubit Pauli coefficients in GHz."""

    h_i: float
    h_x: float
    h_y: float
    h_z: float

    def reconstructed_spectrum(self) -> tuple[float, float]:
        r = math.sqrt(self.h_x**2 + self.h_y**2 + self.h_z**2)
        return (self.h_i - r, self.h_i + r)

    def as_dict(self) -> dict[str, float]:
        return {"I": self.h_i, "x": self.h_x, "y": self.h_y, "z": self.h_z}


@dataclass(frozen=True)
class ComputationalBasis1Q:
    """Computational states expressed in the {|E0>, |E1>} basis.

    ``u0``/``u1`` are the state coordinates, ``o0``/``o1`` the observable
    eigenvalues in physical units (ampere or coulomb).
    """

    u0: np.ndarray
    u1: np.ndarray
    o0: float
    o1: float
    valid: bool
    reason: str
    theta: float
    phi1: float
    phi2: float
    degenerate_doublet: bool = False

    @property
    def unitary(self) -> np.ndarray:
        """Column matrix [u0 u1]; unitary by construction."""
        return np.column_stack([self.u0, self.u1])


def _clamped_acos(x: float) -> float:
    return math.acos(min(1.0, max(-1.0, x)))


def _basis_angles(u0: np.ndarray, u1: np.ndarray) -> tuple[float, float, float]:
    theta = _clamped_acos(abs(u0[0]))
    cos2, sin2 = math.cos(theta) ** 2, math.sin(theta) ** 2
    phi1 = 0.0
    phi2 = 0.5 * math.pi
    if cos2 > 1e-24:
        phi1 = 0.5 * _clamped_acos(float((u0[0] * np.conj(u1[1])).real) / cos2)
    if sin2 > 1e-24:
        phi2 = 0.5 * (
            math.pi - _clamped_acos(float((u0[1] * np.conj(u1[0])).real) / sin2)
        )
    return theta, phi1, phi2


def _gauge_fix(u: np.ndarray) -> np.ndarray:
    """Rescale by a phase so the first sizeable component is real positive."""
    pivot = u[0] if abs(u[0]) > 1e-14 else u[1]
    return u * (abs(pivot) / pivot)


def _projected_observable(solution: EigenSolution, observable) -> np.ndarray:
    v = solution.vectors[:, :2]
    block = v.conj().T @ (observable @ v)
    return 0.5 * (block + block.conj().T)


def _coefficients_from_block(block: np.ndarray) -> PauliCoefficients1Q:
    h_i = 0.5 * float((block[0, 0] + block[1, 1]).real)
    h_x = float(block[0, 1].real)
    h_y = float(-block[0, 1].imag)
    h_z = 0.5 * float((block[0, 0] - block[1, 1]).real)
    return PauliCoefficients1Q(h_i, h_x, h_y, h_z)


def local_reduction(
    solution: EigenSolution,
    observable,
    kind: str,
    charge_rel_tol: float = CHARGE_KIND_REL_TOL,
) -> tuple[PauliCoefficients1Q, ComputationalBasis1Q]:
    """Local-basis reduction of a single circuit.

    Parameters
    ----------
    solution
        Eigen-solution of the circuit Hamiltonian with at least the two
        lowest pairs.
    observable
        Measurement operator (sparse or dense) in the same basis, in
        physical units: loop current (A) for ``kind="flux"``, island
        charge (C) for ``kind="charge"``.
    kind
        ``"flux"``: requires observable eigenvalues of opposite sign in
        the qubit subspace.  ``"charge"``: requires them to differ by one
        Cooper pair within ``charge_rel_tol``.
    """
    if solution.k < 2:
        raise ValueError("local reduction needs at least two eigenpairs")
    e0, e1 = float(solution.values[0]), float(solution.values[1])
    degenerate = bool(solution.degenerate[:2].any()) if solution.degenerate.size else False

    op = _projected_observable(solution, observable)
    evals, evecs = np.linalg.eigh(op)

    if kind == "flux":
        if not (evals[0] < 0.0 < evals[1]):
            raise ReductionValidityError(
                "no opposite-sign current eigenstates at this bias "
                f"(projected eigenvalues {evals[0]:.4e}, {evals[1]:.4e} A)",
                o0=float(evals[1]), o1=float(evals[0]),
            )
        u0 = evecs[:, 1]  # positive current -> |0>
        u1 = evecs[:, 0]
        o0, o1 = float(evals[1]), float(evals[0])
    elif kind == "charge":
        diff = abs(evals[1] - evals[0])
        if abs(diff - COOPER_PAIR) > charge_rel_tol * COOPER_PAIR:
            raise ReductionValidityError(
                "charge difference of the projected eigenstates is not one "
                f"Cooper pair (|o1 - o0| = {diff:.4e} C vs 2e = {COOPER_PAIR:.4e} C)",
                o0=float(evals[0]), o1=float(evals[1]),
            )
        u0 = evecs[:, 0]  # lower charge -> |0>
        u1 = evecs[:, 1]
        o0, o1 = float(evals[0]), float(evals[1])
    else:
        raise ValueError(f"unknown observable kind {kind!r}")

    # Local gauge: null h_y; with both pivots real positive E0 < E1 then
    # gives h_x <= 0 (Delta >= 0) without a further pi rotation.
    u0 = _gauge_fix(u0)
    u1 = _gauge_fix(u1)

    w = np.column_stack([u0, u1])
    block = w.conj().T @ np.diag([e0, e1]) @ w
    coeffs = _coefficients_from_block(block)
    if coeffs.h_x > 0.0:
        u1 = -u1
        w = np.column_stack([u0, u1])
        block = w.conj().T @ np.diag([e0, e1]) @ w
        coeffs = _coefficients_from_block(block)

    theta, phi1, phi2 = _basis_angles(u0, u1)
    basis = ComputationalBasis1Q(
        u0=u0, u1=u1, o0=o0, o1=o1, valid=True, reason="",
        theta=theta, phi1=phi1, phi2=phi2, degenerate_doublet=degenerate,
    )
    return coeffs, basis


@dataclass(frozen=True)
class PerturbativeBasis:
    """Computational basis frozen at the expansion bias."""

    state0: np.ndarray
    state1: np.ndarray
    ip_element: float  # <E0|O|E1> after phase fixing (physical units)


def perturbative_basis(solution: EigenSolution, observable) -> PerturbativeBasis:
    """Fix |0/1> = (|E0> +- |E1>)/sqrt(2) at the expansion point, with the
    relative phase chosen so the observable cross element is real positive."""
    if solution.k < 2:
        raise ValueError("perturbative reduction needs at least two eigenpairs")
    if solution.degenerate.size and bool(solution.degenerate[:2].any()):
        raise ReductionValidityError(
            "unperturbed doublet is degenerate; the perturbative basis is undefined"
        )
    v0 = solution.vectors[:, 0].copy()
    v1 = solution.vectors[:, 1].copy()
    cross = complex(v0.conj() @ (observable @ v1))
    if abs(cross) < 1e-300:
        raise ReductionValidityError(
            "observable does not couple the two lowest eigenstates"
        )
    v1 *= np.conj(cross) / abs(cross)
    state0 = (v0 + v1) / math.sqrt(2.0)
    state1 = (v0 - v1) / math.sqrt(2.0)
    return PerturbativeBasis(state0, state1, abs(cross))


def perturbative_reduction(
    basis: PerturbativeBasis, hamiltonian
) -> PauliCoefficients1Q:
    """Pauli coefficients at the shifted bias using the frozen basis.

    ``hamiltonian`` is the circuit Hamiltonian (sparse or dense, GHz) at
    the evaluation bias; the trace formula h_i = Tr(H sigma_i)/2 reduces
    to the 2x2 block of H between the frozen computational states.
    """
    states = np.column_stack([basis.state0, basis.state1])
    block = states.conj().T @ (hamiltonian @ states)
    block = 0.5 * (block + block.conj().T)
    return _coefficients_from_block(block)


def reduced_expectations(
    basis: ComputationalBasis1Q, observable, solution: EigenSolution
) -> np.ndarray:
    """Matrix elements of the projected observable between reduced-model
    eigenstates.

    Reconstructs the 2x2 qubit Hamiltonian from the basis, diagonalises
    it, and evaluates <curly-E_i| O_p |curly-E_j>.  For the local
    reduction this reproduces the full-circuit elements exactly.
    """
    op = _projected_observable(solution, observable)
    w = basis.unitary
    o_comp = w.conj().T @ op @ w

    e0, e1 = float(solution.values[0]), float(solution.values[1])
    h_comp = w.conj().T @ np.diag([e0, e1]) @ w
    evals, evecs = np.linalg.eigh(h_comp)
    order = np.argsort(evals)
    evecs = evecs[:, order]
    return evecs.conj().T @ o_comp @ evecs
