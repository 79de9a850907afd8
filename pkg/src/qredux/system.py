"""Executable systems built from circuit specs.

:class:`SingleCircuitSystem` turns one :class:`~qredux.circuit.CircuitSpec`
into an assembled Hamiltonian plus its measurement observable.
:func:`build_composite` applies coupling loading to a
:class:`~qredux.circuit.CoupledSystemSpec`, solves every subcircuit, and
projects the interacting Hamiltonian onto the product of per-circuit
low-energy eigenstates, returning everything the multi-qubit reductions
need.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .circuit import (
    CircuitError,
    CircuitSpec,
    CoupledSystemSpec,
    SymbolicHamiltonian,
    assemble_symbolic_hamiltonian,
    apply_coupling_loading,
    branch_flux_map,
)
from .operators import (
    EigenSubspace,
    OperatorMatrix,
    assemble_hamiltonian,
    branch_flux_operator,
    node_charge_operator,
    project_low_energy,
    resolve_bases,
)
from .reduce_single import ComputationalBasis1Q, local_reduction
from .spectra import EigenSolution, lowest_eigenpairs
from .units import COOPER_PAIR, PHI0

DEFAULT_KEEP_QUBIT = 10
DEFAULT_KEEP_COUPLER = 5


@dataclass
class SingleCircuitSystem:
    """One circuit with resolved bases, Hamiltonian and observable."""

    spec: CircuitSpec
    inv_capacitance: np.ndarray | None = None
    inv_inductance: np.ndarray | None = None

    @cached_property
    def symbolic(self) -> SymbolicHamiltonian:
        return assemble_symbolic_hamiltonian(
            self.spec, self.inv_capacitance, self.inv_inductance
        )

    @cached_property
    def bases(self):
        if not self.spec.bases:
            raise CircuitError(
                f"{self.spec.name}: netlist defines no basis for its modes"
            )
        return resolve_bases(self.symbolic, self.spec.bases)

    @cached_property
    def hamiltonian(self) -> OperatorMatrix:
        return assemble_hamiltonian(self.symbolic, self.bases)

    @property
    def dimension(self) -> int:
        return self.hamiltonian.dimension

    @cached_property
    def observable_matrix(self) -> sp.csr_matrix:
        """Measurement observable in physical units (A or C)."""
        obs = self.spec.observable
        if obs is None:
            raise CircuitError(f"{self.spec.name}: netlist defines no observable")
        if obs.kind == "flux_current":
            branch = self.spec.branch(obs.branch)
            coeffs, offset = branch_flux_map(self.spec)[obs.branch]
            flux_op = branch_flux_operator(self.bases, tuple(sorted(coeffs.items())), offset)
            return (PHI0 / (branch.element.value_ph * 1e-12)) * flux_op
        if obs.kind == "island_charge":
            return COOPER_PAIR * node_charge_operator(self.bases, obs.node)
        raise CircuitError(f"{self.spec.name}: unknown observable kind {obs.kind!r}")

    @property
    def observable_kind(self) -> str:
        return "flux" if self.spec.observable.kind == "flux_current" else "charge"

    def solve(self, k: int, tol: float = 1e-10) -> EigenSolution:
        return lowest_eigenpairs(self.hamiltonian, k, tol=tol)


@dataclass
class CompositeSystem:
    """Coupled circuits projected on their low-energy product basis."""

    spec: CoupledSystemSpec
    circuits: tuple[SingleCircuitSystem, ...]
    solutions: tuple[EigenSolution, ...]
    keep: tuple[int, ...]
    h_total: OperatorMatrix
    h_unperturbed: OperatorMatrix
    h_interaction: OperatorMatrix
    observables: dict[int, OperatorMatrix]  # qubit circuit index -> embedded op

    @property
    def dimension(self) -> int:
        return self.h_total.dimension

    @property
    def num_qubits(self) -> int:
        return len(self.spec.qubit_indices)

    def unperturbed_energies(self, circuit_index: int) -> np.ndarray:
        return self.solutions[circuit_index].values[: self.keep[circuit_index]]

    def qubit_local_reductions(self) -> dict[int, tuple]:
        """Local reduction of every (loaded, unperturbed) qubit circuit."""
        out = {}
        for ci in self.spec.qubit_indices:
            coeffs, basis = local_reduction(
                self.solutions[ci],
                self.circuits[ci].observable_matrix,
                self.circuits[ci].observable_kind,
            )
            out[ci] = (coeffs, basis)
        return out

    def computational_product_basis(
        self, qubit_bases: dict[int, ComputationalBasis1Q]
    ) -> np.ndarray:
        """Columns: computational product states (qubit u-vectors, coupler
        ground states) in the projected product eigenbasis.

        Column order follows the binary index i1 i2 ... iN with qubit 1 the
        most significant bit, matching the Kronecker order of the Pauli
        decomposition.
        """
        qubits = self.spec.qubit_indices
        n = len(qubits)
        columns = []
        for code in range(2**n):
            bits = [(code >> (n - 1 - pos)) & 1 for pos in range(n)]
            factors = []
            for ci in range(len(self.circuits)):
                dim = self.keep[ci]
                vec = np.zeros(dim, dtype=complex)
                if ci in qubits:
                    bit = bits[qubits.index(ci)]
                    u = qubit_bases[ci].u1 if bit else qubit_bases[ci].u0
                    vec[:2] = u
                else:
                    vec[0] = 1.0
                factors.append(vec)
            col = factors[0]
            for f in factors[1:]:
                col = np.kron(col, f)
            columns.append(col)
        return np.column_stack(columns)


def interaction_operators(sys_spec: CoupledSystemSpec, circuits) -> list[tuple]:
    """Interaction terms as (circuit_a, op_a, circuit_b, op_b, coeff_ghz)
    with operators on each circuit's full tensor basis."""
    loaded = apply_coupling_loading(sys_spec)
    terms = []
    for term in loaded.interactions:
        ops = []
        for ci, kind, where in (
            (term.circuit_a, term.kind_a, term.where_a),
            (term.circuit_b, term.kind_b, term.where_b),
        ):
            bases = circuits[ci].bases
            if kind == "charge":
                ops.append(node_charge_operator(bases, where))
            elif kind == "branch_flux":
                ops.append(
                    branch_flux_operator(bases, tuple(sorted(where.items())), 0.0)
                )
            else:
                raise CircuitError(f"unknown interaction operator kind {kind!r}")
        terms.append((term.circuit_a, ops[0], term.circuit_b, ops[1], term.coefficient_ghz))
    return terms


def build_composite(
    sys_spec: CoupledSystemSpec,
    keep: tuple[int, ...] | None = None,
    tol: float = 1e-10,
) -> CompositeSystem:
    """Load, solve and project a coupled system.

    ``keep`` overrides the per-circuit numbers of retained eigenstates
    (netlist ``keep`` entries, defaulting to 10 per qubit and 5 per
    coupler).
    """
    loaded = apply_coupling_loading(sys_spec)
    circuits = tuple(
        SingleCircuitSystem(c, loaded.inv_capacitances[i], loaded.inv_inductances[i])
        for i, c in enumerate(sys_spec.subcircuits)
    )

    if keep is None:
        keep = tuple(
            c.keep
            if c.keep is not None
            else (DEFAULT_KEEP_QUBIT if role == "qubit" else DEFAULT_KEEP_COUPLER)
            for c, role in zip(sys_spec.subcircuits, sys_spec.roles)
        )
    if len(keep) != len(circuits):
        raise ValueError("keep counts must match the number of circuits")

    solutions = tuple(
        system.solve(k=k, tol=tol) for system, k in zip(circuits, keep)
    )

    terms = []
    for term in loaded.interactions:
        ops = []
        for ci, kind, where in (
            (term.circuit_a, term.kind_a, term.where_a),
            (term.circuit_b, term.kind_b, term.where_b),
        ):
            bases = circuits[ci].bases
            if kind == "charge":
                ops.append(node_charge_operator(bases, where))
            else:
                ops.append(
                    branch_flux_operator(bases, tuple(sorted(where.items())), 0.0)
                )
        terms.append(
            (term.circuit_a, ops[0], term.circuit_b, ops[1], term.coefficient_ghz)
        )

    extra = {
        f"observable{ci}": (ci, circuits[ci].observable_matrix)
        for ci in sys_spec.qubit_indices
    }
    h_total, h0, h_int, embedded = project_low_energy(
        solutions, list(keep), terms, transformed_ops=extra
    )
    observables = {
        ci: embedded[f"observable{ci}"] for ci in sys_spec.qubit_indices
    }
    return CompositeSystem(
        spec=sys_spec,
        circuits=circuits,
        solutions=solutions,
        keep=keep,
        h_total=h_total,
        h_unperturbed=h0,
        h_interaction=h_int,
        observables=observables,
    )
