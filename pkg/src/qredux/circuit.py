"""Lumped-element circuit model.

A circuit is a set of nodes (node 0 is ground) connected by capacitor,
inductor and Josephson-junction branches.  A user-supplied spanning tree
fixes the branch-flux convention: tree branches carry no external flux,
closure branches pick up the external flux threading their irreducible
loop.  Inductive branches must belong to the tree.

From a validated :class:`CircuitSpec` this module builds the capacitance
and inverse-inductance matrices, the branch-flux map, and a
:class:`SymbolicHamiltonian` term list ready for operator assembly.
:func:`apply_coupling_loading` handles mutually coupled circuits by
assembling and inverting the block capacitance / branch-inductance
matrices of the composite system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .units import (
    CAP_QUANTUM_GHZ,
    COOPER_PAIR,
    IND_QUANTUM_GHZ,
    JOULE_TO_GHZ,
    PHI0,
)


class CircuitError(ValueError):
    """Structural or physical problem with a circuit specification."""


class SingularMatrixError(CircuitError):
    """A required matrix inversion failed."""


# ---------------------------------------------------------------------------
# Elements and specs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Capacitor:
    value_ff: float


@dataclass(frozen=True)
class Inductor:
    value_ph: float


@dataclass(frozen=True)
class JosephsonJunction:
    """Junction with energy ``ej_ghz`` and parallel capacitance ``cj_ff``.

    ``cjj_control`` optionally names a control parameter f_x (in Phi0) of a
    compound junction; the effective energy is then ej_ghz * cos(pi * f_x).
    """

    ej_ghz: float
    cj_ff: float = 0.0
    cjj_control: str | None = None


@dataclass(frozen=True)
class Branch:
    branch_id: str
    nodes: tuple[int, int]
    element: Capacitor | Inductor | JosephsonJunction

    @property
    def is_inductive(self) -> bool:
        return isinstance(self.element, Inductor)

    @property
    def is_junction(self) -> bool:
        return isinstance(self.element, JosephsonJunction)

    @property
    def capacitance_ff(self) -> float:
        if isinstance(self.element, Capacitor):
            return self.element.value_ff
        if isinstance(self.element, JosephsonJunction):
            return self.element.cj_ff
        return 0.0


@dataclass(frozen=True)
class CurrentBias:
    """Dangling bias inductor L_a at ``node`` carrying current ``current_a``.

    The bias branch is treated as part of the spanning tree.
    """

    node: int
    inductance_ph: float
    current_a: float


@dataclass(frozen=True)
class VoltageBias:
    """Voltage source V_g attached to ``node`` through gate capacitor C_g."""

    node: int
    gate_capacitance_ff: float
    voltage_v: float


@dataclass(frozen=True)
class ObservableSpec:
    """Measurement observable defining the computational basis.

    ``flux_current`` reads the current through an inductive branch;
    ``island_charge`` reads the charge of a node.
    """

    kind: str  # "flux_current" | "island_charge"
    branch: str | None = None
    node: int | None = None


@dataclass(frozen=True)
class BasisSpec:
    """Requested truncated basis for one node mode.

    kind "ho": harmonic-oscillator number states, dimension n_max + 1.  The
    oscillator parameters default to the local quadratic part of the
    Hamiltonian and can be overridden via ``frequency_ghz`` /
    ``flux_zpf_phi0``.

    kind "charge": charge number states n in [-n_max, n_max] shifted by
    ``offset_2e``, dimension 2 n_max + 1.
    """

    kind: str
    n_max: int
    frequency_ghz: float | None = None
    flux_zpf_phi0: float | None = None
    offset_2e: float = 0.0


@dataclass(frozen=True)
class CircuitSpec:
    """Declarative netlist for a single circuit.

    Nodes are numbered 0..num_nodes with 0 = ground.  ``tree`` lists the
    branch ids forming the spanning tree; ``closure_flux`` maps closure
    branch ids to external fluxes in units of Phi0 (missing entries
    default to 0).  ``controls`` holds named compound-junction fluxes.
    """

    name: str
    num_nodes: int
    branches: tuple[Branch, ...]
    tree: frozenset[str]
    closure_flux: dict[str, float] = field(default_factory=dict)
    controls: dict[str, float] = field(default_factory=dict)
    current_bias: CurrentBias | None = None
    voltage_bias: VoltageBias | None = None
    observable: ObservableSpec | None = None
    bases: tuple[BasisSpec, ...] = ()
    #: low-energy eigenstates kept when embedded in a coupled system
    keep: int | None = None

    def __post_init__(self):
        validate_circuit(self)

    def branch(self, branch_id: str) -> Branch:
        for b in self.branches:
            if b.branch_id == branch_id:
                return b
        raise CircuitError(f"{self.name}: no branch {branch_id!r}")

    def closure_branches(self) -> list[Branch]:
        return [b for b in self.branches if b.branch_id not in self.tree]

    def inductive_branches(self) -> list[Branch]:
        return [b for b in self.branches if b.is_inductive]

    def with_flux(self, branch_id: str, value_phi0: float) -> "CircuitSpec":
        flux = dict(self.closure_flux)
        if branch_id not in {b.branch_id for b in self.closure_branches()}:
            raise CircuitError(
                f"{self.name}: {branch_id!r} is not a closure branch"
            )
        flux[branch_id] = value_phi0
        return replace(self, closure_flux=flux)

    def with_control(self, name: str, value_phi0: float) -> "CircuitSpec":
        if name not in self.controls:
            raise CircuitError(f"{self.name}: no control {name!r}")
        controls = dict(self.controls)
        controls[name] = value_phi0
        return replace(self, controls=controls)


@dataclass(frozen=True)
class MutualInductance:
    """Mutual inductance between inductive branches of two circuits."""

    circuit_a: int
    branch_a: str
    circuit_b: int
    branch_b: str
    value_ph: float


@dataclass(frozen=True)
class CouplingCapacitance:
    """Coupling capacitor between nodes of two circuits."""

    circuit_a: int
    node_a: int
    circuit_b: int
    node_b: int
    value_ff: float


@dataclass(frozen=True)
class CoupledSystemSpec:
    """Ordered collection of circuits tagged qubit/coupler plus couplings."""

    name: str
    subcircuits: tuple[CircuitSpec, ...]
    roles: tuple[str, ...]  # "qubit" | "coupler" per subcircuit
    mutual_inductances: tuple[MutualInductance, ...] = ()
    coupling_capacitances: tuple[CouplingCapacitance, ...] = ()

    def __post_init__(self):
        validate_system(self)

    @property
    def qubit_indices(self) -> list[int]:
        return [i for i, r in enumerate(self.roles) if r == "qubit"]

    @property
    def coupler_indices(self) -> list[int]:
        return [i for i, r in enumerate(self.roles) if r == "coupler"]


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate_circuit(spec: CircuitSpec) -> None:
    """Eagerly check all structural invariants of a netlist."""
    n = spec.num_nodes
    if n < 1:
        raise CircuitError(f"{spec.name}: need at least one non-ground node")

    ids = [b.branch_id for b in spec.branches]
    if len(set(ids)) != len(ids):
        raise CircuitError(f"{spec.name}: duplicate branch ids")

    for b in spec.branches:
        i, j = b.nodes
        if not (0 <= i <= n and 0 <= j <= n):
            raise CircuitError(
                f"{spec.name}: branch {b.branch_id} references node outside 0..{n}"
            )
        if i == j:
            raise CircuitError(f"{spec.name}: branch {b.branch_id} is a self-loop")
        if isinstance(b.element, Capacitor) and b.element.value_ff <= 0:
            raise CircuitError(f"{spec.name}: capacitor {b.branch_id} must be > 0")
        if isinstance(b.element, Inductor) and b.element.value_ph <= 0:
            raise CircuitError(f"{spec.name}: inductor {b.branch_id} must be > 0")
        if isinstance(b.element, JosephsonJunction) and b.element.cj_ff < 0:
            raise CircuitError(f"{spec.name}: junction {b.branch_id} has cj < 0")

    unknown_tree = spec.tree - set(ids)
    if unknown_tree:
        raise CircuitError(f"{spec.name}: tree references unknown branches {sorted(unknown_tree)}")

    # Spanning-tree check: exactly n branches, no cycle, reaches every node.
    tree_branches = [b for b in spec.branches if b.branch_id in spec.tree]
    if len(tree_branches) != n:
        raise CircuitError(
            f"{spec.name}: spanning tree must contain exactly {n} branches, "
            f"got {len(tree_branches)}"
        )
    parent = list(range(n + 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for b in tree_branches:
        ri, rj = find(b.nodes[0]), find(b.nodes[1])
        if ri == rj:
            raise CircuitError(f"{spec.name}: spanning tree contains a loop at {b.branch_id}")
        parent[ri] = rj
    root = find(0)
    unreached = [k for k in range(1, n + 1) if find(k) != root]
    if unreached:
        raise CircuitError(f"{spec.name}: spanning tree does not reach nodes {unreached}")

    # No inductive branch may sit in the closure set.
    for b in spec.branches:
        if b.is_inductive and b.branch_id not in spec.tree:
            raise CircuitError(
                f"{spec.name}: inductive branch {b.branch_id} lies in the closure set; "
                "choose a spanning tree containing every inductor"
            )

    closure_ids = {b.branch_id for b in spec.closure_branches()}
    bad_flux = set(spec.closure_flux) - closure_ids
    if bad_flux:
        raise CircuitError(
            f"{spec.name}: flux assigned to non-closure branches {sorted(bad_flux)}"
        )

    for b in spec.branches:
        if b.is_junction and b.element.cjj_control is not None:
            if b.element.cjj_control not in spec.controls:
                raise CircuitError(
                    f"{spec.name}: branch {b.branch_id} references undefined "
                    f"control {b.element.cjj_control!r}"
                )

    if spec.current_bias is not None:
        cb = spec.current_bias
        if not (1 <= cb.node <= n):
            raise CircuitError(f"{spec.name}: current bias node {cb.node} invalid")
        if cb.inductance_ph <= 0:
            raise CircuitError(f"{spec.name}: current bias inductance must be > 0")
    if spec.voltage_bias is not None:
        vb = spec.voltage_bias
        if not (1 <= vb.node <= n):
            raise CircuitError(f"{spec.name}: voltage bias node {vb.node} invalid")
        if vb.gate_capacitance_ff <= 0:
            raise CircuitError(f"{spec.name}: gate capacitance must be > 0")

    if spec.bases and len(spec.bases) != n:
        raise CircuitError(
            f"{spec.name}: {len(spec.bases)} basis specs for {n} node modes"
        )

    if spec.observable is not None:
        obs = spec.observable
        if obs.kind == "flux_current":
            if obs.branch is None:
                raise CircuitError(f"{spec.name}: flux_current observable needs a branch")
            b = spec.branch(obs.branch)
            if not b.is_inductive:
                raise CircuitError(
                    f"{spec.name}: observable branch {obs.branch} is not an inductor"
                )
        elif obs.kind == "island_charge":
            if obs.node is None or not (1 <= obs.node <= n):
                raise CircuitError(f"{spec.name}: island_charge observable needs a valid node")
        else:
            raise CircuitError(f"{spec.name}: unknown observable kind {obs.kind!r}")


def validate_system(sys: CoupledSystemSpec) -> None:
    if len(sys.subcircuits) != len(sys.roles):
        raise CircuitError(f"{sys.name}: roles and subcircuits length mismatch")
    for role in sys.roles:
        if role not in ("qubit", "coupler"):
            raise CircuitError(f"{sys.name}: invalid role {role!r}")
    names = [c.name for c in sys.subcircuits]
    if len(set(names)) != len(names):
        raise CircuitError(f"{sys.name}: duplicate subcircuit names")

    for m in sys.mutual_inductances:
        for ci, bid in ((m.circuit_a, m.branch_a), (m.circuit_b, m.branch_b)):
            if not (0 <= ci < len(sys.subcircuits)):
                raise CircuitError(f"{sys.name}: mutual references circuit {ci}")
            b = sys.subcircuits[ci].branch(bid)
            if not b.is_inductive:
                raise CircuitError(
                    f"{sys.name}: mutual inductance references non-inductive "
                    f"branch {bid} of {sys.subcircuits[ci].name}"
                )
        if m.circuit_a == m.circuit_b:
            raise CircuitError(f"{sys.name}: mutual inductance within one circuit")
        la = sys.subcircuits[m.circuit_a].branch(m.branch_a).element.value_ph
        lb = sys.subcircuits[m.circuit_b].branch(m.branch_b).element.value_ph
        if abs(m.value_ph) >= math.sqrt(la * lb):
            raise CircuitError(
                f"{sys.name}: |M|={abs(m.value_ph)} pH must be < sqrt(L_a L_b)="
                f"{math.sqrt(la * lb):.6g} pH"
            )

    for c in sys.coupling_capacitances:
        if c.value_ff <= 0:
            raise CircuitError(f"{sys.name}: coupling capacitance must be > 0")
        if c.circuit_a == c.circuit_b:
            raise CircuitError(f"{sys.name}: coupling capacitance within one circuit")
        for ci, node in ((c.circuit_a, c.node_a), (c.circuit_b, c.node_b)):
            if not (0 <= ci < len(sys.subcircuits)):
                raise CircuitError(f"{sys.name}: coupling references circuit {ci}")
            if not (1 <= node <= sys.subcircuits[ci].num_nodes):
                raise CircuitError(
                    f"{sys.name}: coupling references node {node} of "
                    f"{sys.subcircuits[ci].name}"
                )


def fallback_spanning_tree(num_nodes: int, branches: tuple[Branch, ...]) -> frozenset[str]:
    """BFS spanning tree preferring inductive, then junction, branches.

    Keeps every inductor out of the closure set whenever the circuit
    topology allows it.
    """

    def priority(b: Branch) -> int:
        if b.is_inductive:
            return 0
        if b.is_junction:
            return 1
        return 2

    ordered = sorted(branches, key=lambda b: (priority(b), b.branch_id))
    parent = list(range(num_nodes + 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    chosen: list[str] = []
    for b in ordered:
        ri, rj = find(b.nodes[0]), find(b.nodes[1])
        if ri != rj:
            parent[ri] = rj
            chosen.append(b.branch_id)
    if len(chosen) != num_nodes:
        raise CircuitError("circuit graph is not connected; no spanning tree exists")
    return frozenset(chosen)


# ---------------------------------------------------------------------------
# Matrices
# ---------------------------------------------------------------------------


def _stamp(matrix: np.ndarray, i: int, j: int, value: float) -> None:
    """Add a two-terminal element between nodes i, j (0 = ground)."""
    if i > 0:
        matrix[i - 1, i - 1] += value
    if j > 0:
        matrix[j - 1, j - 1] += value
    if i > 0 and j > 0:
        matrix[i - 1, j - 1] -= value
        matrix[j - 1, i - 1] -= value


def build_capacitance_matrix(spec: CircuitSpec) -> np.ndarray:
    """N x N node capacitance matrix in fF.

    Diagonal entries hold the total capacitance attached to each node,
    off-diagonal entries minus the inter-node capacitance.  Junction
    parallel capacitances are folded in; a voltage-bias gate capacitor
    adds to its node's diagonal.
    """
    n = spec.num_nodes
    cap = np.zeros((n, n))
    for b in spec.branches:
        c = b.capacitance_ff
        if c > 0:
            _stamp(cap, b.nodes[0], b.nodes[1], c)
    if spec.voltage_bias is not None:
        cap[spec.voltage_bias.node - 1, spec.voltage_bias.node - 1] += (
            spec.voltage_bias.gate_capacitance_ff
        )
    for k in range(n):
        if cap[k, k] == 0.0:
            raise SingularMatrixError(
                f"{spec.name}: node {k + 1} has no capacitance; the kinetic "
                "term is singular"
            )
    return cap


def build_inverse_inductance_matrix(spec: CircuitSpec) -> np.ndarray:
    """N x N inverse-inductance matrix in 1/pH (zero rows allowed)."""
    n = spec.num_nodes
    linv = np.zeros((n, n))
    for b in spec.branches:
        if b.is_inductive:
            _stamp(linv, b.nodes[0], b.nodes[1], 1.0 / b.element.value_ph)
    if spec.current_bias is not None:
        a = spec.current_bias.node - 1
        linv[a, a] += 1.0 / spec.current_bias.inductance_ph
    return linv


def invert_capacitance_matrix(cap: np.ndarray, name: str = "circuit") -> np.ndarray:
    """Inverse of the capacitance matrix with a positive-definiteness check."""
    try:
        chol = np.linalg.cholesky(cap)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(
            f"{name}: capacitance matrix is not positive definite "
            f"(condition number {np.linalg.cond(cap):.3e})"
        ) from exc
    inv_chol = np.linalg.inv(chol)
    inv = inv_chol.T @ inv_chol
    return 0.5 * (inv + inv.T)


def branch_flux_map(spec: CircuitSpec) -> dict[str, tuple[dict[int, float], float]]:
    """Map each branch to its node-flux combination and external offset.

    Branch (i, j) carries flux Phi_i - Phi_j, plus the external flux of its
    irreducible loop if it is a closure branch.  Ground contributes zero.
    Returns ``{branch_id: ({node: coeff}, offset_phi0)}``.
    """
    out: dict[str, tuple[dict[int, float], float]] = {}
    for b in spec.branches:
        coeffs: dict[int, float] = {}
        i, j = b.nodes
        if i > 0:
            coeffs[i] = coeffs.get(i, 0.0) + 1.0
        if j > 0:
            coeffs[j] = coeffs.get(j, 0.0) - 1.0
        offset = 0.0
        if b.branch_id not in spec.tree:
            offset = spec.closure_flux.get(b.branch_id, 0.0)
        out[b.branch_id] = (coeffs, offset)
    return out


# ---------------------------------------------------------------------------
# Symbolic Hamiltonian
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CosineTerm:
    """coefficient_ghz * cos(2 pi * (sum_k c_k phi_k + offset))."""

    node_coeffs: tuple[tuple[int, float], ...]
    coefficient_ghz: float
    offset_phi0: float


@dataclass(frozen=True)
class InteractionTerm:
    """Product coupling  coefficient_ghz * O_a O_b between two circuits.

    Each side is ("charge", node) for a node charge operator in units of
    2e, or ("branch_flux", {node: coeff}) for a branch-flux combination in
    units of Phi0.
    """

    circuit_a: int
    kind_a: str
    where_a: object
    circuit_b: int
    kind_b: str
    where_b: object
    coefficient_ghz: float


@dataclass(frozen=True)
class SymbolicHamiltonian:
    """Unit-resolved term list for one circuit, in GHz.

    H = sum_ij cap_quad[i,j] n_i n_j + sum_ij flux_quad[i,j] phi_i phi_j
        + cosine terms + sum_i flux_linear[i] phi_i
        + sum_i charge_linear[i] n_i + constant.

    ``cap_quad`` and ``flux_quad`` absorb the 1/2 of the quadratic form and
    the unit conversions, so they multiply products of the dimensionless
    operators directly.
    """

    num_modes: int
    cap_quad: np.ndarray
    flux_quad: np.ndarray
    cosines: tuple[CosineTerm, ...]
    flux_linear: np.ndarray
    charge_linear: np.ndarray
    constant_ghz: float

    def effective_charging_ghz(self, mode: int) -> float:
        """Coefficient of n_mode^2, used to pick oscillator parameters."""
        return self.cap_quad[mode, mode]

    def effective_inductive_ghz(self, mode: int) -> float:
        """Coefficient of phi_mode^2."""
        return self.flux_quad[mode, mode]


def effective_junction_energy(branch: Branch, controls: dict[str, float]) -> float:
    """Compound junctions: E_J(f_x) = E_J0 cos(pi f_x)."""
    ej = branch.element.ej_ghz
    if branch.element.cjj_control is not None:
        ej = ej * math.cos(math.pi * controls[branch.element.cjj_control])
    return ej


def assemble_symbolic_hamiltonian(
    spec: CircuitSpec,
    inv_capacitance: np.ndarray | None = None,
    inv_inductance: np.ndarray | None = None,
) -> SymbolicHamiltonian:
    """Full term list of the circuit Hamiltonian in GHz.

    ``inv_capacitance`` (1/fF) and ``inv_inductance`` (1/pH) may be passed
    in pre-loaded form for circuits embedded in a coupled system; they
    default to the isolated-circuit matrices.
    """
    n = spec.num_nodes
    if inv_capacitance is None:
        inv_capacitance = invert_capacitance_matrix(
            build_capacitance_matrix(spec), spec.name
        )
    if inv_inductance is None:
        inv_inductance = build_inverse_inductance_matrix(spec)

    cap_quad = CAP_QUANTUM_GHZ * np.asarray(inv_capacitance, dtype=float)
    flux_quad = IND_QUANTUM_GHZ * np.asarray(inv_inductance, dtype=float)

    flux_map = branch_flux_map(spec)
    cosines = []
    constant = 0.0
    for b in spec.branches:
        if not b.is_junction:
            continue
        ej = effective_junction_energy(b, spec.controls)
        coeffs, offset = flux_map[b.branch_id]
        # E_J (1 - cos(2 pi Phi_b / Phi0))
        constant += ej
        cosines.append(
            CosineTerm(
                node_coeffs=tuple(sorted(coeffs.items())),
                coefficient_ghz=-ej,
                offset_phi0=offset,
            )
        )

    flux_linear = np.zeros(n)
    charge_linear = np.zeros(n)

    if spec.current_bias is not None:
        cb = spec.current_bias
        # (Phi_a - L_a I)^2 / 2 L_a; the quadratic part is already stamped
        # into the inverse-inductance matrix.
        flux_linear[cb.node - 1] += -cb.current_a * PHI0 * JOULE_TO_GHZ
        constant += 0.5 * cb.inductance_ph * 1e-12 * cb.current_a**2 * JOULE_TO_GHZ

    if spec.voltage_bias is not None:
        vb = spec.voltage_bias
        gate_charge = vb.gate_capacitance_ff * 1e-15 * vb.voltage_v  # coulomb
        a = vb.node - 1
        inv_c_si = np.asarray(inv_capacitance, dtype=float) * 1e15  # 1/F
        charge_linear += gate_charge * inv_c_si[a, :] * COOPER_PAIR * JOULE_TO_GHZ
        constant += 0.5 * inv_c_si[a, a] * gate_charge**2 * JOULE_TO_GHZ

    return SymbolicHamiltonian(
        num_modes=n,
        cap_quad=cap_quad,
        flux_quad=flux_quad,
        cosines=tuple(cosines),
        flux_linear=flux_linear,
        charge_linear=charge_linear,
        constant_ghz=constant,
    )


# ---------------------------------------------------------------------------
# Coupling loading (coupled systems)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LoadedSystem:
    """Per-circuit loaded matrices plus cross-circuit interaction terms."""

    inv_capacitances: tuple[np.ndarray, ...]
    inv_inductances: tuple[np.ndarray, ...]
    interactions: tuple[InteractionTerm, ...]


def apply_coupling_loading(sys: CoupledSystemSpec) -> LoadedSystem:
    """Compute loaded inverse matrices and interaction coefficients.

    Capacitive couplings: the block capacitance matrix over all circuits
    (coupling capacitors added to the touched diagonals) is inverted; its
    diagonal blocks are the loaded inverse-capacitance matrices and the
    off-diagonal blocks give the charge-charge couplings.

    Inductive couplings: the branch-inductance block matrix with -M in the
    cross entries is inverted; each branch inductance L_b is replaced by
    1/(Lb^-1)_kk and the cross entries give the branch-flux couplings.

    With no couplings at all the isolated-circuit matrices are returned
    unchanged.
    """
    circuits = sys.subcircuits
    caps = [build_capacitance_matrix(c) for c in circuits]
    linvs = [build_inverse_inductance_matrix(c) for c in circuits]

    mutuals = tuple(m for m in sys.mutual_inductances if m.value_ph != 0.0)
    coupling_caps = tuple(c for c in sys.coupling_capacitances if c.value_ff != 0.0)

    if not mutuals and not coupling_caps:
        inv_caps = tuple(invert_capacitance_matrix(c, s.name) for c, s in zip(caps, circuits))
        return LoadedSystem(inv_caps, tuple(linvs), ())

    interactions: list[InteractionTerm] = []

    # --- capacitive side ---------------------------------------------------
    sizes = [c.num_nodes for c in circuits]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = int(offsets[-1])
    block = np.zeros((total, total))
    for idx, cap in enumerate(caps):
        o = offsets[idx]
        block[o : o + sizes[idx], o : o + sizes[idx]] = cap
    for cc in coupling_caps:
        ia = offsets[cc.circuit_a] + cc.node_a - 1
        ib = offsets[cc.circuit_b] + cc.node_b - 1
        block[ia, ia] += cc.value_ff
        block[ib, ib] += cc.value_ff
        block[ia, ib] -= cc.value_ff
        block[ib, ia] -= cc.value_ff
    try:
        block_inv = np.linalg.inv(block)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(
            f"{sys.name}: assembled capacitance block matrix is singular "
            f"(condition number {np.linalg.cond(block):.3e})"
        ) from exc
    block_inv = 0.5 * (block_inv + block_inv.T)

    inv_caps = []
    for idx in range(len(circuits)):
        o = offsets[idx]
        inv_caps.append(block_inv[o : o + sizes[idx], o : o + sizes[idx]].copy())

    # Keep every appreciable cross entry: three or more circuits may pick up
    # mediated couplings between pairs that share no direct capacitor.
    cross_floor = 1e-14 * np.max(np.abs(block_inv))
    for ia in range(len(circuits)):
        for ib in range(ia + 1, len(circuits)):
            cross = block_inv[
                offsets[ia] : offsets[ia] + sizes[ia],
                offsets[ib] : offsets[ib] + sizes[ib],
            ]
            for k in range(sizes[ia]):
                for l in range(sizes[ib]):
                    if abs(cross[k, l]) <= cross_floor:
                        continue
                    # (Cm^-1)_{kl} Q_k Q_l with Q in units of 2e
                    coeff = 2.0 * CAP_QUANTUM_GHZ * cross[k, l]
                    interactions.append(
                        InteractionTerm(ia, "charge", k + 1, ib, "charge", l + 1, coeff)
                    )

    # --- inductive side ----------------------------------------------------
    if mutuals:
        branch_lists = [c.inductive_branches() for c in circuits]
        branch_index: dict[tuple[int, str], int] = {}
        diag: list[float] = []
        for ci, blist in enumerate(branch_lists):
            for b in blist:
                branch_index[(ci, b.branch_id)] = len(diag)
                diag.append(b.element.value_ph)
        lb = np.diag(diag)
        for m in mutuals:
            ka = branch_index[(m.circuit_a, m.branch_a)]
            kb = branch_index[(m.circuit_b, m.branch_b)]
            lb[ka, kb] -= m.value_ph
            lb[kb, ka] -= m.value_ph
        try:
            lb_inv = np.linalg.inv(lb)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError(
                f"{sys.name}: branch inductance block matrix is singular "
                f"(condition number {np.linalg.cond(lb):.3e})"
            ) from exc
        lb_inv = 0.5 * (lb_inv + lb_inv.T)

        loaded_linvs = []
        for ci, circ in enumerate(circuits):
            linv = np.zeros_like(linvs[ci])
            for b in branch_lists[ci]:
                k = branch_index[(ci, b.branch_id)]
                _stamp(linv, b.nodes[0], b.nodes[1], lb_inv[k, k])
            if circ.current_bias is not None:
                a = circ.current_bias.node - 1
                linv[a, a] += 1.0 / circ.current_bias.inductance_ph
            loaded_linvs.append(linv)

        flux_maps = [branch_flux_map(c) for c in circuits]
        cross_floor_l = 1e-14 * np.max(np.abs(lb_inv))
        for (ca, ba), ka in branch_index.items():
            for (cb, bb), kb in branch_index.items():
                if ca >= cb:
                    continue
                if abs(lb_inv[ka, kb]) <= cross_floor_l:
                    continue
                coeffs_a, off_a = flux_maps[ca][ba]
                coeffs_b, off_b = flux_maps[cb][bb]
                if off_a != 0.0 or off_b != 0.0:
                    raise CircuitError(
                        f"{sys.name}: coupled inductive branch carries an external "
                        "flux offset; inductors must be tree branches"
                    )
                coeff = 2.0 * IND_QUANTUM_GHZ * lb_inv[ka, kb]
                interactions.append(
                    InteractionTerm(
                        ca, "branch_flux", dict(coeffs_a),
                        cb, "branch_flux", dict(coeffs_b),
                        coeff,
                    )
                )
        linvs = loaded_linvs

    inv_caps = [0.5 * (m + m.T) for m in inv_caps]
    return LoadedSystem(tuple(inv_caps), tuple(linvs), tuple(interactions))
