"""Netlist file format.

A netlist is a JSON document (see docs/netlist_schema.md for the full
schema).  All physical values carry explicit unit suffixes such as
``"5 fF"``, ``"2.5 nH"``, ``"0.5 Phi0"``.  Unknown keys are rejected.

Single circuit::

    {
      "format": "qredux-netlist-v1",
      "name": "rf_squid",
      "nodes": 1,
      "branches": [
        {"id": "L", "nodes": [1, 0], "element": "L", "value": "2.5 nH"},
        {"id": "JJ", "nodes": [1, 0], "element": "JJ", "ej": "125 GHz", "cj": "5 fF"}
      ],
      "tree": ["L"],
      "fluxes": {"JJ": "0.5 Phi0"},
      "basis": [{"kind": "ho", "n_max": 40}],
      "observable": {"kind": "flux_current", "branch": "L"}
    }

Coupled system: a top-level ``circuits`` list (each entry a circuit object
with an extra ``role``) plus a ``couplings`` section with ``mutual`` and
``capacitive`` entries referencing circuits by name.
"""

from __future__ import annotations

import hashlib
import json
from importlib import resources
from pathlib import Path

from .circuit import (
    BasisSpec,
    Branch,
    Capacitor,
    CircuitSpec,
    CoupledSystemSpec,
    CouplingCapacitance,
    CurrentBias,
    Inductor,
    JosephsonJunction,
    MutualInductance,
    ObservableSpec,
    VoltageBias,
    fallback_spanning_tree,
)
from .units import parse_quantity

FORMAT_TAG = "qredux-netlist-v1"


class NetlistError(ValueError):
    """Malformed netlist document."""


def _check_keys(obj: dict, allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise NetlistError(f"{where}: unknown keys {sorted(unknown)}")


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise NetlistError(f"{where}: missing required key {key!r}")
    return obj[key]


def _parse_branch(obj: dict, where: str) -> Branch:
    _check_keys(obj, {"id", "nodes", "element", "value", "ej", "cj", "cjj_flux"}, where)
    branch_id = str(_require(obj, "id", where))
    nodes = _require(obj, "nodes", where)
    if not (isinstance(nodes, list) and len(nodes) == 2):
        raise NetlistError(f"{where}: 'nodes' must be a pair")
    kind = _require(obj, "element", where)
    if kind == "C":
        element = Capacitor(parse_quantity(_require(obj, "value", where), "fF"))
    elif kind == "L":
        element = Inductor(parse_quantity(_require(obj, "value", where), "pH"))
    elif kind == "JJ":
        ej = parse_quantity(_require(obj, "ej", where), "GHz")
        cj = parse_quantity(obj["cj"], "fF") if "cj" in obj else 0.0
        element = JosephsonJunction(ej, cj, obj.get("cjj_flux"))
    else:
        raise NetlistError(f"{where}: unknown element kind {kind!r}")
    if kind != "JJ" and ("ej" in obj or "cj" in obj or "cjj_flux" in obj):
        raise NetlistError(f"{where}: junction fields given for element {kind!r}")
    if kind == "JJ" and "value" in obj:
        raise NetlistError(f"{where}: junctions take 'ej'/'cj', not 'value'")
    return Branch(branch_id, (int(nodes[0]), int(nodes[1])), element)


def _parse_basis(entries, where: str) -> tuple[BasisSpec, ...]:
    out = []
    for idx, obj in enumerate(entries):
        here = f"{where}.basis[{idx}]"
        _check_keys(obj, {"kind", "n_max", "frequency", "flux_zpf", "offset"}, here)
        kind = _require(obj, "kind", here)
        n_max = int(_require(obj, "n_max", here))
        freq = parse_quantity(obj["frequency"], "GHz") if "frequency" in obj else None
        zpf = parse_quantity(obj["flux_zpf"], "Phi0") if "flux_zpf" in obj else None
        offset = parse_quantity(obj["offset"], "2e") if "offset" in obj else 0.0
        out.append(BasisSpec(kind, n_max, freq, zpf, offset))
    return tuple(out)


def _parse_observable(obj: dict, where: str) -> ObservableSpec:
    _check_keys(obj, {"kind", "branch", "node"}, where)
    return ObservableSpec(
        kind=str(_require(obj, "kind", where)),
        branch=obj.get("branch"),
        node=obj.get("node"),
    )


def _parse_biases(obj: dict, where: str) -> tuple[CurrentBias | None, VoltageBias | None]:
    _check_keys(obj, {"current", "voltage"}, where)
    current = voltage = None
    if "current" in obj:
        c = obj["current"]
        _check_keys(c, {"node", "inductance", "current"}, f"{where}.current")
        current = CurrentBias(
            node=int(_require(c, "node", where)),
            inductance_ph=parse_quantity(_require(c, "inductance", where), "pH"),
            current_a=parse_quantity(_require(c, "current", where), "A"),
        )
    if "voltage" in obj:
        v = obj["voltage"]
        _check_keys(v, {"node", "capacitance", "voltage"}, f"{where}.voltage")
        voltage = VoltageBias(
            node=int(_require(v, "node", where)),
            gate_capacitance_ff=parse_quantity(_require(v, "capacitance", where), "fF"),
            voltage_v=parse_quantity(_require(v, "voltage", where), "V"),
        )
    return current, voltage


_CIRCUIT_KEYS = {
    "format", "name", "role", "nodes", "branches", "tree", "fluxes",
    "controls", "biases", "basis", "observable", "keep",
}


def _parse_circuit(obj: dict, where: str, allow_role: bool) -> tuple[CircuitSpec, str]:
    _check_keys(obj, _CIRCUIT_KEYS, where)
    name = str(_require(obj, "name", where))
    role = obj.get("role", "qubit")
    if not allow_role and "role" in obj:
        raise NetlistError(f"{where}: 'role' only applies inside a coupled system")
    if role not in ("qubit", "coupler"):
        raise NetlistError(f"{where}: role must be 'qubit' or 'coupler'")

    num_nodes = int(_require(obj, "nodes", where))
    branches = tuple(
        _parse_branch(b, f"{where}.branches[{i}]")
        for i, b in enumerate(_require(obj, "branches", where))
    )
    if "tree" in obj:
        tree = frozenset(str(t) for t in obj["tree"])
    else:
        tree = fallback_spanning_tree(num_nodes, branches)

    fluxes = {
        str(k): parse_quantity(v, "Phi0") for k, v in obj.get("fluxes", {}).items()
    }
    controls = {
        str(k): parse_quantity(v, "Phi0") for k, v in obj.get("controls", {}).items()
    }
    current, voltage = (None, None)
    if "biases" in obj:
        current, voltage = _parse_biases(obj["biases"], f"{where}.biases")

    basis = _parse_basis(obj.get("basis", []), where)
    observable = (
        _parse_observable(obj["observable"], f"{where}.observable")
        if "observable" in obj
        else None
    )

    spec = CircuitSpec(
        name=name,
        num_nodes=num_nodes,
        branches=branches,
        tree=tree,
        closure_flux=fluxes,
        controls=controls,
        current_bias=current,
        voltage_bias=voltage,
        observable=observable,
        bases=basis,
        keep=int(obj["keep"]) if "keep" in obj else None,
    )
    return spec, role


def _parse_couplings(obj: dict, circuits: list[CircuitSpec], where: str):
    _check_keys(obj, {"mutual", "capacitive"}, where)
    index = {c.name: i for i, c in enumerate(circuits)}

    def circuit_index(name, here):
        if name not in index:
            raise NetlistError(f"{here}: unknown circuit {name!r}")
        return index[name]

    mutuals = []
    for i, m in enumerate(obj.get("mutual", [])):
        here = f"{where}.mutual[{i}]"
        _check_keys(m, {"circuits", "branches", "value"}, here)
        ca, cb = _require(m, "circuits", here)
        ba, bb = _require(m, "branches", here)
        mutuals.append(
            MutualInductance(
                circuit_index(ca, here), str(ba),
                circuit_index(cb, here), str(bb),
                parse_quantity(_require(m, "value", here), "pH"),
            )
        )
    caps = []
    for i, c in enumerate(obj.get("capacitive", [])):
        here = f"{where}.capacitive[{i}]"
        _check_keys(c, {"circuits", "nodes", "value"}, here)
        ca, cb = _require(c, "circuits", here)
        na, nb = _require(c, "nodes", here)
        caps.append(
            CouplingCapacitance(
                circuit_index(ca, here), int(na),
                circuit_index(cb, here), int(nb),
                parse_quantity(_require(c, "value", here), "fF"),
            )
        )
    return tuple(mutuals), tuple(caps)


def parse_netlist(doc: dict) -> CircuitSpec | CoupledSystemSpec:
    """Parse a loaded JSON document into a circuit or coupled-system spec."""
    if not isinstance(doc, dict):
        raise NetlistError("netlist root must be a JSON object")
    fmt = doc.get("format")
    if fmt != FORMAT_TAG:
        raise NetlistError(f"unsupported netlist format {fmt!r}; expected {FORMAT_TAG!r}")

    if "circuits" in doc:
        _check_keys(doc, {"format", "name", "circuits", "couplings"}, "netlist")
        name = str(_require(doc, "name", "netlist"))
        parsed = [
            _parse_circuit(c, f"circuits[{i}]", allow_role=True)
            for i, c in enumerate(doc["circuits"])
        ]
        circuits = [p[0] for p in parsed]
        roles = tuple(p[1] for p in parsed)
        mutuals, caps = ((), ())
        if "couplings" in doc:
            mutuals, caps = _parse_couplings(doc["couplings"], circuits, "couplings")
        return CoupledSystemSpec(
            name=name,
            subcircuits=tuple(circuits),
            roles=roles,
            mutual_inductances=mutuals,
            coupling_capacitances=caps,
        )

    spec, _ = _parse_circuit(doc, "netlist", allow_role=False)
    return spec


def load_netlist(path) -> CircuitSpec | CoupledSystemSpec:
    """Load and parse a netlist file."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetlistError(f"{path}: invalid JSON ({exc})") from exc
    return parse_netlist(doc)


def netlist_hash(path) -> str:
    """Short content hash used in output provenance headers."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def bundled_netlist_path(name: str) -> Path:
    """Path of a packaged example netlist such as ``rf_squid``."""
    candidate = resources.files("qredux").joinpath("netlists", f"{name}.json")
    with resources.as_file(candidate) as path:
        if not path.exists():
            raise NetlistError(f"no bundled netlist named {name!r}")
        return Path(path)


def load_bundled(name: str) -> CircuitSpec | CoupledSystemSpec:
    return load_netlist(bundled_netlist_path(name))
