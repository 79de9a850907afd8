"""Physical constants and unit handling.

Internal unit system (all energies as frequencies, h = 1):

* energy / frequency : GHz
* capacitance        : fF
* inductance         : pH
* flux               : units of the flux quantum Phi0
* charge             : units of the Cooper-pair charge 2e

With node flux measured in Phi0 and node charge in 2e the canonical
commutator becomes [phi, n] = i / (2 pi), which is what the operator
builders in :mod:`qredux.operators` implement.
"""

from __future__ import annotations

import re

# Magnetic flux quantum h / 2e, in weber.
PHI0 = 2.0678338e-15

# SI constants (2019 exact values).
PLANCK_H = 6.62607015e-34  # J s
E_CHARGE = 1.602176634e-19  # C
COOPER_PAIR = 2.0 * E_CHARGE

# Energy of (2e)^2 / 2C for C = 1 fF, expressed in GHz.
CAP_QUANTUM_GHZ = COOPER_PAIR**2 / (2.0 * 1e-15) / (PLANCK_H * 1e9)

# Energy of Phi0^2 / 2L for L = 1 pH, expressed in GHz.
IND_QUANTUM_GHZ = PHI0**2 / (2.0 * 1e-12) / (PLANCK_H * 1e9)

# Joule -> GHz conversion.
JOULE_TO_GHZ = 1.0 / (PLANCK_H * 1e9)


def charge_energy_ghz(inv_capacitance_per_ff: float) -> float:
    """Energy (2e)^2 * Cinv / 2 in GHz for Cinv in 1/fF."""
    return CAP_QUANTUM_GHZ * inv_capacitance_per_ff


def flux_energy_ghz(inv_inductance_per_ph: float) -> float:
    """Energy Phi0^2 * Linv / 2 in GHz for Linv in 1/pH."""
    return IND_QUANTUM_GHZ * inv_inductance_per_ph


#: unit suffix -> (canonical unit, multiplier into that unit)
_UNIT_TABLE = {
    "ghz": ("GHz", 1.0),
    "mhz": ("GHz", 1e-3),
    "khz": ("GHz", 1e-6),
    "ff": ("fF", 1.0),
    "pf": ("fF", 1e3),
    "ph": ("pH", 1.0),
    "nh": ("pH", 1e3),
    "uh": ("pH", 1e6),
    "phi0": ("Phi0", 1.0),
    "mphi0": ("Phi0", 1e-3),
    "ua": ("A", 1e-6),
    "na": ("A", 1e-9),
    "a": ("A", 1.0),
    "v": ("V", 1.0),
    "mv": ("V", 1e-3),
    "uv": ("V", 1e-6),
    "2e": ("2e", 1.0),
}

_QUANTITY_RE = re.compile(r"^\s*([+-]?[0-9.eE+-]+)\s*([a-zA-Z0-9]+)\s*$")


class UnitError(ValueError):
    """Raised when a quantity string cannot be parsed or has the wrong unit."""


def parse_quantity(text, expect: str) -> float:
    """Parse a quantity like ``"5 fF"`` or ``"2.5 nH"`` into the canonical unit.

    Parameters
    ----------
    text
        Quantity string with an explicit unit suffix.  Bare numbers are
        rejected so that netlists cannot silently mix unit conventions.
    expect
        Canonical unit the caller requires: one of ``GHz``, ``fF``, ``pH``,
        ``Phi0``, ``A``, ``V``, ``2e``.
    """
    if isinstance(text, (int, float)):
        raise UnitError(
            f"bare number {text!r} given where a quantity with unit "
            f"'{expect}' is required (write e.g. '5 {expect}')"
        )
    match = _QUANTITY_RE.match(text)
    if not match:
        raise UnitError(f"cannot parse quantity {text!r}")
    value_str, unit_str = match.groups()
    key = unit_str.lower()
    if key not in _UNIT_TABLE:
        raise UnitError(f"unknown unit {unit_str!r} in {text!r}")
    canonical, scale = _UNIT_TABLE[key]
    if canonical != expect:
        raise UnitError(f"{text!r} has unit {canonical}, expected {expect}")
    try:
        value = float(value_str)
    except ValueError as exc:
        raise UnitError(f"bad numeric value in {text!r}") from exc
    return value * scale


def format_quantity(value: float, unit: str) -> str:
    """Inverse of :func:`parse_quantity` for netlist round-tripping."""
    return f"{value:.12g} {unit}"
