"""Semiclassical tunnelling amplitudes for one-dimensional double wells.

The rf-SQUID potential in terms of the dimensionless phase
phi = 2 pi Phi / Phi0 reads

    V(phi) = U_L [ (phi - phi_ext)^2 / 2 + beta_L (1 - cos phi) ],

with U_L = (Phi0 / 2 pi)^2 / L the inductive energy and
beta_L = E_J / U_L the screening parameter.  For beta_L >~ 1 and
phi_ext near pi the potential forms an asymmetric double well.  The
tunnelling energy is built from the two symmetrised wells:

    Delta_i = omega_i exp(-S_i / hbar),   Delta = A sqrt(Delta_L Delta_R),

with the tunnelling actions S_i evaluated by adaptive quadrature between
the turning points and A the well-asymmetry factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .reduce_single import PauliCoefficients1Q
from .units import IND_QUANTUM_GHZ, PHI0, PLANCK_H

ACTION_REL_TOL = 1e-10
ROOT_XTOL = 1e-12


class InstantonError(ValueError):
    """Semiclassical treatment not applicable to these parameters."""


@dataclass(frozen=True)
class DoubleWellParams:
    """rf-SQUID semiclassical parameters (energies in GHz)."""

    u_l_ghz: float
    beta_l: float
    phi_ext_rad: float
    capacitance_ff: float

    @classmethod
    def from_circuit(cls, ej_ghz: float, inductance_ph: float,
                     capacitance_ff: float, flux_phi0: float) -> "DoubleWellParams":
        u_l = IND_QUANTUM_GHZ / (2.0 * math.pi**2 * inductance_ph)
        return cls(
            u_l_ghz=u_l,
            beta_l=ej_ghz / u_l,
            phi_ext_rad=2.0 * math.pi * flux_phi0,
            capacitance_ff=capacitance_ff,
        )

    @property
    def inductance_h(self) -> float:
        return (PHI0 / (2.0 * math.pi)) ** 2 / (self.u_l_ghz * PLANCK_H * 1e9)

    def potential(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=float)
        return self.u_l_ghz * (
            0.5 * (phi - self.phi_ext_rad) ** 2 + self.beta_l * (1.0 - np.cos(phi))
        )

    def curvature(self, phi: float) -> float:
        """V''(phi) in GHz per rad^2."""
        return self.u_l_ghz * (1.0 + self.beta_l * math.cos(phi))


@dataclass(frozen=True)
class InstantonResult:
    coefficients: PauliCoefficients1Q
    stationary_points: tuple[float, float, float]  # phi_L, phi_M, phi_R
    well_energies: tuple[float, float]  # E_L, E_R (GHz)
    well_frequencies: tuple[float, float]  # GHz
    barrier_top_ghz: float
    actions_hbar: tuple[float, float]
    splittings: tuple[float, float]  # Delta_L, Delta_R (GHz)
    asymmetry_factor: float


def _stationary_points(params: DoubleWellParams) -> tuple[float, float, float]:
    """Solve beta sin(phi) = phi_ext - phi; require exactly three roots."""
    lo = params.phi_ext_rad - (math.pi + abs(params.beta_l) + 1.0)
    hi = params.phi_ext_rad + (math.pi + abs(params.beta_l) + 1.0)
    grid = np.linspace(lo, hi, 4001)

    def g(phi):
        return phi + params.beta_l * math.sin(phi) - params.phi_ext_rad

    values = grid + params.beta_l * np.sin(grid) - params.phi_ext_rad
    roots = []
    for i in range(grid.size - 1):
        if values[i] == 0.0:
            roots.append(grid[i])
        elif values[i] * values[i + 1] < 0.0:
            roots.append(brentq(g, grid[i], grid[i + 1], xtol=ROOT_XTOL))
    roots = sorted(set(round(r, 11) for r in roots))
    if len(roots) != 3:
        raise InstantonError(
            f"potential has {len(roots)} stationary points, need exactly 3 "
            "(no double well at this bias)"
        )
    return tuple(roots)


def _well_frequency_ghz(params: DoubleWellParams, phi: float) -> float:
    """Harmonic frequency sqrt((1 + beta cos phi) / L C), returned in GHz."""
    l_h = params.inductance_h
    c_f = params.capacitance_ff * 1e-15
    omega = math.sqrt((1.0 + params.beta_l * math.cos(phi)) / (l_h * c_f))
    return omega / (2.0 * math.pi * 1e9)


def _action_over_hbar(params: DoubleWellParams, phi_m: float, phi_inner: float,
                      energy_ghz: float, left: bool) -> float:
    """Tunnelling action S/hbar through the symmetrised barrier.

    The symmetrised potential mirrors V about phi_m, so the integral over
    the full barrier is twice the integral from the inner turning point to
    phi_m.
    """
    c_f = params.capacitance_ff * 1e-15
    kappa = (PHI0 / (2.0 * math.pi)) / (PLANCK_H / (2.0 * math.pi)) * math.sqrt(
        2.0 * c_f * PLANCK_H * 1e9
    )

    def integrand(phi):
        gap = params.potential(phi) - energy_ghz
        return math.sqrt(max(gap, 0.0))

    a, b = (phi_inner, phi_m) if left else (phi_m, phi_inner)
    value, _ = quad(integrand, a, b, epsrel=ACTION_REL_TOL, epsabs=0.0, limit=200)
    return 2.0 * kappa * abs(value)


def instanton_reduction(params: DoubleWellParams) -> InstantonResult:
    """Semiclassical two-level reduction of an rf-SQUID double well.

    Returns the Pauli coefficients in the persistent-current basis:
    h_x = -Delta, h_z = (E_R - E_L)/2, h_I = (E_R + E_L)/2.
    """
    phi_l, phi_m, phi_r = _stationary_points(params)
    if params.curvature(phi_l) <= 0 or params.curvature(phi_r) <= 0:
        raise InstantonError("outer stationary points are not minima")
    if params.curvature(phi_m) >= 0:
        raise InstantonError("central stationary point is not a barrier top")

    omega_l = _well_frequency_ghz(params, phi_l)
    omega_r = _well_frequency_ghz(params, phi_r)
    e_l = float(params.potential(phi_l)) + 0.5 * omega_l
    e_r = float(params.potential(phi_r)) + 0.5 * omega_r
    v0 = float(params.potential(phi_m))
    if e_l >= v0 or e_r >= v0:
        raise InstantonError(
            "well ground energy lies above the barrier top; no bound "
            "tunnelling regime"
        )

    # Inner turning points V(phi) = E_i on the barrier side of each well.
    turn_l = brentq(lambda p: float(params.potential(p)) - e_l, phi_l, phi_m, xtol=ROOT_XTOL)
    turn_r = brentq(lambda p: float(params.potential(p)) - e_r, phi_m, phi_r, xtol=ROOT_XTOL)

    s_l = _action_over_hbar(params, phi_m, turn_l, e_l, left=True)
    s_r = _action_over_hbar(params, phi_m, turn_r, e_r, left=False)

    delta_l = omega_l * math.exp(-s_l)
    delta_r = omega_r * math.exp(-s_r)
    ratio = (v0 - e_l) / (v0 - e_r)
    asym = 0.5 * (ratio**0.25 + ratio**-0.25)
    delta = asym * math.sqrt(delta_l * delta_r)

    coeffs = PauliCoefficients1Q(
        h_i=0.5 * (e_r + e_l),
        h_x=-delta,
        h_y=0.0,
        h_z=0.5 * (e_r - e_l),
    )
    return InstantonResult(
        coefficients=coeffs,
        stationary_points=(phi_l, phi_m, phi_r),
        well_energies=(e_l, e_r),
        well_frequencies=(omega_l, omega_r),
        barrier_top_ghz=v0,
        actions_hbar=(s_l, s_r),
        splittings=(delta_l, delta_r),
        asymmetry_factor=asym,
    )
