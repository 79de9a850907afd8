"""Pauli-string decomposition of small Hermitian matrices.

Strings use the alphabet ``I x y z`` with the identity uppercase, e.g.
``"zIz"`` for sigma_z x I x sigma_z.  Coefficients are real (GHz) and the
decomposition h_s = Tr(H sigma_s) / 2^N is an exact linear bijection with
:func:`pauli_reconstruct`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

SIGMA = {
    "I": np.eye(2, dtype=complex),
    "x": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}

AXES = "Ixyz"


class PauliError(ValueError):
    pass


def pauli_strings(num_qubits: int) -> list[str]:
    return ["".join(s) for s in itertools.product(AXES, repeat=num_qubits)]


def pauli_matrix(string: str) -> np.ndarray:
    out = SIGMA[string[0]]
    for axis in string[1:]:
        out = np.kron(out, SIGMA[axis])
    return out


@dataclass(frozen=True)
class PauliHamiltonian:
    """Map from N-qubit Pauli strings to real coefficients in GHz."""

    num_qubits: int
    coefficients: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for string in self.coefficients:
            if len(string) != self.num_qubits or any(c not in AXES for c in string):
                raise PauliError(f"bad Pauli string {string!r} for N={self.num_qubits}")

    def coefficient(self, string: str) -> float:
        return self.coefficients.get(string, 0.0)

    def significant(self, threshold: float) -> dict[str, float]:
        return {s: v for s, v in self.coefficients.items() if abs(v) > threshold}

    def vector(self) -> np.ndarray:
        """Coefficients in lexicographic string order (I < x < y < z per site)."""
        return np.array([self.coefficient(s) for s in pauli_strings(self.num_qubits)])

    def max_abs(self) -> float:
        return max((abs(v) for v in self.coefficients.values()), default=0.0)


def pauli_decompose(matrix: np.ndarray, num_qubits: int | None = None,
                    herm_tol: float = 1e-10) -> PauliHamiltonian:
    """Exact Pauli-string coefficients of a Hermitian 2^N x 2^N matrix."""
    matrix = np.asarray(matrix)
    dim = matrix.shape[0]
    if matrix.shape != (dim, dim):
        raise PauliError("matrix must be square")
    n = int(round(math.log2(dim))) if num_qubits is None else num_qubits
    if 2**n != dim:
        raise PauliError(f"dimension {dim} is not a power of two")

    scale = max(1.0, float(np.max(np.abs(matrix))))
    defect = float(np.max(np.abs(matrix - matrix.conj().T)))
    if defect > herm_tol * scale:
        raise PauliError(
            f"matrix is not Hermitian: max anti-Hermitian component {defect:.3e}"
        )

    coeffs = {}
    for string in pauli_strings(n):
        value = np.trace(matrix @ pauli_matrix(string)) / dim
        coeffs[string] = float(value.real)
    return PauliHamiltonian(n, coeffs)


def pauli_reconstruct(ph: PauliHamiltonian) -> np.ndarray:
    dim = 2**ph.num_qubits
    out = np.zeros((dim, dim), dtype=complex)
    for string, value in ph.coefficients.items():
        if value != 0.0:
            out += value * pauli_matrix(string)
    return out


# ---------------------------------------------------------------------------
# Local rotations in coefficient space
# ---------------------------------------------------------------------------


def _y_rotation_table(theta: float) -> np.ndarray:
    """Action of conjugation by exp(-i theta sigma_y / 2) on (I, x, y, z)."""
    c, s = math.cos(theta), math.sin(theta)
    table = np.eye(4)
    # x -> c x + s z ; z -> -s x + c z ; I and y unchanged
    table[1, 1], table[1, 3] = c, -s
    table[3, 1], table[3, 3] = s, c
    return table


def apply_local_y_rotations(ph: PauliHamiltonian, angles) -> PauliHamiltonian:
    """Rotate each qubit about its y axis; the spectrum is unchanged."""
    n = ph.num_qubits
    if len(angles) != n:
        raise PauliError(f"need {n} angles, got {len(angles)}")
    tensor = ph.vector().reshape((4,) * n)
    for qubit, theta in enumerate(angles):
        table = _y_rotation_table(theta)
        tensor = np.tensordot(table, tensor, axes=([1], [qubit]))
        tensor = np.moveaxis(tensor, 0, qubit)
    strings = pauli_strings(n)
    flat = tensor.reshape(-1)
    return PauliHamiltonian(n, {s: float(v) for s, v in zip(strings, flat)})


def apply_z_flips(ph: PauliHamiltonian, flips) -> PauliHamiltonian:
    """pi rotations about z on selected qubits: x -> -x, y -> -y there."""
    coeffs = {}
    for string, value in ph.coefficients.items():
        sign = 1.0
        for qubit, flip in enumerate(flips):
            if flip and string[qubit] in "xy":
                sign = -sign
        coeffs[string] = sign * value
    return PauliHamiltonian(ph.num_qubits, coeffs)


def match_sign_continuity(ph: PauliHamiltonian, previous: PauliHamiltonian | None) -> PauliHamiltonian:
    """Choose per-qubit pi z-rotations minimising the distance to the last
    sweep point so coefficient curves stay continuous."""
    if previous is None:
        return ph
    best = ph
    best_dist = None
    n = ph.num_qubits
    prev = previous.vector()
    for mask in range(2**n):
        flips = [(mask >> q) & 1 for q in range(n)]
        candidate = apply_z_flips(ph, flips)
        dist = float(np.linalg.norm(candidate.vector() - prev))
        if best_dist is None or dist < best_dist:
            best, best_dist = candidate, dist
    return best


def remove_mixed_two_local(ph: PauliHamiltonian) -> tuple[PauliHamiltonian, tuple[float, float]]:
    """Null the xz and zx coefficients of a two-qubit Hamiltonian with
    per-qubit y-axis rotations (numerical root-find on the two angles)."""
    if ph.num_qubits != 2:
        raise PauliError("mixed-term removal is defined for two qubits")
    if abs(ph.coefficient("xz")) < 1e-14 and abs(ph.coefficient("zx")) < 1e-14:
        return ph, (0.0, 0.0)

    def residual(angles):
        rotated = apply_local_y_rotations(ph, angles)
        return [rotated.coefficient("xz"), rotated.coefficient("zx")]

    scale = max(ph.max_abs(), 1e-12)
    result = least_squares(residual, x0=[0.0, 0.0], xtol=1e-15, ftol=1e-15, gtol=1e-15)
    if not result.success or np.max(np.abs(result.fun)) > 1e-9 * scale:
        raise PauliError(
            f"could not null mixed two-local terms; residuals {result.fun}"
        )
    angles = (float(result.x[0]), float(result.x[1]))
    return apply_local_y_rotations(ph, angles), angles


# ---------------------------------------------------------------------------
# Two-qubit non-stoquasticity criterion
# ---------------------------------------------------------------------------

_NONSTOQ_STRINGS = ("xI", "Ix", "zI", "Iz", "xx", "yy", "zz")


def nonstoquastic_check(ph: PauliHamiltonian, negligible: float = 1e-3) -> tuple[bool, str]:
    """Two-qubit criterion: non-stoquastic under arbitrary local rotations
    iff all four local x/z fields are nonzero and |h_yy| exceeds both
    |h_xx| and |h_zz|.

    ``negligible`` is the absolute GHz threshold below which a coefficient
    counts as zero.  Raises if strings outside the seven-term form carry
    weight, since the criterion then does not apply.
    """
    if ph.num_qubits != 2:
        raise PauliError("non-stoquasticity criterion is defined for two qubits")
    for string, value in ph.coefficients.items():
        if string == "II" or string in _NONSTOQ_STRINGS:
            continue
        if abs(value) > negligible:
            raise PauliError(
                f"criterion not applicable: unexpected term {string}={value:.4g} GHz"
            )
    locals_ok = all(
        abs(ph.coefficient(s)) > negligible for s in ("xI", "Ix", "zI", "Iz")
    )
    if not locals_ok:
        return False, "a local x or z field vanishes"
    hyy, hxx, hzz = (abs(ph.coefficient(s)) for s in ("yy", "xx", "zz"))
    if hyy <= hxx:
        return False, f"|h_yy|={hyy:.4g} does not exceed |h_xx|={hxx:.4g}"
    if hyy <= hzz:
        return False, f"|h_yy|={hyy:.4g} does not exceed |h_zz|={hzz:.4g}"
    return True, "all clauses satisfied"
