"""
Collective spin operators in the Dicke basis |J,m>, m = -J..J.

Index i of every amplitude vector or matrix corresponds to m = i - J.
"""

from dataclasses import dataclass, field
from fractions import Fraction
import logging
import threading

import numpy as np
from scipy.linalg import eigh_tridiagonal

logger = logging.getLogger(__name__)

DENSITY_TOLERANCE = 1e-10


__all__ = [
    "SpinError",
    "SpinLength",
    "DickeVector",
    "DenseOperator",
    "DensityOperator",
    "jz_diagonal",
    "build_jx",
    "rot_x",
    "apply",
    "expectation_jz",
    "variance_jz",
    "expm_taylor",
]


class SpinError(ValueError):
    pass


def _frozen(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class SpinLength:
    """Total spin of N two-level particles, J = N/2."""
    n_particles: int

    def __post_init__(self) -> None:
        if isinstance(self.n_particles, bool) or int(self.n_particles) != self.n_particles or self.n_particles < 1:
            raise SpinError(f"n_particles must be a positive integer, got {self.n_particles!r}")
        object.__setattr__(self, "n_particles", int(self.n_particles))

    @property
    def j(self) -> Fraction:
        return Fraction(self.n_particles, 2)

    @property
    def dim(self) -> int:
        return self.n_particles + 1

    @property
    def integer_j(self) -> bool:
        return self.n_particles % 2 == 0

    def index(self, m: float) -> int:
        """Array index of the Dicke state with projection m."""
        i = m + self.n_particles / 2
        if int(i) != i or not 0 <= i < self.dim:
            raise SpinError(f"m={m} is not a valid projection for J={self.j}")
        return int(i)


@dataclass(frozen=True)
class DickeVector:
    spin: SpinLength
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        amplitudes = np.array(self.amplitudes, dtype=complex)
        if amplitudes.shape != (self.spin.dim,):
            raise SpinError(f"expected {self.spin.dim} amplitudes, got shape {amplitudes.shape}")
        object.__setattr__(self, "amplitudes", _frozen(amplitudes))

    @classmethod
    def normalized(cls, spin: SpinLength, amplitudes: np.ndarray) -> "DickeVector":
        amplitudes = np.asarray(amplitudes, dtype=complex)
        norm = np.linalg.norm(amplitudes)
        if norm == 0:
            raise SpinError("cannot normalize the zero vector")
        return cls(spin, amplitudes / norm)

    @classmethod
    def basis(cls, spin: SpinLength, m: float) -> "DickeVector":
        amplitudes = np.zeros(spin.dim, dtype=complex)
        amplitudes[spin.index(m)] = 1.0
        return cls(spin, amplitudes)

    @property
    def m_values(self) -> np.ndarray:
        return jz_diagonal(self.spin)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def amplitude(self, m: float) -> complex:
        return complex(self.amplitudes[self.spin.index(m)])

    def is_mirror_symmetric(self, atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.amplitudes, self.amplitudes[::-1], rtol=0.0, atol=atol))


@dataclass(frozen=True)
class DenseOperator:
    spin: SpinLength
    entries: np.ndarray = field(repr=False)
    unitary: bool = False
    hermitian: bool = False

    def __post_init__(self) -> None:
        entries = np.array(self.entries, dtype=complex)
        if entries.shape != (self.spin.dim, self.spin.dim):
            raise SpinError(f"expected a {self.spin.dim}x{self.spin.dim} matrix, got shape {entries.shape}")
        object.__setattr__(self, "entries", _frozen(entries))

    def __matmul__(self, other: "DenseOperator") -> "DenseOperator":
        if other.spin != self.spin:
            raise SpinError("operator spin lengths differ")
        return DenseOperator(self.spin, self.entries @ other.entries, unitary=self.unitary and other.unitary)

    def dagger(self) -> "DenseOperator":
        return DenseOperator(self.spin, self.entries.conj().T, unitary=self.unitary, hermitian=self.hermitian)

    def unitarity_defect(self) -> float:
        """Largest entry of |U^dagger U - I|."""
        gram = self.entries.conj().T @ self.entries
        return float(np.max(np.abs(gram - np.eye(self.spin.dim))))


@dataclass(frozen=True)
class DensityOperator:
    """
    A state on the symmetric subspace: Hermitian with unit trace, checked on construction.

    Positivity is checked only when debug logging is enabled.
    """
    spin: SpinLength
    entries: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        entries = np.array(self.entries, dtype=complex)
        if entries.shape != (self.spin.dim, self.spin.dim):
            raise SpinError(f"expected a {self.spin.dim}x{self.spin.dim} matrix, got shape {entries.shape}")
        object.__setattr__(self, "entries", _frozen(entries))
        defect = self.hermiticity_defect()
        if defect > DENSITY_TOLERANCE:
            raise SpinError(f"density operator is not Hermitian (defect {defect:.3g})")
        trace = self.trace()
        if abs(trace - 1) > DENSITY_TOLERANCE:
            raise SpinError(f"density operator must have unit trace, got {trace:.12g}")
        if logger.isEnabledFor(logging.DEBUG):
            lowest = self.min_eigenvalue()
            if lowest < -DENSITY_TOLERANCE:
                raise SpinError(f"density operator has a negative eigenvalue {lowest:.3g}")

    @classmethod
    def from_pure(cls, state: DickeVector) -> "DensityOperator":
        a = state.amplitudes
        return cls(state.spin, np.outer(a, a.conj()))

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def min_eigenvalue(self) -> float:
        hermitian_part = 0.5 * (self.entries + self.entries.conj().T)
        return float(np.linalg.eigvalsh(hermitian_part)[0])

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.entries)).copy()


def jz_diagonal(spin: SpinLength) -> np.ndarray:
    """The Jz spectrum m = -J, ..., J in basis order."""
    return np.arange(spin.dim, dtype=float) - spin.n_particles / 2


def _jx_offdiagonal(spin: SpinLength) -> np.ndarray:
    # <J,m+1|Jx|J,m> = sqrt(J(J+1) - m(m+1)) / 2 for m = -J..J-1
    j = spin.n_particles / 2
    m = jz_diagonal(spin)[:-1]
    return 0.5 * np.sqrt(j * (j + 1) - m * (m + 1))


def build_jx(spin: SpinLength) -> DenseOperator:
    off = _jx_offdiagonal(spin)
    return DenseOperator(spin, np.diag(off, 1) + np.diag(off, -1), hermitian=True)


class _EigenCache:
    """Write-once store of Jx eigensystems keyed by particle number."""
    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._store: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def get(self, spin: SpinLength) -> tuple[np.ndarray, np.ndarray]:
        cached = self._store.get(spin.n_particles)
        if cached is not None:
            return cached
        with self._lock:
            cached = self._store.get(spin.n_particles)
            if cached is None:
                values, vectors = eigh_tridiagonal(np.zeros(spin.dim), _jx_offdiagonal(spin))
                cached = (_frozen(values), _frozen(vectors))
                self._store[spin.n_particles] = cached
                logger.debug("Cached Jx eigensystem for N=%d", spin.n_particles)
        return cached


_jx_eigen = _EigenCache()
_rotation_lock = threading.Lock()
_rotations: dict[tuple[int, float, int], DenseOperator] = {}


def rot_x(spin: SpinLength, angle: float, sign: int = 1) -> DenseOperator:
    """
    Rotation exp(sign * i * angle * Jx) from the spectral decomposition of Jx.

    Args:
        spin (SpinLength): The collective spin.
        angle (float): Rotation angle in radians.
        sign (int): +1 or -1.

    Returns:
        DenseOperator: The unitary rotation, shared read-only between callers.

    Raises:
        SpinError: If the angle is not finite or the sign is not +1/-1.
    """
    if not np.isfinite(angle):
        raise SpinError(f"rotation angle must be finite, got {angle}")
    if sign not in (1, -1):
        raise SpinError(f"sign must be +1 or -1, got {sign}")
    key = (spin.n_particles, float(angle), int(sign))
    cached = _rotations.get(key)
    if cached is not None:
        return cached
    values, vectors = _jx_eigen.get(spin)
    phases = np.exp(1j * sign * angle * values)
    operator = DenseOperator(spin, (vectors * phases) @ vectors.T, unitary=True)
    with _rotation_lock:
        return _rotations.setdefault(key, operator)


def apply(op: DenseOperator, state: DickeVector) -> DickeVector:
    """Matrix-vector product. The result is not renormalized."""
    if op.spin != state.spin:
        raise SpinError(f"dimension mismatch: operator N={op.spin.n_particles}, state N={state.spin.n_particles}")
    return DickeVector(state.spin, op.entries @ state.amplitudes)


def expectation_jz(state: DickeVector) -> float:
    return float(np.dot(state.m_values, np.abs(state.amplitudes) ** 2))


def variance_jz(state: DickeVector) -> float:
    weights = np.abs(state.amplitudes) ** 2
    m = state.m_values
    mean = np.dot(m, weights)
    return max(float(np.dot(m * m, weights) - mean * mean), 0.0)


def expm_taylor(matrix: np.ndarray, terms: int = 24) -> np.ndarray:
    """
    Matrix exponential by scaling and squaring of a truncated Taylor series.

    Reference for rot_x; shares no code with the spectral path.
    """
    matrix = np.asarray(matrix, dtype=complex)
    norm = np.linalg.norm(matrix, 1)
    squarings = max(0, int(np.ceil(np.log2(norm / 0.5)))) if norm > 0.5 else 0
    scaled = matrix / 2 ** squarings
    result = np.eye(matrix.shape[0], dtype=complex)
    term = np.eye(matrix.shape[0], dtype=complex)
    for k in range(1, terms + 1):
        term = term @ scaled / k
        result = result + term
    for _ in range(squarings):
        result = result @ result
    return result
