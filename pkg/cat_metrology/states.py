"""
Spin coherent states, their mirror superpositions and the analytic descriptors of spin cat states.
"""

from dataclasses import dataclass
import logging
import math
import threading

import numpy as np
from scipy.special import xlogy

from .spin import SpinLength, DickeVector, jz_diagonal

logger = logging.getLogger(__name__)


class StateError(ValueError):
    pass


@dataclass(frozen=True)
class CatSpec:
    """An input mirror-symmetric superposition |theta, azimuth> + |pi - theta, azimuth>."""
    n_particles: int
    theta: float
    azimuth: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.theta < math.pi / 2:
            raise StateError(f"cat theta must lie in [0, pi/2), got {self.theta}")

    @property
    def spin(self) -> SpinLength:
        return SpinLength(self.n_particles)


_log_factorial_lock = threading.Lock()
_log_factorials = np.zeros(1)


def _log_factorial_table(n: int) -> np.ndarray:
    """ln(k!) for k = 0..n as cumulative log sums."""
    global _log_factorials
    table = _log_factorials
    if table.size > n:
        return table
    with _log_factorial_lock:
        if _log_factorials.size <= n:
            size = max(n + 1, 2 * _log_factorials.size)
            table = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, size)))))
            table.flags.writeable = False
            _log_factorials = table
            logger.debug("Extended log-factorial table to %d entries", size)
        return _log_factorials


def log_binomial(n: int, k: np.ndarray) -> np.ndarray:
    table = _log_factorial_table(n)
    k = np.asarray(k, dtype=int)
    return table[n] - table[k] - table[n - k]


def scs_coefficients(spin: SpinLength, theta: float) -> np.ndarray:
    """
    Real coefficients c_m(theta) = sqrt(C(2J, J+m)) cos^(J+m)(theta/2) sin^(J-m)(theta/2), computed in log space.
    """
    if not 0.0 <= theta <= math.pi:
        raise StateError(f"theta must lie in [0, pi], got {theta}")
    n = spin.n_particles
    up = np.arange(spin.dim)  # J + m
    log_c = (0.5 * log_binomial(n, up)
             + xlogy(up, math.cos(theta / 2))
             + xlogy(n - up, math.sin(theta / 2)))
    return np.exp(log_c)


def scs(spin: SpinLength, theta: float, azimuth: float = 0.0) -> DickeVector:
    c = scs_coefficients(spin, theta)
    phases = np.exp(-1j * np.arange(spin.dim) * azimuth)
    return DickeVector.normalized(spin, c * phases)


def msscs(spin: SpinLength, theta: float) -> DickeVector:
    """Equal-weight superposition of the coherent states at theta and pi - theta (same azimuth)."""
    if not 0.0 <= theta < math.pi / 2:
        raise StateError(f"msscs needs theta in [0, pi/2), got {theta}; use scs for theta = pi/2")
    c = scs_coefficients(spin, theta)
    return DickeVector.normalized(spin, c + c[::-1])


def cat_state(spec: CatSpec) -> DickeVector:
    spin = spec.spin
    state = msscs(spin, spec.theta)
    if spec.azimuth == 0.0:
        return state
    phases = np.exp(-1j * np.arange(spin.dim) * spec.azimuth)
    return DickeVector(spin, state.amplitudes * phases)


def branch_overlap(spin: SpinLength, theta: float) -> float:
    """<theta|pi - theta> between the two coherent branches; equals sin(theta)^N."""
    c = scs_coefficients(spin, theta)
    return float(np.dot(c, c[::-1]))


def normalization_factor(spin: SpinLength, theta: float) -> float:
    return 1.0 / math.sqrt(2.0 + 2.0 * branch_overlap(spin, theta))


def cat_threshold(spin: SpinLength) -> float:
    """
    Largest theta for which the mirror superposition still counts as a cat state.

    Args:
        spin (SpinLength): The collective spin, N >= 4.

    Returns:
        float: theta_c = arcsin(2 [((J-1)!)^2 / (2 (2J)!)]^(1/2J)).

    Raises:
        StateError: If N < 4.
    """
    if spin.n_particles < 4:
        raise StateError(f"cat threshold needs N >= 4, got {spin.n_particles}")
    j = spin.n_particles / 2
    log_ratio = 2 * math.lgamma(j) - math.log(2.0) - math.lgamma(2 * j + 1)
    return math.asin(min(1.0, 2.0 * math.exp(log_ratio / (2 * j))))


def is_cat(spin: SpinLength, theta: float) -> bool:
    return 0.0 <= theta <= cat_threshold(spin)


def _tan_half_squared(theta: float) -> float:
    if not 0.0 <= theta < math.pi / 2:
        raise StateError(f"theta must lie in [0, pi/2), got {theta}")
    return math.tan(theta / 2) ** 2


def mbar(spin: SpinLength, theta: float, mode: str = "exact") -> float:
    """Peak location of the upper coherent lobe in m."""
    t2 = _tan_half_squared(theta)
    if mode == "exact":
        return float(spin.j) * (1 - t2) / (1 + t2) + 1 / (1 + t2)
    if mode == "approx":
        return spin.n_particles / 2 * (1 - t2) / (1 + t2)
    raise StateError(f"unknown mbar mode {mode!r}")


def mbar_index(spin: SpinLength, theta: float) -> int:
    """Nearest integer m to the exact peak, ties to even."""
    return round(mbar(spin, theta))


def c_coefficient(theta: float) -> float:
    """Prefactor C(theta) of the cat-state bound C(theta)/N; equals 1/cos(theta)."""
    t2 = _tan_half_squared(theta)
    return 1 + 2 * t2 / (1 - t2)


def qfi_approx(spin: SpinLength, theta: float) -> float:
    return 4 * mbar(spin, theta, mode="approx") ** 2


def peak_m(state: DickeVector) -> float:
    """m of the largest-modulus amplitude on the m >= 0 side."""
    m = jz_diagonal(state.spin)
    weights = np.where(m >= 0, np.abs(state.amplitudes), -1.0)
    return float(m[int(np.argmax(weights))])
