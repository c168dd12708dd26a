"""
Fisher information, Cramer-Rao bounds, error-propagation precision and Gaussian detection noise.
"""

from dataclasses import dataclass, replace
from enum import Enum
import logging
import math
import threading

import numpy as np

from .spin import SpinLength, DickeVector, DensityOperator, jz_diagonal, variance_jz
from .states import CatSpec, cat_threshold, c_coefficient, mbar
from .evolution import (
    ReadoutConfig, DephasingConfig, HALF_PI,
    final_state, final_state_derivative, dephased_readout, readout_closed_form,
    check_closed_form_input,
)

logger = logging.getLogger(__name__)

PROBABILITY_FLOOR = 1e-14
DERIVATIVE_FLOOR = 1e-12
SLOPE_FLOOR = 1e-12


class EstimationError(ValueError):
    pass


class OutsideCatRegime(EstimationError):
    pass


class Method(str, Enum):
    ERROR_PROPAGATION = "error-propagation"
    CFI_BOUND = "cfi-bound"
    QCRB = "qcrb"


class Flag(str, Enum):
    NONE = ""
    DIVERGENT_SLOPE = "divergent-slope"
    DIVERGENT_INFORMATION = "divergent-information"


@dataclass(frozen=True)
class NoiseModel:
    """Gaussian detection noise with standard deviation sigma, in units of m."""
    sigma: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.sigma) or self.sigma < 0:
            raise EstimationError(f"sigma must be finite and >= 0, got {self.sigma}")


@dataclass(frozen=True)
class PrecisionResult:
    delta_phi: float
    method: Method
    phi: float
    tau: float
    sigma: float = 0.0
    gamma_ratio: float = 0.0
    mu: int = 1
    flag: Flag = Flag.NONE

    @property
    def divergent(self) -> bool:
        return self.flag is not Flag.NONE


@dataclass(frozen=True)
class ProbabilityDistribution:
    spin: SpinLength
    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.array(self.probs, dtype=float)
        if probs.shape != (self.spin.dim,):
            raise EstimationError(f"expected {self.spin.dim} probabilities, got shape {probs.shape}")
        if np.any(probs < -PROBABILITY_FLOOR):
            raise EstimationError(f"negative probability {probs.min()}")
        probs = np.clip(probs, 0.0, None)
        total = probs.sum()
        if abs(total - 1.0) > 1e-10:
            raise EstimationError(f"probabilities sum to {total}")
        probs = probs / total
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)

    def mean(self) -> float:
        return float(np.dot(jz_diagonal(self.spin), self.probs))

    def variance(self) -> float:
        m = jz_diagonal(self.spin)
        mean = np.dot(m, self.probs)
        return max(float(np.dot(m * m, self.probs) - mean * mean), 0.0)


def qfi_jz(state: DickeVector) -> float:
    return 4.0 * variance_jz(state)


def qcrb(fisher: float, mu: int = 1) -> float:
    if not fisher > 0:
        raise EstimationError(f"Fisher information must be positive, got {fisher}")
    if mu < 1:
        raise EstimationError(f"mu must be a positive integer, got {mu}")
    return 1.0 / math.sqrt(mu * fisher)


def qcrb_analytic_cat(spec: CatSpec) -> float:
    """
    C(theta)/N, valid only for cat states with N >= 40.

    Raises:
        OutsideCatRegime: If N < 40 or theta exceeds the cat threshold.
    """
    spin = spec.spin
    if spin.n_particles < 40:
        raise OutsideCatRegime(f"analytic bound needs N >= 40, got {spin.n_particles}")
    threshold = cat_threshold(spin)
    if spec.theta > threshold:
        raise OutsideCatRegime(
            f"theta={spec.theta:.6g} exceeds the cat threshold {threshold:.6g} for N={spin.n_particles}")
    return c_coefficient(spec.theta) / spin.n_particles


def probabilities(state: DickeVector) -> ProbabilityDistribution:
    return ProbabilityDistribution(state.spin, np.abs(state.amplitudes) ** 2)


def probabilities_rho(rho: DensityOperator) -> ProbabilityDistribution:
    return ProbabilityDistribution(rho.spin, rho.populations())


_kernel_lock = threading.Lock()
_kernels: dict[tuple[int, float], np.ndarray] = {}


def noise_kernel(spin: SpinLength, sigma: float) -> np.ndarray:
    """
    Column-stochastic Gaussian blur K[m, n] = A_n exp(-(m - n)^2 / 2 sigma^2).

    Each source column n is normalized over the truncated range m = -J..J.
    """
    key = (spin.n_particles, float(sigma))
    kernel = _kernels.get(key)
    if kernel is not None:
        return kernel
    if sigma == 0:
        kernel = np.eye(spin.dim)
    else:
        m = jz_diagonal(spin)
        kernel = np.exp(-((m[:, None] - m[None, :]) ** 2) / (2 * sigma * sigma))
        kernel = kernel / kernel.sum(axis=0, keepdims=True)
    kernel.flags.writeable = False
    with _kernel_lock:
        kernel = _kernels.setdefault(key, kernel)
    logger.debug("Noise kernel ready for N=%d, sigma=%g", spin.n_particles, sigma)
    return kernel


def apply_detection_noise(p: ProbabilityDistribution, noise: NoiseModel) -> ProbabilityDistribution:
    if noise.sigma == 0:
        return p
    return ProbabilityDistribution(p.spin, noise_kernel(p.spin, noise.sigma) @ p.probs)


def blur_derivative(spin: SpinLength, dp: np.ndarray, noise: NoiseModel) -> np.ndarray:
    """The kernel does not depend on phi, so the derivative is blurred with the same kernel."""
    if noise.sigma == 0:
        return np.asarray(dp, dtype=float)
    return noise_kernel(spin, noise.sigma) @ dp


def derivative_distribution(state_in: DickeVector, phi: float, cfg: ReadoutConfig) -> np.ndarray:
    """dP_m/d(phi) = 2 Re(conj(psi_f,m) d(psi_f,m)/d(phi)) for the pure readout."""
    psi = final_state(state_in, phi, cfg).amplitudes
    dpsi = final_state_derivative(state_in, phi, cfg)
    return 2.0 * np.real(np.conj(psi) * dpsi)


def readout_distribution(state_in: DickeVector, phi: float, cfg: ReadoutConfig,
                         dephasing: DephasingConfig | None = None) -> tuple[ProbabilityDistribution, np.ndarray]:
    """Outcome distribution and its phase derivative; pure path without dephasing, density path otherwise."""
    if dephasing is None or dephasing.is_unitary:
        p = probabilities(final_state(state_in, phi, cfg))
        return p, derivative_distribution(state_in, phi, cfg)
    rho, drho = dephased_readout(state_in, phi, cfg.tau, dephasing)
    return probabilities_rho(rho), np.real(np.diag(drho)).copy()


def cfi(p: ProbabilityDistribution, dp: np.ndarray) -> float:
    """
    Classical Fisher information sum (dP_m)^2 / P_m.

    Bins with P_m below 1e-14 and |dP_m| below 1e-12 are skipped. A bin with P_m = 0 and a non-negligible
    derivative makes the information divergent, reported as inf.
    """
    probs = p.probs
    dp = np.asarray(dp, dtype=float)
    if dp.shape != probs.shape:
        raise EstimationError(f"derivative has shape {dp.shape}, distribution {probs.shape}")
    negligible = (probs < PROBABILITY_FLOOR) & (np.abs(dp) < DERIVATIVE_FLOOR)
    keep = ~negligible
    if np.any(keep & (probs <= 0)):
        logger.warning("Divergent Fisher information: zero probability with non-zero derivative")
        return math.inf
    return float(np.sum(dp[keep] ** 2 / probs[keep]))


def _noisy_moments(state_in: DickeVector, phi: float, cfg: ReadoutConfig, noise: NoiseModel,
                   dephasing: DephasingConfig | None) -> tuple[ProbabilityDistribution, np.ndarray]:
    p, dp = readout_distribution(state_in, phi, cfg, dephasing)
    return apply_detection_noise(p, noise), blur_derivative(p.spin, dp, noise)


def error_propagation_precision(state_in: DickeVector, phi: float, cfg: ReadoutConfig,
                                noise: NoiseModel = NoiseModel(), dephasing: DephasingConfig | None = None,
                                mu: int = 1) -> PrecisionResult:
    """
    Delta(phi) = (Delta Jz)_f / |d<Jz>_f / d(phi)| from the noisy outcome distribution.

    Args:
        state_in (DickeVector): State before interrogation.
        phi (float): Accumulated phase.
        cfg (ReadoutConfig): Readout twisting strength.
        noise (NoiseModel): Detection noise.
        dephasing (DephasingConfig | None): Dephasing during twisting; None or g = 0 uses the pure path.
        mu (int): Number of repetitions.

    Returns:
        PrecisionResult: Flagged divergent-slope (delta_phi = inf) when |d<Jz>/d(phi)| < 1e-12.
    """
    p, dp = _noisy_moments(state_in, phi, cfg, noise, dephasing)
    slope = float(np.dot(jz_diagonal(p.spin), dp))
    result = PrecisionResult(math.inf, Method.ERROR_PROPAGATION, phi, cfg.tau, noise.sigma,
                             0.0 if dephasing is None else dephasing.gamma_ratio, mu)
    if abs(slope) < SLOPE_FLOOR:
        logger.debug("Divergent slope at phi=%g, tau=%g", phi, cfg.tau)
        return replace(result, flag=Flag.DIVERGENT_SLOPE)
    return replace(result, delta_phi=math.sqrt(p.variance()) / abs(slope) / math.sqrt(mu))


def cfi_precision(state_in: DickeVector, phi: float, cfg: ReadoutConfig, noise: NoiseModel = NoiseModel(),
                  dephasing: DephasingConfig | None = None, mu: int = 1) -> PrecisionResult:
    p, dp = _noisy_moments(state_in, phi, cfg, noise, dephasing)
    information = cfi(p, dp)
    result = PrecisionResult(math.inf, Method.CFI_BOUND, phi, cfg.tau, noise.sigma,
                             0.0 if dephasing is None else dephasing.gamma_ratio, mu)
    if math.isinf(information):
        return replace(result, delta_phi=0.0, flag=Flag.DIVERGENT_INFORMATION)
    if information <= 0:
        return replace(result, flag=Flag.DIVERGENT_SLOPE)
    return replace(result, delta_phi=qcrb(information, mu))


def qcrb_precision(state_in: DickeVector, mu: int = 1) -> PrecisionResult:
    return PrecisionResult(qcrb(qfi_jz(state_in), mu), Method.QCRB, math.nan, math.nan, mu=mu)


def _closed_form_weights(state_in: DickeVector) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    check_closed_form_input(state_in)
    k = jz_diagonal(state_in.spin)
    weights = np.abs(state_in.amplitudes) ** 2
    sign = np.where((state_in.spin.n_particles - np.arange(state_in.spin.dim)) % 2 == 1, -1.0, 1.0)
    return k, weights, sign


def precision_closed_form(state_in: DickeVector, phi: float, mu: int = 1) -> PrecisionResult:
    """
    Error-propagation precision of the chi*t = pi/2 readout from the input amplitudes alone.

    At phi = 0 the slope carries the alternating factor (-1)^(J-k); at phi = pi/2 it does not, and the result
    reduces to 1 / (2 sqrt(sum k^2 |a_k|^2)).
    """
    k, weights, sign = _closed_form_weights(state_in)
    mean = np.sum(k * weights * sign * np.sin(2 * k * phi))
    variance = max(float(np.sum(k * k * weights) - mean * mean), 0.0)
    slope = float(np.sum(2 * k * k * weights * sign * np.cos(2 * k * phi)))
    result = PrecisionResult(math.inf, Method.ERROR_PROPAGATION, phi, HALF_PI, mu=mu)
    if abs(slope) < SLOPE_FLOOR:
        return replace(result, flag=Flag.DIVERGENT_SLOPE)
    return replace(result, delta_phi=math.sqrt(variance) / abs(slope) / math.sqrt(mu))


def cfi_closed_form(state_in: DickeVector, phi: float) -> float:
    """CFI of the chi*t = pi/2 readout, sum 4 k^2 |a_k|^4 cos^2(2k phi) / P(k|phi)."""
    k, weights, sign = _closed_form_weights(state_in)
    p = weights * (1 + sign * np.sin(2 * k * phi))
    dp = 2 * k * weights * sign * np.cos(2 * k * phi)
    return cfi(ProbabilityDistribution(state_in.spin, p), dp)


def closed_form_distribution(state_in: DickeVector, phi: float) -> ProbabilityDistribution:
    return probabilities(readout_closed_form(state_in, phi))


def noise_model_prediction(delta_phi_noiseless: float, variance: float, sigma: float) -> float:
    """Moment model: blurring adds sigma^2 to the variance and leaves the slope unchanged."""
    return delta_phi_noiseless * math.sqrt(1.0 + sigma * sigma / variance)


def critical_detection_noise(spin: SpinLength, theta: float) -> float:
    """sigma_c ~ 0.5 Mbar with the approximate peak Mbar = (N/2) cos(theta); the blur dominates beyond it."""
    return 0.5 * mbar(spin, theta, mode="approx")
