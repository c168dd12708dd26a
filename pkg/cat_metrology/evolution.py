"""
Phase accumulation, the twisting readout sequence and collective dephasing during the twisting stage.

Time is dimensionless throughout: tau = chi * t and gamma_ratio = gamma / chi.
"""

from dataclasses import dataclass
import logging
import math

import numpy as np

from .spin import SpinLength, DickeVector, DensityOperator, jz_diagonal, rot_x
from .states import CatSpec, cat_state

logger = logging.getLogger(__name__)

HALF_PI = math.pi / 2


class EvolutionError(ValueError):
    pass


class ClosedFormUnavailable(EvolutionError):
    """Raised when the chi*t = pi/2 closed form does not apply; use the dense readout instead."""
    pass


@dataclass(frozen=True)
class ReadoutConfig:
    """Pulse - twist - inverse pulse. The pre-pulse is exp(+i angle Jx), the post-pulse exp(-i angle Jx)."""
    tau: float
    pulse_angle: float = HALF_PI
    pulse_sign_pre: int = 1
    pulse_sign_post: int = -1

    def __post_init__(self) -> None:
        if not math.isfinite(self.tau) or self.tau < 0:
            raise EvolutionError(f"tau must be finite and >= 0, got {self.tau}")
        if (self.pulse_sign_pre, self.pulse_sign_post) != (1, -1):
            raise EvolutionError("pulse signs are fixed: pre-pulse +1, post-pulse -1")


@dataclass(frozen=True)
class DephasingConfig:
    gamma_ratio: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.gamma_ratio) or self.gamma_ratio < 0:
            raise EvolutionError(f"gamma_ratio must be finite and >= 0, got {self.gamma_ratio}")

    @property
    def is_unitary(self) -> bool:
        return self.gamma_ratio == 0.0


def _phase_array(spin: SpinLength, amplitudes: np.ndarray, phi: float) -> np.ndarray:
    return amplitudes * np.exp(-1j * jz_diagonal(spin) * phi)


def _twist_array(spin: SpinLength, amplitudes: np.ndarray, tau: float) -> np.ndarray:
    m = jz_diagonal(spin)
    return amplitudes * np.exp(1j * tau * m * m)


def _readout_array(spin: SpinLength, amplitudes: np.ndarray, cfg: ReadoutConfig) -> np.ndarray:
    pre = rot_x(spin, cfg.pulse_angle, cfg.pulse_sign_pre)
    post = rot_x(spin, cfg.pulse_angle, cfg.pulse_sign_post)
    return post.entries @ _twist_array(spin, pre.entries @ amplitudes, cfg.tau)


def phase_accumulate(state: DickeVector, phi: float) -> DickeVector:
    return DickeVector(state.spin, _phase_array(state.spin, state.amplitudes, phi))


def oat(state: DickeVector, tau: float) -> DickeVector:
    """One-axis twisting exp(+i tau Jz^2)."""
    return DickeVector(state.spin, _twist_array(state.spin, state.amplitudes, tau))


def readout(state_out: DickeVector, cfg: ReadoutConfig) -> DickeVector:
    return DickeVector(state_out.spin, _readout_array(state_out.spin, state_out.amplitudes, cfg))


def final_state(state_in: DickeVector, phi: float, cfg: ReadoutConfig) -> DickeVector:
    """Phase accumulation followed by the dense readout."""
    return readout(phase_accumulate(state_in, phi), cfg)


def final_state_derivative(state_in: DickeVector, phi: float, cfg: ReadoutConfig) -> np.ndarray:
    """d|psi_f>/d(phi) = U_readout (-i Jz) exp(-i phi Jz) |psi_in>."""
    spin = state_in.spin
    shifted = -1j * jz_diagonal(spin) * _phase_array(spin, state_in.amplitudes, phi)
    return _readout_array(spin, shifted, cfg)


def check_closed_form_input(state: DickeVector) -> None:
    if state.spin.n_particles % 4 != 0:
        raise ClosedFormUnavailable(f"closed form needs even J, got N={state.spin.n_particles}")
    if not state.is_mirror_symmetric(atol=1e-12):
        raise ClosedFormUnavailable("closed form needs mirror-symmetric amplitudes a_k = a_-k")


def readout_closed_form(state_in: DickeVector, phi: float) -> DickeVector:
    """
    Final state of the chi*t = pi/2 sequence for a mirror-symmetric input with even J.

    Amplitude at m = k is a_k [cos(k phi) + (-1)^(J-k) sin(k phi)] i^((J-k)^2). The phase accumulation is
    included, so the input is the state before interrogation.

    Raises:
        ClosedFormUnavailable: For odd J or an asymmetric input.
    """
    check_closed_form_input(state_in)
    spin = state_in.spin
    k = jz_diagonal(spin)
    odd = (spin.n_particles - np.arange(spin.dim)) % 2 == 1  # parity of J - k
    sign = np.where(odd, -1.0, 1.0)
    phase = np.where(odd, 1j, 1.0)
    factor = (np.cos(k * phi) + sign * np.sin(k * phi)) * phase
    return DickeVector(spin, state_in.amplitudes * factor)


def _dephasing_factors(spin: SpinLength, tau: float, cfg: DephasingConfig) -> np.ndarray:
    m = jz_diagonal(spin)
    m2 = m * m
    diff = m[:, None] - m[None, :]
    return np.exp(1j * tau * (m2[:, None] - m2[None, :]) - 0.5 * cfg.gamma_ratio * tau * diff * diff)


def _check_dephasing_args(tau: float, cfg: DephasingConfig) -> None:
    if tau < 0:
        raise EvolutionError(f"tau must be >= 0, got {tau}")
    if cfg.gamma_ratio < 0:
        raise EvolutionError(f"gamma_ratio must be >= 0, got {cfg.gamma_ratio}")


def dephasing_propagate(rho: DensityOperator, tau: float, cfg: DephasingConfig) -> DensityOperator:
    """
    Exact solution of the twisting master equation with collective Jz dephasing.

    rho_mn(tau) = rho_mn(0) exp(i (m^2 - n^2) tau) exp(-g tau (m - n)^2 / 2)
    """
    _check_dephasing_args(tau, cfg)
    return DensityOperator(rho.spin, rho.entries * _dephasing_factors(rho.spin, tau, cfg))


def _lindblad_rhs(h: np.ndarray, rho: np.ndarray, jumps: list) -> np.ndarray:
    drho = -1j * (h @ rho - rho @ h)
    for gamma, c in jumps:
        cd = c.conj().T
        cdc = cd @ c
        drho += gamma * (c @ rho @ cd - 0.5 * (cdc @ rho + rho @ cdc))
    return drho


def dephasing_rk4(rho: DensityOperator, tau: float, cfg: DephasingConfig, step: float = 1e-4) -> DensityOperator:
    """Fixed-step RK4 integration of the same master equation; a reference for dephasing_propagate."""
    _check_dephasing_args(tau, cfg)
    jz = np.diag(jz_diagonal(rho.spin)).astype(complex)
    h = -(jz @ jz)  # d(rho)/dt = i[Jz^2, rho] = -i[H, rho]
    jumps = [(cfg.gamma_ratio, jz)]
    steps = max(1, int(round(tau / step)))
    dt = tau / steps
    state = np.array(rho.entries)
    for _ in range(steps):
        k1 = _lindblad_rhs(h, state, jumps)
        k2 = _lindblad_rhs(h, state + 0.5 * dt * k1, jumps)
        k3 = _lindblad_rhs(h, state + 0.5 * dt * k2, jumps)
        k4 = _lindblad_rhs(h, state + dt * k3, jumps)
        state = state + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return DensityOperator(rho.spin, state)


def dephased_readout(state_in: DickeVector, phi: float, tau: float,
                     cfg: DephasingConfig) -> tuple[DensityOperator, np.ndarray]:
    """
    Readout with dephasing during the twisting stage.

    Args:
        state_in (DickeVector): State before interrogation.
        phi (float): Accumulated phase.
        tau (float): Twisting strength chi*t.
        cfg (DephasingConfig): Dephasing rate relative to chi.

    Returns:
        tuple[DensityOperator, np.ndarray]: The final density operator and its derivative with respect to phi
        (the channel is linear, so the derivative is propagated exactly).
    """
    spin = state_in.spin
    pre = rot_x(spin, HALF_PI, 1).entries
    post = rot_x(spin, HALF_PI, -1).entries
    accumulated = _phase_array(spin, state_in.amplitudes, phi)
    pulsed = pre @ accumulated
    pulsed_derivative = pre @ (-1j * jz_diagonal(spin) * accumulated)
    rho0 = np.outer(pulsed, pulsed.conj())
    drho0 = np.outer(pulsed_derivative, pulsed.conj())
    drho0 = drho0 + drho0.conj().T
    _check_dephasing_args(tau, cfg)
    factors = _dephasing_factors(spin, tau, cfg)
    post_dagger = post.conj().T
    rho_f = post @ (rho0 * factors) @ post_dagger
    drho_f = post @ (drho0 * factors) @ post_dagger
    return DensityOperator(spin, rho_f), drho_f


def dephased_readout_pipeline(cat: CatSpec, phi: float, tau: float, cfg: DephasingConfig) -> DensityOperator:
    rho, _ = dephased_readout(cat_state(cat), phi, tau, cfg)
    return rho
