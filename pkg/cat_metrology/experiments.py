"""
Sweep engine: readout optimization, scaling scans, tau scans, detection-noise and dephasing scans, log-log fits.

Every scan returns rows in grid order, so the output does not depend on the number of worker threads.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict
from typing import Callable, Iterable, Sequence, TypeVar
import logging
import math

import numpy as np

from .spin import SpinLength, DickeVector
from .states import CatSpec, cat_state, msscs, scs, is_cat, mbar
from .evolution import ReadoutConfig, DephasingConfig, ClosedFormUnavailable, HALF_PI
from .estimation import (
    NoiseModel, PrecisionResult, Method,
    error_propagation_precision, cfi_precision, precision_closed_form, qfi_jz, qcrb, qcrb_analytic_cat,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

PHI_CENTERS = {"zero": 0.0, "half-pi": HALF_PI}
SCALING_N_GRID = (40, 60, 100, 160, 250, 400, 630, 1000)
TAU_GRID_POINTS = 201
TAU_TOLERANCE = 1e-6

INV_PHI = (math.sqrt(5) - 1) / 2  # 1 / golden ratio
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2


class OptimizationError(RuntimeError):
    pass


class FitError(ValueError):
    pass


class GridError(ValueError):
    pass


def _ascending(values: Sequence[float]) -> bool:
    return all(a < b for a, b in zip(values, values[1:]))


@dataclass(frozen=True)
class SweepGrid:
    thetas: tuple[float, ...]
    n_values: tuple[int, ...]
    tau_grid: tuple[float, ...]
    phi_center: str = "half-pi"
    sigma_grid: tuple[float, ...] = (0.0,)
    gamma_ratios: tuple[float, ...] = (0.0,)
    mu: int = 1
    closed_form: bool = False

    def __post_init__(self) -> None:
        for name in ("thetas", "n_values", "tau_grid", "sigma_grid", "gamma_ratios"):
            values = tuple(getattr(self, name))
            if not values:
                raise GridError(f"{name} must not be empty")
            if not _ascending(values):
                raise GridError(f"{name} must be sorted ascending without repeats: {values}")
            object.__setattr__(self, name, values)
        if self.phi_center not in PHI_CENTERS:
            raise GridError(f"phi_center must be one of {sorted(PHI_CENTERS)}, got {self.phi_center!r}")
        modulus = 4 if self.closed_form else 2
        odd = [n for n in self.n_values if n % modulus]
        if odd:
            raise GridError(f"particle numbers must be divisible by {modulus}: {odd}")
        if self.mu < 1:
            raise GridError(f"mu must be a positive integer, got {self.mu}")

    @property
    def phi(self) -> float:
        return PHI_CENTERS[self.phi_center]


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float


@dataclass(frozen=True)
class ResultRow:
    """One output line; field order is the CSV column order."""
    experiment: str
    theta: float
    n: int
    phi: float
    tau: float
    sigma: float
    gamma_ratio: float
    mu: int
    delta_phi: float
    method: str
    flag: str = ""

    @classmethod
    def from_precision(cls, experiment: str, theta: float, n: int, result: PrecisionResult) -> "ResultRow":
        return cls(experiment, theta, n, result.phi, result.tau, result.sigma, result.gamma_ratio, result.mu,
                   result.delta_phi, result.method.value, result.flag.value)

    def as_record(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TauOptimum:
    tau: float
    delta_phi: float
    evaluations: int


def fit_rows(experiment: str, theta: float, fit: FitResult, mu: int = 1, phi: float = math.nan) -> list[ResultRow]:
    nan = math.nan
    return [ResultRow(f"{experiment}-fit", theta, 0, phi, nan, nan, nan, mu, value, method)
            for method, value in (("fit-slope", fit.slope), ("fit-intercept", fit.intercept),
                                  ("fit-r2", fit.r_squared))]


def run_parallel(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    """Map fn over items with up to `threads` workers; results keep the input order."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))


def golden_section(f: Callable[[float], float], a: float, b: float, tol: float = TAU_TOLERANCE) -> tuple[float, float]:
    """
    Golden-section search for a minimum of f on [a, b].

    Returns:
        tuple[float, float]: The best interior point visited and its value, once the bracket is below tol.
    """
    a, b = min(a, b), max(a, b)
    h = b - a
    if h <= tol:
        x = 0.5 * (a + b)
        return x, f(x)
    steps = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))
    c = a + INV_PHI_SQUARE * h
    d = a + INV_PHI * h
    yc = f(c)
    yd = f(d)
    for _ in range(steps - 1):
        if yc <= yd:
            b, d, yd = d, c, yc
            h = INV_PHI * h
            c = a + INV_PHI_SQUARE * h
            yc = f(c)
        else:
            a, c, yc = c, d, yd
            h = INV_PHI * h
            d = a + INV_PHI * h
            yd = f(d)
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug("Golden-section search finished after %d steps on [%g, %g]", steps, a, b)
    return (c, yc) if yc <= yd else (d, yd)


def tau_grid(points: int = TAU_GRID_POINTS, upper: float = HALF_PI) -> np.ndarray:
    """Evenly spaced points on (0, upper], upper included."""
    return upper * (np.arange(1, points + 1) / points)


def optimize_tau(state_in: DickeVector, phi: float, noise: NoiseModel = NoiseModel(),
                 dephasing: DephasingConfig = DephasingConfig(), points: int = TAU_GRID_POINTS,
                 tol: float = TAU_TOLERANCE) -> TauOptimum:
    """
    Minimize the error-propagation precision over the twisting strength tau in (0, pi/2].

    A coarse grid selects the basin (first minimum wins, so ties go to the smaller tau), then golden-section
    search refines it inside the neighbouring grid cells. Divergent points count as +inf.

    Raises:
        OptimizationError: If every grid point is divergent.
    """
    evaluations = 0

    def objective(tau: float) -> float:
        nonlocal evaluations
        evaluations += 1
        result = error_propagation_precision(state_in, phi, ReadoutConfig(tau), noise, dephasing)
        return math.inf if result.divergent else result.delta_phi

    grid = tau_grid(points)
    values = np.array([objective(float(tau)) for tau in grid])
    if not np.any(np.isfinite(values)):
        raise OptimizationError(f"every tau on the grid gives a divergent slope (phi={phi})")
    best = int(np.argmin(values))
    lo = float(grid[best - 1]) if best > 0 else 0.0
    hi = float(grid[best + 1]) if best < len(grid) - 1 else float(grid[best])
    tau, value = golden_section(objective, lo, hi, tol)
    if value < values[best] or (value == values[best] and tau < grid[best]):
        return TauOptimum(tau, value, evaluations)
    return TauOptimum(float(grid[best]), float(values[best]), evaluations)


def loglog_fit(points: Sequence[tuple[float, float]]) -> FitResult:
    """Least-squares line through (ln x, ln y)."""
    if len(points) < 2:
        raise FitError(f"need at least two points, got {len(points)}")
    x = np.array([p[0] for p in points], dtype=float)
    y = np.array([p[1] for p in points], dtype=float)
    if np.any(x <= 0) or np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise FitError("log-log fit needs positive, finite values")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(lx) == 0:
        raise FitError("log-log fit needs at least two distinct x values")
    slope, intercept = np.polyfit(lx, ly, 1)
    residual = np.sum((ly - (slope * lx + intercept)) ** 2)
    total = np.sum((ly - ly.mean()) ** 2)
    r_squared = 1.0 if total == 0 else max(0.0, 1.0 - residual / total)
    return FitResult(float(slope), float(intercept), float(r_squared))


def _input_state(n: int, theta: float) -> DickeVector:
    spin = SpinLength(n)
    if theta >= HALF_PI:
        return scs(spin, theta)
    return msscs(spin, theta)


def bound_scan(theta: float, n_grid: Sequence[int], mu: int = 1,
               threads: int = 1) -> tuple[list[ResultRow], FitResult]:
    """
    Exact QCRB against N for one theta, plus the analytic C(theta)/N rows wherever the state is a cat.

    theta = pi/2 uses the single coherent state (the standard quantum limit reference).
    """
    def evaluate(n: int) -> list[ResultRow]:
        state = _input_state(n, theta)
        bound = qcrb(qfi_jz(state), mu)
        rows = [ResultRow("ultimate-bound", theta, n, math.nan, math.nan, 0.0, 0.0, mu, bound, Method.QCRB.value)]
        if theta < HALF_PI and n >= 40 and is_cat(state.spin, theta):
            analytic = qcrb_analytic_cat(CatSpec(n, theta)) / math.sqrt(mu)
            rows.append(ResultRow("ultimate-bound-analytic", theta, n, math.nan, math.nan, 0.0, 0.0, mu,
                                  analytic, Method.QCRB.value))
        return rows

    per_n = run_parallel(evaluate, n_grid, threads)
    rows = [row for group in per_n for row in group]
    fit = loglog_fit([(row.n, row.delta_phi) for row in rows if row.experiment == "ultimate-bound"])
    logger.info("Bound scan theta=%.6g: slope %.4f, intercept %.4f", theta, fit.slope, fit.intercept)
    return rows, fit


def _readout_point(n: int, theta: float, phi: float, noise: NoiseModel, dephasing: DephasingConfig, optimize: bool,
                   mu: int = 1, closed_form: bool = False) -> tuple[PrecisionResult, TauOptimum | None]:
    state = cat_state(CatSpec(n, theta))
    if optimize:
        optimum = optimize_tau(state, phi, noise, dephasing)
        return error_propagation_precision(state, phi, ReadoutConfig(optimum.tau), noise, dephasing, mu), optimum
    if closed_form and noise.sigma == 0 and dephasing.gamma_ratio == 0:
        try:
            return precision_closed_form(state, phi, mu), None
        except ClosedFormUnavailable:
            logger.debug("No closed form for N=%d, using the dense readout", n)
    return error_propagation_precision(state, phi, ReadoutConfig(HALF_PI), noise, dephasing, mu), None


def scaling_scan(theta: float, phi_center: str, n_grid: Sequence[int] = SCALING_N_GRID, mu: int = 1,
                 threads: int = 1, closed_form: bool = False) -> tuple[list[ResultRow], FitResult]:
    """
    Minimum precision against N. Around phi = 0 tau is optimized per N; around phi = pi/2 it is fixed at pi/2.

    With closed_form the phi = pi/2 points come from the input amplitudes alone wherever N is divisible by 4;
    other N fall back to the dense readout.

    Raises:
        FitError: If a divergent point prevents the fit.
    """
    phi = PHI_CENTERS[phi_center]
    optimize = phi_center == "zero"

    def evaluate(n: int) -> ResultRow:
        result, _ = _readout_point(n, theta, phi, NoiseModel(), DephasingConfig(), optimize, mu, closed_form)
        return ResultRow.from_precision("scaling", theta, n, result)

    rows = run_parallel(evaluate, n_grid, threads)
    fit = loglog_fit([(row.n, row.delta_phi) for row in rows])
    logger.info("Scaling scan theta=%.6g phi-center=%s: slope %.4f", theta, phi_center, fit.slope)
    return rows, fit


def tau_scan(thetas: Sequence[float], n: int, phi_center: str, gamma_ratios: Sequence[float] = (0.0,),
             taus: Sequence[float] | None = None, sigma: float = 0.0, mu: int = 1, experiment: str = "readout-scan",
             threads: int = 1) -> list[ResultRow]:
    """Precision at every (theta, gamma_ratio, tau) grid point, rows ordered theta-major then gamma then tau."""
    phi = PHI_CENTERS[phi_center]
    taus = tuple(float(t) for t in (tau_grid() if taus is None else taus))
    noise = NoiseModel(sigma)
    states = {theta: cat_state(CatSpec(n, theta)) for theta in thetas}
    points = [(theta, gamma, tau) for theta in thetas for gamma in gamma_ratios for tau in taus]

    def evaluate(point: tuple[float, float, float]) -> ResultRow:
        theta, gamma, tau = point
        dephasing = None if gamma == 0 else DephasingConfig(gamma)
        result = error_propagation_precision(states[theta], phi, ReadoutConfig(tau), noise, dephasing, mu)
        if result.divergent:
            logger.warning("Divergent slope at theta=%.6g, tau=%.6g, g=%g", theta, tau, gamma)
        return ResultRow.from_precision(experiment, theta, n, result)

    return run_parallel(evaluate, points, threads)


def readout_optimum_scan(thetas: Sequence[float], n: int, phi_center: str,
                         dephasing: DephasingConfig = DephasingConfig(), mu: int = 1, threads: int = 1,
                         experiment: str = "readout-optimum", include_cfi: bool = False) -> list[ResultRow]:
    """
    Optimal tau and the corresponding minimum precision for each theta.

    With include_cfi every optimum row is followed by the CFI bound at the same tau.
    """
    phi = PHI_CENTERS[phi_center]

    def evaluate(theta: float) -> list[ResultRow]:
        state = cat_state(CatSpec(n, theta))
        optimum = optimize_tau(state, phi, NoiseModel(), dephasing)
        logger.info("theta=%.6g, N=%d, phi=%.6g: tau_opt=%.6f, delta_phi=%.6g", theta, n, phi, optimum.tau,
                    optimum.delta_phi)
        rows = [ResultRow(experiment, theta, n, phi, optimum.tau, 0.0, dephasing.gamma_ratio, mu,
                          optimum.delta_phi / math.sqrt(mu), Method.ERROR_PROPAGATION.value)]
        if include_cfi:
            information = cfi_precision(state, phi, ReadoutConfig(optimum.tau), NoiseModel(), dephasing, mu)
            rows.append(ResultRow.from_precision(experiment, theta, n, information))
        return rows

    return [row for group in run_parallel(evaluate, thetas, threads) for row in group]


@dataclass(frozen=True)
class NoisePoint:
    theta: float
    sigma: float
    result: PrecisionResult
    cfi: PrecisionResult
    ratio_to_bound: float
    sigma_over_spread: float


def noise_scan(thetas: Sequence[float], n: int, phi_center: str, sigma_grid: Sequence[float], mu: int = 1,
               threads: int = 1) -> list[NoisePoint]:
    """
    Optimal precision against detection noise, with the CFI bound at the same tau.

    Around phi = 0 tau is re-optimized for every sigma; around phi = pi/2 it stays at pi/2. The normalized
    coordinates use Delta(phi)_Q ~ 1/(2 Mbar sqrt(mu)) and Delta(Jz) ~ Mbar with the approximate peak
    Mbar = (N/2) cos theta, so the ratio does not depend on mu.
    """
    phi = PHI_CENTERS[phi_center]
    optimize = phi_center == "zero"
    spin = SpinLength(n)
    points = [(theta, sigma) for theta in thetas for sigma in sigma_grid]

    def evaluate(point: tuple[float, float]) -> NoisePoint:
        theta, sigma = point
        noise = NoiseModel(sigma)
        result, _ = _readout_point(n, theta, phi, noise, DephasingConfig(), optimize, mu)
        information = cfi_precision(cat_state(CatSpec(n, theta)), phi, ReadoutConfig(result.tau), noise, None, mu)
        peak = mbar(spin, theta, mode="approx")
        bound = 1.0 / (2.0 * peak * math.sqrt(mu))
        return NoisePoint(theta, sigma, result, information, result.delta_phi / bound, sigma / peak)

    return run_parallel(evaluate, points, threads)


def noise_rows(points: Sequence[NoisePoint], n: int) -> tuple[list[ResultRow], list[ResultRow], list[ResultRow]]:
    """Error-propagation rows, CFI rows and normalized rows, each in point order."""
    raw = [ResultRow.from_precision("detection-noise", p.theta, n, p.result) for p in points]
    information = [ResultRow.from_precision("detection-noise", p.theta, n, p.cfi) for p in points]
    normalized = [ResultRow("detection-noise-normalized", p.theta, n, p.result.phi, p.result.tau, p.sigma_over_spread,
                            0.0, p.result.mu, p.ratio_to_bound, "normalized", p.result.flag.value) for p in points]
    return raw, information, normalized
