import math

import numpy as np
import pytest

from cat_metrology.spin import SpinLength
from cat_metrology.states import CatSpec, cat_state, c_coefficient, mbar
from cat_metrology.evolution import HALF_PI, DephasingConfig, ReadoutConfig
from cat_metrology import experiments
from cat_metrology.estimation import Flag, Method, PrecisionResult, qfi_jz, error_propagation_precision
from cat_metrology.experiments import (
    SCALING_N_GRID, GridError, FitError, OptimizationError, SweepGrid, ResultRow,
    golden_section, tau_grid, optimize_tau, loglog_fit, run_parallel, fit_rows,
    bound_scan, scaling_scan, tau_scan, readout_optimum_scan, noise_scan, noise_rows,
)


def test_golden_section_finds_parabola_minimum():
    x, value = golden_section(lambda t: (t - 0.3) ** 2, 0.0, 1.0, 1e-8)
    assert x == pytest.approx(0.3, abs=1e-6)
    assert value == pytest.approx(0.0, abs=1e-12)


def test_tau_grid_covers_half_open_interval():
    grid = tau_grid()
    assert len(grid) == 201
    assert grid[0] > 0
    assert grid[-1] == HALF_PI
    assert np.all(np.diff(grid) > 0)


def test_loglog_fit_exact_power_laws():
    x = np.array([10.0, 20.0, 50.0, 100.0])
    fit = loglog_fit(list(zip(x, 3 / x)))
    assert fit.slope == pytest.approx(-1.0)
    assert fit.intercept == pytest.approx(math.log(3))
    assert fit.r_squared == pytest.approx(1.0)
    assert loglog_fit(list(zip(x, 2 / np.sqrt(x)))).slope == pytest.approx(-0.5)


@pytest.mark.parametrize("points", [[(10, 1.0)], [(10, 1.0), (10, 2.0)], [(10, 1.0), (20, -1.0)],
                                    [(10, 1.0), (20, math.inf)]])
def test_loglog_fit_rejects_degenerate_input(points):
    with pytest.raises(FitError):
        loglog_fit(points)


def test_run_parallel_keeps_order():
    items = list(range(50))
    assert run_parallel(lambda i: i * i, items, threads=8) == [i * i for i in items]
    assert run_parallel(lambda i: i + 1, items, threads=1) == [i + 1 for i in items]


def test_sweep_grid_validation():
    SweepGrid((0.0, 0.1), (8, 10), (0.5, 1.0))
    SweepGrid((0.0, 0.1), (8, 12), (0.5, 1.0), closed_form=True)
    with pytest.raises(GridError):
        SweepGrid((0.1, 0.0), (8,), (0.5,))
    with pytest.raises(GridError):
        SweepGrid((0.0,), (7,), (0.5,))
    with pytest.raises(GridError):
        SweepGrid((0.0,), (10,), (0.5,), closed_form=True)
    with pytest.raises(GridError):
        SweepGrid((0.0,), (8,), ())
    with pytest.raises(GridError):
        SweepGrid((0.0,), (8,), (0.5,), phi_center="pi")
    with pytest.raises(GridError):
        SweepGrid((0.0,), (8,), (0.5,), mu=0)
    assert SweepGrid((0.0,), (8,), (0.5,), phi_center="zero").phi == 0.0


def test_fit_rows():
    rows = fit_rows("scaling", 0.1, loglog_fit([(10, 0.1), (100, 0.01)]))
    assert [row.method for row in rows] == ["fit-slope", "fit-intercept", "fit-r2"]
    assert rows[0].experiment == "scaling-fit"
    assert rows[0].delta_phi == pytest.approx(-1.0)


def test_optimize_tau_ghz_around_zero():
    optimum = optimize_tau(cat_state(CatSpec(40, 0.0)), 0.0)
    assert optimum.tau == pytest.approx(HALF_PI, abs=1e-3)
    assert optimum.delta_phi == pytest.approx(1 / 40, rel=1e-4)


@pytest.mark.parametrize("theta", [0.0, math.pi / 8, math.pi / 4, 7 * math.pi / 20])
def test_optimize_tau_around_half_pi(theta):
    state = cat_state(CatSpec(100, theta))
    optimum = optimize_tau(state, HALF_PI)
    assert optimum.tau == pytest.approx(HALF_PI, abs=1e-3)
    assert optimum.delta_phi * math.sqrt(qfi_jz(state)) == pytest.approx(1.0, abs=1e-6)


def test_optimize_tau_pi_over_four_cat_around_zero():
    optimum = optimize_tau(cat_state(CatSpec(100, math.pi / 4)), 0.0)
    assert optimum.tau == pytest.approx(math.pi / 4, abs=2e-2)
    assert optimum.delta_phi < 1 / math.sqrt(100)


def test_optimize_tau_fails_when_everything_diverges(monkeypatch):
    divergent = PrecisionResult(math.inf, Method.ERROR_PROPAGATION, 0.0, 0.0, flag=Flag.DIVERGENT_SLOPE)
    monkeypatch.setattr(experiments, "error_propagation_precision", lambda *args, **kwargs: divergent)
    with pytest.raises(OptimizationError):
        optimize_tau(cat_state(CatSpec(8, 0.0)), 0.0, points=5)


@pytest.mark.parametrize("theta,expected,tolerance", [
    (0.0, -1.0, 1e-2),
    (math.pi / 8, -1.0, 1e-2),
    (3 * math.pi / 16, -1.0, 1e-2),
    (math.pi / 4, -1.0, 1e-2),
    (7 * math.pi / 20, -1.0, 2e-2),
    (15 * math.pi / 32, -0.83, 5e-2),
    (HALF_PI, -0.5, 1e-2),
])
def test_bound_scan_slopes(theta, expected, tolerance):
    rows, fit = bound_scan(theta, SCALING_N_GRID)
    assert fit.slope == pytest.approx(expected, abs=tolerance)
    if theta != 15 * math.pi / 32:
        assert fit.r_squared > 0.99
    assert [row.n for row in rows if row.experiment == "ultimate-bound"] == list(SCALING_N_GRID)


@pytest.mark.parametrize("theta,tolerance", [
    (0.0, 0.05),
    (math.pi / 8, 0.05),
    (math.pi / 4, 0.05),
    (7 * math.pi / 20, 0.1),
])
def test_bound_scan_intercept_matches_prefactor(theta, tolerance):
    _, fit = bound_scan(theta, SCALING_N_GRID)
    assert fit.intercept == pytest.approx(math.log(c_coefficient(theta)), abs=tolerance)


def test_bound_scan_analytic_rows_only_for_cats():
    rows, _ = bound_scan(15 * math.pi / 32, (40, 100))
    assert not [row for row in rows if row.experiment == "ultimate-bound-analytic"]
    rows, _ = bound_scan(math.pi / 8, (40, 100))
    analytic = [row for row in rows if row.experiment == "ultimate-bound-analytic"]
    assert [row.n for row in analytic] == [40, 100]
    assert analytic[1].delta_phi == pytest.approx(c_coefficient(math.pi / 8) / 100)


def test_scaling_scan_half_pi_is_heisenberg():
    rows, fit = scaling_scan(math.pi / 8, "half-pi", (40, 100, 200))
    assert fit.slope == pytest.approx(-1.0, abs=1e-2)
    for row in rows:
        state = cat_state(CatSpec(row.n, math.pi / 8))
        assert row.tau == HALF_PI
        assert row.delta_phi * math.sqrt(qfi_jz(state)) == pytest.approx(1.0, abs=1e-8)


def test_scaling_scan_zero_ghz():
    rows, fit = scaling_scan(0.0, "zero", (40, 80, 120))
    assert fit.slope == pytest.approx(-1.0, abs=1e-2)
    assert [row.delta_phi for row in rows] == pytest.approx([1 / 40, 1 / 80, 1 / 120], rel=1e-5)


@pytest.mark.parametrize("theta", [math.pi / 8, math.pi / 4, 7 * math.pi / 20])
def test_scaling_scan_zero_cats_are_heisenberg(theta):
    _, fit = scaling_scan(theta, "zero", (40, 60, 100, 160, 250, 400))
    assert fit.slope == pytest.approx(-1.0, abs=3e-2)


def test_scaling_scan_half_pi_closed_form_matches_dense():
    rows, _ = scaling_scan(math.pi / 4, "half-pi", (40, 42, 100), mu=4, closed_form=True)
    for row in rows:
        state = cat_state(CatSpec(row.n, math.pi / 4))
        dense = error_propagation_precision(state, HALF_PI, ReadoutConfig(HALF_PI), mu=4)
        assert row.mu == 4
        assert row.delta_phi == pytest.approx(dense.delta_phi, rel=1e-8)
        assert row.delta_phi * math.sqrt(4 * qfi_jz(state)) == pytest.approx(1.0, abs=1e-8)


def test_tau_scan_layout_and_determinism():
    kwargs = dict(thetas=(0.0, math.pi / 4), n=8, phi_center="half-pi", taus=(0.2, 0.7, HALF_PI))
    single = tau_scan(**kwargs, threads=1)
    threaded = tau_scan(**kwargs, threads=4)
    assert single == threaded
    assert [(row.theta, row.tau) for row in single] == [
        (0.0, 0.2), (0.0, 0.7), (0.0, HALF_PI), (math.pi / 4, 0.2), (math.pi / 4, 0.7), (math.pi / 4, HALF_PI)]
    assert all(isinstance(row, ResultRow) for row in single)


def test_tau_scan_half_pi_minimum_at_half_pi():
    rows = tau_scan((0.0, math.pi / 4), 100, "half-pi", taus=tuple(float(t) for t in tau_grid(41)))
    for theta in (0.0, math.pi / 4):
        subset = [row for row in rows if row.theta == theta]
        best = min(subset, key=lambda row: row.delta_phi)
        assert best.tau == HALF_PI


def test_dephasing_moves_the_tau_minimum_down():
    ideal = tau_scan((0.0,), 100, "zero")
    dephased = tau_scan((7 * math.pi / 20,), 100, "zero", (6.0,))
    ideal_best = min(ideal, key=lambda row: row.delta_phi)
    dephased_best = min(dephased, key=lambda row: row.delta_phi)
    assert ideal_best.tau == pytest.approx(HALF_PI)
    assert dephased_best.tau == pytest.approx(0.461, abs=2e-2)
    assert dephased_best.tau < ideal_best.tau
    assert dephased_best.gamma_ratio == 6.0


def test_readout_optimum_scan():
    rows = readout_optimum_scan((0.0, math.pi / 8), 40, "half-pi", threads=2)
    assert [row.experiment for row in rows] == ["readout-optimum", "readout-optimum"]
    assert all(row.tau == pytest.approx(HALF_PI, abs=1e-3) for row in rows)


@pytest.mark.parametrize("phi_center", ["zero", "half-pi"])
def test_readout_optimum_scan_with_cfi(phi_center):
    rows = readout_optimum_scan((math.pi / 8, math.pi / 4), 20, phi_center, mu=4, include_cfi=True)
    assert [row.method for row in rows] == ["error-propagation", "cfi-bound"] * 2
    for propagated, information in zip(rows[::2], rows[1::2]):
        assert information.theta == propagated.theta
        assert information.tau == propagated.tau
        assert information.mu == 4
        assert information.delta_phi <= propagated.delta_phi * (1 + 1e-6)
        if phi_center == "half-pi":
            assert information.delta_phi == pytest.approx(propagated.delta_phi, rel=1e-4)


def test_dephased_cat_stays_below_standard_limit():
    rows = readout_optimum_scan((math.pi / 4,), 100, "zero", DephasingConfig(6.0))
    assert rows[0].delta_phi < 1 / math.sqrt(100)
    assert rows[0].gamma_ratio == 6.0


def test_noise_scan_knee():
    spin = SpinLength(100)
    ratios = {}
    for theta in (0.0, math.pi / 8, math.pi / 4, 7 * math.pi / 20):
        peak = mbar(spin, theta, mode="approx")
        points = noise_scan((theta,), 100, "half-pi", (0.25 * peak, peak))
        ratios[theta] = [p.ratio_to_bound for p in points]
        assert points[0].sigma_over_spread == pytest.approx(0.25)
        assert ratios[theta][0] <= 1.2
        assert ratios[theta][1] >= 1.3
    quarter = [r[0] for r in ratios.values()]
    assert max(quarter) / min(quarter) <= 1.1


def test_noise_rows():
    points = noise_scan((math.pi / 8,), 40, "half-pi", (0.0, 2.0, 8.0), threads=2)
    raw, information, normalized = noise_rows(points, 40)
    assert [row.sigma for row in raw] == [0.0, 2.0, 8.0]
    assert [row.sigma for row in information] == [0.0, 2.0, 8.0]
    assert all(row.experiment == "detection-noise" and row.method == "cfi-bound" for row in information)
    assert all(b.delta_phi <= a.delta_phi * (1 + 1e-6) for a, b in zip(raw, information))
    assert information[0].delta_phi == pytest.approx(raw[0].delta_phi, rel=1e-4)
    assert [row.experiment for row in normalized] == ["detection-noise-normalized"] * 3
    assert all(row.method == "normalized" for row in normalized)
    values = [row.delta_phi for row in raw]
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_noise_ratio_does_not_depend_on_mu():
    single = noise_scan((math.pi / 8,), 100, "half-pi", (0.0, 10.0), mu=1)
    repeated = noise_scan((math.pi / 8,), 100, "half-pi", (0.0, 10.0), mu=4)
    for a, b in zip(single, repeated):
        assert b.result.delta_phi == pytest.approx(a.result.delta_phi / 2, rel=1e-12)
        assert b.cfi.delta_phi == pytest.approx(a.cfi.delta_phi / 2, rel=1e-12)
        assert b.ratio_to_bound == pytest.approx(a.ratio_to_bound, rel=1e-12)
    assert repeated[0].ratio_to_bound >= 0.95
