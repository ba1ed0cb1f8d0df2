import dataclasses
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypersonic_limit.measure import WEIGHT_FIELDS, MeasureSolution
from hypersonic_limit.problem2 import DeadGasSpec, solve_problem2
from hypersonic_limit.weak_verify import (
    TestFunction,
    bump,
    bump_integral,
    convergence_study,
    fit_order,
    perturbation_signal,
    radon_nikodym_check,
    residual,
    residuals,
    simpson,
    standard_grid,
)

from conftest import SQRT


def test_bump_antiderivative():
    assert float(bump_integral(1.0) - bump_integral(-1.0)) == pytest.approx(16 / 15, abs=1e-15)
    assert float(bump(0.0)) == 1.0 and float(bump(1.5)) == 0.0


def test_simpson_is_fourth_order():
    f = lambda x: np.exp(np.sin(x))  # noqa: E731
    ref = simpson(f, 0.0, 2.0, 4096)
    e1, e2 = (abs(simpson(f, 0.0, 2.0, n) - ref) for n in (16, 32))
    assert math.log2(e1 / e2) == pytest.approx(4.0, abs=0.3)
    g = lambda x: np.sqrt(x)  # noqa: E731
    assert simpson(g, 0.0, 1.0, 64, graded=True) == pytest.approx(2 / 3, abs=1e-10)


def test_fit_order():
    hs = [0.1, 0.05, 0.025]
    assert fit_order(hs, [1e-4, 2.5e-5, 6.25e-6], 1.0) == pytest.approx(2.0)
    assert fit_order(hs, [1e-15, 0.0, 1e-16], 1.0) is None


@pytest.mark.parametrize("name", ["p1_wedge", "p1_sqrt", "p2_0", "p2_0.5", "p2_1", "p2_2",
                                  "p3_attached", "p3_unbounded", "p3_bounded"])
def test_solver_output_passes(matrix, name):
    sol = matrix[name]
    phis = standard_grid(sol, n=3)
    rep = convergence_study(sol, phis, levels=5)
    assert rep.passed(), rep.failures()[:3]
    assert rep.max_finest < 1e-6


@pytest.mark.parametrize("name", ["p1_sqrt", "p2_2", "p3_bounded"])
def test_radon_nikodym(matrix, name):
    dev = radon_nikodym_check(matrix[name])
    assert max(v for k, v in dev.items() if k != "skipped") < 1e-12


def test_wall_pressure_perturbation_is_detected(matrix):
    sol = matrix["p1_wedge"]
    phis = standard_grid(sol, n=3)
    sig = perturbation_signal(sol, phis, phis[0].r / 16)
    assert sig["relative"] >= 1e-3
    rep = convergence_study(sol.with_wall_scale(1.1), phis, levels=3)
    bad = {f["identity"] for f in rep.failures()}
    assert "momx" in bad and "mass" not in bad


@pytest.mark.parametrize("field", WEIGHT_FIELDS)
@pytest.mark.parametrize("curve", ["wall", "free_layer"])
def test_weight_perturbation_is_detected(matrix, field, curve):
    sol = matrix["p2_0.5"]
    phis = standard_grid(sol, n=3)
    sig = perturbation_signal(sol, phis, phis[0].r / 16, weight=field, curve=curve)
    assert sig["relative"] >= 1e-3


def test_wrong_static_pressure_is_detected():
    right = solve_problem2(SQRT, DeadGasSpec(2.0, 0.5), 1.0, 6.0)
    wrong_gas = solve_problem2(SQRT, DeadGasSpec(2.0, 0.6), 1.0, 6.0).regions[1]
    bad = dataclasses.replace(right, regions=[right.regions[0], dataclasses.replace(wrong_gas, upper=right.regions[1].upper)])
    phi = TestFunction(3.0, float(right.regions[1].upper(np.array([3.0]))[0]), 0.4)
    assert abs(residual(bad, "momy", phi, 0.4 / 128)) > 1e-3
    assert abs(residual(right, "momy", phi, 0.4 / 128)) < 1e-6


def test_empty_solution():
    empty = MeasureSolution("p1")
    phi = TestFunction(1.0, 1.0, 0.3)
    res, mag = residuals(empty, phi, 0.05)
    assert np.all(res == 0) and np.all(mag == 0)
    rep = convergence_study(empty, [phi], levels=3)
    assert rep.passed() and rep.warnings


def test_support_checks(matrix):
    sol = matrix["p2_0.5"]
    with pytest.raises(ValueError):
        residuals(sol, TestFunction(2.0, 1.0, 0.4), 0.3)
    with pytest.raises(ValueError):
        residuals(sol, TestFunction(sol.x_limit - 0.1, 1.0, 0.4), 0.01)
    with pytest.raises(ValueError):
        residuals(sol, TestFunction(3.0, -20.0, 0.4), 0.01)
    with pytest.raises(ValueError):
        convergence_study(sol, [TestFunction(3.0, 2.0, 0.4)], levels=2)


def test_report_json(matrix):
    sol = matrix["p1_wedge"]
    rep = convergence_study(sol, standard_grid(sol, n=2), levels=3)
    data = json.loads(json.dumps(rep.to_json()))
    row = data["rows"][0]
    assert set(row) == {"identity", "phi_center", "phi_radius", "level", "h", "residual", "fitted_order"}
    assert data["passed"] is True


@settings(max_examples=15, deadline=None)
@given(st.floats(0.3, 3.2), st.floats(-0.4, 0.4), st.floats(0.15, 0.4))
def test_random_test_functions_vanish(matrix, cx, dy, r):
    sol = matrix["p2_0.5"]
    cy = float(sol.regions[0].lower(np.array([cx]))[0]) + dy
    res, mag = residuals(sol, TestFunction(cx, cy, r), r / 128)
    assert np.all(np.abs(res) <= 1e-6 * (1.0 + mag))
