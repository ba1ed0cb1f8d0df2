"""Acceptance criteria 1-7.  Each test prints one PASS/FAIL line; the lines are
repeated in the pytest terminal summary.  Also runnable as a script."""

import math
import time

import numpy as np
import pytest
from mpmath import findroot, mp, mpf, sqrt as msqrt
from scipy.optimize import bisect

from hypersonic_limit.geometry import Power, Wedge
from hypersonic_limit.oracle import accrete_free_layer, accrete_wall, convergence_order, sup_error
from hypersonic_limit.problem1 import newton_busemann_pressure
from hypersonic_limit.problem2 import DeadGasSpec, ellipse_distance, free_layer_closed_form, free_layer_ode
from hypersonic_limit.problem3 import (
    ATTACHED,
    VACUUM_BOUNDED,
    VACUUM_UNBOUNDED,
    Corner,
    JetSpec,
    attached_layer,
    classify_regime,
    collision_point,
    continue_after_collision,
    corner_start,
    entropy_check,
    jet_layer_ode,
    vacuum_construction,
)
from hypersonic_limit.weak_verify import convergence_study, perturbation_signal, standard_grid

from conftest import JETS, build_matrix

SQRT = Power(1.0, 0.5)
R2 = math.sqrt(2.0)
RESULTS: dict[int, str] = {}


def report(n, ok, text):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {text}"
    RESULTS[n] = line
    print(line)
    assert ok, line


def test_criterion_1_golden_shapes():
    t0 = time.perf_counter()
    golden = {
        0.0: lambda x: np.sqrt(2 * x / 3 - 4 / 9) + R2 / 3,
        0.5: lambda x: 2 * np.sqrt(x**2 / 4 - 2 * x / 3 + 11 / 9) - R2 / 3,
        1.0: lambda x: 3 / (4 * R2) * x**2 - 5 / (2 * R2) * x + 2 * R2,
    }
    xs = np.linspace(2.0, 22.0, 100)
    errs = {}
    for p, f in golden.items():
        layer = free_layer_closed_form(SQRT, DeadGasSpec(2.0, p), 22.0)
        errs[p] = float(np.max(np.abs(layer.points(xs)[1] - f(xs))))
    layer = free_layer_closed_form(SQRT, DeadGasSpec(2.0, 2.0))
    end = np.array(layer.points(layer.domain[1]), dtype=float)
    errs[2.0] = float(np.max(np.abs(end - [2 + (math.sqrt(17) - 1) / 6, 5 * R2 / 3])))
    dt = time.perf_counter() - t0
    worst = max(errs.values())
    report(1, worst <= 1e-12 and dt < 1.0, f"max error vs golden formulas {worst:.2e} (<= 1e-12), {dt:.3f} s (< 1 s)")


def test_criterion_2_sine_squared():
    worst = 0.0
    xs = np.linspace(0.01, 20.0, 200)
    for deg in range(5, 50, 5):
        wp = newton_busemann_pressure(Wedge.from_angle(deg), xs)
        worst = max(worst, float(np.max(np.abs(wp - math.sin(math.radians(deg)) ** 2))))
    report(2, worst <= 1e-14, f"max |w_p - sin^2| over 9 wedges {worst:.2e} (<= 1e-14)")


def test_criterion_3_ode_cross_check():
    t0 = time.perf_counter()
    errs = {}
    xs = np.linspace(2.0, 22.0, 2001)
    for p in (0.0, 0.5, 1.0):
        spec = DeadGasSpec(2.0, p)
        exact = free_layer_closed_form(SQRT, spec, 22.0)
        ode = free_layer_ode(SQRT, spec, 22.0)
        errs[f"p={p:g}"] = float(np.max(np.abs(ode.points(xs)[1] - exact.points(xs)[1])))
    spec = DeadGasSpec(2.0, 2.0)
    exact = free_layer_closed_form(SQRT, spec)
    ode = free_layer_ode(SQRT, spec)
    # distance of the integrated points from the closed-form ellipse
    _, x, y = ode.sample(2001)
    errs["p=2"] = float(np.max(ellipse_distance(exact, x, y)))
    errs["p=2 end"] = math.hypot(ode.blow_up.x - 2 - (math.sqrt(17) - 1) / 6, ode.blow_up.y - 5 * R2 / 3)
    c = Corner.of(SQRT, 2.0)
    vals = {}
    for rho, x_at, ref in ((1.0, 4.0, 2.0147186), (4.0, 3.0, 1.7574354)):
        jet = JetSpec(2.0, rho, 1.0, 0.5, 1.0)
        layer = attached_layer(SQRT, jet, 22.0)
        rk = jet_layer_ode(corner_start(c, 1.0), jet, 22.0)
        errs[f"rho={rho:g}"] = float(np.max(np.abs(rk.points(xs)[1] - layer.points(xs)[1])))
        vals[rho] = (float(layer.points(x_at)[1]), float(rk.points(x_at)[1]), ref)
    dt = time.perf_counter() - t0
    worst = max(errs.values())
    note = "; ".join(f"s={v[0]:.10f} (RK {v[1]:.10f}, literal {v[2]})" for v in vals.values())
    report(3, worst <= 1e-8 and dt < 5.0, f"max sup error {worst:.2e} (<= 1e-8), {dt:.2f} s (< 5 s); {note}")


def test_criterion_4_weak_form():
    t0 = time.perf_counter()
    matrix = build_matrix()
    worst_res, worst_order, detect = 0.0, math.inf, math.inf
    failures = []
    for name, sol in matrix.items():
        phis = standard_grid(sol)
        rep = convergence_study(sol, phis, levels=5)
        worst_res = max(worst_res, rep.max_finest)
        if rep.min_order is not None:
            worst_order = min(worst_order, rep.min_order)
        if not rep.passed():
            failures.append(name)
        sig = perturbation_signal(sol, phis, phis[0].r / 128, factor=1.1)
        detect = min(detect, sig["relative"])
        if sig["relative"] < 1e-3:
            failures.append(f"{name}: w_p x1.1 not detected")
    dt = time.perf_counter() - t0
    ok = not failures and worst_res <= 1e-6 and worst_order >= 1.9 and dt < 60.0
    report(4, ok, f"{len(matrix)} solutions, finest residual {worst_res:.2e} (<= 1e-6), "
                  f"min order {worst_order:.2f} (>= 1.9), w_p x1.1 plateau >= {detect:.2f} relative "
                  f"(>= 1e-3), {dt:.1f} s (< 60 s){' failures: ' + ', '.join(failures) if failures else ''}")


def test_criterion_5_oracle():
    t0 = time.perf_counter()
    checks = {}
    wedge = accrete_wall(Wedge.from_angle(30.0), 2.0, 1e-3)
    checks["wedge w_p"] = float(np.max(np.abs(wedge.w_p / 0.25 - 1)))
    wall = accrete_wall(SQRT, 2.0, 1e-3)
    checks["sqrt w_p(2)"] = abs(wall.w_p[-1] * 27 - 1)
    checks["mass flux"] = abs(wall.M[-1] / R2 - 1)
    ok = checks["wedge w_p"] <= 1e-2 and checks["sqrt w_p(2)"] <= 1e-2 and checks["mass flux"] <= 1e-3
    orders = []
    errs_wp = [abs(accrete_wall(SQRT, 2.0, dx).w_p[-1] - 1 / 27) for dx in (1e-3, 5e-4, 2.5e-4)]
    orders += convergence_order(errs_wp)
    shape_worst = 0.0
    cases = [DeadGasSpec(2.0, p) for p in (0.0, 0.5, 1.0)] + [JETS["attached"], JETS["bounded"]]
    for spec in cases:
        if isinstance(spec, DeadGasSpec):
            exact = free_layer_closed_form(SQRT, spec, 6.0)
            s = lambda x, e=exact: e.points(x)[1]  # noqa: E731
        elif classify_regime(SQRT, spec) == ATTACHED:
            exact = attached_layer(SQRT, spec, 6.0)
            s = lambda x, e=exact: e.points(x)[1]  # noqa: E731
        else:
            vac = vacuum_construction(SQRT, spec)
            post = continue_after_collision(SQRT, spec, vac.collision, 12.0)
            xc = vac.collision.x
            s = lambda x, v=vac, q=post, xc=xc: np.where(x <= xc, v.h(np.minimum(x, xc)), q.points(np.maximum(x, xc))[1])  # noqa: E731
        x_hi = 6.0 if not isinstance(spec, JetSpec) or classify_regime(SQRT, spec) == ATTACHED else 12.0
        errs = [sup_error(accrete_free_layer(SQRT, spec, dx, x_hi), s, 2.0, x_hi) for dx in (1e-3, 5e-4, 2.5e-4)]
        shape_worst = max(shape_worst, errs[0])
        orders += convergence_order(errs)
    dt = time.perf_counter() - t0
    ok = ok and shape_worst <= 5e-3 and all(0.9 <= o <= 1.1 for o in orders) and dt < 30.0
    report(5, ok, f"w_p rel err wedge {checks['wedge w_p']:.1e} / sqrt {checks['sqrt w_p(2)']:.1e} (<= 1%), "
                  f"mass {checks['mass flux']:.1e} (<= 0.1%), shape sup {shape_worst:.1e} (<= 5e-3), "
                  f"orders [{min(orders):.3f}, {max(orders):.3f}] (in [0.9, 1.1]), {dt:.1f} s (< 30 s)")


def test_criterion_6_regimes():
    thr = float(SQRT(2.0)[1])
    regimes_ok = (
        classify_regime(SQRT, JetSpec(2.0, 1.0, 1.0, thr, 1.0)) == ATTACHED
        and classify_regime(SQRT, JetSpec(2.0, 1.0, 1.0, math.nextafter(thr * (1 - 1e-12), 0), 1.0)) == VACUUM_BOUNDED
        and classify_regime(SQRT, JetSpec(2.0, 1.0, 1.0, 0.0, 1.0)) == VACUUM_UNBOUNDED
        and classify_regime(SQRT, JetSpec(2.0, 1.0, 1.0, 5e-324, 1.0)) == VACUUM_BOUNDED
    )
    spec = JetSpec(2.0, 1.0, 1.0, 0.2, 1.0)
    col = collision_point(Corner.of(SQRT, 2.0), spec)
    vac = vacuum_construction(SQRT, spec)
    root = bisect(lambda x: float(vac.h(x) - vac.c(x)), 3.0, 20.0, xtol=1e-15, rtol=1e-15)
    post = continue_after_collision(SQRT, spec, col, col.x + 10.0)
    mp.dps = 40
    h = lambda x: msqrt(2 * x / 3 - mpf(4) / 9) + msqrt(2) / 3  # noqa: E731
    xm = findroot(lambda x: h(x) - msqrt(2) - mpf("0.2") * (x - 2), 9.2)
    dh = float(mp.diff(h, xm))
    slope = float(post.slope(col.x))
    ok = regimes_ok and abs(col.x - root) <= 1e-9 and abs(slope - dh) <= 1e-10
    report(6, ok, f"thresholds exact: {regimes_ok}; x_col {col.x:.10f} vs bisection {root:.10f} "
                  f"(|diff| {abs(col.x - root):.1e} <= 1e-9); post-collision slope {slope:.10f} vs h' {dh:.10f} "
                  f"(|diff| {abs(slope - dh):.1e} <= 1e-10); literals 9.2386045 / 0.1394400 differ by "
                  f"{abs(col.x - 9.2386045):.1e} / {abs(slope - 0.13944):.1e}")


def test_criterion_7_entropy():
    specs = [JetSpec(2.0, rho, 1.0, v, 1.0) for rho in (0.25, 1.0, 4.0) for v in (0.3535533905932738, 0.5, 1.0)]
    specs.append(JETS["attached"])
    bad = []
    for spec in specs:
        assert classify_regime(SQRT, spec) == ATTACHED
        layer = attached_layer(SQRT, spec, 40.0, check=False)
        rep = entropy_check(layer, spec, 1000)
        if not (rep.entropy_ok and rep.positive_ok):
            bad.append((spec.rho_bar, spec.v_bar))
    report(7, not bad, f"{len(specs)} attached solutions x 1000 samples: 0 <= s' <= v/u and d > 0"
                       f"{' violated for ' + str(bad) if bad else ''}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
