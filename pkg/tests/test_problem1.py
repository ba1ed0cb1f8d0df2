import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from mpmath import mp, mpf, quad as mpquad, sqrt as msqrt

from hypersonic_limit.geometry import GeometryError, Polynomial, Power, Wedge
from hypersonic_limit.problem1 import (
    InadmissibleRamp,
    drag_lift,
    layer_state,
    newton_busemann_pressure,
    solve_problem1,
    uniform_pressure_ramp,
    wall_fluxes,
    wall_weights,
)

SQRT = Power(1.0, 0.5)


def mp_pressure_sqrt(x):
    # high-precision oracle: H by mpmath quadrature, then the pressure law
    mp.dps = 30
    x = mpf(x)
    H = mpquad(lambda t: (1 / (2 * msqrt(t))) / msqrt(1 + 1 / (4 * t)), [0, x])
    db = 1 / (2 * msqrt(x))
    d2b = -1 / (4 * x * msqrt(x))
    return float((d2b * H + db**2 * msqrt(1 + db**2)) / (1 + db**2) ** mpf(1.5))


@pytest.mark.parametrize("deg", range(5, 50, 5))
def test_sine_squared_law(deg):
    w = Wedge.from_angle(deg)
    xs = np.linspace(0.1, 10.0, 25)
    assert np.max(np.abs(newton_busemann_pressure(w, xs) - math.sin(math.radians(deg)) ** 2)) <= 1e-14


def test_sqrt_pressure_at_two():
    assert newton_busemann_pressure(SQRT, 2.0) == pytest.approx(1.0 / 27.0, abs=1e-15)
    assert mp_pressure_sqrt(2) == pytest.approx(1.0 / 27.0, abs=1e-15)


@pytest.mark.parametrize("x", [0.3, 1.0, 5.0, 17.0])
def test_sqrt_pressure_matches_high_precision(x):
    assert newton_busemann_pressure(SQRT, x) == pytest.approx(mp_pressure_sqrt(x), rel=1e-13)


def test_flat_wall_bears_nothing():
    assert newton_busemann_pressure(Wedge(0.0), 3.0) == 0.0
    assert drag_lift(Wedge(0.0), 0.0, 1.0) == (0.0, 0.0)


def test_flag_marks_nonpositive_pressure():
    _, bad = newton_busemann_pressure(Polynomial((1.0, -0.5)), np.array([0.1, 0.9]), flag=True)
    assert list(bad) == [False, True]


def test_sqrt_weights_at_two():
    w = wall_weights(SQRT, 2.0)
    assert w.wm0[0] == pytest.approx(4.0 / 3.0, abs=1e-15)
    assert w.wm1[0] == pytest.approx(8.0 / 9.0, abs=1e-15)
    assert w.w_rho[0] == pytest.approx(2.0, abs=1e-14)
    st_ = layer_state(SQRT, 2.0)
    assert (st_.u, st_.v, st_.E) == pytest.approx((2.0 / 3.0, math.sqrt(2.0) / 6.0, 1.0), abs=1e-15)


@pytest.mark.parametrize("profile", [SQRT, Wedge(0.4), Polynomial((0.5, 0.1, 0.01)), Power(2.0, 0.7)])
def test_wall_invariants(profile):
    xs = np.linspace(0.05, 6.0, 60)
    w = wall_weights(profile, xs, E0=1.7)
    b, db, _ = profile(xs)
    for m, n in ((w.wm0, w.wn0), (w.wm1, w.wn1), (w.wm2, w.wn2), (w.wm3, w.wn3)):
        assert np.allclose(n, db * m, rtol=1e-14, atol=0)
    assert np.allclose(w.wm0 * np.sqrt(1 + db**2), b, rtol=1e-14, atol=0)
    for x, m0, m1, m2, m3 in zip(xs[::10], w.wm0[::10], w.wm1[::10], w.wm2[::10], w.wm3[::10]):
        s = layer_state(profile, x, E0=1.7)
        assert m1 / m0 == pytest.approx(s.u, rel=1e-14)
        assert m2 / m0 == pytest.approx(s.v, rel=1e-14)
        assert m3 / m0 == pytest.approx(1.7, rel=1e-14)


def test_weights_vanish_at_origin():
    w = wall_weights(SQRT, np.array([0.0, 1e-12]))
    for k in ("wm0", "wm1", "wm2", "wm3", "wn0"):
        assert abs(getattr(w, k)[0]) == 0.0
        assert abs(getattr(w, k)[1]) < 1e-5


@pytest.mark.parametrize("deg", [10, 30, 60])
def test_wedge_state_is_tangent(deg):
    w = Wedge.from_angle(deg)
    s = layer_state(w, 2.5)
    assert s.v / s.u == pytest.approx(math.tan(math.radians(deg)), rel=1e-14)
    # momentum balance: layer speed is cos(theta), all normal momentum went to the wall
    assert math.hypot(s.u, s.v) == pytest.approx(math.cos(math.radians(deg)), rel=1e-14)


def test_empty_layer_state_errors():
    with pytest.raises(GeometryError):
        layer_state(Wedge(0.0), 1.0)


def test_wedge_drag():
    fx, fy = drag_lift(Wedge.from_angle(30.0), 0.0, 1.0)
    assert fx == pytest.approx(0.25 * math.tan(math.radians(30.0)), abs=1e-14)
    assert fx == pytest.approx(0.1443376, abs=5e-8)
    assert fy == pytest.approx(-0.25, abs=1e-14)


@pytest.mark.parametrize("profile,x", [(SQRT, 2.0), (SQRT, 7.0), (Polynomial((0.5, 0.1)), 3.0)])
def test_force_equals_momentum_deficit(profile, x):
    # independent balance: captured x-momentum b(x) minus what the layer still carries
    M, Px, Py, _ = wall_fluxes(profile, x)
    fx, fy = drag_lift(profile, 0.0, x)
    assert fx == pytest.approx(M - Px, abs=1e-10)
    assert fy == pytest.approx(-Py, abs=1e-10)


def test_sqrt_force_on_zero_two():
    fx, fy = drag_lift(SQRT, 0.0, 2.0)
    assert fx == pytest.approx(math.sqrt(2.0) / 3.0, abs=1e-10)
    assert fy == pytest.approx(-1.0 / 3.0, abs=1e-10)


@pytest.mark.parametrize("p,slope", [(0.5, 1.0), (0.25, math.tan(math.radians(30.0)))])
def test_uniform_pressure_ramp(p, slope):
    w = uniform_pressure_ramp(p)
    assert w.slope == pytest.approx(slope, rel=1e-15)
    assert newton_busemann_pressure(w, 4.0) == pytest.approx(p, abs=1e-15)


def test_uniform_pressure_small_p_and_bounds():
    assert uniform_pressure_ramp(1e-12).slope < 1e-5
    for p in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            uniform_pressure_ramp(p)


def test_solve_wedge():
    t = math.tan(math.radians(20.0))
    sol = solve_problem1(Wedge(t), 1.0, 5.0)
    load = sol.walls[0]
    ts = np.linspace(load.t0, load.t1, 9)
    assert np.allclose(load.pressure(ts), math.sin(math.radians(20.0)) ** 2, atol=1e-15)
    c = sol.curve("wall")
    x, _ = c.position(ts)
    assert np.allclose(c.fluxes(ts)[0], x * t, rtol=1e-14)


def test_solve_sqrt_matches_weights():
    sol = solve_problem1(SQRT, 1.0, 4.0)
    c = sol.curve("wall")
    t = math.sqrt(2.0)  # the wall is parametrized by y for sqrt-type walls
    x, y = c.position(t)
    assert (x, y) == pytest.approx((2.0, math.sqrt(2.0)), abs=1e-14)
    w = c.weights(np.array([t]))
    ref = wall_weights(SQRT, 2.0)
    assert w[0, 0] == pytest.approx(ref.wm0[0], rel=1e-14)
    assert w[2, 0] == pytest.approx(ref.wm1[0], rel=1e-14)


def test_flat_wall_rejected():
    with pytest.raises(InadmissibleRamp) as exc:
        solve_problem1(Wedge(0.0))
    assert exc.value.x_fail == 0.0


@settings(max_examples=50, deadline=None)
@given(st.floats(0.5, 60.0), st.floats(0.01, 30.0))
def test_wedge_pressure_property(deg, x):
    w = Wedge.from_angle(deg)
    assert newton_busemann_pressure(w, x) == pytest.approx(math.sin(math.radians(deg)) ** 2, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.2, 0.9), st.floats(0.3, 3.0), st.floats(0.05, 8.0))
def test_power_mass_and_slip_property(alpha, coeff, x):
    p = Power(coeff, alpha)
    w = wall_weights(p, x)
    b, db, _ = p(x)
    assert w.wm0[0] * math.sqrt(1 + db * db) == pytest.approx(b, rel=1e-13)
    assert w.wn1[0] == pytest.approx(db * w.wm1[0], rel=1e-13)
