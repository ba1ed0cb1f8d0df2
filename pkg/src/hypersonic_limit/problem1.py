"""Infinite ramp: concentration layer on the wall and Newton-Busemann pressure."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .geometry import (
    DEFAULT_TOL,
    GeometryError,
    QuadratureError,
    Wedge,
    _slope_ratio,
    as_cache,
    check_admissibility,
    wall_map,
    wall_pressure_values,
)
from .measure import BulkRegion, DiracCurve, FlowState, InflowLine, MeasureSolution, WallLoad

UPSTREAM_RHO = 1.0
UPSTREAM_U = 1.0


class InadmissibleRamp(GeometryError):
    def __init__(self, x_fail: float):
        super().__init__(f"ramp violates the admissibility condition at x = {x_fail:.17g}")
        self.x_fail = x_fail


def upstream_state(E0: float) -> FlowState:
    return FlowState(UPSTREAM_RHO, UPSTREAM_U, 0.0, E0)


def newton_busemann_pressure(geometry, x, flag: bool = False):
    """w_p = [b''H + b'^2 sqrt(1+b'^2)] / (1+b'^2)^(3/2).

    With ``flag=True`` also returns a boolean mask of inadmissible points (w_p <= 0).
    """
    geo = as_cache(geometry)
    _, db, d2b = geo.profile(x)
    wp = wall_pressure_values(db, d2b, geo.H(x))
    if np.ndim(x) == 0:
        wp = float(wp)
    if flag:
        return wp, np.asarray(wp) <= 0
    return wp


def wall_fluxes(geometry, x, E0: float = 1.0) -> np.ndarray:
    """Section fluxes (M, Px, Py, Q) of the wall layer at x."""
    geo = as_cache(geometry)
    x = np.asarray(x, dtype=float)
    b, db, _ = geo.profile(x)
    H = geo.H(x)
    sin = _slope_ratio(db)
    with np.errstate(invalid="ignore"):
        cos = np.where(np.isposinf(db), 0.0, 1.0 / np.sqrt(1.0 + db * db))
    return np.array([b, H * cos, H * sin, E0 * b], dtype=float)


@dataclass(frozen=True)
class WallWeights:
    """Arc-length weight densities on the wall at the sample points x."""

    x: np.ndarray
    wm0: np.ndarray
    wn0: np.ndarray
    wm1: np.ndarray
    wn1: np.ndarray
    wm2: np.ndarray
    wn2: np.ndarray
    wm3: np.ndarray
    wn3: np.ndarray
    w_p: np.ndarray
    w_rho: np.ndarray

    def as_rows(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def wall_weights(geometry, x, E0: float = 1.0) -> WallWeights:
    """w_m^0 = b/sqrt(1+b'^2), w_m^1 = H/(1+b'^2), w_m^2 = b' w_m^1,
    w_m^3 = E0 w_m^0, w_n^i = b' w_m^i and w_rho = b^2/H."""
    geo = as_cache(geometry)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    b, db, _ = geo.profile(x)
    M, Px, Py, Q = wall_fluxes(geo, x, E0)
    fin = np.isfinite(db)
    cos = np.where(fin, 1.0 / np.sqrt(1.0 + np.where(fin, db, 0.0) ** 2), 0.0)
    sin = _slope_ratio(db)
    with np.errstate(invalid="ignore", divide="ignore"):
        w_rho = np.where(M > 0, M * M / np.hypot(Px, Py), 0.0)
    return WallWeights(
        x,
        M * cos, M * sin,
        Px * cos, Px * sin,
        Py * cos, Py * sin,
        Q * cos, Q * sin,
        newton_busemann_pressure(geo, x),
        w_rho,
    )


def layer_state(geometry, x, E0: float = 1.0) -> FlowState:
    """Velocity (H/(b sqrt(1+b'^2)), b' u) and E0 of the wall layer at scalar x."""
    geo = as_cache(geometry)
    x = float(x)
    M, Px, Py, _ = wall_fluxes(geo, x, E0)
    if not M > 0:
        raise GeometryError(f"layer is empty at x = {x:.17g} (b = 0)")
    return FlowState(float(M * M / math.hypot(Px, Py)), float(Px / M), float(Py / M), E0)


def drag_lift(geometry, x_lo: float, x_hi: float, tol: float = DEFAULT_TOL):
    """Force on the ramp between x_lo and x_hi: (int w_p b' dx, -int w_p dx)."""
    geo = as_cache(geometry)
    if not 0 <= x_lo < x_hi:
        raise GeometryError("need 0 <= x_lo < x_hi")
    geo.profile._check_domain(x_hi)

    def wp(x):
        return newton_busemann_pressure(geo, x)

    def wp_db(x):
        # w_p b' stays finite at x = 0 for sqrt-type walls (w_p ~ 1, b' ~ x^(-1/2))
        return wp(x) * float(geo.profile(x)[1]) if x > 0 else 0.0

    out = []
    for f in (wp_db, wp):
        val, err = integrate.quad(f, x_lo, x_hi, epsabs=tol, epsrel=tol, limit=500)
        if not err <= max(tol, tol * abs(val)):
            raise QuadratureError(f"force quadrature error estimate {err:.3g} exceeds tol")
        out.append(val)
    return out[0], -out[1]


def uniform_pressure_ramp(p: float, check_points: int = 16) -> Wedge:
    """The wedge whose Newton-Busemann pressure is the constant p in (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError("uniform pressure must lie in (0, 1)")
    wedge = Wedge(math.sqrt(p / (1.0 - p)))
    # H = x sin(theta) solves H''H + H'^2 = p identically
    xs = np.linspace(0.1, 10.0, check_points)
    H1 = np.full_like(xs, float(_slope_ratio(wedge.slope)))
    H2 = np.zeros_like(xs)
    res = H2 * wedge.closed_form_H(xs) + H1 * H1 - p
    if np.max(np.abs(res)) > 1e-12:
        raise ArithmeticError("uniform-pressure ramp failed its identity check")
    return wedge


def wall_curve(geometry, x_end: float, E0: float, name: str = "wall") -> tuple[DiracCurve, WallLoad]:
    """Dirac curve and pressure load on the wall piece [0, x_end]."""
    geo = as_cache(geometry)
    wm = wall_map(geo.profile, x_end)

    def position(t):
        return wm.x(t), wm.y(t)

    def velocity(t):
        return wm.dx(t), wm.dy(t)

    def fluxes(t):
        return wall_fluxes(geo, wm.x(t), E0)

    def normal(t):
        dx, dy = velocity(t)
        sp = np.hypot(dx, dy)
        return -dy / sp, dx / sp

    def pressure(t):
        return newton_busemann_pressure(geo, wm.x(t))

    curve = DiracCurve(name, 0.0, wm.t1, position, velocity, fluxes)
    load = WallLoad(name, 0.0, wm.t1, position, velocity, normal, pressure)
    return curve, load


def solve_problem1(profile, E0: float = 1.0, x_max: float = 10.0, n_check: int = 400) -> MeasureSolution:
    """Measure solution for uniform hypersonic-limit flow along an infinite ramp."""
    geo = as_cache(profile)
    x_max = min(x_max, geo.profile.x_end)
    report = check_admissibility(geo, 0.0, x_max, n_check)
    if not report.admissible:
        raise InadmissibleRamp(report.first_failure)
    curve, load = wall_curve(geo, x_max, E0)
    wall_y = lambda x: geo.profile(x)[0]  # noqa: E731
    graded = _sqrt_like(geo.profile)
    omega = BulkRegion("upstream", upstream_state(E0), 0.0, x_max, lower=wall_y, graded_left=graded)
    inflow = InflowLine("upstream", 0.0, 0.0, math.inf, tuple(upstream_state(E0).x_flux()))
    return MeasureSolution(
        "p1",
        regions=[omega],
        curves=[curve],
        walls=[load],
        inflows=[inflow],
        classification="Regular",
        x_limit=x_max,
        E0=E0,
        params={"geometry": geo, "E0": E0, "x_max": x_max},
    )


def _sqrt_like(profile) -> bool:
    return bool(np.isposinf(profile(0.0)[1]))
