"""Finite ramp followed by a cliff and a dead-gas zone: the free layer.

Past the cliff the layer fluxes obey, with xi = x - x*, sigma = s - b(x*) and
K = H(x*)/sqrt(1+b'(x*)^2) the wall momentum flux at the corner,

    Px = K + (1 - p) sigma,   Py = b'(x*) K + p xi,   M = s,   s' = Py / Px,

which integrates to the quadratic K sigma + (1-p) sigma^2/2 = b' K xi + p xi^2/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .geometry import GeometryError, as_cache, check_admissibility, _slope_ratio
from .measure import (
    BlowUp,
    BulkRegion,
    FlowState,
    FreeLayer,
    Graph,
    InflowLine,
    MeasureSolution,
    Parametric,
    WallLoad,
)
from .problem1 import InadmissibleRamp, upstream_state, wall_curve

PARABOLA_TOL = 1e-12
DEFAULT_GAMMA = 1.4


class IntegrationError(RuntimeError):
    def __init__(self, msg: str, last: float):
        super().__init__(f"{msg} (last reached {last:.17g})")
        self.last = last


@dataclass(frozen=True)
class DeadGasSpec:
    """Static gas behind the cliff at x_star.  Give p_bar directly, or
    (rho_bar, E_bar[, gamma]) so that p_bar = (gamma-1)/gamma * rho_bar * E_bar."""

    x_star: float
    p_bar: float | None = None
    rho_bar: float | None = None
    E_bar: float | None = None
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        if not self.x_star > 0:
            raise ValueError("x_star must be positive")
        if self.p_bar is None and (self.rho_bar is None or self.E_bar is None):
            raise ValueError("dead gas needs p_bar or (rho_bar, E_bar)")
        if self.pressure < 0:
            raise ValueError("static gas pressure must be >= 0")

    @property
    def pressure(self) -> float:
        if self.p_bar is not None:
            return float(self.p_bar)
        return (self.gamma - 1.0) / self.gamma * self.rho_bar * self.E_bar

    def state(self) -> FlowState:
        p = self.pressure
        rho = 1.0 if self.rho_bar is None else self.rho_bar
        if self.E_bar is not None:
            E = self.E_bar
        elif self.gamma > 1.0:
            E = p * self.gamma / ((self.gamma - 1.0) * rho)
        else:
            E = 0.0
        return FlowState(rho, 0.0, 0.0, E, self.gamma, p_given=p)

    def to_dict(self):
        return {"x_star": self.x_star, "p_bar": self.pressure, "gamma": self.gamma}


@dataclass(frozen=True)
class Corner:
    """Layer data at the end of the wall: position, slope and momentum flux."""

    x: float
    b: float
    db: float
    K: float

    @classmethod
    def of(cls, geometry, x_star: float) -> "Corner":
        geo = as_cache(geometry)
        b, db, _ = geo.profile(float(x_star))
        H = geo.H(float(x_star))
        if not H > 0:
            raise GeometryError(f"H(x_star) = {H} must be positive")
        return cls(float(x_star), float(b), float(db), float(H / math.sqrt(1.0 + db * db)))

    @property
    def Ky(self) -> float:
        return self.db * self.K


def regime_of(p_bar: float) -> str:
    if p_bar == 0.0:
        return "PZero"
    if abs(p_bar - 1.0) < PARABOLA_TOL:
        return "POne"
    return "PSubOne" if p_bar < 1.0 else "PSuperOne"


def _sigma(c: Corner, p: float, xi):
    """Quadratic-root form of s - b(x*) that is stable for every p."""
    xi = np.asarray(xi, dtype=float)
    twoC = p * xi * xi + 2.0 * c.Ky * xi
    disc = np.maximum(c.K * c.K + (1.0 - p) * twoC, 0.0)
    return twoC / (np.sqrt(disc) + c.K), np.sqrt(disc)


def layer_graph(c: Corner, p: float):
    """(s, s', fluxes) as functions of x for the dead-gas layer."""
    if abs(p - 1.0) < PARABOLA_TOL:

        def s(x):
            xi = np.asarray(x, dtype=float) - c.x
            return c.b + c.db * xi + xi * xi / (2.0 * c.K)

        def ds(x):
            return c.db + (np.asarray(x, dtype=float) - c.x) / c.K

        def Px(x):
            return np.full_like(np.asarray(x, dtype=float), c.K)

    else:

        def s(x):
            return c.b + _sigma(c, p, np.asarray(x, dtype=float) - c.x)[0]

        def Px(x):
            return _sigma(c, p, np.asarray(x, dtype=float) - c.x)[1]

        def ds(x):
            xi = np.asarray(x, dtype=float) - c.x
            with np.errstate(divide="ignore"):
                return (c.Ky + p * xi) / Px(x)

    return s, ds, Px


def blow_up_point(c: Corner, p: float, E0: float = 1.0) -> BlowUp:
    """Rightmost point of the ellipse, where the layer velocity turns vertical."""
    if not p > 1.0:
        raise ValueError("blow-up only occurs for p_bar > 1")
    root = math.sqrt(c.db**2 + p / (p - 1.0))
    x = c.x + c.K / p * (root - c.db)
    y = c.b + c.K / (p - 1.0)
    Py = c.K * root
    return BlowUp(x, y, 0.0, Py / y, y * y / Py)


def free_layer_closed_form(geometry, spec: DeadGasSpec, x_max: float | None = None, E0: float = 1.0) -> FreeLayer:
    """Exact free layer.  For p_bar <= 1 a graph on [x*, x_max]; for p_bar > 1
    the lower ellipse branch parametrized by its eccentric angle up to the
    rightmost point."""
    c = Corner.of(geometry, spec.x_star)
    p = spec.pressure
    regime = regime_of(p)
    meta = {"x_star": c.x, "b_star": c.b, "db_star": c.db, "K": c.K, "p_bar": p}
    if p <= 1.0 or regime == "POne":
        x_max = 5.0 * c.x if x_max is None else x_max
        s, ds, Px = layer_graph(c, p)

        def fluxes(x):
            x = np.asarray(x, dtype=float)
            y = s(x)
            return np.array([y, Px(x), c.Ky + p * (x - c.x), E0 * y])

        return FreeLayer(Graph(c.x, x_max, s, ds), regime, fluxes, None, meta)

    q = p - 1.0
    c1, c2 = c.Ky / p, c.K / q
    R = c.K * math.sqrt(c.db**2 / p + 1.0 / q)
    A, B = R / math.sqrt(p), R / math.sqrt(q)
    phi0 = math.atan2(c1 / A, c2 / B)
    meta.update(center=(c.x - c1, c.b + c2), semi_axes=(A, B), phi_star=phi0)

    def x(t):
        return c.x - c1 + A * np.sin(t)

    def y(t):
        return c.b + c2 - B * np.cos(t)

    def dx(t):
        return A * np.cos(t)

    def dy(t):
        return B * np.sin(t)

    def fluxes(t):
        t = np.asarray(t, dtype=float)
        yy = y(t)
        return np.array([yy, q * B * np.cos(t), p * A * np.sin(t), E0 * yy])

    rep = Parametric(phi0, 0.5 * math.pi, x, y, dx, dy)
    return FreeLayer(rep, regime, fluxes, blow_up_point(c, p, E0), meta)


def ellipse_distance(layer: FreeLayer, xs, ys) -> np.ndarray:
    """Distance estimate |F|/|grad F| from points to the layer's ellipse."""
    m = layer.meta
    xc, yc = m["center"]
    A, B = m["semi_axes"]
    X, Y = (np.asarray(xs) - xc) / A, (np.asarray(ys) - yc) / B
    F = X * X + Y * Y - 1.0
    g = 2.0 * np.hypot(X / A, Y / B)
    return np.abs(F) / g


def free_layer_ode(geometry, spec: DeadGasSpec, x_max: float | None = None, tol: float = 1e-12, E0: float = 1.0) -> FreeLayer:
    """Integrate the layer balance with DOP853 instead of using the closed form.

    For p_bar <= 1 integrates s' = Py/Px in x.  For p_bar > 1 integrates the unit
    speed system x' = Px/|P|, y' = Py/|P| in arc length and stops where Px = 0.
    """
    c = Corner.of(geometry, spec.x_star)
    p = spec.pressure
    regime = regime_of(p)
    rtol = atol = max(tol, 1e-14)
    meta = {"x_star": c.x, "b_star": c.b, "p_bar": p, "integrator": "DOP853"}

    def Pvec(x, y):
        return c.K + (1.0 - p) * (y - c.b), c.Ky + p * (x - c.x)

    if p <= 1.0:
        x_max = 5.0 * c.x if x_max is None else x_max

        def rhs(x, y):
            Px, Py = Pvec(x, y[0])
            return [Py / Px]

        sol = solve_ivp(rhs, (c.x, x_max), [c.b], method="DOP853", rtol=rtol, atol=atol, dense_output=True)
        if sol.status != 0:
            raise IntegrationError(sol.message, float(sol.t[-1]))
        dense = sol.sol

        def s(x):
            return dense(np.asarray(x, dtype=float))[0]

        def ds(x):
            x = np.asarray(x, dtype=float)
            Px, Py = Pvec(x, s(x))
            return Py / Px

        def fluxes(x):
            x = np.asarray(x, dtype=float)
            y = s(x)
            Px, Py = Pvec(x, y)
            return np.array([y, Px, Py, E0 * y])

        return FreeLayer(Graph(c.x, x_max, s, ds), regime, fluxes, None, meta)

    def rhs(t, z):
        Px, Py = Pvec(z[0], z[1])
        n = math.hypot(Px, Py)
        return [Px / n, Py / n]

    def vertical(t, z):
        return Pvec(z[0], z[1])[0]

    vertical.terminal = True
    vertical.direction = -1
    L = 10.0 * (c.K / (p - 1.0) + c.K + c.x)
    sol = solve_ivp(rhs, (0.0, L), [c.x, c.b], method="DOP853", rtol=rtol, atol=atol,
                    events=vertical, dense_output=True)
    if sol.status != 1:
        raise IntegrationError("no vertical tangent reached", float(sol.y[0, -1]))
    t_end = float(sol.t_events[0][0])
    xe, ye = sol.y_events[0][0]
    dense = sol.sol

    def x(t):
        return dense(np.asarray(t, dtype=float))[0]

    def y(t):
        return dense(np.asarray(t, dtype=float))[1]

    def dirs(t):
        t = np.asarray(t, dtype=float)
        z = dense(t)
        Px, Py = Pvec(z[0], z[1])
        n = np.hypot(Px, Py)
        return Px / n, Py / n

    def fluxes(t):
        t = np.asarray(t, dtype=float)
        z = dense(t)
        Px, Py = Pvec(z[0], z[1])
        return np.array([z[1], Px, Py, E0 * z[1]])

    Py_end = Pvec(xe, ye)[1]
    blow = BlowUp(float(xe), float(ye), 0.0, Py_end / ye, ye * ye / Py_end)
    rep = Parametric(0.0, t_end, x, y, lambda t: dirs(t)[0], lambda t: dirs(t)[1])
    return FreeLayer(rep, regime, fluxes, blow, meta)


def layer_state_p2(geometry, spec: DeadGasSpec, layer: FreeLayer, t, E0: float = 1.0):
    """(u, v, E, w_rho) on the free layer at parameter t (x for graph layers)."""
    a, b = layer.domain
    t_arr = np.asarray(t, dtype=float)
    slack = 1e-12 * max(1.0, abs(b))
    if np.any(t_arr < a - slack) or np.any(t_arr > b + slack):
        raise ValueError(f"parameter outside layer domain [{a}, {b}]")
    M, Px, Py, Q = np.asarray(layer.fluxes(t_arr), dtype=float)
    return Px / M, Py / M, Q / M, M * M / np.hypot(Px, Py)


def solve_problem2(profile, spec: DeadGasSpec, E0: float = 1.0, x_max: float | None = None,
                   n_check: int = 400, cliff_depth: float | None = None) -> MeasureSolution:
    """Wall layer on [0, x*], free layer beyond, static gas below it."""
    geo = as_cache(profile)
    if not spec.x_star <= geo.profile.x_end:
        raise GeometryError("x_star exceeds the ramp length")
    report = check_admissibility(geo, 0.0, spec.x_star, n_check)
    if not report.admissible:
        raise InadmissibleRamp(report.first_failure)
    c = Corner.of(geo, spec.x_star)
    p = spec.pressure
    x_max = 5.0 * c.x if x_max is None else x_max
    layer = free_layer_closed_form(geo, spec, x_max, E0)
    s, _, _ = layer_graph(c, p)
    x_limit = x_max if layer.blow_up is None else min(x_max, layer.blow_up.x)

    def boundary(x):
        x = np.asarray(x, dtype=float)
        wall = geo.profile(np.minimum(x, c.x))[0]
        return np.where(x <= c.x, wall, s(np.maximum(x, c.x)))

    wall, wall_load = wall_curve(geo, c.x, E0, "wall")
    if layer.blow_up is None:
        free = layer.as_curve("free_layer", t1=x_limit)
    else:
        free = layer.as_curve("free_layer")
    depth = max(10.0, 2.0 * x_max) if cliff_depth is None else cliff_depth
    cliff = WallLoad(
        "cliff", 0.0, depth,
        lambda t: (np.full_like(np.asarray(t, dtype=float), c.x), c.b - np.asarray(t, dtype=float)),
        lambda t: (np.zeros_like(np.asarray(t, dtype=float)), -np.ones_like(np.asarray(t, dtype=float))),
        lambda t: (np.ones_like(np.asarray(t, dtype=float)), np.zeros_like(np.asarray(t, dtype=float))),
        lambda t: np.full_like(np.asarray(t, dtype=float), p),
    )
    graded = bool(np.isposinf(geo.profile(0.0)[1]))
    regions = [
        BulkRegion("upstream", upstream_state(E0), 0.0, x_limit, lower=boundary, breaks=(c.x,), graded_left=graded),
        BulkRegion("static_gas", spec.state(), c.x, x_limit, upper=s),
    ]
    inflow = InflowLine("upstream", 0.0, 0.0, math.inf, tuple(upstream_state(E0).x_flux()))
    details = {"regime": layer.regime, "p_bar": p, "x_star": c.x, "cliff_depth": depth}
    classification = "Regular"
    if layer.blow_up is not None:
        classification = "BlowsUp"
        details["blow_up"] = layer.blow_up.to_dict()
    return MeasureSolution(
        "p2",
        regions=regions,
        curves=[wall, free],
        walls=[wall_load, cliff],
        inflows=[inflow],
        classification=classification,
        details=details,
        x_limit=x_limit,
        E0=E0,
        layers={"free_layer": layer},
        params={"geometry": geo, "spec": spec, "E0": E0, "x_max": x_max},
    )


def asymptotic_slope(p_bar: float) -> float:
    """Limit of s(x)/x for 0 <= p_bar < 1."""
    return math.sqrt(p_bar / (1.0 - p_bar))


def straight_layer_pressure(geometry, x_star: float) -> float:
    """The p_bar for which the free layer continues the wall tangent as a line."""
    _, db, _ = as_cache(geometry).profile(float(x_star))
    return float(_slope_ratio(db)) ** 2
