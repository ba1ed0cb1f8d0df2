"""Hypersonic-limit flow meeting a pressureless jet issuing from the cliff.

A layer fed from above by the free stream (1, 1, 0, E0) and from below by the
jet (rho, u, v, E) carries, with xi = x - x0, sigma = s - y0 and a = 1 - rho u^2,

    Px = Px0 + rho u v xi + a sigma
    Py = Py0 + rho v^2 xi - rho u v sigma
    M  = M0 + rho v xi + (1 - rho u) sigma

and slip s' = Py/Px integrates to  B sigma + a sigma^2/2 = C  with
B = Px0 + rho u v xi, C = Py0 xi + rho v^2 xi^2/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .geometry import GeometryError, as_cache, check_admissibility
from .measure import VACUUM, BulkRegion, FlowState, FreeLayer, Graph, InflowLine, MeasureSolution
from .problem1 import InadmissibleRamp, layer_state, upstream_state, wall_curve
from .problem2 import Corner, IntegrationError, layer_graph

LINEAR_TOL = 1e-12
# relative slack in v/u >= b'(x*): at equality the collision sits on the corner
SLOPE_TOL = 1e-12

ATTACHED = "Attached"
VACUUM_UNBOUNDED = "VacuumUnbounded"
VACUUM_BOUNDED = "VacuumBounded"


class EntropyViolation(ValueError):
    def __init__(self, what: str, x: float):
        super().__init__(f"{what} violated at x = {x:.17g}")
        self.x = x


@dataclass(frozen=True)
class JetSpec:
    """Uniform pressureless jet leaving the cliff x = x_star below the corner."""

    x_star: float
    rho_bar: float
    u_bar: float
    v_bar: float
    E_bar: float

    def __post_init__(self):
        if not self.x_star > 0:
            raise ValueError("x_star must be positive")
        if not self.rho_bar > 0:
            raise ValueError("jet density must be positive")
        if not self.u_bar > 0:
            raise ValueError("jet must flow out of the cliff (u_bar > 0)")

    @property
    def a(self) -> float:
        return 1.0 - self.rho_bar * self.u_bar**2

    @property
    def slope(self) -> float:
        return self.v_bar / self.u_bar

    def state(self) -> FlowState:
        return FlowState(self.rho_bar, self.u_bar, self.v_bar, self.E_bar)

    def to_dict(self):
        return {"x_star": self.x_star, "rho_bar": self.rho_bar, "u_bar": self.u_bar,
                "v_bar": self.v_bar, "E_bar": self.E_bar}


@dataclass(frozen=True)
class LayerStart:
    """Initial point and section fluxes of a jet-fed layer."""

    x: float
    y: float
    M: float
    Px: float
    Py: float
    Q: float


@dataclass(frozen=True)
class Collision:
    x: float
    h: float
    dh: float

    def to_dict(self):
        return {"x": self.x, "h": self.h, "dh": self.dh}


@dataclass(frozen=True)
class VacuumRegion:
    """Vacuum between the layer y = h(x) above and the contact line y = c(x) below."""

    upper: FreeLayer
    contact_slope: float
    x_star: float
    b_star: float
    collision: Collision | None

    def c(self, x):
        return self.b_star + self.contact_slope * (np.asarray(x, dtype=float) - self.x_star)

    def h(self, x):
        return self.upper.representation.s(x)

    @property
    def bounded(self) -> bool:
        return self.collision is not None


def _attaches(spec: JetSpec, c: Corner) -> bool:
    return spec.slope >= c.db - SLOPE_TOL * abs(c.db)


def classify_regime(geometry, spec: JetSpec) -> str:
    c = Corner.of(geometry, spec.x_star)
    if _attaches(spec, c):
        return ATTACHED
    if spec.v_bar <= 0:
        return VACUUM_UNBOUNDED
    return VACUUM_BOUNDED


def _jet_sigma(start: LayerStart, spec: JetSpec, xi):
    r, u, v, a = spec.rho_bar, spec.u_bar, spec.v_bar, spec.a
    B = start.Px + r * u * v * xi
    C = start.Py * xi + 0.5 * r * v * v * xi * xi
    if abs(a) < LINEAR_TOL:
        return C / B, B
    root = np.sqrt(np.maximum(B * B + 2.0 * a * C, 0.0))
    return 2.0 * C / (B + root), root


def jet_fluxes(start: LayerStart, spec: JetSpec, E0: float, x, sigma) -> np.ndarray:
    r, u, v, a = spec.rho_bar, spec.u_bar, spec.v_bar, spec.a
    xi = np.asarray(x, dtype=float) - start.x
    sigma = np.asarray(sigma, dtype=float)
    Px = start.Px + r * u * v * xi + a * sigma
    Py = start.Py + r * v * v * xi - r * u * v * sigma
    jet_mass = r * (v * xi - u * sigma)
    M = start.M + sigma + jet_mass
    Q = start.Q + E0 * sigma + spec.E_bar * jet_mass
    return np.array([M, Px, Py, Q])


def jet_layer(start: LayerStart, spec: JetSpec, x_max: float, E0: float, regime: str) -> FreeLayer:
    """Closed-form layer from ``start`` on [start.x, x_max]."""

    def sigma(x):
        return _jet_sigma(start, spec, np.asarray(x, dtype=float) - start.x)[0]

    def s(x):
        return start.y + sigma(x)

    def fluxes(x):
        x = np.asarray(x, dtype=float)
        return jet_fluxes(start, spec, E0, x, sigma(x))

    def ds(x):
        F = fluxes(x)
        return F[2] / F[1]

    meta = {"start": start, "linear": abs(spec.a) < LINEAR_TOL}
    return FreeLayer(Graph(start.x, x_max, s, ds), regime, fluxes, None, meta)


def jet_layer_ode(start: LayerStart, spec: JetSpec, x_max: float, E0: float = 1.0, tol: float = 1e-12) -> FreeLayer:
    """Same layer by DOP853 integration of s' = Py/Px with fluxes linear in sigma."""

    def rhs(x, y):
        F = jet_fluxes(start, spec, E0, x, y[0] - start.y)
        return [F[2] / F[1]]

    tol = max(tol, 1e-14)
    sol = solve_ivp(rhs, (start.x, x_max), [start.y], method="DOP853", rtol=tol, atol=tol, dense_output=True)
    if sol.status != 0:
        raise IntegrationError(sol.message, float(sol.t[-1]))
    dense = sol.sol

    def s(x):
        return dense(np.asarray(x, dtype=float))[0]

    def fluxes(x):
        x = np.asarray(x, dtype=float)
        return jet_fluxes(start, spec, E0, x, s(x) - start.y)

    def ds(x):
        F = fluxes(x)
        return F[2] / F[1]

    return FreeLayer(Graph(start.x, x_max, s, ds), "ode", fluxes, None, {"integrator": "DOP853"})


def corner_start(c: Corner, E0: float) -> LayerStart:
    return LayerStart(c.x, c.b, c.b, c.K, c.Ky, E0 * c.b)


@dataclass(frozen=True)
class EntropyReport:
    xs: np.ndarray
    slope: np.ndarray
    d: np.ndarray
    entropy_ok: bool
    positive_ok: bool
    first_failure: float | None

    def __bool__(self):
        return self.entropy_ok and self.positive_ok


def entropy_check(layer: FreeLayer, spec: JetSpec, n_samples: int = 1000, slack: float = 1e-12) -> EntropyReport:
    """Sample 0 <= s' <= v/u and d(x) = M > 0 along a jet-fed layer."""
    x0, x1 = layer.domain
    xs = np.linspace(x0, x1, n_samples)
    F = layer.fluxes(xs)
    sp = F[2] / F[1]
    ent = (sp >= -slack) & (sp <= spec.slope + slack)
    pos = F[0] > 0
    bad = ~(ent & pos)
    first = float(xs[np.argmax(bad)]) if bad.any() else None
    return EntropyReport(xs, sp, F[0], bool(ent.all()), bool(pos.all()), first)


def attached_layer(geometry, spec: JetSpec, x_max: float | None = None, E0: float = 1.0,
                   n_samples: int = 1000, check: bool = True) -> FreeLayer:
    """Layer attached to the corner when the jet slope v/u is at least b'(x*)."""
    c = Corner.of(geometry, spec.x_star)
    if not _attaches(spec, c):
        raise ValueError("jet slope below the wall slope: the layer separates (vacuum regime)")
    x_max = 5.0 * c.x if x_max is None else x_max
    layer = jet_layer(corner_start(c, E0), spec, x_max, E0, ATTACHED)
    if check:
        rep = entropy_check(layer, spec, n_samples)
        if not rep.entropy_ok:
            raise EntropyViolation("entropy condition 0 <= s' <= v/u", rep.first_failure)
        if not rep.positive_ok:
            raise EntropyViolation("layer mass positivity", rep.first_failure)
    return layer


def collision_point(c: Corner, spec: JetSpec) -> Collision:
    u, v, db = spec.u_bar, spec.v_bar, c.db
    x = c.x + 2.0 * (u * db - v) * u / (v * v) * c.K
    h = c.b + 2.0 * (u * db - v) / v * c.K
    return Collision(x, h, db * v / (2.0 * u * db - v))


def vacuum_construction(geometry, spec: JetSpec, x_max: float | None = None, E0: float = 1.0) -> VacuumRegion:
    """Layer with no pressure below it and the straight contact line of the jet."""
    c = Corner.of(geometry, spec.x_star)
    if _attaches(spec, c):
        raise ValueError("vacuum construction needs v/u < b'(x*) (attached regime given)")
    collision = collision_point(c, spec) if spec.v_bar > 0 else None
    x_end = collision.x if collision is not None else (5.0 * c.x if x_max is None else x_max)
    s, ds, Px = layer_graph(c, 0.0)

    def fluxes(x):
        x = np.asarray(x, dtype=float)
        h = s(x)
        return np.array([h, Px(x), np.full_like(x, c.Ky), E0 * h])

    regime = VACUUM_BOUNDED if collision is not None else VACUUM_UNBOUNDED
    upper = FreeLayer(Graph(c.x, x_end, s, ds), regime, fluxes, None, {})
    return VacuumRegion(upper, spec.slope, c.x, c.b, collision)


def continue_after_collision(geometry, spec: JetSpec, collision: Collision, x_max: float | None = None,
                             E0: float = 1.0) -> FreeLayer:
    """Layer beyond the collision, fed by both streams from x^ onward."""
    c = Corner.of(geometry, spec.x_star)
    vac = vacuum_construction(geometry, spec, E0=E0)
    h_at = float(vac.h(collision.x))
    if not math.isclose(h_at, collision.h, rel_tol=1e-12, abs_tol=1e-12):
        raise ValueError("collision point does not lie on the vacuum layer")
    M0, Px0, Py0, Q0 = vac.upper.fluxes(collision.x)
    start = LayerStart(collision.x, collision.h, float(M0), float(Px0), float(Py0), float(Q0))
    x_max = max(5.0 * c.x, collision.x + 10.0) if x_max is None else x_max
    return jet_layer(start, spec, x_max, E0, "PostCollision")


def solve_problem3(profile, spec: JetSpec, E0: float = 1.0, x_max: float | None = None,
                   n_check: int = 400) -> MeasureSolution:
    geo = as_cache(profile)
    if not spec.x_star <= geo.profile.x_end:
        raise GeometryError("x_star exceeds the ramp length")
    report = check_admissibility(geo, 0.0, spec.x_star, n_check)
    if not report.admissible:
        raise InadmissibleRamp(report.first_failure)
    c = Corner.of(geo, spec.x_star)
    x_max = 5.0 * c.x if x_max is None else x_max
    regime = classify_regime(geo, spec)
    wall, wall_load = wall_curve(geo, c.x, E0, "wall")
    graded = bool(np.isposinf(geo.profile(0.0)[1]))
    up, jet = upstream_state(E0), spec.state()
    details = {"regime": regime, "x_star": c.x}
    layers = {}
    curves = [wall]
    regions = []

    def wall_then(f):
        def lower(x):
            x = np.asarray(x, dtype=float)
            return np.where(x <= c.x, geo.profile(np.minimum(x, c.x))[0], f(np.maximum(x, c.x)))
        return lower

    if regime == ATTACHED:
        layer = attached_layer(geo, spec, x_max, E0)
        s = layer.representation.s
        layers["free_layer"] = layer
        curves.append(layer.as_curve("free_layer"))
        regions += [
            BulkRegion("upstream", up, 0.0, x_max, lower=wall_then(s), breaks=(c.x,), graded_left=graded),
            BulkRegion("jet", jet, c.x, x_max, upper=s),
        ]
        rep = entropy_check(layer, spec)
        details["entropy_ok"] = bool(rep)
    else:
        vac = vacuum_construction(geo, spec, x_max, E0)
        layers["vacuum_layer"] = vac.upper
        layers["vacuum"] = vac
        if vac.collision is None:
            curves.append(vac.upper.as_curve("free_layer", t1=x_max))
            regions += [
                BulkRegion("upstream", up, 0.0, x_max, lower=wall_then(vac.h), breaks=(c.x,), graded_left=graded),
                BulkRegion("vacuum", VACUUM, c.x, x_max, lower=vac.c, upper=vac.h),
                BulkRegion("jet", jet, c.x, x_max, upper=vac.c),
            ]
        else:
            col = vac.collision
            details["collision"] = col.to_dict()
            post = continue_after_collision(geo, spec, col, max(x_max, col.x), E0)
            layers["post_collision"] = post
            rep = entropy_check(post, spec)
            details["post_collision_entropy_ok"] = bool(rep)
            s_post = post.representation.s
            x_hi = max(x_max, col.x)

            def top(x):
                x = np.asarray(x, dtype=float)
                return np.where(x <= col.x, vac.h(np.minimum(x, col.x)), s_post(np.maximum(x, col.x)))

            def jet_top(x):
                x = np.asarray(x, dtype=float)
                return np.where(x <= col.x, vac.c(x), s_post(np.maximum(x, col.x)))

            curves.append(vac.upper.as_curve("free_layer"))
            curves.append(post.as_curve("post_collision", t1=x_hi))
            regions += [
                BulkRegion("upstream", up, 0.0, x_hi, lower=wall_then(top), breaks=(c.x, col.x), graded_left=graded),
                BulkRegion("vacuum", VACUUM, c.x, col.x, lower=vac.c, upper=vac.h),
                BulkRegion("jet", jet, c.x, x_hi, upper=jet_top, breaks=(col.x,)),
            ]
            x_max = x_hi
    inflows = [
        InflowLine("upstream", 0.0, 0.0, math.inf, tuple(up.x_flux())),
        InflowLine("jet", c.x, -math.inf, c.b, tuple(jet.x_flux())),
    ]
    return MeasureSolution(
        "p3",
        regions=regions,
        curves=curves,
        walls=[wall_load],
        inflows=inflows,
        classification=regime,
        details=details,
        x_limit=x_max,
        E0=E0,
        layers=layers,
        params={"geometry": geo, "spec": spec, "E0": E0, "x_max": x_max},
    )


def export_singular_riemann(solution: MeasureSolution, x_star: float | None = None) -> dict:
    """Trace at x = x_star: bulk states above and below the corner plus the point mass."""
    geo = solution.params["geometry"]
    spec = solution.params.get("spec")
    E0 = solution.E0
    if x_star is None:
        x_star = spec.x_star if spec is not None else solution.x_limit
    b = float(geo.profile(float(x_star))[0])
    upper = upstream_state(E0).to_dict()
    if isinstance(spec, JetSpec):
        lower = spec.state().to_dict()
    elif spec is not None:
        lower = spec.state().to_dict()
    else:
        lower = VACUUM.to_dict()
    point = None
    if b > 0:
        st = layer_state(geo, x_star, E0)
        point = {"y": b, "weight": st.rho, "u": st.u, "v": st.v, "E": st.E}
    return {"x": float(x_star), "upper_state": upper, "lower_state": lower, "point_mass": point}
