"""Data model for measure solutions: bulk states, Dirac curves, wall loads, inflow.

A concentrated layer is described by its section fluxes along the curve:
mass M, momentum (Px, Py) and energy Q carried through a cross section.  With
unit tangent (tx, ty) the arc-length weight densities are

    w_m^i = F_i * tx,   w_n^i = F_i * ty,   F = (M, Px, Py, Q),

so the slip condition w_n^i = slope * w_m^i holds by construction, and the
layer state is u = Px/M, v = Py/M, E = Q/M with density weight M^2/|P|.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

WEIGHT_FIELDS = ("wm0", "wn0", "wm1", "wn1", "wm2", "wn2", "wm3", "wn3")
IDENTITIES = ("mass", "momx", "momy", "energy")

Fn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class FlowState:
    """Constant gas state.  Pressure follows p = (g-1)/g * rho * (E - |u|^2/2)
    unless given explicitly (static gas with a prescribed pressure)."""

    rho: float
    u: float
    v: float
    E: float
    gamma: float = 1.0
    p_given: float | None = None

    @property
    def p(self) -> float:
        if self.p_given is not None:
            return self.p_given
        return state_pressure(self.rho, self.u, self.v, self.E, self.gamma)

    def x_flux(self) -> np.ndarray:
        r, u, v, E = self.rho, self.u, self.v, self.E
        return np.array([r * u, r * u * u + self.p, r * u * v, r * u * E])

    def y_flux(self) -> np.ndarray:
        r, u, v, E = self.rho, self.u, self.v, self.E
        return np.array([r * v, r * u * v, r * v * v + self.p, r * v * E])

    def scaled(self, alpha: float) -> "FlowState":
        # scales every flux and the pressure by alpha
        p = None if self.p_given is None else alpha * self.p_given
        if self.p_given is None and self.gamma != 1.0:
            p = alpha * self.p
        return FlowState(alpha * self.rho, self.u, self.v, self.E, self.gamma, p)

    def to_dict(self) -> dict:
        return {"rho": self.rho, "u": self.u, "v": self.v, "E": self.E, "p": self.p, "gamma": self.gamma}


VACUUM = FlowState(0.0, 0.0, 0.0, 0.0)


def state_pressure(rho, u, v, E, gamma):
    if gamma == 1.0:
        return 0.0 * rho
    return (gamma - 1.0) / gamma * rho * (E - 0.5 * (u * u + v * v))


@dataclass(frozen=True)
class BulkRegion:
    """{x_lo < x < x_hi, lower(x) < y < upper(x)} carrying a constant state.

    ``lower``/``upper`` of None mean -inf/+inf.  ``breaks`` lists interior x where
    a boundary loses smoothness; ``graded_left`` marks a sqrt-type boundary at
    x_lo that needs a graded quadrature.
    """

    name: str
    state: FlowState
    x_lo: float
    x_hi: float
    lower: Fn | None = None
    upper: Fn | None = None
    breaks: tuple[float, ...] = ()
    graded_left: bool = False

    def contains(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        inside = (x > self.x_lo) & (x < self.x_hi)
        xc = np.clip(x, self.x_lo, self.x_hi if math.isfinite(self.x_hi) else np.inf)
        if self.lower is not None:
            inside &= y > self.lower(xc)
        if self.upper is not None:
            inside &= y < self.upper(xc)
        return inside


@dataclass(frozen=True)
class DiracCurve:
    """Concentrated layer on the curve t -> (x(t), y(t)), t in [t0, t1]."""

    name: str
    t0: float
    t1: float
    position: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    velocity: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    fluxes: Callable[[np.ndarray], np.ndarray]
    breaks: tuple[float, ...] = ()
    scales: tuple[float, ...] = (1.0,) * 8

    def tangent(self, t):
        dx, dy = self.velocity(np.asarray(t, dtype=float))
        speed = np.hypot(dx, dy)
        return dx / speed, dy / speed, speed

    def weights(self, t) -> np.ndarray:
        """Arc-length weight densities, rows ordered as WEIGHT_FIELDS."""
        t = np.asarray(t, dtype=float)
        tx, ty, _ = self.tangent(t)
        F = np.asarray(self.fluxes(t), dtype=float)
        w = np.empty((8,) + t.shape)
        for i in range(4):
            w[2 * i] = F[i] * tx * self.scales[2 * i]
            w[2 * i + 1] = F[i] * ty * self.scales[2 * i + 1]
        return w

    def density(self, t) -> np.ndarray:
        """Weight of the density measure, M^2 / |P|."""
        F = np.asarray(self.fluxes(np.asarray(t, dtype=float)), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return F[0] ** 2 / np.hypot(F[1], F[2])

    def state(self, t):
        """(u, v, E) of the concentrated particles."""
        F = np.asarray(self.fluxes(np.asarray(t, dtype=float)), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return F[1] / F[0], F[2] / F[0], F[3] / F[0]

    def perturbed(self, weight: str, factor: float) -> "DiracCurve":
        scales = list(self.scales)
        scales[WEIGHT_FIELDS.index(weight)] *= factor
        return dataclasses.replace(self, scales=tuple(scales))

    def scaled(self, alpha: float) -> "DiracCurve":
        fl = self.fluxes
        return dataclasses.replace(self, fluxes=lambda t: alpha * np.asarray(fl(t)))

    def sample(self, n: int = 200):
        t = np.linspace(self.t0, self.t1, n)
        x, y = self.position(t)
        return t, x, y


@dataclass(frozen=True)
class WallLoad:
    """Pressure load w_p n delta_W on a solid boundary (arc-length density)."""

    name: str
    t0: float
    t1: float
    position: Callable
    velocity: Callable
    normal: Callable
    pressure: Callable
    breaks: tuple[float, ...] = ()
    scale: float = 1.0

    def perturbed(self, factor: float) -> "WallLoad":
        return dataclasses.replace(self, scale=self.scale * factor)

    def scaled(self, alpha: float) -> "WallLoad":
        return self.perturbed(alpha)


@dataclass(frozen=True)
class InflowLine:
    """Boundary flux entering through {x} x [y_lo, y_hi]: (mass, x-mom, y-mom, energy)."""

    name: str
    x: float
    y_lo: float
    y_hi: float
    flux: tuple[float, float, float, float]

    def scaled(self, alpha: float) -> "InflowLine":
        return dataclasses.replace(self, flux=tuple(alpha * f for f in self.flux))


@dataclass(frozen=True)
class BlowUp:
    """Roll-up point of a free layer: position, layer velocity and density weight."""

    x: float
    y: float
    u: float
    v: float
    w_rho: float

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class Graph:
    """Free layer y = s(x) on [x0, x1]."""

    x0: float
    x1: float
    s: Fn
    ds: Fn


@dataclass(frozen=True)
class Parametric:
    """Free layer (x(t), y(t)) on [t0, t1]."""

    t0: float
    t1: float
    x: Fn
    y: Fn
    dx: Fn
    dy: Fn


@dataclass(frozen=True)
class FreeLayer:
    """A free layer with its section fluxes as a function of the curve parameter."""

    representation: Graph | Parametric
    regime: str
    fluxes: Callable[[np.ndarray], np.ndarray]
    blow_up: BlowUp | None = None
    meta: dict = field(default_factory=dict)

    @property
    def is_graph(self) -> bool:
        return isinstance(self.representation, Graph)

    @property
    def domain(self) -> tuple[float, float]:
        r = self.representation
        return (r.x0, r.x1) if self.is_graph else (r.t0, r.t1)

    def points(self, t):
        r = self.representation
        t = np.asarray(t, dtype=float)
        if self.is_graph:
            return t, r.s(t)
        return r.x(t), r.y(t)

    def derivative(self, t):
        r = self.representation
        t = np.asarray(t, dtype=float)
        if self.is_graph:
            return np.ones_like(t), r.ds(t)
        return r.dx(t), r.dy(t)

    def slope(self, t):
        dx, dy = self.derivative(t)
        with np.errstate(divide="ignore"):
            return dy / dx

    def sample(self, n: int = 400):
        t = np.linspace(*self.domain, n)
        x, y = self.points(t)
        return t, x, y

    def state(self, t):
        F = np.asarray(self.fluxes(np.asarray(t, dtype=float)), dtype=float)
        return F[1] / F[0], F[2] / F[0], F[3] / F[0]

    def density(self, t):
        F = np.asarray(self.fluxes(np.asarray(t, dtype=float)), dtype=float)
        return F[0] ** 2 / np.hypot(F[1], F[2])

    def as_curve(self, name: str, t1: float | None = None, t0: float | None = None) -> DiracCurve:
        a, b = self.domain
        return DiracCurve(
            name,
            a if t0 is None else t0,
            b if t1 is None else t1,
            self.points,
            self.derivative,
            self.fluxes,
        )


@dataclass
class MeasureSolution:
    """Bulk regions, Dirac curves, wall loads and inflow data of one solution.

    ``x_limit`` bounds the x-extent on which the solution is defined (the
    truncation x_max, or the blow-up abscissa).
    """

    problem: str
    regions: list[BulkRegion] = field(default_factory=list)
    curves: list[DiracCurve] = field(default_factory=list)
    walls: list[WallLoad] = field(default_factory=list)
    inflows: list[InflowLine] = field(default_factory=list)
    classification: str = "Regular"
    details: dict = field(default_factory=dict)
    x_limit: float = math.inf
    E0: float = 1.0
    layers: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    @property
    def is_empty(self) -> bool:
        return not (self.regions or self.curves or self.walls or self.inflows)

    def curve(self, name: str) -> DiracCurve:
        for c in self.curves:
            if c.name == name:
                return c
        raise KeyError(name)

    def with_curve(self, name: str, curve: DiracCurve) -> "MeasureSolution":
        curves = [curve if c.name == name else c for c in self.curves]
        return dataclasses.replace(self, curves=curves)

    def with_wall_scale(self, factor: float, name: str | None = None) -> "MeasureSolution":
        walls = [w.perturbed(factor) if name in (None, w.name) else w for w in self.walls]
        return dataclasses.replace(self, walls=walls)

    def scaled(self, alpha: float) -> "MeasureSolution":
        """Multiply every measure and boundary datum by alpha."""
        return dataclasses.replace(
            self,
            regions=[dataclasses.replace(r, state=r.state.scaled(alpha)) for r in self.regions],
            curves=[c.scaled(alpha) for c in self.curves],
            walls=[w.scaled(alpha) for w in self.walls],
            inflows=[i.scaled(alpha) for i in self.inflows],
        )
