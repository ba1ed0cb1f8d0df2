"""Discrete flux-balance ("sticky accretion") march, independent of the closed forms.

The layer is tracked by its section fluxes (M, Px, Py, Q).  Each cell adds the
free-stream particles swept up from above, the jet particles swept up from
below, or the static-gas pressure impulse, and on a wall projects the momentum
onto the wall tangent; the projection impulse is the wall pressure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import as_cache, wall_map
from .problem3 import JetSpec


@dataclass
class AccretionResult:
    """Per-node layer fluxes; ``w_p`` and ``x_mid`` are per cell."""

    x: np.ndarray
    y: np.ndarray
    M: np.ndarray
    Px: np.ndarray
    Py: np.ndarray
    Q: np.ndarray
    x_mid: np.ndarray = field(default_factory=lambda: np.empty(0))
    w_p: np.ndarray = field(default_factory=lambda: np.empty(0))
    impulse: tuple[float, float] = (0.0, 0.0)
    captured: dict = field(default_factory=dict)
    blow_up: tuple[float, float] | None = None

    @property
    def slope(self) -> np.ndarray:
        return self.Py / self.Px

    def rows(self):
        return np.column_stack([self.x, self.y, self.M, self.Px, self.Py, self.Q])


def _grid(x0: float, x1: float, dx: float) -> np.ndarray:
    n = max(1, int(math.ceil((x1 - x0) / dx - 1e-9)))
    xs = x0 + dx * np.arange(n + 1)
    xs[-1] = x1
    return xs


def wall_grid(profile, x_end: float, dx: float) -> np.ndarray:
    """Cell nodes on [0, x_end] no wider than dx.

    Walls with an infinite slope at the corner are meshed uniformly in the
    parameter t of x = t^m (y = a t), which grades the cells towards x = 0; a
    uniform x mesh there adds a dx*log(1/dx) error to the layer fluxes.
    """
    wm = wall_map(profile, x_end)
    if wm.t1 == x_end:
        return _grid(0.0, x_end, dx)
    dx_dt = float(wm.dx(wm.t1))
    ts = _grid(0.0, wm.t1, dx / dx_dt)
    xs = wm.x(ts)
    xs[-1] = x_end
    return xs


def accrete_wall(geometry, x_end: float, dx: float, E0: float = 1.0) -> AccretionResult:
    """March along the wall from x = 0 to x_end.

    Per cell the captured mass is b(x_{i+1}) - b(x_i) with unit free-stream
    momentum per unit mass; the wall impulse J along the inner normal at the cell
    end restores tangency, and J divided by the cell arc length estimates w_p.
    """
    if not dx > 0:
        raise ValueError("dx must be positive")
    geo = as_cache(geometry)
    xs = wall_grid(geo.profile, x_end, dx)
    b, db, _ = geo.profile(xs)
    n = len(xs)
    M = np.zeros(n)
    Px = np.zeros(n)
    Py = np.zeros(n)
    Q = np.zeros(n)
    wp = np.zeros(n - 1)
    Jx = Jy = 0.0
    m = px = py = q = 0.0
    for i in range(n - 1):
        dm = b[i + 1] - b[i]
        m += dm
        q += E0 * dm
        px += dm
        d = db[i + 1]
        inv = 1.0 / math.sqrt(1.0 + d * d)
        J = (d * px - py) * inv
        px -= J * d * inv
        py += J * inv
        Jx -= J * d * inv
        Jy += J * inv
        ds = math.hypot(xs[i + 1] - xs[i], dm)
        wp[i] = J / ds if ds > 0 else 0.0
        M[i + 1], Px[i + 1], Py[i + 1], Q[i + 1] = m, px, py, q
    return AccretionResult(
        xs, b.copy(), M, Px, Py, Q,
        x_mid=0.5 * (xs[1:] + xs[:-1]), w_p=wp,
        impulse=(Jx, Jy), captured={"upstream": float(M[-1]), "momentum": (float(M[-1]), 0.0)},
    )


def wall_force(result: AccretionResult) -> tuple[float, float]:
    """Force on the body: the reaction to the wall impulse on the layer."""
    return -result.impulse[0], -result.impulse[1]


def accrete_free_layer(geometry, downstream, dx: float, x_end: float, E0: float = 1.0,
                       x_star: float | None = None) -> AccretionResult:
    """March the free layer past the corner with the explicit first-order scheme.

    ``downstream`` is a static-gas pressure (float, or an object with ``pressure``)
    or a JetSpec.  Stops early when Px <= 0 (the layer turns vertical).
    """
    jet = downstream if isinstance(downstream, JetSpec) else None
    if jet is not None:
        x_star = jet.x_star
        p_bar = 0.0
    else:
        p_bar = float(getattr(downstream, "pressure", downstream))
        x_star = getattr(downstream, "x_star", x_star)
    if x_star is None:
        raise ValueError("x_star is required")
    wall = accrete_wall(geometry, x_star, dx, E0)
    y0 = float(wall.y[-1])
    m, px, py, q = (float(wall.M[-1]), float(wall.Px[-1]), float(wall.Py[-1]), float(wall.Q[-1]))
    xs = _grid(x_star, x_end, dx)
    out = np.full((len(xs), 6), np.nan)
    out[0] = (xs[0], y0, m, px, py, q)
    y = y_top = y0
    q_min = y0
    k = jet.slope if jet is not None else 0.0
    cap_up = cap_jet = 0.0
    mom = [float(wall.M[-1]), 0.0]
    Ix, Iy = wall.impulse
    blow = None
    last = 0
    for i in range(len(xs) - 1):
        h = xs[i + 1] - xs[i]
        y_new = y + py / px * h
        up = max(0.0, y_new - y_top)
        y_top = max(y_top, y_new)
        m += up
        px += up
        q += E0 * up
        cap_up += up
        mom[0] += up
        if jet is not None:
            qn = y_new - k * (xs[i + 1] - x_star)
            dj = jet.rho_bar * jet.u_bar * max(0.0, q_min - qn)
            q_min = min(q_min, qn)
            m += dj
            px += dj * jet.u_bar
            py += dj * jet.v_bar
            q += dj * jet.E_bar
            cap_jet += dj
            mom[0] += dj * jet.u_bar
            mom[1] += dj * jet.v_bar
        else:
            px -= p_bar * (y_new - y)
            py += p_bar * h
            Ix -= p_bar * (y_new - y)
            Iy += p_bar * h
        y = y_new
        out[i + 1] = (xs[i + 1], y, m, px, py, q)
        last = i + 1
        if px <= 0.0:
            blow = (float(xs[i + 1]), float(y))
            break
    out = out[: last + 1]
    return AccretionResult(
        out[:, 0], out[:, 1], out[:, 2], out[:, 3], out[:, 4], out[:, 5],
        impulse=(Ix, Iy),
        captured={"upstream": cap_up, "jet": cap_jet, "wall": float(wall.M[-1]),
                  "momentum": tuple(mom)},
        blow_up=blow,
    )


def sup_error(result: AccretionResult, exact, x_lo: float, x_hi: float) -> float:
    sel = (result.x >= x_lo - 1e-12) & (result.x <= x_hi + 1e-12)
    return float(np.max(np.abs(result.y[sel] - exact(result.x[sel]))))


def convergence_order(errors, ratio: float = 2.0) -> list[float]:
    """Observed orders between successive refinements by ``ratio``."""
    e = np.asarray(errors, dtype=float)
    return list(np.log(e[:-1] / e[1:]) / math.log(ratio))


def free_layer_convergence(geometry, downstream, exact, x_lo: float, x_hi: float,
                           dx0: float = 2e-3, levels: int = 3, E0: float = 1.0) -> dict:
    dxs = [dx0 / 2**k for k in range(levels)]
    errs = [sup_error(accrete_free_layer(geometry, downstream, dx, x_hi, E0), exact, x_lo, x_hi) for dx in dxs]
    return {"dx": dxs, "sup_error": errs, "order": convergence_order(errs)}
