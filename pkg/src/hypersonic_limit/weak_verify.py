"""Quadrature of the distributional identities satisfied by a measure solution.

For a test function phi and identity k (mass, x-momentum, y-momentum, energy)
the residual is

    sum_regions  int_R F_k phi_x + G_k phi_y dA
  + sum_curves   int_L w_m^k phi_x + w_n^k phi_y ds
  + sum_walls    int_W w_p n_k phi ds                (momentum only)
  + sum_inflows  flux_k int phi(x0, y) dy

which vanishes for an exact solution.  Bulk fluxes include the pressure, so the
absolutely continuous pressure measure is covered by the momentum rows.

Bulk regions are strips between graphs.  The inner y integral of the polynomial
bump is done exactly and the outer x integral by composite Simpson on pieces
split at support edges, region breaks and boundary crossings of the support.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .measure import IDENTITIES, WEIGHT_FIELDS, BulkRegion, DiracCurve, MeasureSolution, WallLoad, state_pressure

ROUNDING = 1e-12
ORDER_MIN = 1.9
RESIDUAL_MAX = 1e-6
N_SCAN = 2048


def _clip(t):
    return np.clip(t, -1.0, 1.0)


def bump(t):
    t = _clip(t)
    return (1.0 - t * t) ** 2


def bump_prime(t):
    t = np.asarray(t, dtype=float)
    return np.where(np.abs(t) < 1.0, -4.0 * t * (1.0 - t * t), 0.0)


def bump_integral(t):
    """Antiderivative of the bump, constant outside [-1, 1]."""
    t = _clip(t)
    return t - 2.0 * t**3 / 3.0 + t**5 / 5.0


@dataclass(frozen=True)
class TestFunction:
    """phi(x, y) = B((x-c)/r) B((y-d)/r) with B(s) = (1-s^2)^2 on |s| <= 1."""

    c: float
    d: float
    r: float

    __test__ = False

    def __call__(self, x, y):
        return bump((np.asarray(x) - self.c) / self.r) * bump((np.asarray(y) - self.d) / self.r)

    def grad(self, x, y):
        xi = (np.asarray(x) - self.c) / self.r
        eta = (np.asarray(y) - self.d) / self.r
        return bump_prime(xi) * bump(eta) / self.r, bump(xi) * bump_prime(eta) / self.r

    @property
    def box(self):
        return self.c - self.r, self.c + self.r, self.d - self.r, self.d + self.r

    def to_dict(self):
        return {"center": [self.c, self.d], "radius": self.r}


def simpson(f, a: float, b: float, n: int, graded: bool = False) -> float:
    """Composite Simpson with n (even) panels; graded uses x = a + (b-a) u^2."""
    if b <= a:
        return 0.0
    n += n % 2
    u = np.linspace(0.0, 1.0, n + 1)
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w *= (1.0 / n) / 3.0
    if graded:
        x = a + (b - a) * u * u
        jac = 2.0 * (b - a) * u
    else:
        x = a + (b - a) * u
        jac = np.full_like(u, b - a)
    vals = np.asarray(f(x), dtype=float)
    return np.tensordot(vals * jac, w, axes=([-1], [0]))


def _panels(length: float, h: float) -> int:
    n = max(2, int(math.ceil(length / h - 1e-9)))
    return n + n % 2


def _roots(g, a: float, b: float, n: int = 256) -> list[float]:
    xs = np.linspace(a, b, n + 1)
    with np.errstate(invalid="ignore"):
        vals = np.asarray(g(xs), dtype=float)
    out = []
    for i in range(n):
        va, vb = vals[i], vals[i + 1]
        if not (np.isfinite(va) and np.isfinite(vb)):
            continue
        if va == 0.0 and 0 < i:
            out.append(float(xs[i]))
        elif va * vb < 0:
            out.append(brentq(lambda t: float(g(np.array([t]))[0]), xs[i], xs[i + 1], xtol=1e-15, rtol=1e-15))
    return out


def bulk_moments(region: BulkRegion, phi: TestFunction, h: float) -> np.ndarray:
    """(int_R phi_x dA, int_R phi_y dA)."""
    x0, x1, y0, y1 = phi.box
    a, b = max(x0, region.x_lo), min(x1, region.x_hi)
    if not b > a:
        return np.zeros(2)
    cuts = {a, b}
    cuts.update(t for t in region.breaks if a < t < b)
    for bound in (region.lower, region.upper):
        if bound is None:
            continue
        for level in (y0, y1):
            cuts.update(_roots(lambda x, f=bound, lv=level: f(x) - lv, a, b))
    cuts = sorted(cuts)

    def integrand(x):
        xi = (x - phi.c) / phi.r
        eu = np.ones_like(x) if region.upper is None else (region.upper(x) - phi.d) / phi.r
        el = -np.ones_like(x) if region.lower is None else (region.lower(x) - phi.d) / phi.r
        gx = bump_prime(xi) * (bump_integral(eu) - bump_integral(el))
        gy = bump(xi) * (bump(eu) - bump(el))
        return np.array([gx, gy])

    total = np.zeros(2)
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi - lo <= 0:
            continue
        graded = region.graded_left and lo == region.x_lo
        total += simpson(integrand, lo, hi, _panels(hi - lo, h), graded)
    return total


@lru_cache(maxsize=512)
def _scan(curve) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    ts = np.unique(np.concatenate([np.linspace(curve.t0, curve.t1, N_SCAN + 1), np.asarray(curve.breaks, dtype=float)]))
    x, y = curve.position(ts)
    return ts, np.asarray(x, dtype=float), np.asarray(y, dtype=float)


def _pieces(curve, phi: TestFunction) -> list[tuple[float, float]]:
    """Parameter intervals of the curve lying inside the support box of phi."""
    x0, x1, y0, y1 = phi.box
    ts, xs, ys = _scan(curve)

    def g(t):
        x, y = curve.position(np.array([t]))
        return float(max(abs(x[0] - phi.c), abs(y[0] - phi.d)) - phi.r)

    gs = np.maximum(np.abs(xs - phi.c), np.abs(ys - phi.d)) - phi.r
    inside = gs < 0
    out = []
    i, n = 0, len(ts)
    while i < n:
        if not inside[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and inside[j + 1]:
            j += 1
        lo = ts[0] if i == 0 else brentq(g, ts[i - 1], ts[i], xtol=1e-15, rtol=1e-15)
        hi = ts[-1] if j == n - 1 else brentq(g, ts[j], ts[j + 1], xtol=1e-15, rtol=1e-15)
        brk = [t for t in curve.breaks if lo < t < hi]
        knots = [lo] + brk + [hi]
        out.extend(zip(knots[:-1], knots[1:]))
        i = j + 1
    return out


def _piece_length(curve, lo: float, hi: float) -> float:
    t = np.linspace(lo, hi, 17)
    x, y = curve.position(t)
    return float(np.sum(np.hypot(np.diff(x), np.diff(y))))


def curve_terms(curve: DiracCurve, phi: TestFunction, h: float, per_field: bool = False):
    """Per-identity int w_m^k phi_x + w_n^k phi_y ds and the sum of magnitudes;
    with ``per_field`` also int |w_j| |dphi| ds for each of the eight weights."""
    val = np.zeros(4)
    mag = np.zeros(4)
    fields = np.zeros(8)
    for lo, hi in _pieces(curve, phi):

        def f(t):
            x, y = curve.position(t)
            px, py = phi.grad(x, y)
            _, _, speed = curve.tangent(t)
            w = curve.weights(t)
            parts = np.vstack([w[0::2] * px, w[1::2] * py]) * speed
            return np.vstack([parts[:4] + parts[4:], np.abs(parts[:4]) + np.abs(parts[4:]),
                              np.abs(parts)])

        out = simpson(f, lo, hi, _panels(_piece_length(curve, lo, hi), h))
        val += out[:4]
        mag += out[4:8]
        fields[0::2] += out[8:12]
        fields[1::2] += out[12:16]
    if per_field:
        return val, mag, fields
    return val, mag


def wall_terms(wall: WallLoad, phi: TestFunction, h: float) -> tuple[np.ndarray, np.ndarray]:
    val = np.zeros(4)
    mag = np.zeros(4)
    for lo, hi in _pieces(wall, phi):

        def f(t):
            x, y = wall.position(t)
            dx, dy = wall.velocity(t)
            n1, n2 = wall.normal(t)
            g = wall.scale * np.asarray(wall.pressure(t), dtype=float) * phi(x, y) * np.hypot(dx, dy)
            return np.vstack([g * n1, g * n2])

        out = simpson(f, lo, hi, _panels(_piece_length(wall, lo, hi), h))
        val[1:3] += out
        mag[1:3] += np.abs(out)
    return val, mag


def inflow_term(line, phi: TestFunction) -> np.ndarray:
    xi = (line.x - phi.c) / phi.r
    hi = (line.y_hi - phi.d) / phi.r
    lo = (line.y_lo - phi.d) / phi.r
    w = float(bump(xi)) * phi.r * float(bump_integral(hi) - bump_integral(lo))
    return np.asarray(line.flux, dtype=float) * w


def check_support(solution: MeasureSolution, phi: TestFunction, h: float):
    if h > 2.0 * phi.r / 4.0:
        raise ValueError(f"step h = {h} is too coarse for support radius {phi.r} (< 4 cells across)")
    if phi.c + phi.r >= solution.x_limit:
        raise ValueError(f"test function support reaches x = {phi.c + phi.r} beyond the solution domain x < {solution.x_limit}")
    if phi.d - phi.r <= _cliff_bottom(solution):
        raise ValueError("test function support extends below the truncated cliff")


def _cliff_bottom(solution):
    for w in solution.walls:
        if w.name == "cliff":
            return float(w.position(np.array([w.t1]))[1][0])
    return -math.inf


def residuals(solution: MeasureSolution, phi: TestFunction, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Residuals of all four identities and the magnitude scale of their terms."""
    if solution.is_empty:
        return np.zeros(4), np.zeros(4)
    check_support(solution, phi, h)
    res = np.zeros(4)
    mag = np.zeros(4)
    for reg in solution.regions:
        Ix, Iy = bulk_moments(reg, phi, h)
        F, G = reg.state.x_flux(), reg.state.y_flux()
        res += F * Ix + G * Iy
        mag += np.abs(F * Ix) + np.abs(G * Iy)
    for curve in solution.curves:
        v, m = curve_terms(curve, phi, h)
        res += v
        mag += m
    for wall in solution.walls:
        v, m = wall_terms(wall, phi, h)
        res += v
        mag += m
    for line in solution.inflows:
        v = inflow_term(line, phi)
        res += v
        mag += np.abs(v)
    return res, mag


def residual(solution: MeasureSolution, identity: str, phi: TestFunction, h: float) -> float:
    return float(residuals(solution, phi, h)[0][IDENTITIES.index(identity)])


def fit_order(hs, res, scale: float) -> float | None:
    """Least-squares log-log slope over levels above the rounding floor, or None
    when fewer than two levels rise above it (the residual is exact)."""
    floor = ROUNDING * max(scale, 1e-300)
    hs = np.asarray(hs, dtype=float)
    r = np.abs(np.asarray(res, dtype=float))
    keep = r > floor
    if keep.sum() < 2:
        return None
    return float(np.polyfit(np.log(hs[keep]), np.log(r[keep]), 1)[0])


@dataclass
class WeakResidualReport:
    rows: list[dict] = field(default_factory=list)
    summary: list[dict] = field(default_factory=list)
    truncation: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def max_finest(self) -> float:
        return max((s["finest"] for s in self.summary), default=0.0)

    @property
    def min_order(self) -> float | None:
        orders = [s["fitted_order"] for s in self.summary if s["fitted_order"] is not None]
        return min(orders) if orders else None

    def passed(self, order_min: float = ORDER_MIN, residual_max: float = RESIDUAL_MAX) -> bool:
        return all(
            s["finest"] <= residual_max and (s["fitted_order"] is None or s["fitted_order"] >= order_min)
            for s in self.summary
        )

    def failures(self, order_min: float = ORDER_MIN, residual_max: float = RESIDUAL_MAX) -> list[dict]:
        return [s for s in self.summary if s["finest"] > residual_max
                or (s["fitted_order"] is not None and s["fitted_order"] < order_min)]

    def to_json(self) -> dict:
        return {"rows": self.rows, "summary": self.summary, "truncation": self.truncation,
                "warnings": self.warnings, "passed": self.passed()}


def _study_one(solution, phi, hs):
    res = []
    scale = 0.0
    for h in hs:
        r, m = residuals(solution, phi, h)
        res.append(r)
        scale = max(scale, float(np.max(m)))
    return np.array(res), scale


def convergence_study(solution: MeasureSolution, phis, levels: int = 5, h0: float | None = None,
                      workers: int | None = None) -> WeakResidualReport:
    """Residuals for every (phi, identity) on ``levels`` halvings of the step.

    ``levels`` counts refinement levels (the coarsest plus the halvings); the
    default h0 is radius/8.
    """
    if levels < 3:
        raise ValueError("a convergence study needs at least 3 levels")
    phis = list(phis)
    report = WeakResidualReport(truncation={"x_limit": solution.x_limit})
    if solution.is_empty:
        report.warnings.append("empty solution: all residuals vanish trivially")
    hs_all = [[(h0 or phi.r / 8.0) / 2**k for k in range(levels)] for phi in phis]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda a: _study_one(solution, *a), zip(phis, hs_all)))
    for phi, hs, (res, scale) in zip(phis, hs_all, results):
        for k, name in enumerate(IDENTITIES):
            order = fit_order(hs, res[:, k], scale)
            for lvl, h in enumerate(hs):
                report.rows.append({
                    "identity": name, "phi_center": [phi.c, phi.d], "phi_radius": phi.r,
                    "level": lvl, "h": h, "residual": float(res[lvl, k]), "fitted_order": order,
                })
            report.summary.append({
                "identity": name, "phi_center": [phi.c, phi.d], "phi_radius": phi.r,
                "finest": float(abs(res[-1, k])), "fitted_order": order, "scale": scale,
            })
    return report


def standard_grid(solution: MeasureSolution, n: int = 5, radius: float | None = None) -> list[TestFunction]:
    """n x n test functions straddling the upper boundary of the upstream region
    (wall, then layers), from the inflow line to the end of the domain, plus a
    row on any contact line."""
    up = next((r for r in solution.regions if r.name == "upstream"), None)
    if up is None:
        return []
    span = solution.x_limit
    r = radius if radius is not None else min(0.4, 0.12 * span)
    xs = np.linspace(0.0, span - 1.25 * r, n)
    offsets = np.linspace(-r, r, n)
    out = []
    for x in xs:
        y0 = float(up.lower(np.array([x]))[0]) if up.lower is not None else 0.0
        out.extend(TestFunction(float(x), y0 + float(o), r) for o in offsets)
    vac = next((g for g in solution.regions if g.name == "vacuum"), None)
    if vac is not None:
        hi = min(vac.x_hi, span) - 1.25 * r
        for x in np.linspace(vac.x_lo + 0.5 * r, hi, n):
            out.append(TestFunction(float(x), float(vac.lower(np.array([x]))[0]), r))
    return out


def radon_nikodym_check(solution: MeasureSolution, n_samples: int = 200) -> dict:
    """Max deviations of weight ratios from the carried layer state, of slip, and
    of bulk pressures from the state relation."""
    dev = {"m1/m0-u": 0.0, "n1/n0-u": 0.0, "m2/m0-v": 0.0, "n2/n0-v": 0.0, "m3/m0-E": 0.0,
           "slip": 0.0, "bulk_p": 0.0}
    skipped = 0
    for curve in solution.curves:
        t = np.linspace(curve.t0, curve.t1, n_samples)
        w = curve.weights(t)
        u, v, E = curve.state(t)
        dx, dy = curve.velocity(t)
        sp = np.hypot(dx, dy)
        with np.errstate(divide="ignore", invalid="ignore"):
            checks = {
                "m1/m0-u": (w[2], w[0], u), "n1/n0-u": (w[3], w[1], u),
                "m2/m0-v": (w[4], w[0], v), "n2/n0-v": (w[5], w[1], v),
                "m3/m0-E": (w[6], w[0], E),
            }
            for key, (num, den, ref) in checks.items():
                ok = (np.abs(den) > 1e-300) & np.isfinite(ref)
                skipped += int((~ok).sum())
                if ok.any():
                    dev[key] = max(dev[key], float(np.max(np.abs(num[ok] / den[ok] - ref[ok]))))
            for k in range(4):
                s = np.abs(w[2 * k + 1] * dx / sp - w[2 * k] * dy / sp)
                s = s[np.isfinite(s)]
                if s.size:
                    dev["slip"] = max(dev["slip"], float(s.max()))
    for reg in solution.regions:
        st = reg.state
        if st.p_given is None or st.gamma > 1.0:
            dev["bulk_p"] = max(dev["bulk_p"], abs(st.p - state_pressure(st.rho, st.u, st.v, st.E, st.gamma)))
    dev["skipped"] = skipped
    return dev


def perturbation_signal(solution: MeasureSolution, phis, h: float, factor: float = 1.1,
                        weight: str | None = None, curve: str | None = None) -> dict:
    """Residual change when w_p (default) or one curve weight field is scaled.

    ``plateau`` is the largest residual change over the test functions and
    identities; ``scale`` the largest magnitude |factor-1| int |term| ds of the
    perturbed term, so plateau/scale measures how visible the perturbation is.
    """
    if isinstance(phis, TestFunction):
        phis = [phis]
    if weight is None:
        pert = solution.with_wall_scale(factor)
    else:
        if weight not in WEIGHT_FIELDS:
            raise KeyError(weight)
        name = curve or solution.curves[0].name
        pert = solution.with_curve(name, solution.curve(name).perturbed(weight, factor))
    plateau = scale = 0.0
    changes = []
    for phi in phis:
        base, _ = residuals(solution, phi, h)
        r, _ = residuals(pert, phi, h)
        changes.append(r - base)
        plateau = max(plateau, float(np.max(np.abs(r))))
        if weight is None:
            term = sum(float(np.sum(wall_terms_abs(w, phi, h))) for w in solution.walls)
        else:
            _, _, fields = curve_terms(solution.curve(name), phi, h, per_field=True)
            term = float(fields[WEIGHT_FIELDS.index(weight)])
        scale = max(scale, abs(factor - 1.0) * term)
    return {"plateau": plateau, "scale": scale, "relative": plateau / scale if scale > 0 else 0.0,
            "changes": np.array(changes)}


def wall_terms_abs(wall: WallLoad, phi: TestFunction, h: float) -> np.ndarray:
    """(int |w_p n_1 phi| ds, int |w_p n_2 phi| ds)."""
    out = np.zeros(2)
    for lo, hi in _pieces(wall, phi):

        def f(t):
            x, y = wall.position(t)
            dx, dy = wall.velocity(t)
            n1, n2 = wall.normal(t)
            g = np.abs(wall.scale * np.asarray(wall.pressure(t), dtype=float) * phi(x, y)) * np.hypot(dx, dy)
            return np.vstack([g * np.abs(n1), g * np.abs(n2)])

        out += simpson(f, lo, hi, _panels(_piece_length(wall, lo, hi), h))
    return out
