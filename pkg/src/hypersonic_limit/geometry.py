"""Ramp profiles b(x), their derivatives, the arc integral H(x) and admissibility.

All profiles satisfy b(0) = 0 and b' >= 0 on their domain.  Derivatives may be
infinite at x = 0 (e.g. b = sqrt(x)); wall quantities are then only meaningful
on (0, x_end], and their x -> 0+ limits are used where needed.
"""

from __future__ import annotations

import csv
import math
import threading
from dataclasses import dataclass, field
import numpy as np
from scipy import integrate
from scipy.interpolate import CubicHermiteSpline, CubicSpline

DEFAULT_TOL = 1e-10


class GeometryError(ValueError):
    """Invalid profile construction or evaluation outside the profile domain."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""


class RampProfile:
    """Base class for wall profiles y = b(x), x in [x_start, x_end]."""

    x_end: float = math.inf

    @property
    def x_start(self) -> float:
        return 0.0

    def _check_domain(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.x_start, self.x_end
        # small slack so grid end points produced by arithmetic are accepted
        slack = 1e-12 * max(1.0, abs(hi) if math.isfinite(hi) else 1.0)
        if np.any(x < lo - slack) or np.any(x > hi + slack) or np.any(np.isnan(x)):
            raise GeometryError(f"x outside profile domain [{lo}, {hi}]")
        return np.clip(x, lo, hi)

    def _eval(self, x: np.ndarray):
        raise NotImplementedError

    def __call__(self, x):
        """Return (b, b', b'') at x (scalars for scalar x)."""
        xa = self._check_domain(x)
        b, db, d2b = self._eval(np.atleast_1d(xa))
        if np.ndim(x) == 0:
            return float(b[0]), float(db[0]), float(d2b[0])
        return b, db, d2b

    def closed_form_H(self, x: np.ndarray) -> np.ndarray | None:
        """Exact arc integral when known, else None."""
        return None

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Wedge(RampProfile):
    """Straight ramp b = slope * x."""

    slope: float
    x_end: float = math.inf

    def __post_init__(self):
        if not self.slope >= 0:
            raise GeometryError("wedge slope must be >= 0")

    @classmethod
    def from_angle(cls, theta_deg: float, x_end: float = math.inf) -> "Wedge":
        return cls(math.tan(math.radians(theta_deg)), x_end)

    @property
    def sin_theta(self) -> float:
        return self.slope / math.sqrt(1.0 + self.slope**2)

    def _eval(self, x):
        return self.slope * x, np.full_like(x, self.slope), np.zeros_like(x)

    def closed_form_H(self, x):
        return np.asarray(x, dtype=float) * self.sin_theta

    def to_dict(self):
        return {"kind": "wedge", "slope": self.slope, "x_end": self.x_end}


@dataclass(frozen=True)
class Power(RampProfile):
    """b = coeff * x**exponent with exponent in (0, 1]."""

    coeff: float
    exponent: float
    x_end: float = math.inf

    def __post_init__(self):
        if not (0.0 < self.exponent <= 1.0):
            raise GeometryError("power exponent must lie in (0, 1]")
        if not self.coeff >= 0:
            raise GeometryError("power coefficient must be >= 0")

    def _eval(self, x):
        a, p = self.coeff, self.exponent
        b = a * x**p
        with np.errstate(divide="ignore", invalid="ignore"):
            if p == 1.0:
                db = np.full_like(x, a)
                d2b = np.zeros_like(x)
            else:
                db = np.where(x > 0, a * p * x ** (p - 1.0), np.inf if a > 0 else 0.0)
                d2b = np.where(
                    x > 0, a * p * (p - 1.0) * x ** (p - 2.0), -np.inf if a > 0 else 0.0
                )
        return b, db, d2b

    def closed_form_H(self, x):
        x = np.asarray(x, dtype=float)
        a = self.coeff
        if self.exponent == 1.0:
            return x * a / math.sqrt(1.0 + a * a)
        if self.exponent == 0.5:
            # H' = a / sqrt(4x + a^2)
            return 0.5 * a * (np.sqrt(4.0 * x + a * a) - a)
        return None

    def to_dict(self):
        return {"kind": "power", "coeff": self.coeff, "exp": self.exponent, "x_end": self.x_end}


@dataclass(frozen=True)
class Polynomial(RampProfile):
    """b = sum_k coeffs[k] * x**(k+1); the constant term is fixed to zero."""

    coeffs: tuple[float, ...]
    x_end: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if not self.coeffs:
            raise GeometryError("polynomial needs at least one coefficient")

    def _poly(self):
        return np.polynomial.Polynomial((0.0,) + self.coeffs)

    def _eval(self, x):
        p = self._poly()
        return p(x), p.deriv(1)(x), p.deriv(2)(x)

    def to_dict(self):
        return {"kind": "polynomial", "coeffs": list(self.coeffs), "x_end": self.x_end}


@dataclass(frozen=True)
class Tabulated(RampProfile):
    """Sampled profile with a monotone C1 cubic Hermite interpolant.

    Node slopes come from a not-a-knot cubic spline and are clipped by the Hyman
    filter, which keeps the interpolant monotone while retaining fourth-order
    accuracy on smooth data.  b'' is obtained by differentiating the interpolant
    twice, so it is only piecewise linear and less accurate than b and b'.
    """

    xs: tuple[float, ...]
    bs: tuple[float, ...]
    _interp: CubicHermiteSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        bs = np.asarray(self.bs, dtype=float)
        if xs.ndim != 1 or xs.shape != bs.shape:
            raise GeometryError("tabulated x and b must be 1-D arrays of equal length")
        if xs.size < 3:
            raise GeometryError("tabulated profile needs at least 3 samples")
        if np.any(np.diff(xs) <= 0):
            raise GeometryError("tabulated x samples must be strictly increasing")
        if np.any(np.diff(bs) < 0):
            raise GeometryError("tabulated b samples must be nondecreasing (b' >= 0)")
        object.__setattr__(self, "xs", tuple(xs))
        object.__setattr__(self, "bs", tuple(bs))
        object.__setattr__(self, "_interp", _monotone_hermite(xs, bs))

    @property
    def x_start(self) -> float:
        return self.xs[0]

    @property
    def x_end(self) -> float:  # type: ignore[override]
        return self.xs[-1]

    @classmethod
    def from_csv(cls, path) -> "Tabulated":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"x", "b"} <= set(reader.fieldnames):
                raise GeometryError(f"{path}: CSV header must contain 'x,b'")
            rows = [(float(r["x"]), float(r["b"])) for r in reader]
        return cls(tuple(r[0] for r in rows), tuple(r[1] for r in rows))

    def _eval(self, x):
        f = self._interp
        return f(x), f(x, 1), f(x, 2)

    def to_dict(self):
        return {"kind": "tabulated", "x": list(self.xs), "b": list(self.bs)}


def _monotone_hermite(xs: np.ndarray, ys: np.ndarray) -> CubicHermiteSpline:
    d = CubicSpline(xs, ys, bc_type="not-a-knot")(xs, 1)
    secant = np.diff(ys) / np.diff(xs)
    left = np.concatenate([[secant[0]], secant])
    right = np.concatenate([secant, [secant[-1]]])
    # Hyman filter for nondecreasing data: 0 <= d_i <= 3 min(left, right)
    bound = 3.0 * np.minimum(left, right)
    d = np.clip(d, 0.0, np.maximum(bound, 0.0))
    return CubicHermiteSpline(xs, ys, d, extrapolate=False)


def profile_from_dict(d: dict) -> RampProfile:
    """Build a profile from its JSON description."""
    kind = d.get("kind")
    x_end = float(d.get("x_end", math.inf))
    if kind == "wedge":
        if "angle_deg" in d:
            return Wedge.from_angle(float(d["angle_deg"]), x_end)
        return Wedge(float(d["slope"]), x_end)
    if kind == "power":
        return Power(float(d.get("coeff", 1.0)), float(d["exp"]), x_end)
    if kind == "polynomial":
        return Polynomial(tuple(d["coeffs"]), x_end)
    if kind == "tabulated":
        if "csv" in d:
            return Tabulated.from_csv(d["csv"])
        return Tabulated(tuple(d["x"]), tuple(d["b"]))
    raise GeometryError(f"unknown ramp kind {kind!r}")


def eval_profile(profile: RampProfile, x):
    return profile(x)


def _slope_ratio(db):
    """b'/sqrt(1+b'^2), equal to 1 where b' is infinite."""
    db = np.asarray(db, dtype=float)
    with np.errstate(invalid="ignore", over="ignore"):
        out = db / np.sqrt(1.0 + db * db)
    return np.where(np.isposinf(db), 1.0, out)


def arc_integral_H(profile: RampProfile, x: float, tol: float = DEFAULT_TOL) -> float:
    """H(x) = int_0^x b'/sqrt(1+b'^2) dt, closed form where available."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = float(profile._check_domain(x))
    closed = profile.closed_form_H(np.array([x]))
    if closed is not None:
        return float(closed[0])
    return quad_H(profile, x, tol)


def quad_H(profile: RampProfile, x: float, tol: float = DEFAULT_TOL) -> float:
    """H(x) by adaptive Gauss-Kronrod quadrature, ignoring any closed form."""
    x0 = profile.x_start
    if x <= x0:
        return 0.0
    return _quad_piece(profile, x0, x, tol)


def _quad_piece(profile: RampProfile, a: float, b: float, tol: float) -> float:
    def integrand(t):
        return float(_slope_ratio(profile(t)[1]))

    tol = max(tol, 1e-15)
    val, err = integrate.quad(integrand, a, b, epsabs=tol, epsrel=0.0, limit=500)
    if not err <= tol:
        raise QuadratureError(f"H quadrature on [{a}, {b}]: error estimate {err:.3g} exceeds tol {tol:.3g}")
    return val


class GeometryCache:
    """Profile plus memoized H(x) and inner normals.  Thread safe."""

    def __init__(self, profile: RampProfile, tol: float = DEFAULT_TOL):
        self.profile = profile
        self.tol = tol
        self._H: dict[float, float] = {}
        self._lock = threading.Lock()

    def H(self, x):
        if np.ndim(x) == 0:
            return self._H_scalar(float(x))
        xa = np.asarray(x, dtype=float)
        closed = self.profile.closed_form_H(self.profile._check_domain(xa))
        if closed is not None:
            return np.asarray(closed, dtype=float)
        if xa.size <= 8:
            return np.array([self._H_scalar(float(v)) for v in xa.ravel()]).reshape(xa.shape)
        # cumulative quadrature between sorted nodes: O(n) short integrals
        flat = xa.ravel()
        nodes, inverse = np.unique(flat, return_inverse=True)
        vals = np.empty_like(nodes)
        acc = 0.0
        prev = self.profile.x_start
        piece_tol = self.tol / len(nodes)
        for k, xv in enumerate(nodes):
            if xv > prev:
                acc += _quad_piece(self.profile, prev, xv, piece_tol)
            vals[k] = acc
            prev = xv
        return vals[inverse].reshape(xa.shape)

    def _H_scalar(self, x: float) -> float:
        with self._lock:
            if x in self._H:
                return self._H[x]
        val = arc_integral_H(self.profile, x, self.tol)
        with self._lock:
            self._H[x] = val
        return val

    def eval(self, x):
        return self.profile(x)

    def normal(self, x):
        """Inner unit normal (n1, n2) = (-b', 1)/sqrt(1+b'^2)."""
        _, db, _ = self.profile(x)
        db = np.asarray(db, dtype=float)
        with np.errstate(invalid="ignore", over="ignore"):
            inv = 1.0 / np.sqrt(1.0 + db * db)
        n1 = np.where(np.isposinf(db), -1.0, -db * inv)
        n2 = np.where(np.isposinf(db), 0.0, inv)
        if np.ndim(x) == 0:
            return float(n1), float(n2)
        return n1, n2


def as_cache(geometry) -> GeometryCache:
    if isinstance(geometry, GeometryCache):
        return geometry
    if isinstance(geometry, RampProfile):
        return GeometryCache(geometry)
    raise TypeError(f"expected RampProfile or GeometryCache, got {type(geometry).__name__}")


def wall_pressure_values(db, d2b, H):
    """Newton-Busemann pressure for arrays of (b', b'', H), with the b' -> inf limit.

    Written as b''H cos^3 + sin^2 of the wall angle; where b' is infinite (only at
    x = 0 for sub-linear power profiles, where H = 0) the limit is 1.
    """
    db = np.asarray(db, dtype=float)
    d2b = np.asarray(d2b, dtype=float)
    H = np.asarray(H, dtype=float)
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        c = 1.0 / np.sqrt(1.0 + db * db)
        wp = d2b * H * c**3 + (db * c) ** 2
    return np.where(np.isposinf(db), 1.0, wp)


@dataclass
class AdmissibilityReport:
    xs: np.ndarray
    slope_ok: np.ndarray
    curvature_lhs: np.ndarray
    curvature_rhs: np.ndarray
    pressure: np.ndarray
    admissible: bool
    first_failure: float | None

    def __bool__(self):
        return self.admissible


def check_admissibility(geometry, x_lo: float, x_hi: float, n_samples: int) -> AdmissibilityReport:
    """Sample b' >= 0 and b''H > -b'^2 sqrt(1+b'^2) on [x_lo, x_hi].

    The second inequality is tested in the equivalent form w_p > 0, which stays
    finite where b' is infinite.
    """
    if x_lo < 0:
        raise GeometryError("x_lo must be >= 0")
    geo = as_cache(geometry)
    xs = np.linspace(x_lo, x_hi, max(int(n_samples), 1)) if n_samples > 1 else np.array([x_lo])
    b, db, d2b = geo.profile(xs)
    H = geo.H(xs)
    with np.errstate(invalid="ignore", over="ignore"):
        lhs = d2b * H
        rhs = -(db**2) * np.sqrt(1.0 + db**2)
    wp = wall_pressure_values(db, d2b, H)
    slope_ok = db >= 0
    ok = slope_ok & (wp > 0)
    first = None if ok.all() else float(xs[np.argmin(ok)])
    return AdmissibilityReport(xs, slope_ok, lhs, rhs, wp, bool(ok.all()), first)


@dataclass(frozen=True)
class WallMap:
    """Smooth parametrization t -> (x(t), b(x(t))) of the wall on [0, t1].

    Sub-linear power profiles b = a x^alpha use x = t^(1/alpha), which makes
    y = a t linear and keeps the curve velocity finite at the corner.
    """

    t1: float
    x: object
    dx: object
    y: object
    dy: object


def wall_map(profile: RampProfile, x_end: float) -> WallMap:
    if isinstance(profile, Power) and profile.exponent < 1.0:
        m = 1.0 / profile.exponent
        a = profile.coeff
        return WallMap(
            x_end ** profile.exponent,
            # clamp so the wall ends exactly at x_end despite rounding in t1**m
            lambda t: np.minimum(np.asarray(t, dtype=float) ** m, x_end),
            lambda t: m * np.asarray(t, dtype=float) ** (m - 1.0),
            lambda t: a * np.asarray(t, dtype=float),
            lambda t: np.full_like(np.asarray(t, dtype=float), a),
        )
    if profile.x_start != 0.0:
        raise GeometryError(f"wall must start at x = 0 (profile starts at {profile.x_start})")

    def y(t):
        return profile(np.asarray(t, dtype=float))[0]

    def dy(t):
        return profile(np.asarray(t, dtype=float))[1]

    return WallMap(
        x_end,
        lambda t: np.asarray(t, dtype=float),
        lambda t: np.ones_like(np.asarray(t, dtype=float)),
        y,
        dy,
    )
