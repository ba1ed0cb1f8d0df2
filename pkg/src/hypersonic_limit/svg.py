"""Hand-written SVG plots with equal x and y scales."""

from __future__ import annotations

import math

import numpy as np

from .measure import MeasureSolution

REGION_FILL = {
    "upstream": "#e8eef7",
    "static_gas": "#f6e7c8",
    "jet": "#dcefd9",
    "vacuum": "#ffffff",
}
CURVE_STROKE = {"wall": "#000000", "free_layer": "#c0392b", "post_collision": "#8e44ad"}
PALETTE = ["#c0392b", "#2471a3", "#1e8449", "#b9770e", "#7d3c98", "#117a65", "#5d6d7e"]


def _fmt(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".")


class Canvas:
    """Maps data coordinates to pixels with one scale for both axes."""

    def __init__(self, xlim, ylim, width: int = 640, margin: int = 48):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        self.margin = margin
        self.scale = (width - 2 * margin) / (self.x1 - self.x0)
        self.width = width
        self.height = int(round((self.y1 - self.y0) * self.scale)) + 2 * margin
        self.items: list[str] = []

    def px(self, x, y):
        X = self.margin + (np.asarray(x) - self.x0) * self.scale
        Y = self.height - self.margin - (np.asarray(y) - self.y0) * self.scale
        return X, Y

    def _points(self, x, y) -> str:
        X, Y = self.px(x, y)
        return " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(np.atleast_1d(X), np.atleast_1d(Y)))

    def polyline(self, x, y, stroke="#000", width=1.5, dash=None, label=None):
        ok = np.isfinite(x) & np.isfinite(y)
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        title = f"<title>{label}</title>" if label else ""
        self.items.append(
            f'<polyline fill="none" stroke="{stroke}" stroke-width="{width}"{extra} '
            f'points="{self._points(np.asarray(x)[ok], np.asarray(y)[ok])}">{title}</polyline>'
        )

    def polygon(self, x, y, fill, opacity=1.0):
        ok = np.isfinite(x) & np.isfinite(y)
        self.items.append(
            f'<polygon fill="{fill}" fill-opacity="{opacity}" stroke="none" '
            f'points="{self._points(np.asarray(x)[ok], np.asarray(y)[ok])}"/>'
        )

    def marker(self, x, y, color="#000", r=4, label=None):
        X, Y = self.px(x, y)
        title = f"<title>{label}</title>" if label else ""
        self.items.append(f'<circle cx="{X:.2f}" cy="{Y:.2f}" r="{r}" fill="{color}">{title}</circle>')

    def text(self, x, y, s, size=11, anchor="start"):
        X, Y = self.px(x, y)
        self.items.append(f'<text x="{X:.2f}" y="{Y:.2f}" font-size="{size}" text-anchor="{anchor}">{s}</text>')

    def axes(self, nticks: int = 6):
        X0, Y0 = self.px(self.x0, self.y0)
        X1, Y1 = self.px(self.x1, self.y1)
        self.items.append(f'<rect x="{X0:.2f}" y="{Y1:.2f}" width="{X1 - X0:.2f}" height="{Y0 - Y1:.2f}" '
                          'fill="none" stroke="#444"/>')
        for v in _ticks(self.x0, self.x1, nticks):
            X, _ = self.px(v, self.y0)
            self.items.append(f'<line x1="{X:.2f}" y1="{Y0:.2f}" x2="{X:.2f}" y2="{Y0 + 5:.2f}" stroke="#444"/>')
            self.items.append(f'<text x="{X:.2f}" y="{Y0 + 18:.2f}" font-size="10" text-anchor="middle">{_fmt(v)}</text>')
        for v in _ticks(self.y0, self.y1, nticks):
            _, Y = self.px(self.x0, v)
            self.items.append(f'<line x1="{X0 - 5:.2f}" y1="{Y:.2f}" x2="{X0:.2f}" y2="{Y:.2f}" stroke="#444"/>')
            self.items.append(f'<text x="{X0 - 8:.2f}" y="{Y + 3:.2f}" font-size="10" text-anchor="end">{_fmt(v)}</text>')
        self.text(self.x1, self.y0, "x", anchor="end")

    def render(self, title: str = "") -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
                f'viewBox="0 0 {self.width} {self.height}">')
        t = f"<title>{title}</title>" if title else ""
        return "\n".join([head, t, '<rect width="100%" height="100%" fill="white"/>'] + self.items + ["</svg>", ""])


def _ticks(lo: float, hi: float, n: int):
    step = (hi - lo) / max(n, 1)
    mag = 10 ** math.floor(math.log10(step))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= step), default=step)
    start = math.ceil(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step + 1e-9) + 1)]


def _curve_xy(curve, n=400):
    t = np.linspace(curve.t0, curve.t1, n)
    x, y = curve.position(t)
    return np.asarray(x, dtype=float), np.asarray(y, dtype=float)


def plot_limits(solution: MeasureSolution):
    xs, ys = [0.0], [0.0]
    for c in solution.curves:
        x, y = _curve_xy(c)
        xs.extend([np.nanmin(x), np.nanmax(x)])
        ys.extend([np.nanmin(y), np.nanmax(y)])
    x1 = min(max(xs), solution.x_limit) if math.isfinite(solution.x_limit) else max(xs)
    y_top = max(ys)
    span = max(x1, y_top, 1e-9)
    y_lo = min(min(ys), 0.0) - 0.15 * span
    return (0.0, x1), (y_lo, y_top + 0.25 * span)


def solution_svg(solution: MeasureSolution, width: int = 640, title: str = "") -> str:
    xlim, ylim = plot_limits(solution)
    cv = Canvas(xlim, ylim, width)
    for reg in solution.regions:
        a, b = max(reg.x_lo, xlim[0]), min(reg.x_hi, xlim[1])
        if not b > a:
            continue
        x = np.linspace(a, b, 300)
        lo = np.full_like(x, ylim[0]) if reg.lower is None else np.clip(reg.lower(x), *ylim)
        hi = np.full_like(x, ylim[1]) if reg.upper is None else np.clip(reg.upper(x), *ylim)
        cv.polygon(np.concatenate([x, x[::-1]]), np.concatenate([hi, lo[::-1]]),
                   REGION_FILL.get(reg.name, "#eeeeee"))
    vac = solution.layers.get("vacuum")
    if vac is not None:
        x1 = vac.collision.x if vac.collision is not None else xlim[1]
        x = np.linspace(vac.x_star, x1, 200)
        cv.polyline(x, vac.c(x), stroke="#2471a3", width=1.2, dash="6,4", label="contact")
    for c in solution.curves:
        x, y = _curve_xy(c)
        cv.polyline(x, y, CURVE_STROKE.get(c.name, "#c0392b"), 2.5 if c.name == "wall" else 2.0, label=c.name)
    bu = solution.details.get("blow_up")
    if bu:
        cv.marker(bu["x"], bu["y"], "#c0392b", label="blow-up")
    col = solution.details.get("collision")
    if col:
        cv.marker(col["x"], col["h"], "#2471a3", label="collision")
    cv.axes()
    return cv.render(title or f"{solution.problem} {solution.classification}")


def overlay_svg(solutions: list[tuple[str, MeasureSolution]], width: int = 640, title: str = "overlay") -> str:
    """Layers of several solutions on common axes, each in its own color."""
    lims = [plot_limits(s) for _, s in solutions]
    xlim = (0.0, max(l[0][1] for l in lims))
    ylim = (min(l[1][0] for l in lims), max(l[1][1] for l in lims))
    cv = Canvas(xlim, ylim, width)
    drawn_wall = False
    for k, (label, sol) in enumerate(solutions):
        color = PALETTE[k % len(PALETTE)]
        for c in sol.curves:
            x, y = _curve_xy(c)
            if c.name == "wall":
                if not drawn_wall:
                    cv.polyline(x, y, "#000000", 2.5, label="wall")
                    drawn_wall = True
                continue
            cv.polyline(x, y, color, 2.0, label=label)
        bu = sol.details.get("blow_up")
        if bu:
            cv.marker(bu["x"], bu["y"], color, label=f"{label} blow-up")
        cv.text(xlim[0] + 0.02 * (xlim[1] - xlim[0]), ylim[1] - (k + 1) * 0.06 * (ylim[1] - ylim[0]), label)
        cv.items[-1] = cv.items[-1].replace("<text ", f'<text fill="{color}" ', 1)
    cv.axes()
    return cv.render(title)
