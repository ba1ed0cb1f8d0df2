"""Command-line front end: solve, verify, sweep and oracle subcommands.

Exit codes: 0 ok, 2 invalid spec, 3 inadmissible ramp, 4 blow-up encountered
(outputs still written), 5 verification failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import itertools
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .geometry import GeometryCache, GeometryError, profile_from_dict
from .measure import IDENTITIES, WEIGHT_FIELDS, MeasureSolution
from .oracle import accrete_free_layer, accrete_wall, convergence_order, sup_error, wall_force
from .problem1 import InadmissibleRamp, drag_lift, newton_busemann_pressure, solve_problem1
from .problem2 import DeadGasSpec, solve_problem2
from .problem3 import JetSpec, export_singular_riemann, solve_problem3
from .svg import overlay_svg, solution_svg
from .weak_verify import ORDER_MIN, RESIDUAL_MAX, convergence_study, radon_nikodym_check, standard_grid

log = logging.getLogger("hypersonic_limit")

EXIT_OK, EXIT_SPEC, EXIT_RAMP, EXIT_BLOWUP, EXIT_VERIFY = 0, 2, 3, 4, 5
SOLUTION_FORMAT = "hypersonic-limit/solution"
N_CURVE_SAMPLES = 201

COMMON_KEYS = {"problem", "ramp", "E0", "x_max", "tol", "sweep"}
PROBLEM_KEYS = {
    "p1": set(),
    "p2": {"x_star", "p_bar", "rho_bar", "E_bar", "gamma"},
    "p3": {"x_star", "rho_bar", "u_bar", "v_bar", "E_bar"},
}
REQUIRED = {"p1": set(), "p2": {"x_star"}, "p3": {"x_star", "rho_bar", "u_bar", "v_bar", "E_bar"}}
DEFAULT_X_MAX = {"p1": 10.0}


class SpecError(ValueError):
    pass


def num(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, float, np.floating, np.integer)):
        return format(float(v), ".17g")
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    return obj


def dump_json(obj) -> str:
    # repr of a Python float is the shortest round-tripping form, so output is stable
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def load_json_text(text: str, source: str = "spec"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def validate_spec(spec: dict) -> dict:
    """Check the schema and cross-field constraints; returns a normalized copy."""
    if not isinstance(spec, dict):
        raise SpecError("spec must be a JSON object")
    problem = spec.get("problem")
    if problem not in PROBLEM_KEYS:
        raise SpecError(f"'problem' must be one of p1, p2, p3 (got {problem!r})")
    unknown = set(spec) - COMMON_KEYS - PROBLEM_KEYS[problem]
    if unknown:
        raise SpecError(f"unknown keys for {problem}: {sorted(unknown)}")
    missing = REQUIRED[problem] - set(spec)
    if missing:
        raise SpecError(f"missing keys for {problem}: {sorted(missing)}")
    if "ramp" not in spec:
        raise SpecError("missing key 'ramp'")
    out = copy.deepcopy(spec)
    for key in (set(spec) & (PROBLEM_KEYS[problem] | {"E0", "x_max", "tol"})):
        v = spec[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise SpecError(f"'{key}' must be a finite number")
        out[key] = float(v)
    out.setdefault("E0", 1.0)
    if out["E0"] <= 0:
        raise SpecError("'E0' must be positive")
    if out.get("tol", 1.0) <= 0:
        raise SpecError("'tol' must be positive")
    try:
        profile = profile_from_dict(spec["ramp"])
    except (GeometryError, KeyError, TypeError, ValueError, OSError) as exc:
        raise SpecError(f"ramp: {exc}") from None
    if profile.x_start != 0.0:
        raise SpecError("ramp must start at x = 0")
    if problem == "p2":
        if "p_bar" not in out and not {"rho_bar", "E_bar"} <= set(out):
            raise SpecError("p2 needs 'p_bar' or both 'rho_bar' and 'E_bar'")
        if out.get("p_bar", 0.0) < 0:
            raise SpecError("'p_bar' must be >= 0")
    if problem == "p3":
        if out["u_bar"] <= 0:
            raise SpecError("'u_bar' must be positive")
        if out["rho_bar"] <= 0:
            raise SpecError("'rho_bar' must be positive")
    if "x_star" in out:
        if out["x_star"] <= 0:
            raise SpecError("'x_star' must be positive")
        if out["x_star"] > profile.x_end:
            raise SpecError("'x_star' exceeds the ramp length")
        if "x_max" in out and out["x_max"] <= out["x_star"]:
            raise SpecError("'x_max' must exceed 'x_star'")
    if "x_max" in out and out["x_max"] <= 0:
        raise SpecError("'x_max' must be positive")
    sweep = out.get("sweep")
    if sweep is not None:
        if not isinstance(sweep, dict) or not all(isinstance(v, list) and v for v in sweep.values()):
            raise SpecError("'sweep' must map keys to non-empty lists")
    return out


def build_solution(spec: dict) -> MeasureSolution:
    problem = spec["problem"]
    profile = profile_from_dict(spec["ramp"])
    E0 = spec.get("E0", 1.0)
    tol = spec.get("tol")
    geo = profile if tol is None else GeometryCache(profile, tol)
    if problem == "p1":
        return solve_problem1(geo, E0, spec.get("x_max", DEFAULT_X_MAX["p1"]))
    x_max = spec.get("x_max", 5.0 * spec["x_star"])
    if problem == "p2":
        dead = DeadGasSpec(spec["x_star"], spec.get("p_bar"), spec.get("rho_bar"), spec.get("E_bar"),
                           spec.get("gamma", 1.4))
        return solve_problem2(geo, dead, E0, x_max)
    jet = JetSpec(spec["x_star"], spec["rho_bar"], spec["u_bar"], spec["v_bar"], spec["E_bar"])
    return solve_problem3(geo, jet, E0, x_max)


CSV_COLUMNS = ["curve", "t", "x", "y", "slope", "b", "db", "H", "w_p", *WEIGHT_FIELDS, "w_rho", "u", "v", "E"]


def curves_csv(solution: MeasureSolution, n: int = N_CURVE_SAMPLES) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    geo = solution.params.get("geometry")
    wall_loads = {wl.name: wl for wl in solution.walls}
    for c in solution.curves:
        t = np.linspace(c.t0, c.t1, n)
        x, y = c.position(t)
        dx, dy = c.velocity(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = np.where(dx != 0, dy / np.where(dx != 0, dx, 1.0), np.inf)
            weights = c.weights(t)
            rho = c.density(t)
            u, v, E = c.state(t)
        wall = None
        if c.name in wall_loads and geo is not None:
            b, db, _ = geo.profile(x)
            wall = (b, db, geo.H(x), wall_loads[c.name].scale * np.asarray(wall_loads[c.name].pressure(t)))
        for i in range(n):
            row = [c.name, t[i], x[i], y[i], slope[i]]
            row += [wall[k][i] for k in range(4)] if wall else [None] * 4
            row += [weights[k][i] for k in range(8)] + [rho[i], u[i], v[i], E[i]]
            w.writerow([num(r) for r in row])
    return buf.getvalue()


def solution_record(spec: dict, sol: MeasureSolution) -> dict:
    rec = {
        "format": SOLUTION_FORMAT,
        "spec": spec,
        "problem": sol.problem,
        "classification": sol.classification,
        "details": sol.details,
        "x_limit": sol.x_limit,
        "regions": [
            {"name": r.name, "state": r.state.to_dict(), "x_lo": r.x_lo, "x_hi": r.x_hi} for r in sol.regions
        ],
        "curves": [{"name": c.name, "t0": c.t0, "t1": c.t1} for c in sol.curves],
        "weight_scales": {
            **{c.name: dict(zip(WEIGHT_FIELDS, c.scales)) for c in sol.curves},
            **{f"{wl.name}.w_p": wl.scale for wl in sol.walls},
        },
    }
    if sol.problem in ("p2", "p3"):
        rec["singular_riemann"] = export_singular_riemann(sol)
    return rec


def apply_scales(sol: MeasureSolution, scales: dict) -> MeasureSolution:
    for key, val in (scales or {}).items():
        if key.endswith(".w_p"):
            name = key[: -len(".w_p")]
            cur = next((w.scale for w in sol.walls if w.name == name), None)
            if cur is None:
                raise SpecError(f"weight_scales: no wall named {name!r}")
            sol = sol.with_wall_scale(float(val) / cur, name)
        else:
            curve = sol.curve(key)
            for field, factor in val.items():
                cur = curve.scales[WEIGHT_FIELDS.index(field)]
                curve = curve.perturbed(field, float(factor) / cur)
            sol = sol.with_curve(key, curve)
    return sol


def expand_sweep(spec: dict) -> list[tuple[str, dict]]:
    sweep = spec.get("sweep")
    if not sweep:
        return [("", spec)]
    keys = sorted(sweep)
    out = []
    for combo in itertools.product(*(sweep[k] for k in keys)):
        s = {k: v for k, v in spec.items() if k != "sweep"}
        for k, v in zip(keys, combo):
            set_path(s, k, v)
        out.append((",".join(f"{k}={num(v)}" for k, v in zip(keys, combo)), validate_spec(s)))
    return out


def set_path(d: dict, key: str, value):
    parts = key.split(".")
    if parts == ["slope"]:
        parts = ["ramp", "slope"]
    for p in parts[:-1]:
        d = d.setdefault(p, {})
    d[parts[-1]] = value


def read_spec(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc.strerror}") from None
    data = load_json_text(text, path)
    if isinstance(data, dict) and data.get("format") == SOLUTION_FORMAT:
        return data["spec"]
    return data


def apply_overrides(spec: dict, args) -> dict:
    spec = dict(spec)
    if getattr(args, "x_max", None) is not None:
        spec["x_max"] = args.x_max
    if getattr(args, "tol", None) is not None:
        spec["tol"] = args.tol
    return spec


def write_outputs(out: Path, spec: dict, sol: MeasureSolution, fmt: str, tag: str = "") -> None:
    out.mkdir(parents=True, exist_ok=True)
    if fmt in ("json", "all"):
        (out / "solution.json").write_text(dump_json(solution_record(spec, sol)))
    if fmt in ("csv", "all"):
        (out / "curves.csv").write_text(curves_csv(sol))
    if fmt in ("svg", "all"):
        (out / "plot.svg").write_text(solution_svg(sol, title=tag))


def cmd_solve(args) -> int:
    spec = validate_spec(apply_overrides(read_spec(args.spec), args))
    out = Path(args.out)
    cases = expand_sweep(spec)
    code = EXIT_OK
    solved = []
    for tag, case in cases:
        try:
            sol = build_solution(case)
        except InadmissibleRamp as exc:
            print(f"inadmissible ramp: {exc}", file=sys.stderr)
            return EXIT_RAMP
        target = out / tag if tag else out
        write_outputs(target, case, sol, args.format, tag)
        solved.append((tag or sol.classification, sol))
        if sol.classification == "BlowsUp":
            bu = sol.details["blow_up"]
            print(f"blow-up at x = {num(bu['x'])}, y = {num(bu['y'])}", file=sys.stderr)
            code = EXIT_BLOWUP
    if len(solved) > 1 and args.format in ("svg", "all"):
        (out / "overlay.svg").write_text(overlay_svg(solved))
    return code


def cmd_verify(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    text = Path(args.spec).read_text() if Path(args.spec).exists() else None
    if text is None:
        raise SpecError(f"cannot read {args.spec}")
    if not text.strip():
        data = {}
    else:
        data = load_json_text(text, args.spec)
    if data == {}:
        summary = {"passed": True, "warning": "empty solution: all residuals vanish trivially"}
        print("warning: empty solution, nothing to verify", file=sys.stderr)
        (out / "verify_report.json").write_text(dump_json({"rows": [], "summary": []}))
        (out / "verify_summary.json").write_text(dump_json(summary))
        return EXIT_OK
    if data.get("format") == SOLUTION_FORMAT:
        spec = validate_spec(apply_overrides(data["spec"], args))
        scales = data.get("weight_scales", {})
    else:
        spec = validate_spec(apply_overrides(data, args))
        scales = {}
    spec.pop("sweep", None)
    try:
        sol = apply_scales(build_solution(spec), scales)
    except InadmissibleRamp as exc:
        print(f"inadmissible ramp: {exc}", file=sys.stderr)
        return EXIT_RAMP
    grid = standard_grid(sol)
    report = convergence_study(sol, grid, levels=args.levels)
    rn = radon_nikodym_check(sol)
    passed = report.passed()
    fails = report.failures()
    summary = {
        "passed": passed,
        "levels": args.levels,
        "test_functions": len(grid),
        "max_finest_residual": report.max_finest,
        "min_fitted_order": report.min_order,
        "thresholds": {"order_min": ORDER_MIN, "residual_max": RESIDUAL_MAX},
        "failing_identities": sorted({f["identity"] for f in fails}),
        "radon_nikodym": rn,
    }
    (out / "verify_report.json").write_text(dump_json(report.to_json()))
    (out / "verify_summary.json").write_text(dump_json(summary))
    for name in IDENTITIES:
        bad = [f for f in fails if f["identity"] == name]
        print(f"{name:8s} {'FAIL' if bad else 'PASS'}")
    return EXIT_OK if passed else EXIT_VERIFY


def parse_grid(items) -> dict[str, list[float]]:
    grid = {}
    for item in items or []:
        if "=" not in item:
            raise SpecError(f"--grid expects KEY=LO:HI:STEP or KEY=v1,v2,... (got {item!r})")
        key, rng = item.split("=", 1)
        try:
            if ":" in rng:
                lo, hi, step = (float(v) for v in rng.split(":"))
                if step <= 0:
                    raise ValueError
                n = int(math.floor((hi - lo) / step + 1e-9)) + 1 if hi >= lo else 0
                vals = [round(lo + k * step, 12) for k in range(n)]
            else:
                vals = [float(v) for v in rng.split(",") if v.strip()]
        except ValueError:
            raise SpecError(f"--grid: cannot parse {item!r}") from None
        grid[key] = vals
    return grid


SWEEP_COLUMNS = ["classification", "regime", "blow_up_x", "blow_up_y", "collision_x",
                 "asymptotic_slope", "drag_x", "drag_y", "error"]


def summary_row(spec: dict) -> dict:
    sol = build_solution(spec)
    row = {"classification": sol.classification, "regime": sol.details.get("regime", sol.classification)}
    bu = sol.details.get("blow_up")
    if bu:
        row["blow_up_x"], row["blow_up_y"] = bu["x"], bu["y"]
    col = sol.details.get("collision")
    if col:
        row["collision_x"] = col["x"]
    row["asymptotic_slope"] = asymptotic_slope(spec)
    geo = sol.params["geometry"]
    x_hi = spec.get("x_star", sol.x_limit)
    row["drag_x"], row["drag_y"] = drag_lift(geo, 0.0, x_hi)
    return row


def asymptotic_slope(spec: dict):
    if spec["problem"] == "p2":
        dead = DeadGasSpec(spec["x_star"], spec.get("p_bar"), spec.get("rho_bar"), spec.get("E_bar"),
                           spec.get("gamma", 1.4))
        p = dead.pressure
        return math.sqrt(p / (1.0 - p)) if p < 1.0 else None
    if spec["problem"] == "p3":
        r, u, v = spec["rho_bar"], spec["u_bar"], spec["v_bar"]
        return math.sqrt(r) * v / (1.0 + math.sqrt(r) * u) if v > 0 else 0.0
    return spec["ramp"].get("slope") if spec["ramp"].get("kind") == "wedge" else None


def cmd_sweep(args) -> int:
    base = apply_overrides(read_spec(args.spec), args)
    base.pop("sweep", None)
    validate_spec(base)
    grid = parse_grid(args.grid)
    keys = list(grid)
    points = list(itertools.product(*(grid[k] for k in keys))) if keys and all(grid.values()) else []

    def run(point):
        s = copy.deepcopy(base)
        for k, v in zip(keys, point):
            set_path(s, k, v)
        try:
            return summary_row(validate_spec(s))
        except Exception as exc:  # per-row failures are recorded, the sweep continues
            return {"error": f"{type(exc).__name__}: {exc}"}

    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        rows = list(pool.map(run, points))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(keys + SWEEP_COLUMNS)
    for point, row in zip(points, rows):
        w.writerow([num(v) for v in point] + [num(row.get(c)) for c in SWEEP_COLUMNS])
    (out / "sweep.csv").write_text(buf.getvalue())
    return EXIT_OK


def cmd_oracle(args) -> int:
    spec = validate_spec(apply_overrides(read_spec(args.spec), args))
    spec.pop("sweep", None)
    sol = build_solution(spec)
    geo = sol.params["geometry"]
    E0 = spec["E0"]
    dxs = [args.dx / 2**k for k in range(3)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary: dict = {"dx": dxs}
    if spec["problem"] == "p1":
        x_end = sol.x_limit
        runs = [accrete_wall(geo, x_end, dx, E0) for dx in dxs]
        wp_err = [abs(r.w_p[-1] - newton_busemann_pressure(geo, float(r.x_mid[-1]))) for r in runs]
        b_end = float(geo.profile(x_end)[0])
        summary.update(
            x_end=x_end,
            w_p_oracle=float(runs[0].w_p[-1]),
            w_p_newton=newton_busemann_pressure(geo, float(runs[0].x_mid[-1])),
            w_p_error=wp_err,
            w_p_order=convergence_order(wp_err),
            mass_flux=float(runs[0].M[-1]),
            mass_flux_exact=b_end,
            force_oracle=list(wall_force(runs[0])),
            force_quadrature=list(drag_lift(geo, 0.0, x_end)),
        )
        first = runs[0]
    else:
        down = sol.params["spec"]
        upstream = next(r for r in sol.regions if r.name == "upstream")
        x_star = spec["x_star"]
        bu = sol.details.get("blow_up")
        if bu is None:
            x_end = x_cmp = sol.x_limit
        else:
            # march past the roll-up; heights are compared where the layer is still a graph
            x_end = x_star + 2.0 * (bu["x"] - x_star)
            x_cmp = x_star + 0.9 * (bu["x"] - x_star)
        runs = [accrete_free_layer(geo, down, dx, x_end, E0) for dx in dxs]
        errs = [sup_error(r, upstream.lower, x_star, min(x_cmp, r.x[-1])) for r in runs]
        summary.update(x_star=x_star, x_end=x_end, x_compare=x_cmp, sup_error=errs,
                       order=convergence_order(errs), closed_form_blow_up=bu,
                       oracle_blow_up=[r.blow_up for r in runs])
        first = runs[0]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "M", "Px", "Py", "Q"])
    for row in first.rows():
        w.writerow([num(v) for v in row])
    (out / "oracle.csv").write_text(buf.getvalue())
    (out / "oracle_summary.json").write_text(dump_json(summary))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hypersonic-limit",
                                 description="Measure solutions for hypersonic-limit flow past ramps.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out_default):
        p.add_argument("--spec", required=True, help="problem spec JSON (or solution.json for verify)")
        p.add_argument("--out", default=out_default, help="output directory")
        p.add_argument("--x-max", type=float, dest="x_max", help="truncation abscissa")
        p.add_argument("--tol", type=float, help="quadrature tolerance for H")

    p = sub.add_parser("solve", help="construct the measure solution")
    common(p, "out")
    p.add_argument("--format", choices=["csv", "json", "svg", "all"], default="all")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="weak-form residual study")
    common(p, "out")
    p.add_argument("--levels", type=int, default=5, help="refinement levels (>= 3)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="parameter sweep of summary scalars")
    common(p, "out")
    p.add_argument("--grid", action="append", help="KEY=LO:HI:STEP or KEY=v1,v2 (repeatable)")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="discrete accretion march and convergence orders")
    common(p, "out")
    p.add_argument("--dx", type=float, default=1e-3)
    p.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "levels", 5) < 3:
        print("invalid spec: --levels must be >= 3", file=sys.stderr)
        return EXIT_SPEC
    try:
        return args.func(args)
    except SpecError as exc:
        print(f"invalid spec: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except InadmissibleRamp as exc:
        print(f"inadmissible ramp: {exc}", file=sys.stderr)
        return EXIT_RAMP


if __name__ == "__main__":
    sys.exit(main())
