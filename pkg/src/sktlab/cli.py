"""Command line entry point: ``sktlab {run,sweep,diagnose,ladder}``.

Exit codes: 0 when every invariant passes, 1 when an invariant fails,
2 for configuration errors and solver aborts.
"""
from __future__ import annotations

import argparse
import itertools
import json
import math
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import scenario as sc
from .analysis import (DiagnosticsReport, MaximalConfig, bmo_seminorm, bootstrap_ladder, degiorgi_trace,
                       estimate_ratio, level_set_sum, lp_norm, mu_exponent, parabolic_maximal,
                       w1infty_ratio, write_json)
from .fixedpoint import BRACKET_TOL, ConvergenceError, picard_solve
from .mesh import ParabolicCube, SpaceTimeField, face_gradient, read_space_time, write_space_time
from .parabolic import energy_report, weak_residual
from .skt import BlowupDetected, NEG_TOL, blowup_monitor, m0_bound, monitor_rows, skt_run, write_monitor_csv
from .sparse_solve import SolverError

EXIT_OK, EXIT_INVARIANT, EXIT_ABORT = 0, 1, 2


def _invariant(value, limit, upper=True) -> dict:
    ok = value <= limit if upper else value >= limit
    return {"pass": bool(ok), "value": float(value), "limit": float(limit),
            "margin": float(limit - value if upper else value - limit)}


def _cube(opts: dict, grid, axis, key="cube") -> ParabolicCube:
    spec = opts.get(key)
    if spec is None:
        mid = [0.5 * (a + b) for a, b in zip(grid.lower, grid.upper)]
        half = 0.25 * min(b - a for a, b in zip(grid.lower, grid.upper))
        radius = min(half, math.sqrt(0.5 * (axis.T - axis.t0)) * 0.99)
        return ParabolicCube(mid, axis.t0 + 0.5 * (axis.T - axis.t0), radius)
    return ParabolicCube(spec["center"], spec["s"], spec["radius"], spec.get("variant", "centered"))


def _maximal_cfg(opts: dict) -> MaximalConfig:
    radii = opts.get("radii")
    return MaximalConfig(None if radii is None else tuple(radii), opts.get("variant", "centered"))


def _guarded(fn, *args, **kw) -> dict:
    """Run one diagnostic; a failure is recorded in its entry instead of aborting the run."""
    try:
        return fn(*args, **kw)
    except (ValueError, ZeroDivisionError) as exc:
        return {"error": str(exc)}


def _write_field(out: Path, stem: str, f: SpaceTimeField) -> list:
    return [f"fields/{name}" for name in write_space_time(out / "fields", stem, f)]


# --------------------------------------------------------------------------
# diagnostics shared by every kind

def _diag_lp(u: SpaceTimeField, opts):
    return {f"L{p:g}": lp_norm(u, p) for p in opts.get("lp", [2, 4])}


def _diag_maximal(u, opts, out: Path | None, files: list, stem="maximal"):
    M = parabolic_maximal(u, None, _maximal_cfg(opts))
    if out is not None:
        files += _write_field(out, stem, M)
    return {"max": float(M.values.max()), "mean": float(M.values.mean()),
            "dominates_field": bool(np.all(M.values >= np.abs(u.values) - 1e-12))}


def _diag_level_set(u, opts):
    s, b = level_set_sum(u, opts.get("delta", 0.1), opts.get("N", 2.0), opts.get("q", 2.0),
                         opts.get("j_max", 10), None, _maximal_cfg(opts))
    return {"sum": s, "bound": b, "holds": bool(s <= b * (1 + 1e-12))}


def _diag_degiorgi(w, opts, extra=None):
    cube = _cube(opts, w.grid, w.axis)
    kw = dict(Lambda=opts.get("Lambda", 1.0), M0=opts.get("M0", 0.0), M1=opts.get("M1", 0.0),
              theta=opts.get("theta", 1.0), j_max=opts.get("j_max", 20))
    kw.update(extra or {})
    tr = degiorgi_trace(w, cube, **kw)
    return {"K": tr.K, "C0": tr.C0, "C2": tr.C2, "threshold": tr.threshold, "mu": tr.mu,
            "Y": tr.Y, "non_increasing": tr.non_increasing(),
            "decays": tr.decays_after_threshold(), "exceed_inner": tr.exceed_inner,
            "resolved_levels": tr.resolved_levels}


# --------------------------------------------------------------------------
# scenario runners; each returns (report dict, exit code)

def _run_scalar(cfg: dict, out: Path | None) -> tuple:
    grid, axis, params, A, c, u0, pic = sc.scalar_inputs(cfg)
    opts = cfg["options"]
    try:
        res = picard_solve(params, A, c, u0, pic)
    except ConvergenceError as exc:
        return {"status": "aborted", "error": str(exc), "history": exc.history}, EXIT_ABORT
    u = res.u
    lo = min(b[0] for b in res.bounds)
    hi = max(b[1] for b in res.bounds)
    inv = {
        "iterates_nonnegative": _invariant(lo, -BRACKET_TOL, upper=False),
        "iterates_below_capacity": _invariant(params.lam * hi, 1 + BRACKET_TOL),
        "picard_converged": _invariant(res.history[-1], pic.l2_tolerance),
    }
    files = []
    if out is not None and cfg["write_fields"]:
        files += _write_field(out, "u", u)
    fout = out if (out is not None and cfg["write_fields"]) else None
    metrics = {"picard_iterations": len(res.history), "picard_history": res.history,
               "u_min": float(u.values.min()), "u_max": float(u.values.max())}

    def compute(d):
        if d == "energy":
            e = energy_report(u, c)
            return {"lhs": e.lhs, "rhs_terms": list(e.rhs_terms), "ratio": e.lhs / e.rhs_sum}
        elif d == "weak_residual":
            X = grid.centers
            shape = [np.cos(np.pi * (x - a) / (b - a)) for x, a, b in zip(X, grid.lower, grid.upper)]
            phi = np.prod(shape, axis=0)[None] * (1.0 + axis.times.reshape((-1,) + (1,) * grid.dim))
            return {"residual": weak_residual(u, params, A, c, SpaceTimeField(grid, axis, phi))}
        elif d == "estimate_ratio":
            t_bar = opts.get("t_bar", axis.t0 + 0.5 * (axis.T - axis.t0))
            return {"ratio": estimate_ratio(u, params, c, opts.get("p", 4.0), t_bar)}
        elif d == "bmo":
            return {"seminorm": bmo_seminorm(A, opts.get("bmo_R", 2 * min(grid.h)))}
        elif d == "maximal":
            return _diag_maximal(u, opts, fout, files)
        elif d == "level_set_sum":
            return _diag_level_set(u, opts)
        elif d == "lp_norms":
            return _diag_lp(u, opts)
        elif d == "degiorgi":
            return _diag_degiorgi(u, opts, {"Lambda": params.Lambda, "theta": params.theta,
                                            "M0": float(np.abs(u.values).max())})

    for d in cfg["diagnostics"]:
        metrics[d] = _guarded(compute, d)
    return {"status": "ok", "invariants": inv, "metrics": metrics, "files": files}, None


def _run_skt(cfg: dict, out: Path | None) -> tuple:
    grid, axis, params, u0, v0 = sc.skt_inputs(cfg)
    opts = cfg["options"]
    try:
        st = skt_run(params, u0, v0, axis)
    except (BlowupDetected, SolverError) as exc:
        idx = getattr(exc, "slice_index", None)
        return {"status": "aborted", "error": str(exc), "slice_index": idx}, EXIT_ABORT
    U, V = st.u.values, st.v.values
    M0 = m0_bound(params, v0)
    p0 = opts.get("p0", 4.0)
    rows = monitor_rows(st, p0)
    mass0 = rows[0]["mass_u"]
    gron = max((r["mass_u"] / (math.exp(params.a1 * (r["t"] - axis.t0)) * mass0) if mass0 > 0 else 0.0)
               for r in rows)
    inv = {
        "v_max_over_M0": _invariant(float(V.max()) / M0, 1 + 1e-10),
        "min_u": _invariant(float(U.min()), -NEG_TOL, upper=False),
        "min_v": _invariant(float(V.min()), -NEG_TOL, upper=False),
        "mass_gronwall": _invariant(gron, 1 + 5 * axis.dt),
    }
    files = []
    if out is not None:
        write_monitor_csv(out / "monitor.csv", rows)
        files.append("monitor.csv")
        if cfg["write_fields"]:
            files += _write_field(out, "u", st.u)
            files += _write_field(out, "v", st.v)
    metrics = {"flags": list(st.flags), "M0": M0}

    def compute(d):
        if d == "v_bound":
            return {"M0": M0, "v_max": float(V.max())}
        elif d == "blowup_monitor":
            series = blowup_monitor(st, p0)
            t = axis.times
            quarter = int(np.argmin(np.abs(t - (axis.t0 + 0.25 * (axis.T - axis.t0)))))
            late = t >= axis.t0 + 0.5 * (axis.T - axis.t0) - 1e-12
            return {"finite": bool(np.all(np.isfinite(series))), "at_quarter": float(series[quarter]),
                          "late_max": float(series[late].max()),
                          "late_over_quarter": float(series[late].max() / series[quarter])}
        elif d == "gradient_ratio":
            g = face_gradient(V[1:], grid)
            gv = (sum(float((np.abs(x) ** 4).sum()) for x in g) * grid.cell_volume * axis.dt) ** 0.25
            return {"ratio": gv / (1 + lp_norm(st.u, 4))}
        elif d == "mass":
            return {"u": [r["mass_u"] for r in rows], "v": [r["mass_v"] for r in rows]}
        elif d == "lp_norms":
            return {"u": _diag_lp(st.u, opts), "v": _diag_lp(st.v, opts)}

    for d in cfg["diagnostics"]:
        metrics[d] = _guarded(compute, d)
    return {"status": "ok", "invariants": inv, "metrics": metrics, "files": files}, None


def _run_diagnostics(cfg: dict, out: Path | None, base: Path) -> tuple:
    fields = {}
    for name, rel in cfg["fields"].items():
        path = Path(rel)
        if not path.is_absolute():
            path = base / path
        try:
            fields[name] = read_space_time(path)
        except (OSError, ValueError, KeyError) as exc:
            raise sc.ConfigError(f"fields.{name}: cannot read {path}: {exc}") from None
    opts = cfg["options"]
    target = opts.get("target", next(iter(fields)))
    if target not in fields:
        raise sc.ConfigError(f"options.target: unknown field {target!r}")
    u = fields[target]
    fout = out if (out is not None and cfg["write_fields"]) else None
    files, metrics = [], {}

    def compute(d):
        if d == "lp_norms":
            return _diag_lp(u, opts)
        elif d == "maximal":
            return _diag_maximal(u, opts, fout, files)
        elif d == "level_set_sum":
            return _diag_level_set(u, opts)
        elif d == "degiorgi":
            return _diag_degiorgi(u, opts)
        elif d == "w1infty":
            outer = _cube(opts, u.grid, u.axis, "outer")
            inner = _cube(opts, u.grid, u.axis, "inner") if "inner" in opts else outer.scaled(0.75)
            return {"ratio": w1infty_ratio(u, inner, outer)}

    for d in cfg["diagnostics"]:
        metrics[d] = _guarded(compute, d)
    return {"status": "ok", "invariants": {}, "metrics": metrics, "files": files}, None


def run_scenario(cfg: dict, out: Path | None, base: Path = Path(".")) -> tuple:
    """Run a validated scenario; returns ``(report dict, exit code)``."""
    start = time.perf_counter()
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    kind = cfg["kind"]
    if kind == "scalar-model":
        body, code = _run_scalar(cfg, out)
    elif kind == "skt":
        body, code = _run_skt(cfg, out)
    else:
        body, code = _run_diagnostics(cfg, out, base)
    if code is None:
        code = EXIT_OK if all(v["pass"] for v in body["invariants"].values()) else EXIT_INVARIANT
    report = {"scenario": cfg, **body, "exit_code": code,
              "wall_clock_seconds": time.perf_counter() - start}
    if out is not None:
        write_json(out / "report.json", report)
    return report, code


# --------------------------------------------------------------------------
# sweeps

def expand_sweep(spec: dict) -> list:
    base = spec.get("base")
    axes = spec.get("axes")
    if not isinstance(base, dict):
        raise sc.ConfigError("sweep: missing 'base' scenario")
    if not isinstance(axes, dict) or not axes:
        raise sc.ConfigError("sweep: 'axes' must map at least one dotted path to a list of values")
    names = list(axes)
    for n in names:
        if not isinstance(axes[n], list) or not axes[n]:
            raise sc.ConfigError(f"sweep: axis {n!r} has no values")
    combos = list(itertools.product(*(axes[n] for n in names)))
    if len(combos) > 10_000:
        raise sc.ConfigError("sweep: more than 10^4 scenarios")
    out = []
    for combo in combos:
        cfg = json.loads(json.dumps(base))
        for n, v in zip(names, combo):
            sc.set_path(cfg, n, v)
        out.append((dict(zip(names, combo)), cfg))
    return out


def _lookup(metrics: dict, dotted: str):
    node = metrics
    for k in dotted.split("."):
        node = node[k]
    return float(node)


def _sweep_one(args):
    cfg, out, base = args
    try:
        return run_scenario(cfg, out, base)
    except sc.ConfigError as exc:
        return {"status": "config-error", "error": str(exc)}, EXIT_ABORT


def run_sweep(spec: dict, out: Path | None, jobs: int = 1, seed: int | None = None,
              base: Path = Path(".")) -> tuple:
    start = time.perf_counter()
    points = expand_sweep(spec)
    cfgs = [sc.validate(cfg, seed) for _, cfg in points]
    dirs = [None if out is None else out / f"scenario_{i:04d}" for i in range(len(cfgs))]
    tasks = list(zip(cfgs, dirs, [base] * len(cfgs)))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_one, tasks))
    else:
        results = [_sweep_one(t) for t in tasks]
    codes = [c for _, c in results]
    per = [{"point": p, "exit_code": c, "status": r.get("status")}
           for (p, _), (r, c) in zip(points, results)]
    aggregates = {}
    agg_ok = True
    for a in spec.get("aggregate", []):
        metric = a["metric"]
        vals = [_lookup(r["metrics"], metric) for r, c in results if r.get("status") == "ok"]
        entry = {"count": len(vals)}
        if vals:
            med = statistics.median(vals)
            entry.update(median=med, max=max(vals), min=min(vals))
            if "max_over_median" in a:
                ratio = max(vals) / med if med > 0 else (0.0 if max(vals) == 0 else math.inf)
                entry["max_over_median"] = ratio
                entry["limit"] = a["max_over_median"]
                entry["pass"] = bool(ratio <= a["max_over_median"])
                agg_ok &= entry["pass"]
        else:
            entry["pass"] = False
            agg_ok = False
        aggregates[metric] = entry
    if any(c == EXIT_ABORT for c in codes):
        code = EXIT_ABORT
    elif not agg_ok or any(c != EXIT_OK for c in codes):
        code = EXIT_INVARIANT
    else:
        code = EXIT_OK
    report = {"scenarios": per, "aggregate": aggregates, "exit_code": code,
              "wall_clock_seconds": time.perf_counter() - start}
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "report.json", report)
    return report, code


# --------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sktlab", description="Scalar self-diffusion and SKT scenario runner.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (("run", "run one scenario"), ("sweep", "run a parameter grid"),
                       ("diagnose", "diagnostics on existing field files")):
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", required=True, type=Path)
        s.add_argument("--out", type=Path, default=None)
        s.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        s.add_argument("--jobs", type=int, default=1)
    s = sub.add_parser("ladder", help="integrability ladder calculator")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--l1", type=float, default=4.0)
    s.add_argument("--p0", type=float, default=None)
    s.add_argument("--q", type=float, action="append", default=[], help="exponent query (repeatable)")
    s.add_argument("--out", type=Path, default=None)
    s.add_argument("--config", type=Path, default=None, help="JSON with n, l1, p0, q keys")
    return p


def _ladder(args) -> int:
    vals = {"n": args.n, "l1": args.l1, "p0": args.p0, "q": args.q}
    if args.config is not None:
        vals.update(sc.load_json(args.config))
    lad = bootstrap_ladder(int(vals["n"]), float(vals["l1"]),
                           None if vals["p0"] is None else float(vals["p0"]))
    report = DiagnosticsReport(metrics={"ladder": lad.to_dict(),
                                        "mu": {f"{q:g}": mu_exponent(q, lad.n) for q in vals["q"]}})
    text = report.to_json()
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        report.write(args.out / "report.json")
    print(text)
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "ladder":
            return _ladder(args)
        if args.jobs < 1:
            raise sc.ConfigError("--jobs must be at least 1")
        spec = sc.load_json(args.config)
        base = args.config.resolve().parent
        if args.command == "sweep":
            report, code = run_sweep(spec, args.out, args.jobs, args.seed, base)
        else:
            cfg = sc.validate(spec, args.seed)
            if args.command == "diagnose" and cfg["kind"] != "diagnostics-only":
                raise sc.ConfigError("diagnose expects a diagnostics-only scenario")
            report, code = run_scenario(cfg, args.out, base)
    except sc.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ABORT
    status = report.get("status", "sweep")
    print(f"{args.command}: status={status} exit={code}")
    return code


if __name__ == "__main__":
    sys.exit(main())
