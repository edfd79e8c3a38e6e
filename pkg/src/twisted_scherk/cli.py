"""Command-line front end.

Commands take ``key=value`` tokens; angles are in radians.  Exit codes:
0 success, 1 usage error, 2 verification failure, 3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

from . import diagnostics, domains, surface
from .domains import read_domain, write_domain
from .solver import NEWTON_TOL, SolverError, exhaustion_solve, paper_schedule

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_SOLVER = 0, 1, 2, 3
OUT_ENV = "TWISTED_SCHERK_OUT"

SCHEDULE_KEYS = {"steps": int, "h": float, "grading": float, "tol": float, "max_iter": int, "seed": int}


class UsageError(Exception):
    pass


def _out_dir(opts: dict) -> Path:
    d = Path(opts.pop("out", None) or os.environ.get(OUT_ENV, "out")).resolve()
    d.mkdir(parents=True, exist_ok=True)
    return d


def parse_kv(tokens, allowed: dict) -> dict:
    """key=value tokens with type conversion; unknown keys are errors naming the key."""
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise UsageError(f"expected key=value, got {tok!r}")
        key, val = tok.split("=", 1)
        if key not in allowed:
            raise UsageError(f"unknown key {key!r} (allowed: {', '.join(sorted(allowed))})")
        conv = allowed[key]
        try:
            out[key] = conv(val)
        except ValueError as exc:
            raise UsageError(f"invalid value for {key!r}: {val!r} ({exc})") from None
    return out


def _angles(text: str) -> list:
    return [float(a) for a in text.split(",")]


def _schedule(opts: dict) -> list:
    if "config" in opts:
        with open(opts.pop("config"), encoding="utf-8") as fh:
            conf = json.load(fh)
        for key in conf:
            if key not in SCHEDULE_KEYS:
                raise UsageError(f"unknown key {key!r} in config")
        for key, val in conf.items():
            opts.setdefault(key, SCHEDULE_KEYS[key](val))
    steps = opts.get("steps", 4)
    if steps < 1:
        raise UsageError("steps must be at least 1")
    return paper_schedule(steps, opts.get("h", 0.1))


def _print(text: str = "") -> None:
    sys.stdout.write(text + "\n")


# ---------------------------------------------------------------- commands


def cmd_domain(args) -> int:
    opts = parse_kv(args.params, {"angles": _angles, "k": int, "theta": float, "beta": float, "out": str})
    out_dir = _out_dir(opts)
    try:
        if args.scherk:
            if "angles" not in opts:
                raise UsageError("--scherk needs angles=a1,a2,...")
            P = domains.ideal_scherk_polygon(opts["angles"])
            name = "scherk"
        elif args.twisted or args.union:
            k = opts.get("k")
            theta = opts.get("theta")
            if k is None or theta is None:
                raise UsageError("k and theta are required")
            if k == 1:
                P = domains.triangle_domain(theta)
                name = "triangle"
            elif "beta" not in opts:
                raise UsageError("k >= 2 needs beta")
            elif args.union:
                P = domains.twisted_union(k, theta, opts["beta"])
                name = f"union_k{k}"
            else:
                P = domains.omega_theta_beta(k, theta, opts["beta"])
                name = f"omega_theta_beta_k{k}"
        elif args.omega:
            P = domains.omega_theta(opts["k"], opts["theta"])
            name = f"omega_theta_k{opts['k']}"
        else:
            raise UsageError("choose one of --scherk, --twisted, --union, --omega")
    except KeyError as exc:
        raise UsageError(f"missing field {exc.args[0]!r}") from None
    except ValueError as exc:
        field = "angles" if args.scherk else "parameters"
        raise UsageError(f"invalid {field}: {exc}") from None
    out = out_dir / f"{name}.json"
    write_domain(out, P)
    _print(f"wrote {out}")
    for i, (v, lab) in enumerate(zip(P.vertices, P.labels)):
        _print(f"  v{i}: {v}   edge {i}->{(i + 1) % P.n}: {lab}")
    return EXIT_OK


def cmd_check(args) -> int:
    opts = parse_kv(args.params, {"out": str, "tol": float})
    P, sizes = read_domain(args.domain)
    rep = domains.js_check(P, sizes, tol=opts.get("tol", domains.EQUALITY_TOL))
    _print(f"verdict: {rep.verdict}")
    if rep.witness is not None:
        _print(f"witness: {list(rep.witness)}  residual: {rep.witness_residual:.3e}")
    if rep.verdict == "Satisfied":
        _print(f"minimum margin: {rep.min_margin:.6f} (tolerance {rep.tolerance:g})")
    out = _out_dir(opts) / (Path(args.domain).stem + ".js.txt")
    out.write_text(diagnostics.report_text(rep.to_dict()), encoding="utf-8")
    return EXIT_OK if rep.verdict == "Satisfied" else EXIT_VERIFY


def _target(P) -> tuple:
    """(expected int K, relative tolerance) for recognised domains."""
    kind = P.meta.get("construction")
    if kind == "scherk":
        return 2 * math.pi * (1 - P.n // 2), 0.05
    if kind == "triangle":
        return -math.pi, 0.10
    if kind == "omega_theta_beta" and P.meta.get("reflected"):
        # half of Sigma_k: one vertical rotation doubles it
        return -2 * math.pi * P.meta["k"], 0.10
    return None, None


def cmd_solve(args) -> int:
    allowed = dict(SCHEDULE_KEYS, out=str, config=str, export=int)
    opts = parse_kv(args.params, allowed)
    schedule = _schedule(opts)
    export = opts.pop("export", 1)
    out = _out_dir(opts)
    P, _ = read_domain(args.domain)
    stem = Path(args.domain).stem
    artifact = {
        "domain": P.to_dict(),
        "schedule": [vars(s) for s in schedule],
        "tolerances": {"newton": opts.get("tol", NEWTON_TOL), "js": domains.EQUALITY_TOL},
        "seed": opts.get("seed", 0),
        "grading": opts.get("grading", 8.0),
    }
    js = domains.js_check(P)
    artifact["js_verdict"] = js.verdict
    try:
        run = exhaustion_solve(P, schedule, grading=opts.get("grading", 8.0), tol=opts.get("tol", NEWTON_TOL),
                               keep_solutions=False, max_iter=opts.get("max_iter", 200))
    except SolverError as exc:
        artifact["error"] = {"message": str(exc), "residual": exc.residual, "step": exc.step}
        (out / f"{stem}.run.json").write_text(diagnostics.report_text(artifact), encoding="utf-8")
        _print(f"solver failed at step {exc.step}: {exc}")
        return EXIT_SOLVER
    artifact["records"] = run.records
    artifact["probe_diffs"] = run.probe_diffs
    target, rel = _target(P)
    final = run.records[-1]["total_curvature"]
    artifact["final"] = {"total_curvature": final, "target": target, "relative_tolerance": rel}
    path = out / f"{stem}.run.json"
    path.write_text(diagnostics.report_text(artifact), encoding="utf-8")
    if export:
        S = surface.lift(run.final)
        surface.write_obj(S, out / f"{stem}.obj")
        surface.write_ply(S, out / f"{stem}.ply")
    _print(f"wrote {path}")
    _print(_summary(artifact))
    if target is not None and abs(abs(final) - abs(target)) > rel * abs(target):
        return EXIT_VERIFY
    return EXIT_OK


def cmd_assemble(args) -> int:
    allowed = dict(SCHEDULE_KEYS, k=int, theta=float, beta=float, T=float, out=str, config=str, audit=int)
    opts = parse_kv(args.params, allowed)
    if "k" not in opts:
        raise UsageError("k is required")
    k = opts["k"]
    theta = opts.get("theta", math.pi / 2 if k == 1 else math.pi / (2 * k + 2))
    beta = opts.get("beta", 0.0 if k == 1 else min(math.pi / 36, math.pi / 2 - k * theta))
    schedule = _schedule(opts)
    out = _out_dir(opts)
    try:
        A = surface.assemble_twisted(k, theta, beta, schedule, grading=opts.get("grading", 8.0))
    except SolverError as exc:
        _print(f"solver failed at step {exc.step}: {exc}")
        return EXIT_SOLVER
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    S = A.surface
    cap = A.run.final.cap
    T = opts.get("T", 0.5 * cap)
    ends = surface.count_ends(S, T)
    formula = surface.euler_total_curvature(ends) if ends else float("nan")
    curv = diagnostics.gauss_curvature(S)
    target = -4 * k * math.pi
    tol = 0.05 if k == 1 else 0.10
    ok = ends is not None and surface.euler_factor(ends) == -2 * k and abs(curv.total - target) <= tol * abs(target)
    stem = f"sigma_{k}"
    surface.write_obj(S, out / f"{stem}.obj")
    surface.write_ply(S, out / f"{stem}.ply")
    record = {
        "k": k, "theta": theta, "beta": beta, "probe_height": T, "cap": cap,
        "ends": ends.to_dict() if ends else None,
        "formula_total_curvature": formula,
        "measured_total_curvature": curv.total,
        "target": target, "relative_tolerance": tol,
        "gauss_bonnet_residual": curv.gauss_bonnet_residual,
        "vertices": S.n_vertices, "triangles": S.n_triangles,
        "copies": S.n_copies, "h_final": schedule[-1].h,
    }
    if opts.get("audit", 0):
        record["audit"] = surface.surface_audit(S)
    (out / f"{stem}.txt").write_text(diagnostics.report_text(record), encoding="utf-8")
    _print("quantity              value/pi     target/pi")
    _print(f"formula (ends)        {formula / math.pi:10.4f}   {target / math.pi:8.1f}")
    _print(f"measured int K        {curv.total / math.pi:10.4f}   {target / math.pi:8.1f}   (tol {tol:.0%})")
    _print(f"ends: {ends}")
    return EXIT_OK if ok else EXIT_VERIFY


REPORT_COLUMNS = ["step", "r", "n", "h", "triangles", "newton_iterations", "newton_residual", "newton_tol",
                  "area", "total_curvature", "harmonicity_residual"]


def _summary(art: dict) -> str:
    lines = [f"Jenkins-Serrin verdict: {art.get('js_verdict')}"]
    for rec in art.get("records", []):
        lines.append(f"step {rec['step']}: r={rec['r']:.6f} n={rec['n']:g} h={rec['h']:.5g} "
                     f"triangles={rec['triangles']} residual={rec['newton_residual']:.2e} "
                     f"(tol {rec['newton_tol']:.0e}) int K/pi={rec['total_curvature'] / math.pi:.5f}")
    fin = art.get("final", {})
    if fin.get("target") is not None:
        err = abs(abs(fin["total_curvature"]) - abs(fin["target"])) / abs(fin["target"])
        lines.append(f"final |int K| vs |target|: relative error {err:.4f} (tolerance {fin['relative_tolerance']})")
    return "\n".join(lines)


def cmd_report(args) -> int:
    opts = parse_kv(args.params, {"out": str, "figures": int})
    path = Path(args.artifact)
    if not path.is_file():
        _print(f"missing artifact: {path}")
        return EXIT_USAGE
    art = json.loads(path.read_text(encoding="utf-8"))
    if "records" not in art:
        _print("artifact has no completed steps")
        return EXIT_VERIFY
    figures = opts.pop("figures", 1)
    out = _out_dir(opts)
    stem = path.name.removesuffix(".run.json").removesuffix(".json")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for rec in art["records"]:
        w.writerow([rec[c] if not isinstance(rec[c], float) else repr(rec[c]) for c in REPORT_COLUMNS])
    (out / f"{stem}.csv").write_text(buf.getvalue(), encoding="utf-8")
    summary = _summary(art)
    (out / f"{stem}.summary.txt").write_text(summary + "\n", encoding="utf-8")
    if figures:
        from . import plotting
        plotting.curvature_trace(art["records"], out / f"{stem}.curvature.png", art.get("final", {}).get("target"))
        plotting.convergence(art["records"], art.get("probe_diffs", []), out / f"{stem}.convergence.png")
    _print(summary)
    return EXIT_OK


# ---------------------------------------------------------------- entry


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twisted-scherk", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    d = sub.add_parser("domain", help="write a labeled polygon file")
    g = d.add_mutually_exclusive_group(required=True)
    g.add_argument("--scherk", action="store_true", help="ideal polygon, angles=...")
    g.add_argument("--twisted", action="store_true", help="k=1: triangle; k>=2: Omega_theta_beta")
    g.add_argument("--union", action="store_true", help="Omega_theta_beta joined with its mirror image")
    g.add_argument("--omega", action="store_true", help="Omega_theta (fails the condition)")
    d.add_argument("params", nargs="*")
    d.set_defaults(func=cmd_domain)
    c = sub.add_parser("check", help="Jenkins-Serrin verification")
    c.add_argument("domain")
    c.add_argument("params", nargs="*")
    c.set_defaults(func=cmd_check)
    s = sub.add_parser("solve", help="exhaustion solve of a domain file")
    s.add_argument("domain")
    s.add_argument("params", nargs="*")
    s.set_defaults(func=cmd_solve)
    a = sub.add_parser("assemble", help="assemble Sigma_k and cross-check its total curvature")
    a.add_argument("params", nargs="*")
    a.set_defaults(func=cmd_assemble)
    r = sub.add_parser("report", help="CSV table, summary and figures from a run artifact")
    r.add_argument("artifact")
    r.add_argument("params", nargs="*")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
