"""``wolffkit`` command line: one subcommand per toolkit operation.

Each run writes ``<subcommand>.csv`` (long format), ``<subcommand>.json``
(report) and ``<subcommand>.manifest.json`` into ``--out``.  Exit codes:
0 ok, 2 configuration error, 3 numerical failure, 4 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import DEFAULT_DENSITIES, ConfigError, densities, load_config, lookup, number, section
from .counterexample import (
    AppendixConstants, CounterexampleSpec, PackingError, build, verify_global_upper, verify_local_lower,
)
from .density import RadialProfile
from .elliptic import RadialGrid, hardy_check, solve_radial_dirichlet, verify_sup_bound
from .parabolic import (
    Barenblatt, IntervalGrid, ParabolicProblem, SolverFailure, SpaceTimeGrid, StructureCoefficients,
    VectorFieldSpec, regularize, solve_ivbp,
)
from .potential import (
    DivergentPotential, EmbeddingHypothesisError, InvalidQuery, class_embedding_check, embedding_exponents,
    kato_limit_scan, pk_form_bound_estimate, wolff,
)
from .quadrature import DivergentIntegral
from .testfunctions import FAMILY_VERSION, theta_family
from .verifier import ScanSetup, scale_coefficients, scaling_transform, threshold_scan, wolff_condition_report

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VERIFY = 0, 2, 3, 4


@dataclass
class Result:
    rows: list
    report: dict
    status: int = EXIT_OK
    seeds: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Context:
    jobs: int
    tol: float | None
    seed: int


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _radial(f, where):
    if not isinstance(f, RadialProfile):
        raise ConfigError(f"{where} needs a radial density", [where])
    return f


def _points(sec, dim):
    pts = [np.asarray(p, float) for p in sec["points"]]
    if any(p.shape != (dim,) for p in pts):
        raise ConfigError(f"points must have dimension {dim}", ["points"])
    return pts


def cmd_wolff(sec, dens, ctx):
    f = lookup(dens, sec["density"], "wolff.density")
    rows = []
    for x in _points(sec, f.dim):
        for R in sec["radii"]:
            R = number(R)
            try:
                val, st = wolff(f, x, R, number(sec["beta"]), number(sec["p"])), "ok"
            except DivergentPotential:
                val, st = math.inf, "divergent"
            rows.append({"x": _fmt_point(x), "R": R, "beta": sec["beta"], "p": sec["p"], "value": val, "status": st})
    return Result(rows, {"n_values": len(rows)})


def cmd_kato(sec, dens, ctx):
    f = lookup(dens, sec["density"], "kato.density")
    scan = kato_limit_scan(f, number(sec["beta"]), number(sec["p"]), _points(sec, f.dim),
                           [number(r) for r in sec["radii"]], number(sec["threshold"]))
    return Result(scan.csv_rows(), {"classification": scan.classification,
                                    "sup_values": scan.sup_values.tolist(), "radii": scan.radii.tolist()})


def cmd_pk(sec, dens, ctx):
    f = lookup(dens, sec["density"], "pk.density")
    seed = int(sec["seed"])
    est = pk_form_bound_estimate(f, (sec["center"], number(sec["R"])), int(sec["size"]), int(sec["tiers"]), seed)
    rows = [{"scale": s, "tier_max_ratio": v} for s, v in est.tiers]
    return Result(rows, {"beta_hat": est.beta_hat, "C_hat": est.C_hat, "n_functions": est.n_functions,
                         "family_version": FAMILY_VERSION}, seeds={"pk": seed})


def cmd_classes(sec, dens, ctx):
    f = lookup(dens, sec["density"], "classes.density")
    args = [number(sec[k]) for k in ("alpha", "beta", "p", "q", "kappa")]
    rows = []
    for x in _points(sec, f.dim):
        for R in sec["radii"]:
            chk = class_embedding_check(f, *args, x, number(R))
            rows.append({"x": _fmt_point(x), "R": number(R), "lhs": chk.lhs, "rhs": chk.rhs, "ratio": chk.ratio,
                         "branch": chk.branch})
    report = {"max_ratio": max(r["ratio"] for r in rows)}
    params = getattr(f, "params", {})
    if params.get("kind") == "power":
        lhs, rhs = embedding_exponents(*args, params["s"])
        report.update(lhs_exponent=str(lhs), rhs_exponent=str(rhs), exponents_agree=lhs == rhs)
    return Result(rows, report)


def cmd_elliptic(sec, dens, ctx):
    f = _radial(lookup(dens, sec["density"], "elliptic.density"), "elliptic.density")
    grid = RadialGrid(number(sec["R"]), int(sec["n_nodes"]), sec["spacing"],
                      None if sec["r_min"] is None else number(sec["r_min"]))
    p = number(sec["p"])
    sol = solve_radial_dirichlet(f, p, grid)
    sb = verify_sup_bound(f, p, grid)
    rows = [{"r": r, "u": u, "du": du} for r, u, du in zip(sol.r, sol.u, sol.du)]
    return Result(rows, {"u_center": sol.u0, "sup_u": sb.sup_u, "sup_wolff": sb.sup_wolff, "ratio": sb.ratio,
                         "consistent": sb.consistent})


def cmd_hardy(sec, dens, ctx):
    f = _radial(lookup(dens, sec["density"], "hardy.density"), "hardy.density")
    p, R = number(sec["p"]), number(sec["R"])
    grid = RadialGrid(R, int(sec["n_nodes"]), sec["spacing"], None if sec["r_min"] is None else number(sec["r_min"]))
    h = solve_radial_dirichlet(f, p, grid)
    seed = int(sec["seed"])
    rep = hardy_check(h, p, theta_family(R, f.dim, int(sec["size"]), seed))
    tol = ctx.tol if ctx.tol is not None else 5e-3
    rows = [{"theta": n, "ratio": r, "bounded_ratio": b} for n, r, b in zip(rep.names, rep.ratios, rep.bounded_ratios)]
    status = EXIT_OK if rep.max_ratio <= 1 + tol else EXIT_VERIFY
    return Result(rows, {"max_ratio": rep.max_ratio, "tolerance": tol, "family_version": FAMILY_VERSION}, status,
                  seeds={"theta_family": seed}, tolerances={"hardy": tol})


def _initial(sec, geometry, lo, hi):
    kind = sec["initial"]
    if kind == "sine":
        if geometry == "radial":
            return (lambda x: np.cos(0.5 * math.pi * x / hi)), (lambda x, t: np.zeros_like(np.asarray(x, float)))
        return (lambda x: np.sin(math.pi * (x - lo) / (hi - lo))), (lambda x, t: np.zeros_like(np.asarray(x, float)))
    if kind == "zero":
        z = lambda x, t=None: np.zeros_like(np.asarray(x, float))  # noqa: E731
        return z, z
    if kind == "barenblatt":
        B = Barenblatt(number(sec["p"]), int(sec["dim"]))
        return (lambda x: B(x, number(sec["t0"]))), (lambda x, t: B(x, t))
    try:
        c = float(kind)
    except (TypeError, ValueError) as exc:
        raise ConfigError("solve.initial must be sine, zero, barenblatt or a number", ["solve.initial"]) from exc
    return (lambda x: np.full_like(np.asarray(x, float), c)), (lambda x, t: np.full_like(np.asarray(x, float), c))


def cmd_solve(sec, dens, ctx):
    p, eps = number(sec["p"]), number(sec["eps"])
    spec = VectorFieldSpec(p=p)
    if eps > 0:
        spec = regularize(spec, eps)
    geometry = sec["geometry"]
    if geometry == "radial":
        space, lo, hi = RadialGrid(number(sec["R"]), int(sec["n_nodes"])), 0.0, number(sec["R"])
    elif geometry == "interval":
        lo, hi = number(sec["a"]), number(sec["b"])
        space = IntervalGrid(lo, hi, int(sec["n_nodes"]))
    else:
        raise ConfigError("solve.geometry must be interval or radial", ["solve.geometry"])
    grid = SpaceTimeGrid(space, number(sec["t0"]), number(sec["t1"]), number(sec["dt"]), number(sec["theta"]),
                         dim=int(sec["dim"]))
    u0, bnd = _initial(sec, geometry, lo, hi)
    forcing = None if sec["forcing"] is None else lookup(dens, sec["forcing"], "solve.forcing")
    tol = ctx.tol if ctx.tol is not None else number(sec["tol"])
    prob = ParabolicProblem(spec, grid, u0, bnd, forcing=forcing, forcing_parity=sec["parity"], tol=tol)
    sol = solve_ivbp(prob)
    rows = [{"t": t, "x": x, "u": u, "grad": g}
            for k, t in enumerate(sol.t) for x, u, g in zip(sol.x, sol.u[k], sol.grad[k])]
    accepted = [s for s in sol.newton_stats if not s["rejected"]]
    report = {"steps": len(accepted), "rejected": len(sol.newton_stats) - len(accepted),
              "max_iterations": max((s["iterations"] for s in accepted), default=0),
              "max_residual": max((s["residual"] for s in accepted), default=0.0),
              "picard_steps": sum(s.get("picard", 0) for s in accepted),
              "newton_stats": [{k: s.get(k) for k in ("t", "dt", "iterations", "residual", "picard", "rejected")}
                               for s in sol.newton_stats]}
    return Result(rows, report, tolerances={"newton": tol})


def cmd_verify(sec, dens, ctx):
    if sec["kind"] == "threshold":
        alphas = [None if a is None else number(a) for a in sec["alphas"]]
        scan = threshold_scan(alphas, [number(p) for p in sec["p_values"]], [int(v) for v in sec["levels"]],
                              [number(q) for q in sec["q_grid"]], ScanSetup(model=sec["model"]), jobs=ctx.jobs,
                              tol=ctx.tol if ctx.tol is not None else 0.02)
        labels = {f"p={p:g},alpha={'none' if a is None else f'{a:g}'}": v for (p, a), v in scan.labels.items()}
        status = EXIT_OK
        if any(v == "failed" for v in labels.values()):
            status = EXIT_NUMERICAL
        expect = sec["expect"] or {}
        mismatched = {k: labels.get(k) for k, v in expect.items() if labels.get(k) != v}
        if mismatched and status == EXIT_OK:
            status = EXIT_VERIFY
        return Result(scan.csv_rows(), {"labels": labels, "mismatched": mismatched}, status,
                      tolerances={"stability": ctx.tol if ctx.tol is not None else 0.02})
    if sec["kind"] == "conditions":
        coeffs = {k: lookup(dens, v, f"verify.coefficients.{k}") for k, v in (sec["coefficients"] or {}).items()}
        sc = StructureCoefficients(p=number(sec["p"]), **coeffs)
        dim = next(iter(coeffs.values())).dim if coeffs else len(sec["points"][0])
        rep = wolff_condition_report(sc, _points(sec, dim), [number(r) for r in sec["radii"]],
                                     number(sec["nu_main"]), number(sec["nu_aposteriori"]))
        return Result(rep.rows, {"main_holds": rep.main_holds, "aposteriori_holds": rep.aposteriori_holds,
                                 "composite": _keyed(rep.composite), "composite_of_sum": _keyed(rep.composite_of_sum),
                                 "main_first": _keyed(rep.main_first), "aposteriori": _keyed(rep.aposteriori)},
                      tolerances={"nu_main": number(sec["nu_main"]), "nu_aposteriori": number(sec["nu_aposteriori"])})
    raise ConfigError("verify.kind must be threshold or conditions", ["verify.kind"])


def _heat_commutation(lam):
    grid = SpaceTimeGrid(IntervalGrid(0.0, 1.0, 65), 0.0, 0.1, 0.005)
    prob = ParabolicProblem(VectorFieldSpec(p=2.0), grid, lambda x: np.sin(math.pi * x),
                            source=lambda x, t, u, z: 1.0 + 0.0 * u)
    a = scaling_transform(solve_ivbp(prob), lam)
    b = solve_ivbp(scaling_transform(prob, lam))
    return float(np.max(np.abs(a.u - b.u)))


def cmd_scale(sec, dens, ctx):
    lam, p = number(sec["lambda"]), number(sec["p"])
    coeffs = {k: lookup(dens, v, f"scale.coefficients.{k}") for k, v in (sec["coefficients"] or {}).items()}
    sc = StructureCoefficients(p=p, **coeffs)
    new = scale_coefficients(sc, lam) if lam > 1 else None
    if new is None:
        raise ConfigError("scale.lambda must exceed 1", ["scale.lambda"])
    powers = {"f": 1 - p, "g": 0.0, "f1": 2 - p, "g1": 0.0, "f2": 1 - p, "g2": 0.0}
    rows = []
    for k, e in powers.items():
        old = getattr(sc, k)
        if old is None:
            continue
        x = np.asarray(old.singular_points()[0] if old.singular_points() else np.zeros(old.dim), float)
        m0 = float(old.ball_mass(x, np.array([1.0]))[0])
        m1 = float(getattr(new, k).ball_mass(x, np.array([1.0]))[0])
        rows.append({"coefficient": k, "power": e, "factor": lam ** e, "mass_ratio": m1 / m0 if m0 else 1.0})
    report = {"lambda": lam, "p": p}
    status = EXIT_OK
    tol = ctx.tol if ctx.tol is not None else 1e-10
    if sec["check_heat"]:
        diff = _heat_commutation(lam)
        report["heat_commutation_max_diff"] = diff
        status = EXIT_OK if diff <= tol else EXIT_VERIFY
    if any(abs(r["mass_ratio"] - r["factor"]) > 1e-12 * r["factor"] for r in rows):
        status = EXIT_VERIFY
    return Result(rows, report, status, tolerances={"commutation": tol})


def cmd_counterexample(sec, dens, ctx):
    try:
        spec = CounterexampleSpec(int(sec["N"]), number(sec["p"]), number(sec["rho0"]), number(sec["q0"]),
                                  int(sec["n_terms"]), number(sec["half_width"]))
    except ValueError as exc:
        raise ConfigError(str(exc), ["counterexample"]) from exc
    f = build(spec)
    k = AppendixConstants(spec.N, spec.p)
    loc = verify_local_lower(spec, f)
    up = verify_global_upper(spec, f)
    rows = [{"kind": "local", "n": n + 1, "x": _fmt_point(f.centers[n]), "value": v, "limit": k.a_p}
            for n, v in enumerate(loc.values)]
    rows += [{"kind": "global", "n": "", "x": _fmt_point(x), "value": v, "limit": up.bound}
             for x, v in zip(up.points, up.values)]
    tol = ctx.tol if ctx.tol is not None else 1e-8
    ok = loc.max_rel_error <= tol and up.ok
    report = {"a_p": k.a_p, "b_p": k.b_p, "c_p": k.c_p,
              "coefficients": {"a": str(k.a_coef), "b": str(k.b_coef), "c": str(k.c_coef)},
              "rho": spec.radii.tolist(), "centers": f.centers.tolist(),
              "local_max_rel_error": loc.max_rel_error, "global_max": up.computed_max,
              "global_argmax": up.argmax.tolist(), "tail": up.tail, "bound": up.bound, "margin": up.margin,
              "violations": [[c, _fmt_point(x), str(n), v, lim] for c, x, n, v, lim in up.violations],
              "pass": ok}
    return Result(rows, report, EXIT_OK if ok else EXIT_VERIFY, tolerances={"local": tol})


COMMANDS = {
    "wolff": cmd_wolff, "kato": cmd_kato, "pk": cmd_pk, "classes": cmd_classes, "elliptic": cmd_elliptic,
    "hardy": cmd_hardy, "solve": cmd_solve, "verify": cmd_verify, "scale": cmd_scale,
    "counterexample": cmd_counterexample,
}


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _fmt_point(x):
    return " ".join(f"{float(v):.17g}" for v in np.atleast_1d(x))


def _keyed(d):
    return {repr(float(k)): v for k, v in d.items()}


def _plain(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))
    return obj


def _csv_text(rows):
    keys = []
    for r in rows:
        keys.extend(k for k in r if k not in keys)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (f"{v:.17g}" if isinstance(v, (float, np.floating)) else v) for k, v in r.items()})
    return buf.getvalue()


def _write(out: Path, name: str, text: str) -> str:
    path = out / name
    path.write_text(text)
    return hashlib.sha256(text.encode()).hexdigest()


def _error(kind, message, keys=(), code=EXIT_CONFIG):
    sys.stderr.write(json.dumps({"error": kind, "message": message, "keys": list(keys)}) + "\n")
    return code


def build_parser():
    ap = argparse.ArgumentParser(prog="wolffkit", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML run configuration")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for scans")
        sp.add_argument("--tol", type=float, default=None, help="override the subcommand's tolerance")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        cfg = load_config(args.config)
        dens = densities(cfg)
        sec = section(cfg, args.command)
        ctx = Context(max(1, args.jobs), args.tol, int(cfg.get("seed", 0)))
        res = COMMANDS[args.command](sec, dens, ctx)
    except ConfigError as exc:
        return _error("config", str(exc), exc.keys)
    except (InvalidQuery, EmbeddingHypothesisError, PackingError) as exc:
        return _error("config", str(exc))
    except (SolverFailure, DivergentIntegral, FloatingPointError) as exc:
        return _error("numerical", f"{args.command}: {exc}", code=EXIT_NUMERICAL)
    except ValueError as exc:
        return _error("config", f"{args.command}: {exc}")
    except Exception as exc:  # noqa: BLE001 - reported as machine-readable JSON
        return _error("numerical", f"{args.command}: {type(exc).__name__}: {exc}", code=EXIT_NUMERICAL)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest_name = f"{args.command}.manifest.json"
    digests = {
        f"{args.command}.csv": _write(out, f"{args.command}.csv", _csv_text(res.rows)),
        f"{args.command}.json": _write(out, f"{args.command}.json", json.dumps(
            _plain({"manifest": manifest_name, "status": res.status, **res.report}), indent=2, sort_keys=True) + "\n"),
    }
    manifest = {
        "subcommand": args.command, "version": __version__, "config": {"section": sec, "densities":
                                                                          cfg.get("densities") or DEFAULT_DENSITIES},
        "seeds": {"global": ctx.seed, **res.seeds}, "tolerances": res.tolerances, "jobs": ctx.jobs,
        "wall_clock_s": time.perf_counter() - start, "outputs": digests, "status": res.status,
    }
    (out / manifest_name).write_text(json.dumps(_plain(manifest), indent=2, sort_keys=True) + "\n")
    print(json.dumps(_plain({"status": res.status, "outputs": sorted(digests), "manifest": manifest_name})))
    return res.status


if __name__ == "__main__":
    raise SystemExit(main())
