"""``charvar`` command line driver.

Every subcommand writes one JSON report (to stdout, or to ``--out DIR`` as
``DIR/<command>.json``).  Reports embed the full configuration and the
package version, so a run is reproducible from its report alone.  Apart
from the ``timestamp`` field, identical configurations give byte-identical
reports.

Exit status: 0 on success, 1 on usage errors, 2 when the parameters are
degenerate or non-generic.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import os
import sys

import numpy as np

from . import __version__
from . import embed as E
from . import limits as L
from . import params as prm
from . import reduce as R
from . import singular as S
from .errors import DegeneracyError, UsageError

EXIT_OK, EXIT_USAGE, EXIT_DEGENERATE = 0, 1, 2


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _params(args):
    if args.params:
        c = prm.load(args.params)
        if args.n is not None and args.n != c.n:
            raise UsageError(f"--n {args.n} disagrees with the params file (n={c.n})")
        return c
    if args.n is None:
        raise UsageError("give --n (with --seed) or --params")
    return prm.sample(args.n, args.seed)


def _config(args):
    skip = {"func", "out"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _emit(args, result, extra_files=()):
    report = {
        "command": args.command,
        "version": __version__,
        "config": _config(args),
        "threads": S.worker_count(),
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "result": result,
    }
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, f"{args.command}.json"), "w") as fh:
            fh.write(text + "\n")
        for name, body in extra_files:
            with open(os.path.join(args.out, name), "w") as fh:
                fh.write(body)
    else:
        sys.stdout.write(text + "\n")


# ----------------------------------------------------------------------------
# subcommands


def cmd_sample(args):
    c = prm.sample(args.n, args.seed, dist=args.dist)
    _emit(args, {"params": c.to_json()})
    return EXIT_OK


def cmd_check(args):
    c = _params(args)
    rep = prm.check_n4_conditions(c) if c.n == 4 else prm.check_all_pairs(c)
    _emit(args, {"report": rep.to_json(), "eps": prm.DEFAULT_GEN_EPS})
    return EXIT_OK if rep.passed else EXIT_DEGENERATE


def cmd_limits(args):
    c = _params(args)
    pred = L.predict_count(c)
    _emit(args, {"prediction": pred.to_json(), "points": L.lambda_report(c)})
    return EXIT_OK


def _count_result(c, t):
    pred = L.predict_count(c)
    res = S.count_detected(c, t)
    return {
        "t": t,
        "predicted": pred.to_json(),
        "detected": res.count,
        "match": res.count == pred.total,
        "rank_tol": 1e-8,
        "minor_tol": S.MINOR_TOL,
        "max_rank": max((p.rank_cert.rank for p in res.points), default=None),
        "max_minor_residual": max((p.minor_residual for p in res.points), default=None),
        "max_seed_distance": max((p.seed_distance for p in res.points), default=None),
        "points": [p.to_json() for p in res.points],
        "failures": res.failures,
    }


def cmd_count(args):
    c = _params(args)
    _emit(args, _count_result(c, args.t))
    return EXIT_OK


def cmd_singular(args):
    c = _params(args)
    if c.n == 5:
        res = S.count_detected(c, args.t)
        _emit(args, {"t": args.t, "points": [p.to_json() for p in res.points],
                     "failures": res.failures})
        return EXIT_OK
    if c.n < 5:
        raise UsageError("the singular locus is traced for n >= 5")
    i, j = args.pair
    fam = L.case1_family(c, i, j)
    tr = S.surface_trace(c, args.t, fam, args.grid)
    xs = [p.xi for p in tr.points if p is not None]
    gaps = [L.proj_dist(a, b) for a, b in zip(xs, xs[1:])]
    _emit(args, {"trace": tr.to_json(), "converged": len(tr.converged),
                 "nodes": len(tr.points),
                 "max_rank": max((p.rank_cert.rank for p in tr.converged), default=None),
                 "max_gap_over_spacing": max(gaps) / tr.spacing if gaps and tr.spacing else None})
    return EXIT_OK


def cmd_smooth(args):
    c = _params(args)
    rep = S.smooth_scan_n4(c, args.t, samples=args.samples, seed=args.seed)
    _emit(args, {"report": rep.to_json(), "grad_tol": 1e-4})
    return EXIT_OK


def cmd_witness(args):
    c = _params(args)
    w = S.nonempty_witness(c, seed=args.seed)
    _emit(args, {"witness": w.to_json()})
    return EXIT_OK


def cmd_curvature(args):
    c = _params(args)
    h = E.h_from_params(c)
    Rt = E.gauss_curvature(h)
    _emit(args, {"curvature": Rt.to_json(), "invariant_residuals": Rt.invariant_residuals(),
                 "tol": 1e-12})
    return EXIT_OK


def cmd_verify_embed(args):
    c = _params(args)
    h, Rt, g, jet = E.pipeline(c)
    gauss = float(np.max(np.abs(g.curvature().R - Rt.R)))
    rep = E.verify_order2(jet, g)
    A, B, C, D = E.counts(c.n)
    _emit(args, {
        "gauss_residual": gauss, "gauss_tol": 1e-12,
        "equation_residual": float(np.max(np.abs(E.equation_residuals(jet, g)))),
        "equation_tol": 1e-9,
        "order2": rep.to_json(),
        "selection_cond": jet.selection_cond,
        "counts": {"equations": A, "unknowns": B, "ordered": C, "classes": D},
        "jet": jet.to_json(),
    })
    return EXIT_OK


def cmd_reduce(args):
    c = _params(args)
    jet = E.pipeline(c)[3]
    clo = R.closure_at_origin(c, jet)
    calc = R.JetCalculus(jet)
    rng = np.random.default_rng(args.seed)
    trips = []
    for s in range(args.samples):
        x = rng.normal(size=c.n)
        x *= rng.uniform(0, args.radius) / np.linalg.norm(x)
        rt = R.manufactured_roundtrip(calc, x, seed=args.seed * 1000 + s)
        trips.append({"x": rt.x, "normal_error": rt.normal_error,
                      "tangential_residual": rt.tangential_residual})
    worst = max((max(r["normal_error"], r["tangential_residual"]) for r in trips), default=0.0)
    _emit(args, {"closure": clo.to_json(), "roundtrip": trips,
                 "roundtrip_max": worst, "roundtrip_tol": 1e-9},
          extra_files=[("reduce_A0.csv", R.closure_csv(c, clo.A))])
    return EXIT_OK


_GNUPLOT = """set logscale xy
set xlabel 't'
set ylabel 'max distance to limit'
set key left top
plot 'sweep.csv' using 1:4 with linespoints title 'drift', \\
     'sweep.csv' using 1:1 with lines title 'slope 1'
"""


def cmd_sweep(args):
    c = _params(args)
    ts = sorted(args.ts, reverse=True)
    rows = []
    for t in ts:
        r = _count_result(c, t)
        rows.append({k: r[k] for k in ("t", "detected", "match", "max_seed_distance")})
    fit = None
    good = [(r["t"], r["max_seed_distance"]) for r in rows if r["max_seed_distance"]]
    if len(good) >= 2:
        x, y = np.log([g[0] for g in good]), np.log([g[1] for g in good])
        fit = float(np.polyfit(x, y, 1)[0])
    lines = ["t,detected,match,max_seed_distance"]
    lines += [f"{r['t']!r},{r['detected']},{int(r['match'])},{r['max_seed_distance']!r}"
              for r in rows]
    _emit(args, {"rows": rows, "drift_slope": fit, "expected_slope": 1.0, "slope_tol": 0.2},
          extra_files=[("sweep.csv", "\n".join(lines) + "\n"), ("sweep.gp", _GNUPLOT)])
    return EXIT_OK


# ----------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="charvar", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"charvar {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_, t=False, samples=None):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--n", type=int, default=None, help="dimension")
        p.add_argument("--seed", type=int, default=0, help="random seed")
        p.add_argument("--params", default=None, help="ParamSet JSON file (overrides --n/--seed)")
        p.add_argument("--out", default=None, help="directory for the report")
        if t:
            p.add_argument("--t", type=float, default=1e-3, help="scale of the parameters")
        if samples is not None:
            p.add_argument("--samples", type=int, default=samples)
        p.set_defaults(func=func)
        return p

    p = add("sample", cmd_sample, "draw a parameter set")
    p.add_argument("--dist", default="uniform", choices=["uniform", "normal", "point"])
    add("check", cmd_check, "generic conditions (n = 4 or pair conditions)")
    add("limits", cmd_limits, "predicted limit points and counts (n = 5)")
    add("count", cmd_count, "detected versus predicted singular points (n = 5)", t=True)
    p = add("singular", cmd_singular, "refine (n = 5) or trace (n >= 6) the singular locus", t=True)
    p.add_argument("--pair", type=int, nargs=2, default=(1, 2), metavar=("I", "J"))
    p.add_argument("--grid", type=int, default=50)
    add("smooth", cmd_smooth, "smoothness scan (n = 4)", t=True, samples=10_000)
    add("witness", cmd_witness, "find a characteristic direction")
    add("curvature", cmd_curvature, "curvature tensor of the second fundamental form")
    add("verify-embed", cmd_verify_embed, "order-two embedding pipeline")
    p = add("reduce", cmd_reduce, "reduced system at 0 and round-trip check", samples=20)
    p.add_argument("--radius", type=float, default=1e-2)
    p = add("sweep", cmd_sweep, "count over a t schedule with drift fit (n = 5)")
    p.add_argument("--ts", type=float, nargs="+", default=[1e-2, 1e-3, 1e-4])
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"charvar: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegeneracyError as exc:
        print(f"charvar: degenerate input: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (OSError, json.JSONDecodeError) as exc:
        print(f"charvar: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
