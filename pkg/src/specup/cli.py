"""Command-line front end.

Subcommands: ``laplacian`` (point cloud -> normalized Laplacian file),
``update`` (rank-one update of stored eigenpairs), ``extend``
(out-of-sample extension of a stored spectrum), and ``experiment``
(reproduce the benchmark studies as CSV plus figures).  Every output file
gets a JSON manifest recording the resolved configuration and input
digests.  Exit codes: 0 ok, 2 input/parse, 3 construction, 4 numeric
invariant, 5 non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__, formats, labbench, report
from .core import PartialEigen, RankOneUpdate
from .errors import InputError, SpecupError
from .extend import extend, lift_eigenpairs
from .graph import GraphConfig, augment_and_delta, build_weights, laplacian_sym
from .labbench import ExperimentSpec, rows_to_csv, run_experiment
from .secular import TruncationConfig
from .update import rank_one_update


def _parse_rule(text):
    try:
        name, _, value = text.partition(":")
        if name == "knn":
            return {"rule": "knn", "k": int(value)}
        if name == "delta":
            return {"rule": "delta", "delta": float(value)}
    except ValueError:
        pass
    raise InputError(f"bad --rule {text!r}: expected knn:K or delta:D")


def _parse_bool(text):
    val = text.strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off"):
        return False
    raise InputError(f"expected a boolean, got {text!r}")


def _parse_mu(text):
    if text in ("zero", "mean", "star"):
        return text
    try:
        return float(text)
    except ValueError:
        raise InputError(f"bad --mu {text!r}: expected zero|mean|star|VALUE") from None


def _graph_config(args):
    return GraphConfig(epsilon=args.epsilon, self_loops=args.self_loops,
                       **_parse_rule(args.rule))


def _manifest(out, subcommand, config, inputs=(), seed=None):
    formats.write_manifest(f"{out}.manifest.json", subcommand, config,
                           input_paths=inputs, seed=seed, version=__version__)


def cmd_laplacian(args):
    pc = formats.load_point_cloud(args.points)
    cfg = _graph_config(args)
    lap = laplacian_sym(build_weights(pc, cfg))
    formats.write_matrix(args.out, lap)
    _manifest(args.out, "laplacian",
              {"points": args.points, "rule": args.rule,
               "epsilon": args.epsilon, "self_loops": args.self_loops},
              inputs=[args.points])
    return 0


def cmd_update(args):
    a = formats.read_matrix(args.matrix)
    values, vectors = formats.read_eigs(args.eigs)
    v = formats.read_vector(args.v)
    eig = PartialEigen(values, vectors)
    cfg = TruncationConfig(order=args.order, mu_policy=_parse_mu(args.mu))
    res = rank_one_update(eig, RankOneUpdate(args.rho, v), cfg, a=a,
                          orthogonalize=args.orthogonalize)
    formats.write_eigs(args.out, res.values, res.vectors)
    diag = {
        "mu_used": res.mu_used,
        "gram_defect": res.gram_defect,
        "residual_quality": res.residual_quality,
        "deflation": {"kept": len(res.deflation.kept),
                      "frozen": len(res.deflation.frozen),
                      "merged_groups": len(res.deflation.merged)},
    }
    diag.update(res.diagnostics)
    formats.atomic_write_text(f"{args.out}.diag.json",
                              json.dumps(diag, indent=2, sort_keys=True,
                                         default=str) + "\n")
    _manifest(args.out, "update",
              {"matrix": args.matrix, "eigs": args.eigs, "rho": args.rho,
               "v": args.v, "order": args.order, "mu": args.mu,
               "orthogonalize": args.orthogonalize},
              inputs=[args.matrix, args.eigs, args.v])
    return 0


def cmd_extend(args):
    pc = formats.load_point_cloud(args.points)
    x0_cloud = formats.load_point_cloud(args.new_point)
    if x0_cloud.n != 1:
        raise InputError(f"{args.new_point}: expected exactly one point")
    values, vectors = formats.read_eigs(args.eigs)
    gcfg = _graph_config(args)
    pair = augment_and_delta(pc, x0_cloud.points[0], gcfg)
    eig = lift_eigenpairs(values, vectors)
    cfg = TruncationConfig(order=args.order, mu_policy=_parse_mu(args.mu))
    res = extend(pair.l0_aug, eig, pair, cfg, correct=args.correct)
    final = res.corrected if args.correct else res.uncorrected
    formats.write_eigs(args.out, *final)
    if args.correct:
        formats.write_eigs(f"{args.out}.uncorrected", *res.uncorrected)
    diag = {"rho": res.rho, "c_norm": res.correction_matrix_norm}
    diag.update(res.diagnostics)
    formats.atomic_write_text(f"{args.out}.diag.json",
                              json.dumps(diag, indent=2, sort_keys=True,
                                         default=str) + "\n")
    _manifest(args.out, "extend",
              {"points": args.points, "new_point": args.new_point,
               "eigs": args.eigs, "rule": args.rule, "epsilon": args.epsilon,
               "self_loops": args.self_loops, "order": args.order,
               "mu": args.mu, "correct": args.correct},
              inputs=[args.points, args.new_point, args.eigs])
    return 0


def _int_tuple(text):
    try:
        return tuple(int(x) for x in text.split(",") if x)
    except ValueError:
        raise InputError(f"expected a comma-separated integer list, got {text!r}") from None


def _float_tuple(text):
    try:
        return tuple(float(x) for x in text.split(",") if x)
    except ValueError:
        raise InputError(f"expected a comma-separated float list, got {text!r}") from None


def cmd_experiment(args):
    spec = ExperimentSpec(
        kind=args.kind, seed=args.seed, n=args.n, m=args.m,
        trials=args.trials, mu_hats=_float_tuple(args.mu_hats),
        k_list=_int_tuple(args.k_list), epsilon=args.epsilon,
        graph_m=args.graph_m, graph_k=args.graph_k,
        n_ladder=_int_tuple(args.n_ladder), m_ladder=_int_tuple(args.m_ladder),
        reps=args.reps,
    )
    rows = run_experiment(spec)
    formats.atomic_write_text(args.out, rows_to_csv(rows))
    if spec.kind == labbench.KIND_SCALING:
        formats.atomic_write_text(f"{args.out}.timing.csv",
                                  rows_to_csv(rows, include_timing=True))
    if args.figures:
        report.render(spec.kind, rows, f"{args.out}.png")
    _manifest(args.out, "experiment",
              {"kind": args.kind, "n": args.n, "m": args.m,
               "trials": args.trials, "mu_hats": list(spec.mu_hats),
               "k_list": list(spec.k_list), "epsilon": args.epsilon,
               "graph_m": args.graph_m, "graph_k": args.graph_k,
               "n_ladder": list(spec.n_ladder), "m_ladder": list(spec.m_ladder),
               "reps": args.reps, "figures": args.figures},
              seed=args.seed)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="specup",
        description="Rank-one spectral updates from a partial eigendecomposition")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("laplacian", help="build a normalized graph Laplacian")
    p.add_argument("points", help="point-cloud CSV")
    p.add_argument("--rule", default="knn:10", help="knn:K or delta:D")
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--self-loops", dest="self_loops", type=_parse_bool,
                   default=True, metavar="BOOL")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_laplacian)

    p = sub.add_parser("update", help="rank-one update of stored eigenpairs")
    p.add_argument("--matrix", required=True)
    p.add_argument("--eigs", required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--v", required=True)
    p.add_argument("--order", type=int, choices=(1, 2), default=1)
    p.add_argument("--mu", default="zero", help="zero|mean|star|VALUE")
    p.add_argument("--orthogonalize", type=_parse_bool, default=False,
                   metavar="BOOL")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_update)

    p = sub.add_parser("extend", help="out-of-sample extension of a spectrum")
    p.add_argument("--points", required=True)
    p.add_argument("--new-point", dest="new_point", required=True)
    p.add_argument("--eigs", required=True)
    p.add_argument("--rule", default="knn:10")
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--self-loops", dest="self_loops", type=_parse_bool,
                   default=True, metavar="BOOL")
    p.add_argument("--order", type=int, choices=(1, 2), default=2)
    p.add_argument("--mu", default="star")
    p.add_argument("--correct", type=_parse_bool, default=True, metavar="BOOL")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extend)

    p = sub.add_parser("experiment", help="reproduce a benchmark study")
    p.add_argument("--kind", required=True, choices=labbench.KINDS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--m", type=int, default=10)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--mu-hats", dest="mu_hats", default="1,0.1,0.01,0.001,0.0001")
    p.add_argument("--k-list", dest="k_list", default="5,10,20,40")
    p.add_argument("--epsilon", type=float, default=100.0)
    p.add_argument("--graph-m", dest="graph_m", type=int, default=5)
    p.add_argument("--graph-k", dest="graph_k", type=int, default=10)
    p.add_argument("--n-ladder", dest="n_ladder", default="2000,4000,8000,16000")
    p.add_argument("--m-ladder", dest="m_ladder", default="50,100,200,400")
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--figures", type=_parse_bool, default=True, metavar="BOOL")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags, which matches the input error code
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except SpecupError as exc:
        print(f"specup: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"specup: error: missing file {exc.filename}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
