"""Command line interface.

    biwcm fit      --input trade.csv --model biwcm_c --out fit/
    biwcm validate --input trade.csv --model merca_c --procedure alpha --out val/
    biwcm rank     --input val/validated_matrix.tsv --out rank/
    biwcm compare  a.tsv b.tsv --out cmp/
    biwcm filter   --input trade.csv --out filt/
    biwcm sample   --input fit/model.json --n 10 --seed 1 --out samples/
    biwcm report   --input trade.csv --out report/

Exit status: 0 success, 2 usage error, 3 bad input, 4 solver did not
converge, 1 anything else.  No output file is written unless the whole
command succeeds.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .core import GraphError, Mode, drop_isolated
from .fileio import dense_tsv, edgelist_csv, fmt, read_graph, read_matrix, write_outputs
from .metrics import fitness_complexity
from .nullmodels import pvalue_matrix, pvalues_to_csv
from .reports import LabeledMatrix, LabelMismatchError, compare, filter_signal, pipeline_report
from .sampling import sample
from .solvers import ConvergenceError, FittedModel, ModelKind, SolverConfig, merca, solve
from .validation import Procedure, alpha_validate, mu_validate

EXIT_ERROR = 1
EXIT_INPUT = 3
EXIT_CONVERGENCE = 4

log = logging.getLogger("biwcm")


class InputError(Exception):
    pass


def _alpha(text: str) -> float:
    v = float(text)
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError("alpha must lie in (0, 1]")
    return v


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _mode_for(model: ModelKind) -> Mode:
    return Mode.DISCRETE if model.discrete else Mode.CONTINUOUS


def _load(args, mode=Mode.CONTINUOUS):
    try:
        return read_graph(args.input, mode, args.format)
    except (GraphError, FileNotFoundError, UnicodeDecodeError) as exc:
        raise InputError(str(exc)) from exc


def _solver_config(args) -> SolverConfig:
    return SolverConfig(method=args.method, tolerance=args.tol, max_iterations=args.max_iter)


def _fit_model(g, kind: ModelKind, args):
    """Fit on ``g`` with isolated nodes removed; returns model and dropped labels."""
    if kind.closed_form:
        return merca(g, kind), [], []
    reduced, dropped_r, dropped_c = drop_isolated(g)
    return solve(reduced, kind, _solver_config(args)), dropped_r, dropped_c


def _fit_report(fm: FittedModel, g, dropped_r, dropped_c) -> str:
    d = fm.diagnostics
    lines = [
        f"model:       {fm.model.value}",
        f"method:      {d.method}",
        f"input shape: {g.shape[0]} x {g.shape[1]}",
        f"fitted on:   {fm.shape[0]} x {fm.shape[1]}",
        f"iterations:  {d.iterations}",
        f"residual:    {fmt(d.residual)}",
        f"total weight: {fmt(fm.strengths.total_weight)}",
        f"dropped rows ({len(dropped_r)}): {', '.join(dropped_r)}",
        f"dropped cols ({len(dropped_c)}): {', '.join(dropped_c)}",
    ]
    if d.hessian_fallback:
        lines.append("warning: singular Hessian, fell back to the diagonal")
    return "\n".join(lines) + "\n"


def cmd_fit(args) -> int:
    kind = ModelKind(args.model)
    g = _load(args, _mode_for(kind))
    fm, dropped_r, dropped_c = _fit_model(g, kind, args)
    files = {"model.json": fm.to_json() + "\n", "fit_report.txt": _fit_report(fm, g, dropped_r, dropped_c)}
    write_outputs(args.out, files)
    sys.stdout.write(files["fit_report.txt"])
    return 0


def cmd_validate(args) -> int:
    kind = ModelKind(args.model)
    g = _load(args, _mode_for(kind))
    fm, dropped_r, dropped_c = _fit_model(g, kind, args)
    procedure = Procedure(args.procedure)
    files = {}
    if procedure is Procedure.MU:
        vm = mu_validate(g, fm)
    else:
        pm = pvalue_matrix(fm, g)
        vm = alpha_validate(g, pm, args.alpha)
        files["pvalues.csv"] = pvalues_to_csv(pm, g, full=args.full)
    meta = vm.metadata()
    meta["dropped_rows"] = dropped_r
    meta["dropped_cols"] = dropped_c
    if not kind.closed_form:
        meta["solver"] = {"method": fm.diagnostics.method, "iterations": fm.diagnostics.iterations,
                          "residual": fm.diagnostics.residual}
    files["validated.csv"] = vm.edgelist_csv()
    files["validated.json"] = json.dumps(meta, indent=1, sort_keys=True) + "\n"
    files["validated_matrix.tsv"] = dense_tsv(vm.matrix, vm.row_labels, vm.col_labels)
    write_outputs(args.out, files)
    print(f"{vm.n_validated} links validated ({procedure.value}-{kind.value}), "
          f"connectance {meta['connectance']:.6g}")
    return 0


def _ranking_files(r, prefix: str = "") -> dict:
    return {
        f"{prefix}fitness.csv": r.ranking_csv("rows"),
        f"{prefix}complexity.csv": r.ranking_csv("cols"),
        f"{prefix}ranking.json": r.diagnostics_json() + "\n",
    }


def _load_matrix(path, fmt_hint):
    try:
        return read_matrix(path, fmt_hint)
    except (GraphError, FileNotFoundError, UnicodeDecodeError) as exc:
        raise InputError(str(exc)) from exc


def cmd_rank(args) -> int:
    rows, cols, m = _load_matrix(args.input, args.format)
    if args.binarize:
        m = (m > 0).astype(float)
    try:
        r = fitness_complexity(m, args.fc_max_iter, args.fc_tol, rows, cols)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    write_outputs(args.out, _ranking_files(r))
    state = "converged" if r.converged else "not converged"
    print(f"fitness-complexity {state} after {r.iterations} iterations")
    return 0


def cmd_compare(args) -> int:
    if args.names and len(args.names) != len(args.matrices):
        raise InputError("--names needs one name per matrix")
    names = args.names or [Path(p).stem for p in args.matrices]
    if len(set(names)) != len(names):
        names = [f"m{k}" for k in range(len(args.matrices))]
    mats = []
    for name, path in zip(names, args.matrices):
        rows, cols, m = _load_matrix(path, args.format)
        mats.append(LabeledMatrix(name, m, rows, cols))
    try:
        report = compare(mats, args.fc_max_iter, args.fc_tol)
    except LabelMismatchError as exc:
        raise InputError(f"label mismatch: {exc}") from exc
    text = json.dumps(report, indent=1) + "\n"
    write_outputs(args.out, {"compare.json": text})
    for p in report["pairs"]:
        print(f"{p['a']} vs {p['b']}: {p['links_both']} shared links "
              f"({p['links_a']} / {p['links_b']}), spearman fitness {p.get('spearman_fitness')}")
    return 0


def cmd_filter(args) -> int:
    kind = ModelKind(args.model)
    g = _load(args, _mode_for(kind))
    fm, _, _ = _fit_model(g, kind, args)
    sig = filter_signal(g, fm)
    r = fitness_complexity(sig.one_minus_p, args.fc_max_iter, args.fc_tol, g.row_labels, g.col_labels)
    # rows/columns with no signal at all are dropped by FC; they go last
    row_rank = {lab: k for lab, k in zip(r.row_labels, r.row_ranks())}
    col_rank = {lab: k for lab, k in zip(r.col_labels, r.col_ranks())}
    n_r, n_c = len(row_rank), len(col_rank)
    r_order = sorted(range(g.shape[0]), key=lambda i: (row_rank.get(g.row_labels[i], n_r + 1 + i)))
    c_order = sorted(range(g.shape[1]), key=lambda a: (col_rank.get(g.col_labels[a], n_c + 1 + a)))
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["row_label", "col_label", "weight", "expected", "one_minus_pvalue", "log_ratio",
                  "row_rank", "col_rank"])
    for i in r_order:
        for a in c_order:
            rl, cl = g.row_labels[i], g.col_labels[a]
            out.writerow([rl, cl, fmt(g.weights[i, a]), fmt(sig.expected[i, a]), fmt(sig.one_minus_p[i, a]),
                          fmt(sig.log_ratio[i, a]), row_rank.get(rl, ""), col_rank.get(cl, "")])
    files = {"filter.csv": buf.getvalue(), **_ranking_files(r, "filter_")}
    write_outputs(args.out, files)
    print(f"wrote {g.shape[0] * g.shape[1]} links ordered by fitness/complexity of 1 - p")
    return 0


def cmd_sample(args) -> int:
    try:
        fm = FittedModel.from_json(Path(args.input).read_text())
    except (OSError, ValueError) as exc:
        raise InputError(f"invalid model file {args.input}: {exc}") from exc
    if args.n < 0:
        raise InputError("--n must be nonnegative")
    files = {}
    width = max(5, len(str(max(args.n - 1, 0))))
    for k in range(args.n):
        smp = sample(fm, args.seed, k)
        files[f"sample_{k:0{width}d}.csv"] = edgelist_csv(smp.to_graph()) if smp.weights.any() else "row,col,weight\n"
    if files:
        write_outputs(args.out, files)
    print(f"wrote {len(files)} samples")
    return 0


def cmd_report(args) -> int:
    g = _load(args)
    report, validated = pipeline_report(g, args.alpha, _solver_config(args), args.fc_max_iter, args.fc_tol)
    files = {"report.json": json.dumps(report, indent=1) + "\n"}
    for name, vm in validated.items():
        files[f"{name}.tsv"] = dense_tsv(vm.matrix, vm.row_labels, vm.col_labels)
    write_outputs(args.out, files)
    for name, meta in report["validation"].items():
        print(f"{name:14s} links {meta['n_validated']:8d}  connectance {meta['connectance']:.4f}  "
              f"sNODF {report['per_matrix'][name].get('snodf', float('nan')):.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="biwcm", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model=True, solver=True):
        p.add_argument("--input", required=True)
        p.add_argument("--format", choices=["edgelist", "dense"], default=None,
                       help="input layout (default: by extension, .tsv is dense)")
        p.add_argument("--out", required=True, help="output directory")
        if model:
            p.add_argument("--model", choices=[k.value for k in ModelKind], default="biwcm_c")
        if solver:
            p.add_argument("--method", choices=["fixed_point", "newton", "quasi_newton"], default=None)
            p.add_argument("--tol", type=_positive, default=1e-8)
            p.add_argument("--max-iter", type=int, default=5000)
        return p

    def fc_flags(p):
        p.add_argument("--fc-max-iter", type=int, default=1000)
        p.add_argument("--fc-tol", type=_positive, default=1e-10)

    common(sub.add_parser("fit", help="fit a null model")).set_defaults(func=cmd_fit)

    p = common(sub.add_parser("validate", help="binarise links against a null model"))
    p.add_argument("--procedure", choices=["mu", "alpha"], default="alpha")
    p.add_argument("--alpha", type=_alpha, default=0.05)
    p.add_argument("--full", action="store_true", help="write p-values for every cell, not only links")
    p.set_defaults(func=cmd_validate)

    p = common(sub.add_parser("rank", help="fitness and complexity of a matrix"), model=False, solver=False)
    p.add_argument("--binarize", action="store_true", help="use 1 for every nonzero entry")
    fc_flags(p)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("compare", help="compare validated matrices")
    p.add_argument("matrices", nargs="+")
    p.add_argument("--names", nargs="+")
    p.add_argument("--format", choices=["edgelist", "dense"], default=None)
    p.add_argument("--out", required=True)
    fc_flags(p)
    p.set_defaults(func=cmd_compare)

    p = common(sub.add_parser("filter", help="1 - p-value and log-ratio signal per link"))
    fc_flags(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("sample", help="draw graphs from a fitted model")
    p.add_argument("--input", required=True, help="model.json written by fit")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = common(sub.add_parser("report", help="four-way validation and comparison"), model=False)
    p.add_argument("--alpha", type=_alpha, default=0.05)
    fc_flags(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "compare" and len(args.matrices) < 2:
        parser.error("compare needs at least two matrices")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
