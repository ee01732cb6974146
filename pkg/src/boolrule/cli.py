"""Command-line interface.

Subcommands: binarize, train, sweep, crossval, export-ilp, qubo.
Exit codes: 0 success, 2 usage error, 3 data error, 4 solver cap/timeout.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bitvec import BitVector, take_bits
from .data import (DataError, binarize, load_csv, load_xbf, save_xbf,
                   stratified_split)
from .formula import (ACCURACY, BALANCED_ACCURACY, OR, OPERATOR_KINDS,
                      score, to_json)
from .harness import (CLASSIFIERS, RunConfig, crossval, dumps_result, sweep,
                      train_classifier)
from .ilp import build_ilp, export_lp
from .oracle import EnumerationCapError
from .parsing import to_text
from .qubo import MODES, WITH_ETA, export_qubo, ilp_to_qubo, qubo_anneal, decode

USAGE_ERROR = 2
DATA_ERROR = 3
SOLVER_ERROR = 4


def _labels_path(stem: Path) -> Path:
    return stem.with_suffix(".labels.json")


def _load_matrix(matrix_path: str, labels_path: str):
    matrix = load_xbf(matrix_path)
    with open(labels_path) as fh:
        payload = json.load(fh)
    labels = payload["labels"] if isinstance(payload, dict) else payload
    if len(labels) != matrix.bits.num_rows:
        raise DataError("label count does not match matrix rows")
    y = BitVector.from_bools(np.asarray(labels, dtype=bool))
    return matrix.bits, y


def cmd_binarize(args) -> int:
    raw = load_csv(args.input, args.label, args.positive_label)
    binarized = binarize(raw, num_bins=args.num_bins)
    out = Path(args.output)
    save_xbf(binarized, str(out))
    with open(_labels_path(out), "w") as fh:
        json.dump({"schema": 1,
                   "labels": [int(v) for v in raw.labels]}, fh)
        fh.write("\n")
    print(f"{binarized.bits.num_rows} rows, "
          f"{binarized.bits.num_cols} features, "
          f"{raw.dropped_rows} rows dropped")
    for w in binarized.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 0


def _run_config(args) -> RunConfig:
    cfg = RunConfig(
        classifier=getattr(args, "classifier", "local"),
        operator=getattr(args, "operator", OR),
        max_literals=getattr(args, "max_literals", 3),
        max_complexity=getattr(args, "max_complexity", 6),
        lam=getattr(args, "lam", 0.0),
        metric=args.metric,
        num_starts=getattr(args, "num_starts", 20),
        num_iterations=getattr(args, "num_iterations", 2000),
        seed=args.seed,
        workers=args.workers)
    if getattr(args, "inner_splits", None) is not None:
        cfg.inner_splits = args.inner_splits
    if getattr(args, "backend", None):
        cfg.knobs["backend"] = args.backend
    if getattr(args, "enumeration_cap", None):
        cfg.knobs["enumeration_cap"] = args.enumeration_cap
    return cfg


def cmd_train(args) -> int:
    X, y = _load_matrix(args.matrix, args.labels)
    cfg = _run_config(args)
    if args.test_fraction > 0:
        tr, te = stratified_split(y, args.test_fraction, args.seed)
        x_tr, y_tr = X.take_rows(tr), take_bits(y, tr)
        x_te, y_te = X.take_rows(te), take_bits(y, te)
    else:
        x_tr, y_tr, x_te, y_te = X, y, None, None
    rule, info = train_classifier(x_tr, y_tr, cfg, args.seed)
    info["train_score"] = score(rule, x_tr, y_tr, cfg.metric)
    if x_te is not None:
        info["test_score"] = score(rule, x_te, y_te, cfg.metric)
    info["metric"] = cfg.metric
    text = dumps_result(info)
    if args.output:
        Path(args.output).write_text(text)
    print(text, end="")
    return 0


def cmd_crossval(args) -> int:
    X, y = _load_matrix(args.matrix, args.labels)
    cfg = _run_config(args)
    result = crossval(cfg, X, y)
    text = dumps_result(result)
    if args.output:
        Path(args.output).write_text(text)
    print(text, end="")
    return 0


def cmd_sweep(args) -> int:
    X, y = _load_matrix(args.matrix, args.labels)
    cfg = _run_config(args)
    values = []
    for chunk in args.values.split(","):
        values.append(float(chunk) if args.knob == "train_fraction"
                      else int(chunk))
    result = sweep(cfg, args.knob, values, X, y)
    payload = dumps_result({"knob": result.knob, "rows": result.rows})
    if args.output:
        out = Path(args.output)
        out.with_suffix(".json").write_text(payload)
        out.with_suffix(".csv").write_text(result.to_csv())
    print(payload, end="")
    return 0


def _depth_one_model(args):
    X, y = _load_matrix(args.matrix, args.labels)
    return build_ilp(X, y, args.operator, args.max_literals, args.lam,
                     min_literals=args.min_literals)


def cmd_export_ilp(args) -> int:
    model = _depth_one_model(args)
    text = export_lp(model)
    if args.output:
        Path(args.output).write_text(text)
    else:
        print(text, end="")
    return 0


def cmd_qubo(args) -> int:
    model = _depth_one_model(args)
    qubo = ilp_to_qubo(model, args.mode)
    if args.anneal:
        states, energies = qubo_anneal(qubo, args.num_reads,
                                       args.num_sweeps, args.seed)
        best = None
        for state in states:
            sol = decode(state, qubo)
            if sol.feasible and (best is None
                                 or sol.objective < best.objective):
                best = sol
        if best is None:
            print("no feasible solution decoded", file=sys.stderr)
            return SOLVER_ERROR
        rule = best.to_formula()
        payload = dumps_result({
            "mode": args.mode,
            "num_variables": qubo.num_variables,
            "best_energy": float(energies[0]),
            "objective": best.objective,
            "weighted_error": best.weighted_error,
            "rule": to_text(rule),
            "rule_json": to_json(rule),
        })
        if args.output:
            Path(args.output).write_text(payload)
        print(payload, end="")
        return 0
    text = export_qubo(qubo)
    if args.output:
        Path(args.output).write_text(text)
    else:
        print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boolrule",
        description="Interpretable Boolean-formula classifiers")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--metric", default=BALANCED_ACCURACY,
                        choices=[BALANCED_ACCURACY, ACCURACY])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("binarize", help="CSV to packed binary matrix")
    p.add_argument("input")
    p.add_argument("--label", required=True)
    p.add_argument("--positive-label", default=None)
    p.add_argument("--num-bins", type=int, default=10)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_binarize)

    def add_train_flags(p, classifier=True):
        p.add_argument("matrix")
        p.add_argument("labels")
        if classifier:
            p.add_argument("--classifier", default="local",
                           choices=CLASSIFIERS)
        p.add_argument("--operator", default=OR, choices=OPERATOR_KINDS)
        p.add_argument("--max-literals", type=int, default=3)
        p.add_argument("--max-complexity", type=int, default=6)
        p.add_argument("--lam", type=float, default=0.0)
        p.add_argument("--num-starts", type=int, default=20)
        p.add_argument("--num-iterations", type=int, default=2000)
        p.add_argument("--backend", default=None,
                       choices=[None, "oracle", "qubo"])
        p.add_argument("--enumeration-cap", type=int, default=None)
        p.add_argument("-o", "--output", default=None)

    p = sub.add_parser("train", help="fit one classifier")
    add_train_flags(p)
    p.add_argument("--test-fraction", type=float, default=0.3)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("crossval", help="holdout plus repeated inner splits")
    add_train_flags(p)
    p.add_argument("--inner-splits", type=int, default=32)
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("sweep", help="re-run splits over a knob range")
    add_train_flags(p)
    p.add_argument("--inner-splits", type=int, default=32)
    p.add_argument("--knob", default="max_complexity",
                   choices=["max_complexity", "max_literals",
                            "train_fraction"])
    p.add_argument("--values", required=True,
                   help="comma-separated knob values")
    p.set_defaults(func=cmd_sweep)

    def add_model_flags(p):
        p.add_argument("matrix")
        p.add_argument("labels")
        p.add_argument("--operator", default=OR, choices=OPERATOR_KINDS)
        p.add_argument("--max-literals", type=int, default=3)
        p.add_argument("--min-literals", type=int, default=0)
        p.add_argument("--lam", type=float, default=0.0)
        p.add_argument("-o", "--output", default=None)

    p = sub.add_parser("export-ilp", help="write the depth-one model "
                       "as an LP file")
    add_model_flags(p)
    p.set_defaults(func=cmd_export_ilp)

    p = sub.add_parser("qubo", help="write or anneal the penalty-form QUBO")
    add_model_flags(p)
    p.add_argument("--mode", default=WITH_ETA, choices=list(MODES))
    p.add_argument("--anneal", action="store_true")
    p.add_argument("--num-reads", type=int, default=100)
    p.add_argument("--num-sweeps", type=int, default=2000)
    p.set_defaults(func=cmd_qubo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except EnumerationCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return SOLVER_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
