"""Command-line interface.

Exit codes: 0 success, 1 check failure, 2 usage/config/file error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import genome as genome_io
from . import grad, harness
from .data import load_csv, normalize
from .errors import GrnError
from .optim import evaluate, train

GRADCHECK_TOL = 1e-4


def _positive_float(s: str) -> float:
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {s}")
    return v


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {s}")
    return v


def _nonneg_int(s: str) -> int:
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {s}")
    return v


def _columns(s: str) -> list[int]:
    return [int(c) for c in s.split(",") if c.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="diffgrn", description="Differentiable GRN evolution and training.")
    sub = p.add_subparsers(dest="command", required=True)

    gc = sub.add_parser("gradcheck", help="compare analytic gradients with central differences")
    gc.add_argument("--seed", type=int, default=0)
    gc.add_argument("--n-proteins", type=_positive_int, default=5)
    gc.add_argument("--steps", type=_positive_int, default=3)
    gc.add_argument("--trials", type=_positive_int, default=50)
    gc.add_argument("--epsilon", type=_positive_float, default=1e-5)

    for name, help_ in (("evolve", "run the evolution arms of an experiment config"), ("experiment", "run evolution, post-training and the random baseline")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, type=Path)

    for name in ("train", "eval"):
        sp = sub.add_parser(name, help=f"{name} a genome on a CSV dataset (min-max scaled on the whole file)")
        sp.add_argument("--genome", required=True, type=Path)
        sp.add_argument("--data", required=True, type=Path)
        sp.add_argument("--target-columns", type=_columns, default=None)
        sp.add_argument("--steps", type=_positive_int, default=3)
        if name == "train":
            sp.add_argument("--epochs", type=_nonneg_int, default=10)
            sp.add_argument("--seed", type=int, default=0)
            sp.add_argument("--batch-size", type=_positive_int, default=32)
    return p


def _progress(arm, trial, stats):
    print(f"gen {stats.generation} best_pre {stats.best_pre_mse:.6g} best_post {stats.best_post_mse:.6g}", file=sys.stderr, flush=True)


def cmd_gradcheck(args) -> int:
    report = grad.sweep(args.seed, args.n_proteins, args.steps, args.trials, args.epsilon)
    for line in report.lines():
        print(line)
    ok = report.max_rel_error <= GRADCHECK_TOL
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def cmd_evolve(args, full: bool) -> int:
    cfg = harness.load_config(args.config)
    if full:
        harness.run_full(cfg, _progress)
    else:
        harness.run_experiment(cfg, _progress)
    print(cfg.output_dir)
    return 0


def _dataset(args):
    table = load_csv(args.data, args.target_columns)
    ds, _ = normalize(table)
    return ds


def cmd_train(args) -> int:
    g = genome_io.load(args.genome)
    ds = _dataset(args)
    trained, _ = train(g, ds, args.epochs, args.batch_size, args.steps, args.seed, record_curve=False)
    out = args.genome.with_name(args.genome.name + ".trained")
    genome_io.save(trained, out)
    print(repr(evaluate(trained, ds, args.steps)))
    return 0


def cmd_eval(args) -> int:
    g = genome_io.load(args.genome)
    print(repr(evaluate(g, _dataset(args), args.steps)))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gradcheck":
            return cmd_gradcheck(args)
        if args.command in ("evolve", "experiment"):
            return cmd_evolve(args, full=args.command == "experiment")
        if args.command == "train":
            return cmd_train(args)
        return cmd_eval(args)
    except (GrnError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
