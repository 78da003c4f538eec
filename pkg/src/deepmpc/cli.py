"""Command line: ``deepmpc train|microbench|analyze``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import roundlab
from .data import DatasetError
from .quantring import ConfigError
from .train import MICROBENCH_OPS, TrainConfig, run_analyze, run_microbench, run_train
from .transport import ProtocolError, SetupError


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="deepmpc", description="Secure three-party neural network training.")
    p.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model and write per-epoch metrics")
    t.add_argument("--model", choices=["A", "B", "C", "D", "alexnet"], default="A")
    t.add_argument("--optimizer", choices=["sgd", "adam", "amsgrad"], default="sgd")
    t.add_argument("--lr", type=float, default=0.01)
    t.add_argument("--batch-size", type=int, default=128)
    t.add_argument("--epochs", type=int, default=15)
    t.add_argument("--f", type=int, default=16, help="fractional bits")
    t.add_argument("--k", type=int, default=31, help="total bits of a fixed-point value")
    t.add_argument("--rounding", choices=["prob", "nearest"], default="prob")
    t.add_argument("--mode", choices=["emulate", "3pc"], default="emulate")
    t.add_argument("--party", type=int, choices=[0, 1, 2])
    t.add_argument("--hosts", help="file with lines 'party_id host:port'")
    t.add_argument("--loopback", action="store_true", help="run all three parties in this process")
    t.add_argument("--dataset", choices=["mnist", "fashion", "cifar10"], default="mnist")
    t.add_argument("--data-dir", help="dataset directory (default: $DEEPMPC_DATA)")
    t.add_argument("--metrics", help="output CSV path")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--dropout", action="store_true", help="enable dropout where the model defines it")
    t.add_argument("--init", choices=["secure", "clear"], default="secure")
    t.add_argument("--train-limit", type=int, help="use only the first N training samples")
    t.add_argument("--test-limit", type=int, help="use only the first N test samples")
    t.add_argument("--dump-model", help="write opened final parameters to this .npz file")

    m = sub.add_parser("microbench", help="measure communication of one operation")
    m.add_argument("--op", choices=MICROBENCH_OPS, required=True)
    m.add_argument("--size", type=int, default=1000)
    m.add_argument("--mode", choices=["emulate", "3pc"], default="3pc")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--party", type=int, choices=[0, 1, 2])
    m.add_argument("--hosts")

    a = sub.add_parser("analyze", help="rounding error experiments")
    a.add_argument("--which", choices=roundlab.PROPS, required=True)
    a.add_argument("--m", type=int, default=8)
    a.add_argument("--n", type=int, default=8)
    a.add_argument("--p", type=int, default=8)
    a.add_argument("--k-bound", type=int, default=4)
    a.add_argument("--iota", type=float, default=1.0)
    a.add_argument("--trials", type=int, default=1000)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out", help="output CSV path")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "train":
            opts = vars(args).copy()
            for key in ("command", "verbose"):
                opts.pop(key)
            result = run_train(TrainConfig(**opts))
            for r in result.rows:
                print(f"epoch {r['epoch']}: loss {r['loss']:.4f} test_error {r['test_error']:.4f}")
            if result.initial_error is not None:
                print(f"untrained test_error {result.initial_error:.4f}")
            return 0
        if args.command == "microbench":
            if args.party is not None and args.hosts is None:
                raise ConfigError("--party needs --hosts")
            print(run_microbench(args.op, args.size, args.mode, args.seed, args.party, args.hosts).line())
            return 0
        setup = roundlab.RoundingExperiment(args.m, args.n, args.p, args.k_bound, args.iota, args.trials, args.seed)
        report = run_analyze(setup, args.which, args.out)
        print(roundlab.summary_line(report))
        return 0 if report.passed else 1
    except (ConfigError, DatasetError, SetupError, ProtocolError, ValueError) as exc:
        print(f"deepmpc: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
