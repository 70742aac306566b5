"""Command-line entry point: ``efspectral sweep|dataset|aggregate|audit``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .experiments import (
    ConfigError,
    aggregate,
    density_summary,
    load_config,
    load_dataset,
    read_csv,
    run_dataset,
    run_sweep,
    write_aggregate,
    write_csv,
)
from .graph import GraphFormatError
from .privacy import PrivacyBudget, privacy_audit


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="efspectral", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (("sweep", "simulate a (regime, n, epsilon) grid"),
                            ("dataset", "privatize and cluster an observed network")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", type=Path)
        p.add_argument("--seed", type=int, help="override the base seed")
        p.add_argument("--threads", type=int, default=1, help="worker processes")
        p.add_argument("--out", type=Path, help="CSV path (default: stdout)")

    p = sub.add_parser("aggregate", help="per-cell means of a result CSV")
    p.add_argument("csv", type=Path)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("audit", help="exhaustive likelihood-ratio check of the mechanism")
    p.add_argument("--n", type=int, required=True, choices=(2, 3, 4))
    p.add_argument("--epsilon", type=float, required=True)
    return parser


def _open_out(path: Path | None):
    if path is None:
        return sys.stdout, False
    return path.open("w", encoding="utf-8", newline=""), True


def _run_experiment(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.command == "sweep":
        rows = run_sweep(config, workers=args.threads)
    else:
        dataset = load_dataset(config)
        print(density_summary(dataset), file=sys.stderr)
        rows = run_dataset(config, workers=args.threads, dataset=dataset)
    out, close = _open_out(args.out)
    try:
        write_csv(rows, out)
    finally:
        if close:
            out.close()
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in {"sweep", "dataset"}:
            return _run_experiment(args)
        if args.command == "aggregate":
            table = aggregate(read_csv(args.csv.read_text(encoding="utf-8")))
            out, close = _open_out(args.out)
            try:
                write_aggregate(table, out)
            finally:
                if close:
                    out.close()
            return 0
        budget = PrivacyBudget.of(args.epsilon)
        ratio = privacy_audit(args.n, budget)
        print(f"n={args.n} epsilon={budget} max_ratio={ratio:.12g} "
              f"exp(epsilon)={budget.retention / budget.flip_probability:.12g}")
        return 0
    except (ConfigError, GraphFormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
