"""Command line interface: ``run``, ``plot``, ``check`` and ``configs``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .checks import run_checks
from .config import bundled_configs, load_config
from .errors import ConfigError, NonFiniteLossError
from .report import emit_svg_plot, read_csv
from .runner import run_config


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mscalednn", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train every variant of a config")
    run.add_argument("--config", required=True, help="config file, or the name of a bundled config")
    run.add_argument("--seed", type=int, help="override experiment.seed")
    run.add_argument("--out", help="output directory")
    run.add_argument("--epochs", type=int, help="override experiment.epochs")
    run.add_argument("--threads", type=int, help="override experiment.threads")

    plot = sub.add_parser("plot", help="render metric CSVs as one SVG")
    plot.add_argument("--out", required=True, help="SVG file to write")
    plot.add_argument("--title", default="")
    plot.add_argument("csv", nargs="+")

    sub.add_parser("check", help="finite-difference and oracle self-tests")
    sub.add_parser("configs", help="list bundled configs")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "run":
            return _run(args)
        if args.command == "plot":
            emit_svg_plot([read_csv(p) for p in args.csv], args.out, title=args.title)
            return 0
        if args.command == "check":
            ok = True
            for name, passed, detail in run_checks():
                print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
                ok &= passed
            return 0 if ok else 1
        if args.command == "configs":
            print("\n".join(bundled_configs()))
            return 0
    except (ConfigError, NonFiniteLossError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 1


def _run(args) -> int:
    cfg = load_config(args.config)
    overrides = {k: v for k, v in (("seed", args.seed), ("epochs", args.epochs), ("threads", args.threads)) if v is not None}
    if overrides:
        if any(v < 0 for v in overrides.values()):
            raise ConfigError("command line overrides must be non-negative")
        cfg = cfg.with_overrides(**overrides)
        cfg.expand()
    out = Path(args.out) if args.out else None
    for rec in run_config(cfg, out):
        last = rec.rows[-1] if rec.rows else None
        if last is None:
            print(f"{rec.label}: no epochs run")
        elif last.mse_true is not None:
            print(f"{rec.label}: epoch {last.epoch} loss {last.train_loss:.6g} mse_true {last.mse_true:.6g}")
        else:
            test = "" if last.test_loss is None else f" test {last.test_loss:.6g}"
            print(f"{rec.label}: epoch {last.epoch} train {last.train_loss:.6g}{test}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
