"""Command-line entry point.

Exit codes: 0 success, 1 invalid configuration or arguments, 2 runtime
failure, 3 selftest failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import runner, selftest
from .config import ConfigError, load_config
from .prototype import design_prototype, nyquist_residual, write_prototype_csv

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_SELFTEST = 3

log = logging.getLogger("fbmc_mimo")


def _summary(table) -> str:
    parts = [f"{table.config.name}: L={table.config.L} N={table.config.N} K={table.config.K}"]
    for name in table.FIELDS:
        vals = table.mean_over_subcarriers_db(name)
        if np.all(np.isnan(vals)):
            continue
        parts.append(f"{name.removesuffix('_db')}={np.mean(vals):.2f} dB")
    return "  ".join(parts)


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    table = runner.run_scenario(cfg)
    out = args.out or Path(f"{cfg.name}.csv")
    runner.write_csv(table, out)
    print(_summary(table))
    print(f"wrote {out}")
    return EXIT_OK


def _parse_values(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--values must be comma-separated numbers, got {text!r}") from None


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    values = _parse_values(args.values)
    try:
        tables = runner.run_sweep(cfg, args.key, values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for v, table in zip(values, tables):
        path = out_dir / f"{cfg.name}_{args.key}_{v:g}.csv"
        runner.write_csv(table, path)
        print(f"{args.key}={v:g}  {_summary(table)}  -> {path}")
    return EXIT_OK


def _cmd_selftest(args) -> int:
    failures = selftest.run_selftest(verbose=args.verbose)
    total = len(selftest.CHECKS)
    print(f"selftest: {total - failures}/{total} checks passed")
    return EXIT_SELFTEST if failures else EXIT_OK


def _cmd_export_prototype(args) -> int:
    try:
        f = design_prototype(args.L, args.O)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    write_prototype_csv(f, args.path)
    print(f"wrote {len(f.coefficients)} coefficients to {args.path} (nyquist residual {nyquist_residual(f):.2e})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fbmc-mimo", description="CMT/OFDM massive MIMO uplink link-level simulator")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario file and write its CSV table")
    r.add_argument("config", type=Path)
    r.add_argument("--out", type=Path, default=None, help="output CSV (default: <name>.csv)")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("sweep", help="run a scenario for several values of one key")
    s.add_argument("config", type=Path)
    s.add_argument("--key", required=True, choices=runner.SWEEP_KEYS)
    s.add_argument("--values", required=True, help="comma-separated, e.g. 1,4,16,64,128")
    s.add_argument("--out-dir", default=".", help="directory for the per-value CSV files")
    s.set_defaults(func=_cmd_sweep)

    t = sub.add_parser("selftest", help="run the built-in invariant checks")
    t.set_defaults(func=_cmd_selftest)

    e = sub.add_parser("export-prototype", help="write prototype coefficients as a one-column CSV")
    e.add_argument("L", type=int)
    e.add_argument("O", type=int)
    e.add_argument("path", type=Path)
    e.set_defaults(func=_cmd_export_prototype)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
