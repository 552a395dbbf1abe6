"""``nlslab`` command line.

    nlslab <experiment> --config PATH [--seed N] [--out DIR]
    nlslab verify-all --config PATH [--seed N] [--out DIR]
    nlslab plot-data REPORT_DIR [--dest DIR]

Exit codes: 0 all checks pass, 1 a check failed, 2 usage or configuration
error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
import warnings

from .config import KINDS, parse_config
from .errors import ConfigurationError
from .experiments import EXIT_USAGE, emit_plot_data, run_experiment, verify_all


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="nlslab", description="Experiments for a 2D NLS with a potential.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in KINDS + ("verify-all",):
        p = sub.add_parser(name, help="run the full matrix" if name == "verify-all" else f"run {name}")
        p.add_argument("--config", required=True, help="flat key = value config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output directory (default: the config's out)")
    p = sub.add_parser("plot-data", help="write two-column plot files from a report directory")
    p.add_argument("report_dir")
    p.add_argument("--dest", default=None)
    return ap


def _load(args):
    cfg = parse_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    if args.command != "verify-all":
        overrides["experiment"] = args.command
    return cfg.with_overrides(**overrides) if overrides else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "plot-data":
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            written, skipped = emit_plot_data(args.report_dir, args.dest)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        for s in skipped:
            print(f"skipped: {s}", file=sys.stderr)
        for p in written:
            print(p)
        return 0
    try:
        cfg = _load(args)
    except ConfigurationError as exc:
        for line in getattr(exc, "errors", None) or [str(exc)]:
            print(f"config error: {line}", file=sys.stderr)
        return EXIT_USAGE
    if args.command == "verify-all":
        results, code = verify_all(cfg)
        for res in results:
            _report(res)
        print(f"matrix: {cfg.out}/verification_matrix.txt")
        return code
    res = run_experiment(cfg)
    _report(res)
    return res.exit_code


def _report(res) -> None:
    failed = [r for r in res.records if not r.passed]
    status = "ERROR" if res.error else ("PASS" if not failed else "FAIL")
    print(f"{res.experiment}: {status} ({len(res.records) - len(failed)}/{len(res.records)} checks, "
          f"{res.seconds:.1f}s) -> {res.out_dir}")
    for r in failed:
        print(f"  FAIL {r.anchor} / {r.metric} = {r.value:.6g} (need {r.threshold.describe()})")
    if res.error:
        print(f"  {res.error['type']}: {res.error['message']}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
