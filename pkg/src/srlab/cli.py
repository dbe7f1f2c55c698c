"""Command-line entry point.

    srlab run <scenario.toml> [--out DIR] [--seed N] [--threads N] [--compare REPORT]
    srlab emit-goldens [DEST] [--force] [--list]

Exit status: 0 all checks pass, 1 a check (or a --compare) failed,
2 configuration error, 3 numerical failure.  The default output directory is
taken from $SRLAB_OUT, then from the scenario's ``output_dir``, then
``./srlab-out``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources
from pathlib import Path

from .config import ConfigError, load_scenario
from .report import diff_reports, dumps

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
OUT_ENV = "SRLAB_OUT"
GOLDEN_SCENARIOS = ("sphere-hemisphere", "chf-1", "qhf-1", "heisenberg-ball", "martinet-box", "spherical-band")


def _output_dir(arg, scenario) -> Path:
    if arg:
        return Path(arg)
    if os.environ.get(OUT_ENV):
        return Path(os.environ[OUT_ENV])
    if scenario.output_dir:
        return Path(scenario.output_dir)
    return Path("srlab-out")


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def cmd_run(args) -> int:
    from .runner import run_scenario

    try:
        scenario = load_scenario(args.config)
        if args.seed is not None:
            scenario.seed = args.seed
        out = _output_dir(args.out, scenario)
        report = run_scenario(scenario, out_dir=out, threads=args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{scenario.name}.report.json"
    data = report.to_dict()
    path.write_text(dumps(data))
    for c in report.checks:
        status = "PASS" if c.passed else ("NUMERIC-ERROR" if c.numeric_error else "FAIL")
        extra = f"  ({c.error})" if c.error else ""
        print(f"{status:13s} {c.name}{extra}")
    for e in report.expected:
        print(f"{'PASS' if e['passed'] else 'FAIL':13s} expected {e['key']} = {e['expected']!r} "
              f"(observed {e['observed']!r}, tolerance {e['tolerance']:.3g})")
    print(f"report: {path}")
    status = EXIT_OK
    if args.compare:
        try:
            other = json.loads(Path(args.compare).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"cannot read comparison report: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        diffs = diff_reports(data, other)
        if diffs:
            print(f"report differs from {args.compare} at {len(diffs)} location(s):")
            for d in diffs[:20]:
                print(f"  {d}")
            status = EXIT_FAIL
        else:
            print(f"report matches {args.compare} (timing excluded)")
    if report.numeric_error:
        return EXIT_NUMERIC
    if not report.passed:
        return EXIT_FAIL
    return status


def golden_files() -> dict:
    """Bundled golden scenario texts by name."""
    root = resources.files("srlab").joinpath("data/scenarios")
    return {name: root.joinpath(f"{name}.toml").read_text() for name in GOLDEN_SCENARIOS}


def emit_goldens(dest, force: bool = False) -> list[Path]:
    """Write the golden scenarios (with their expected-value tables) into ``dest``."""
    dest = Path(dest)
    files = golden_files()
    targets = [dest / f"{name}.toml" for name in files]
    existing = [t for t in targets if t.exists()]
    if existing and not force:
        raise FileExistsError(f"{len(existing)} golden file(s) already exist in {dest} (use --force): "
                              + ", ".join(t.name for t in existing))
    dest.mkdir(parents=True, exist_ok=True)
    for t, text in zip(targets, files.values()):
        t.write_text(text)
    return targets


def cmd_emit_goldens(args) -> int:
    if args.list:
        for name in GOLDEN_SCENARIOS:
            print(name)
        return EXIT_OK
    dest = args.dest or os.environ.get(OUT_ENV) or "goldens"
    try:
        written = emit_goldens(dest, force=args.force)
    except FileExistsError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"cannot write goldens: {exc}", file=sys.stderr)
        return EXIT_FAIL
    for p in written:
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="srlab", description="Scenario runner for sub-Riemannian integral-geometry checks.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file and write a JSON report")
    run.add_argument("config", help="scenario TOML file")
    run.add_argument("--out", help=f"output directory (default: ${OUT_ENV}, scenario output_dir, ./srlab-out)")
    run.add_argument("--seed", type=_seed, help="override the scenario seed")
    run.add_argument("--threads", type=_positive, default=1, help="run independent checks concurrently")
    run.add_argument("--compare", help="compare the new report with an earlier one (timing excluded)")
    run.set_defaults(func=cmd_run)
    gold = sub.add_parser("emit-goldens", help="write the bundled reference scenarios")
    gold.add_argument("dest", nargs="?", help=f"destination directory (default: ${OUT_ENV} or ./goldens)")
    gold.add_argument("--force", action="store_true", help="overwrite existing files")
    gold.add_argument("--list", action="store_true", help="list the scenario names without writing")
    gold.set_defaults(func=cmd_emit_goldens)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors count as configuration errors
        return EXIT_CONFIG if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
