"""Run every bundled reference scenario and print a one-line summary per scenario.

    python3 scripts/run_goldens.py [--out DIR] [--threads N] [--only NAME ...]

Reports are written to DIR/<scenario>.report.json.  Exit status is the worst
status among the scenarios (0 pass, 1 fail, 3 numerical failure).
"""

import argparse
import sys
import tempfile
import time
from pathlib import Path

from srlab.cli import GOLDEN_SCENARIOS, emit_goldens, main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="srlab-out/goldens")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--only", nargs="*", choices=GOLDEN_SCENARIOS)
    args = parser.parse_args()
    names = args.only or GOLDEN_SCENARIOS
    worst = 0
    with tempfile.TemporaryDirectory() as tmp:
        emit_goldens(tmp)
        summary = []
        for name in names:
            start = time.perf_counter()
            status = cli_main(["run", str(Path(tmp) / f"{name}.toml"), "--out", args.out,
                               "--threads", str(args.threads)])
            summary.append((name, status, time.perf_counter() - start))
            worst = max(worst, status)
    print()
    for name, status, seconds in summary:
        print(f"{'PASS' if status == 0 else f'EXIT {status}':8s} {name:20s} {seconds:7.1f} s")
    return worst


if __name__ == "__main__":
    sys.exit(main())
