"""Print the separated-eigenvalue convergence table for each radial case.

    python3 scripts/spectral_table.py [--d 1] [--epsilon 0.1] [--csv-dir DIR]
"""

import argparse
from pathlib import Path

from srlab.spectral import CASES, separated_eigensolve


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--d", type=int, default=1)
    parser.add_argument("--epsilon", type=float, default=0.1)
    parser.add_argument("--grids", type=int, nargs=3, default=[1024, 2048, 4096])
    parser.add_argument("--csv-dir", type=Path)
    args = parser.parse_args()
    print(f"{'case':12s} " + " ".join(f"{'n=' + str(n):>16s}" for n in args.grids)
          + f" {'extrapolated':>16s} {'exact':>16s} {'error':>10s}")
    for case in CASES:
        res = separated_eigensolve(case, d=args.d, grids=tuple(args.grids), epsilon=args.epsilon)
        exact = "-" if res.exact is None else f"{res.exact:16.10f}"
        err = "-" if res.exact is None else f"{res.error:10.2e}"
        print(f"{case:12s} " + " ".join(f"{v:16.10f}" for v in res.eigenvalues)
              + f" {res.extrapolated:16.10f} {exact:>16s} {err:>10s}")
        if args.csv_dir:
            args.csv_dir.mkdir(parents=True, exist_ok=True)
            res.write_convergence_csv(args.csv_dir / f"{case}.convergence.csv")


if __name__ == "__main__":
    main()
