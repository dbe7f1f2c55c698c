"""Diameter, eigenvalue and isoperimetric bounds for a box in a step-2 Carnot group.

    python3 scripts/carnot_box_bounds.py STRUCTURE_FILE --lo ... --hi ... [--samples N] [--seed S]

STRUCTURE_FILE holds a ``k m2`` header followed by 1-based ``i j l value``
lines giving the brackets [X_i, X_j] = value * Z_l.  Use ``heisenberg`` in
place of a file for the first Heisenberg group.
"""

import argparse

import numpy as np

from srlab.carnot import CarnotSpec, carnot_bounds
from srlab.domains import box
from srlab.geometries import carnot_model
from srlab.report import dumps


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("structure")
    parser.add_argument("--lo", type=float, nargs="+", required=True)
    parser.add_argument("--hi", type=float, nargs="+", required=True)
    parser.add_argument("--samples", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    spec = CarnotSpec.heisenberg(1) if args.structure == "heisenberg" else CarnotSpec.from_file(args.structure)
    if not spec.is_bracket_generating():
        print("warning: the first layer is not bracket generating")
    domain = box(carnot_model(spec), args.lo, args.hi)
    bounds = carnot_bounds(spec, domain, np.random.default_rng(args.seed), n_samples=args.samples)
    print(dumps(bounds.to_dict()))


if __name__ == "__main__":
    main()
