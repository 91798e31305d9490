"""Very-nice census of a two-member hyperbolic family for several block counts."""

import argparse

from limitperiodic.construct.induction import block_layout, niceness_census
from limitperiodic.construct.params import InductionParams
from limitperiodic.odometer import PeriodicPotential as P
from limitperiodic.odometer import PotentialFamily


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--energy", type=float, default=0.3)
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--r", type=int, nargs="+", default=[4, 6, 8])
    ap.add_argument("--csv", help="write the last census here")
    args = ap.parse_args()

    W = PotentialFamily((P([3.0, -1.0]), P([-2.5, 0.5])))
    census = None
    for r in args.r:
        params = InductionParams(r=r, amp_exponent=1.0)
        census = niceness_census(W, block_layout(2, 2, 4 * r, params), params, args.energy, args.lam)
        print(f"r={r:3d}  not very nice {census.not_very_nice:4d} of {r * r:5d}  bound {census.bound}")
    if args.csv and census is not None:
        with open(args.csv, "w") as fh:
            fh.write(census.to_csv())


if __name__ == "__main__":
    main()
