"""Nested-ball iteration from the zero potential with the desk preset."""

import argparse
import time

from limitperiodic.construct.params import SchemeSettings
from limitperiodic.construct.scheme import iterate_scheme
from limitperiodic.odometer import Ball, PeriodicPotential, PotentialFamily


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--depth", type=int, default=3)
    ap.add_argument("--radius", type=float, default=10.0)
    ap.add_argument("--eps", type=float, default=0.8)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    zero = PeriodicPotential.zero(1)
    t0 = time.perf_counter()
    res = iterate_scheme(
        Ball(zero, args.radius), PotentialFamily((zero,)), args.eps, args.depth, SchemeSettings.desk(seed=args.seed)
    )
    print("stage  period    radius      delta     |spectrum|  bounds")
    for c in res.certificates:
        status = sorted({b["status"] for b in c.explicit_bounds})
        print(f"{c.stage:5d}  {c.ball.center.period:6d}  {c.ball.radius:9.3g}  {c.delta:9.3g}  "
              f"{c.center_measure:11.3g}  {','.join(status)}")
    if res.failure:
        print("stopped:", res.failure["message"])
    print(f"measures decreasing: {res.measures_decreasing}; {time.perf_counter() - t0:.0f} s")


if __name__ == "__main__":
    main()
