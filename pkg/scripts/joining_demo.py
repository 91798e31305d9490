"""One joining step from the zero potential at coupling window [1/M, M].

M = 2 needs a wider start ball than the default (level-1 shifts of size
4 pi M / n_K do not fit in radius 10) and blocks with r >= 16 so that the
subfamily keeps a positive exponent. Takes about a minute.
"""

import argparse
import time

from limitperiodic.construct.params import JoiningSettings
from limitperiodic.construct.scheme import lemma_joining
from limitperiodic.odometer import Ball, PeriodicPotential, PotentialFamily


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--M", type=float, default=2.0)
    ap.add_argument("--radius", type=float, default=20.0)
    ap.add_argument("--r-min", type=int, default=16)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    zero = PeriodicPotential.zero(1)
    settings = JoiningSettings.desk(r_min=args.r_min, seed=args.seed)
    t0 = time.perf_counter()
    res = lemma_joining(PotentialFamily((zero,)), Ball(zero, args.radius), args.M, settings)
    took = time.perf_counter() - t0

    c = res.certificate
    print(f"passed        {res.passed}")
    print(f"delta         {res.delta:.4g}")
    print(f"new radius    {res.ball.radius:.4g}")
    print(f"center period {res.ball.center.period}")
    print(f"center |spec| {res.center_measure:.4g}")
    print(f"subfamily     {c['subfamily']['size']} members, amplitude {c['amplitude']['used']:.3g}")
    for row in c["joining"]["measure"]:
        print(f"  lam={row['lam']:.3f}  transferred bound ok: {row['ok']}")
    print(f"{took:.1f} s")


if __name__ == "__main__":
    main()
