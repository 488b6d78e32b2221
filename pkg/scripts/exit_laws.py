"""Single-saddle exit statistics: direction, mean exit time and exit location."""

import argparse
import math

import numpy as np
from scipy import stats

from hetlab.kernel import EntranceLaw, SaddleBox, exit_direction_prob
from hetlab.lab import exit_time_ratio
from hetlab.network import Saddle
from hetlab.sim import LinearSaddleSde, Side, simulate_exit_batch


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, default=1e-3)
    ap.add_argument("--samples", type=int, default=50_000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    box = SaddleBox(1.0, 0.5, 1.0)

    s = Saddle(1.0, 0.5)
    sde = LinearSaddleSde(s, box, args.eps)
    print("exit direction, lambda = 1, mu = 0.5")
    for i, x in enumerate((-1.0, 0.0, 1.0)):
        b = simulate_exit_batch(sde, args.samples, 1e-2, seed=args.seed + i, entrance=EntranceLaw.point(x),
                                alpha=1.0)
        ok = ~b.timed_out
        p = np.mean(b.side[ok] == Side.LEFT)
        print(f"  x={x:+g}  P(left) {p:.4f}  predicted {float(exit_direction_prob(x, 1 / (2 * s.lam))):.4f}")
        if x == 0.0:
            print(f"  mean tau / l_eps = {exit_time_ratio(b.time[ok], 1.0, s.lam, args.eps):.4f}")

    s = Saddle(1.0, 2.0)
    b = simulate_exit_batch(LinearSaddleSde(s, box, args.eps), args.samples, 1e-2, seed=args.seed + 10,
                            entrance=EntranceLaw.point(0.0), alpha=1.0)
    right = b.side == Side.RIGHT
    ks = stats.kstest(b.location[right] / args.eps, stats.norm(0, math.sqrt(1 / (2 * s.mu))).cdf)
    print(f"exit location, mu = 2: KS {ks.statistic:.4f} (p = {ks.pvalue:.3f}) on {int(right.sum())} exits")


if __name__ == "__main__":
    main()
