"""What the classical route to the truncated functions costs in p-coins.

Prints the tail-bound budget for a few truncation gaps, then samples the
doubling construction and reports its measured consumption, which sits far
below the budget the bound guarantees.
"""

import numpy as np

from quoinfactory.analysis import TailBoundParams, np_min_n, np_tail_bound
from quoinfactory.coins import HEAD, BiasedSource
from quoinfactory.factory import FactoryPipeline


def main():
    print(f"{'eps1p':>8}{'min n':>9}{'approx':>11}{'p-coins':>10}{'bound(1e3)':>12}")
    for eps in (0.0175, 0.02, 0.05, 0.1):
        mn = np_min_n(eps)
        print(f"{eps:>8}{mn.exact:>9}{mn.approx:>11.1f}{mn.classical_ft_cost:>10.0f}"
              f"{np_tail_bound(TailBoundParams(eps, 1000)):>12.3g}")

    print("\nsampled classical f_t (eps1 = 0.035), 20000 outputs per p")
    pipe = FactoryPipeline(eps1=0.035)
    for p in (0.1, 0.3, 0.5):
        d = pipe.classical_ft(BiasedSource(p, seed=7)).draw(20_000)
        cost = d.total_cost
        target = min(4 * p * (1 - p), 0.965)
        print(f"p={p:<4} bias={np.mean(d.bits == HEAD):.4f} (target {target:.4f}) "
              f"mean={cost.mean():.0f} q99={np.quantile(cost, 0.99):.0f} max={cost.max()}")


if __name__ == "__main__":
    main()
