"""Walk through the f(p) = 4p(1-p) protocol one stage at a time.

Prepares ideal quoins at a chosen angle, builds each derived coin in turn and
prints its sampled bias next to the exact value from the chain oracle.

    python3 demos/protocol_walkthrough.py [theta_deg]
"""

import sys

import numpy as np

from quoinfactory import chains
from quoinfactory.coins import HEAD
from quoinfactory.factory import DiffCoin, RaceCoin, RatioCoin
from quoinfactory.quoin import X, Z, NoiseModel, QuoinSource, QuoinSpec

N = 200_000


def rate(src):
    d = src.draw(N)
    return np.mean(d.bits == HEAD), d.total_cost.mean()


def main(theta_deg: float = 60.0):
    spec = QuoinSpec.from_degrees(theta_deg)
    p = spec.p_float
    q = (1 + 2 * np.sqrt(p * (1 - p))) / 2
    ideal = NoiseModel.ideal()
    print(f"theta = {theta_deg} deg, p = {p:.6f}")

    z, x = QuoinSource(spec, Z, ideal, seed=1), QuoinSource(spec, X, ideal, seed=1, stream=1)
    m_coin, n_coin = DiffCoin(z), DiffCoin(x)
    s_coin, t_coin = RaceCoin(m_coin), RaceCoin(n_coin)
    f_coin = RatioCoin(RaceCoin(DiffCoin(QuoinSource(spec, Z, ideal, seed=2))),
                       RaceCoin(DiffCoin(QuoinSource(spec, X, ideal, seed=2, stream=1))))

    m = 2 * p * (1 - p)
    n = 2 * q * (1 - q)
    rows = [
        ("Z quoin", z, p),
        ("X quoin", x, q),
        ("m = 2p(1-p)", m_coin, m),
        ("n = 2q(1-q)", n_coin, n),
        ("s = m/(m+1)", s_coin, m / (m + 1)),
        ("t = n/(n+1)", t_coin, n / (n + 1)),
        ("f = m/(m+n)", f_coin, 4 * p * (1 - p)),
    ]
    print(f"{'coin':<14}{'sampled':>10}{'exact':>10}{'quoins/out':>12}")
    for name, src, exact in rows:
        hat, cost = rate(src)
        print(f"{name:<14}{hat:>10.5f}{exact:>10.5f}{cost:>12.3f}")

    chain = chains.quantum(p)
    print(f"\nm + n = {m + n:.6f} (always 1/2 for ideal quoins)")
    print(f"exact mean quoins per f output: {float(chain.cost):.4f}")


if __name__ == "__main__":
    main(float(sys.argv[1]) if len(sys.argv) > 1 else 60.0)
