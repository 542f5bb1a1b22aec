"""Envelope arithmetic for the truncated doubling factory.

The factory targets ``h(x) = min(2x, 1 - 2*eps)`` with a reverse-time
martingale scheme.  At level ``n`` (n = 1, 2, 4, ...) it has seen ``n`` input
tosses with ``H`` heads and holds a lower bound ``a(n, H) = h(H/n)`` and an
upper bound ``b(n, H)``.  The bounds must tighten in conditional expectation:
averaging ``a`` (resp. ``b``) of the previous level over the hypergeometric
split of ``H`` heads into two halves gives at most ``a(n, H)`` (resp. at least
``b(n, H)``).  ``a`` satisfies this because ``h`` is concave.  ``b`` stays at
1 until level ``n0``; after that it is ``h`` plus a Gaussian bump at the kink
of width ``1/sqrt(n)`` and height ``A/sqrt(n)``, which pays for the curvature
that the kink introduces under averaging.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln
from scipy.stats import binom

BUMP_HEIGHT = 1.55
BUMP_RATE = 1.0


class Envelope:
    """Lower and upper bound functions for ``min(2x, 1 - 2*eps)``."""

    def __init__(self, eps: float, height: float = BUMP_HEIGHT, rate: float = BUMP_RATE):
        if not 0 < eps < 0.25:
            raise ValueError(f"eps must lie in (0, 1/4), got {eps}")
        self.eps = eps
        self.cap = 1 - 2 * eps
        self.kink = self.cap / 2
        self.height = height
        self.rate = rate
        # first level at which the bump alone keeps b <= 1
        self.n0 = 2 ** math.ceil(math.log2((height / (0.99 * 2 * eps)) ** 2))

    def target(self, x):
        return np.minimum(2 * np.asarray(x, dtype=float), self.cap)

    def lower(self, n: int, heads):
        return self.target(np.asarray(heads) / n)

    def upper(self, n: int, heads):
        heads = np.asarray(heads)
        if n < self.n0:
            return np.ones(heads.shape)
        y = heads / n
        bump = self.height / math.sqrt(n) * np.exp(-self.rate * n * (y - self.kink) ** 2)
        return self.target(y) + bump

    def elevate(self, n: int, heads: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Previous-level bounds averaged over the split of ``heads`` in ``n`` tosses.

        Returns ``(lower*, upper*)`` for every entry of ``heads``.  The first
        level (``n = 1``) elevates the trivial bounds ``(0, 1)``.
        """
        heads = np.asarray(heads, dtype=np.int64)
        if n == 1:
            return np.zeros(heads.shape), np.ones(heads.shape)
        m = n // 2
        width = int(6 * math.sqrt(m)) + 3
        i = np.round(heads / 2).astype(np.int64)[:, None] + np.arange(-width, width + 1)
        k = heads[:, None] - i
        ok = (i >= 0) & (i <= m) & (k >= 0) & (k <= m)
        ic, kc = np.clip(i, 0, m), np.clip(k, 0, m)
        logp = (_log_choose(m, ic) + _log_choose(m, kc)
                - _log_choose(n, heads)[:, None])
        w = np.exp(np.where(ok, logp, -np.inf))
        w /= w.sum(axis=1, keepdims=True)
        lo = (w * self.lower(m, ic)).sum(axis=1)
        hi = (w * self.upper(m, ic)).sum(axis=1)
        return lo, hi

    def survival(self, p: float, n: int) -> float:
        """Exact probability that more than ``n`` input tosses are needed.

        ``n`` must be a level (a power of two).
        """
        k = np.arange(n + 1)
        pmf = binom.pmf(k, n, p)
        return float(np.sum(pmf * (self.upper(n, k) - self.lower(n, k))))


def _log_choose(n, k):
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
