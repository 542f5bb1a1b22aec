"""Coin-processing combinators.

Each combinator is itself a :class:`~quoinfactory.coins.Source`: it pulls
batches from its input source(s), resolves as many outputs as it can per
round and repeats for the rest.  The cost attached to every output is the sum
of the primitive costs of the input bits it consumed, so metering composes
through arbitrarily deep pipelines.

Unbounded repeat stages stop with :class:`~quoinfactory.coins.CutoffError`
after ``max_rounds`` rounds (``max_draws`` input tosses for the stages that
walk a single growing sample).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._doubling import Envelope
from .coins import (HEAD, TAIL, ConsumptionMeter, CostAccumulator, CutoffError, Draw,
                    FairBits, Metered, Source)
from .quoin import X, Z, NoiseModel, QuoinSource, QuoinSpec

DEFAULT_MAX_ROUNDS = 10**6
DEFAULT_MAX_DRAWS = 2**20
# cap on input bits requested from a source in one call
_BATCH_BITS = 2**22


def _pairs(src: Source, idx: np.ndarray, acc: CostAccumulator) -> np.ndarray:
    d = src.draw(2 * len(idx))
    acc.add_rows(idx, d.cost, 2)
    return d.bits.reshape(-1, 2)


def _single(src: Source, idx: np.ndarray, acc: CostAccumulator) -> np.ndarray:
    d = src.draw(len(idx))
    acc.add(idx, d.cost)
    return d.bits


class _Stage(Source):
    """A derived coin; its auxiliary streams descend from its first input."""

    inputs: tuple[Source, ...] = ()

    @property
    def seq(self):
        return self.inputs[0].seq

    def describe(self):
        return (type(self).__name__, *(s.describe() for s in self.inputs))


class VonNeumann(_Stage):
    """Fair coin from a biased one: toss twice until the tosses differ, keep the second."""

    def __init__(self, src: Source, max_rounds: int = DEFAULT_MAX_ROUNDS):
        self.inputs = (src,)
        self.max_rounds = max_rounds

    def draw(self, size: int) -> Draw:
        src, = self.inputs
        out = np.empty(size, dtype=np.uint8)
        acc = CostAccumulator(size)
        pending = np.arange(size)
        rounds = 0
        while pending.size:
            if rounds >= self.max_rounds:
                raise CutoffError("von_neumann", rounds, pending.size)
            rounds += 1
            b = _pairs(src, pending, acc)
            done = b[:, 0] != b[:, 1]
            out[pending[done]] = b[done, 1]
            pending = pending[~done]
        return Draw(out, acc.cost)


class DiffCoin(_Stage):
    """Two tosses; head when they differ, so P(head) = 2p(1-p)."""

    def __init__(self, src: Source):
        self.inputs = (src,)

    def draw(self, size: int) -> Draw:
        acc = CostAccumulator(size)
        b = _pairs(self.inputs[0], np.arange(size), acc)
        return Draw((b[:, 0] == b[:, 1]).astype(np.uint8), acc.cost)


class RaceCoin(_Stage):
    """m/(m+1)-coin from an m-coin.

    A round tosses the m-coin twice: a first tail gives tail, otherwise a
    second tail gives head, and two heads start over.  With ``lazy`` the second
    toss is skipped whenever the first already decided.
    """

    def __init__(self, src: Source, lazy: bool = True, max_rounds: int = DEFAULT_MAX_ROUNDS):
        self.inputs = (src,)
        self.lazy = lazy
        self.max_rounds = max_rounds

    def draw(self, size: int) -> Draw:
        src, = self.inputs
        out = np.empty(size, dtype=np.uint8)
        acc = CostAccumulator(size)
        pending = np.arange(size)
        rounds = 0
        while pending.size:
            if rounds >= self.max_rounds:
                raise CutoffError("race_coin", rounds, pending.size)
            rounds += 1
            if self.lazy:
                first = _single(src, pending, acc) == TAIL
                out[pending[first]] = TAIL
                rest = pending[~first]
                second = _single(src, rest, acc) == TAIL
                out[rest[second]] = HEAD
                pending = rest[~second]
            else:
                b = _pairs(src, pending, acc) == TAIL
                out[pending[b[:, 0]]] = TAIL
                won = ~b[:, 0] & b[:, 1]
                out[pending[won]] = HEAD
                pending = pending[~(b[:, 0] | b[:, 1])]
        return Draw(out, acc.cost)


class RatioCoin(_Stage):
    """Toss an s-coin and a t-coin; (head, tail) gives head, (tail, head) gives tail.

    P(head) = s(1-t) / (s(1-t) + (1-s)t); with s = m/(m+1) and t = n/(n+1)
    this is m/(m+n).
    """

    def __init__(self, s_src: Source, t_src: Source, max_rounds: int = DEFAULT_MAX_ROUNDS):
        self.inputs = (s_src, t_src)
        self.max_rounds = max_rounds

    def draw(self, size: int) -> Draw:
        s_src, t_src = self.inputs
        out = np.empty(size, dtype=np.uint8)
        acc = CostAccumulator(size)
        pending = np.arange(size)
        rounds = 0
        while pending.size:
            if rounds >= self.max_rounds:
                raise CutoffError("ratio_coin", rounds, pending.size)
            rounds += 1
            s = _single(s_src, pending, acc)
            t = _single(t_src, pending, acc)
            done = s != t
            out[pending[done]] = s[done]
            pending = pending[~done]
        return Draw(out, acc.cost)


class EitherCoin(_Stage):
    """Tail only when both inputs toss tail.  ``lazy`` skips the second on a first head."""

    def __init__(self, first: Source, second: Source, lazy: bool = True):
        self.inputs = (first, second)
        self.lazy = lazy

    def draw(self, size: int) -> Draw:
        first, second = self.inputs
        acc = CostAccumulator(size)
        idx = np.arange(size)
        a = _single(first, idx, acc)
        out = a.copy()
        rest = idx[a == TAIL] if self.lazy else idx
        b = _single(second, rest, acc)
        out[rest] &= b
        return Draw(out, acc.cost)


class SqrtCoin(_Stage):
    """sqrt(f)-coin from an f-coin.

    Uses ``sqrt(f) = 1 - sum_k c_k (1-f)^k`` where ``c_k`` is the chance that
    a walk with stopping hazard ``1/(2k)`` stops at step ``k``: toss the f-coin
    at each step, answer head on its first head, answer tail when the hazard
    fires first.  The expected number of f-tosses is at most ``1/f``.
    """

    def __init__(self, src: Source, max_draws: int = DEFAULT_MAX_DRAWS):
        self.inputs = (src,)
        self.max_draws = max_draws
        self._rng = src.spawn_rng()

    def draw(self, size: int) -> Draw:
        src, = self.inputs
        out = np.empty(size, dtype=np.uint8)
        acc = CostAccumulator(size)
        pending = np.arange(size)
        step = 0
        while pending.size:
            if step >= self.max_draws:
                raise CutoffError("sqrt_coin", step, pending.size)
            step += 1
            heads = _single(src, pending, acc) == HEAD
            out[pending[heads]] = HEAD
            pending = pending[~heads]
            stop = self._rng.random(pending.size) < 1 / (2 * step)
            out[pending[stop]] = TAIL
            pending = pending[~stop]
        return Draw(out, acc.cost)


class TruncatedDouble(_Stage):
    """min(2x, 1 - 2*eps)-coin from an x-coin.

    Reverse-time martingale factory: one auxiliary uniform ``u`` per output
    and input tosses consumed in doubling blocks.  After each level the
    running interval ``[lo, hi]`` of undecided ``u`` values shrinks according
    to how much the envelope tightened given the observed heads; the output
    is head once ``u <= lo`` and tail once ``u > hi``.

    ``max_draws`` caps the input tosses per output.  ``check`` enables a
    runtime guard that the envelope tightens at every visited state.
    """

    def __init__(self, src: Source, eps: float, max_draws: int = DEFAULT_MAX_DRAWS,
                 check: bool = True):
        self.inputs = (src,)
        self.envelope = Envelope(eps)
        self.max_draws = max_draws
        self.check = check
        self._rng = src.spawn_rng()

    @property
    def eps(self) -> float:
        return self.envelope.eps

    def draw(self, size: int) -> Draw:
        src, = self.inputs
        env = self.envelope
        out = np.empty(size, dtype=np.uint8)
        acc = CostAccumulator(size)
        u = self._rng.random(size)
        heads = np.zeros(size, dtype=np.int64)
        lo = np.zeros(size)
        hi = np.ones(size)
        pending = np.arange(size)
        seen, n = 0, 1
        while pending.size:
            if n > self.max_draws:
                raise CutoffError("truncated_double", seen, pending.size)
            width = n - seen
            rows = max(1, _BATCH_BITS // width)
            for start in range(0, pending.size, rows):
                idx = pending[start:start + rows]
                d = src.draw(len(idx) * width)
                heads[idx] += (d.bits.reshape(-1, width) == HEAD).sum(axis=1)
                acc.add_rows(idx, d.cost, width)
            seen = n
            uh, inv = np.unique(heads[pending], return_inverse=True)
            low, up = env.lower(n, uh), env.upper(n, uh)
            low_prev, up_prev = env.elevate(n, uh)
            if self.check and (np.any(up > up_prev + 1e-9) or np.any(low < low_prev - 1e-9)):
                raise RuntimeError(f"envelope failed to tighten at level {n}")
            gap = up_prev - low_prev
            safe = gap > 1e-300
            gain_lo = np.where(safe, (low - low_prev) / np.where(safe, gap, 1), 0)[inv]
            gain_hi = np.where(safe, (up_prev - up) / np.where(safe, gap, 1), 0)[inv]
            span = hi[pending] - lo[pending]
            lo[pending] += gain_lo * span
            hi[pending] -= gain_hi * span
            is_head = u[pending] <= lo[pending]
            is_tail = u[pending] > hi[pending]
            out[pending[is_head]] = HEAD
            out[pending[is_tail]] = TAIL
            pending = pending[~(is_head | is_tail)]
            n *= 2
        return Draw(out, acc.cost)


@dataclass
class FactoryPipeline:
    """Settings shared by the quantum and classical constructions.

    Attributes
    ----------
    max_rounds : int
        Cutoff for every repeat-until-exit stage.
    lazy_toss : bool
        Skip tosses whose outcome cannot change the result.
    eps1 : float
        Truncation gap of ``f_t = min(4p(1-p), 1 - eps1)``.
    eps1p : float, optional
        Half-gap used by the doubling stage; defaults to ``eps1 / 2``.
    max_draws : int
        Cutoff on input tosses for the doubling and square-root stages.
    free_half_coin : bool
        Take the 1/2-coin from free auxiliary bits instead of von Neumann.
    """

    max_rounds: int = DEFAULT_MAX_ROUNDS
    lazy_toss: bool = True
    eps1: float = 0.035
    eps1p: float | None = None
    max_draws: int = DEFAULT_MAX_DRAWS
    free_half_coin: bool = False

    def __post_init__(self):
        if self.eps1p is None:
            self.eps1p = self.eps1 / 2
        if abs(2 * self.eps1p - self.eps1) > 1e-12:
            raise ValueError(f"eps1 ({self.eps1}) must equal 2 * eps1p ({self.eps1p})")
        if self.max_rounds < 1 or self.max_draws < 1:
            raise ValueError("max_rounds and max_draws must be positive")

    def quantum(self, spec: QuoinSpec, noise: NoiseModel | None = None,
                seed: int = 0, shard: int | tuple = 0) -> RatioCoin:
        """The f(p) = 4p(1-p) protocol on Z- and X-measured quoins."""
        z = QuoinSource(spec, Z, noise, seed, shard, 0)
        x = QuoinSource(spec, X, noise, seed, shard, 1)
        s = RaceCoin(DiffCoin(z), self.lazy_toss, self.max_rounds)
        t = RaceCoin(DiffCoin(x), self.lazy_toss, self.max_rounds)
        return RatioCoin(s, t, self.max_rounds)

    def classical_ft(self, src: Source) -> TruncatedDouble:
        return TruncatedDouble(DiffCoin(src), self.eps1p, self.max_draws)

    def half(self, src: Source) -> Source:
        if self.free_half_coin:
            return FairBits(src.seq.spawn(1)[0])
        return VonNeumann(src, self.max_rounds)

    def classical_qt(self, src: Source) -> EitherCoin:
        half = self.half(src)
        return EitherCoin(half, SqrtCoin(self.classical_ft(src), self.max_draws),
                          self.lazy_toss)


# one-bit forms


def von_neumann(src: Source, max_rounds: int = DEFAULT_MAX_ROUNDS) -> int:
    return VonNeumann(src, max_rounds).toss()


def half_coin(src: Source, max_rounds: int = DEFAULT_MAX_ROUNDS) -> int:
    return von_neumann(src, max_rounds)


def diff_coin(src: Source) -> int:
    return DiffCoin(src).toss()


def race_coin(msrc: Source, lazy: bool = True, max_rounds: int = DEFAULT_MAX_ROUNDS) -> int:
    return RaceCoin(msrc, lazy, max_rounds).toss()


def ratio_coin(ssrc: Source, tsrc: Source, max_rounds: int = DEFAULT_MAX_ROUNDS) -> int:
    return RatioCoin(ssrc, tsrc, max_rounds).toss()


def quantum_f4p(spec: QuoinSpec, noise: NoiseModel | None = None, seed: int = 0,
                pipeline: FactoryPipeline | None = None) -> tuple[int, ConsumptionMeter]:
    """One f(p)-coin toss and the quoins it consumed, split by basis."""
    pipeline = pipeline or FactoryPipeline()
    coin = Metered(pipeline.quantum(spec, noise, seed))
    return coin.toss(), coin.meter


def truncated_double(src: Source, eps1p: float, max_draws: int = DEFAULT_MAX_DRAWS) -> int:
    return TruncatedDouble(src, eps1p, max_draws).toss()


def classical_ft(src: Source, eps1: float = 0.035) -> int:
    return FactoryPipeline(eps1=eps1).classical_ft(src).toss()


def sqrt_coin(src: Source, max_draws: int = DEFAULT_MAX_DRAWS) -> int:
    return SqrtCoin(src, max_draws).toss()


def classical_qt(src: Source, eps1: float = 0.04) -> int:
    return FactoryPipeline(eps1=eps1).classical_qt(src).toss()
