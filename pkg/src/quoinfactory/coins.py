"""Coins as seeded, metered i.i.d. binary sources.

A coin emits bits with the convention ``HEAD = 0`` and ``TAIL = 1`` (the
computational-basis outcome |0> is a head).  Every source can emit a batch of
bits at once through :meth:`Source.draw`; the batch carries, for each emitted
bit, how many primitive coins (base-coin tosses or quoin measurements) were
consumed to produce it, keyed by a label such as ``"p"``, ``"Z"`` or ``"X"``.

Base sources use a counter-based generator (Philox) keyed by
``(seed, shard, stream)``, so bit ``i`` of a stream depends only on the key and
``i``: drawing 5 bits then 3 gives the same bits as drawing 8.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real

import mpmath
import numpy as np

HEAD = 0
TAIL = 1

# Precision (decimal digits) of the exact-probability substrate.
EXACT_DPS = 60
_mp = mpmath.MPContext()
_mp.dps = EXACT_DPS


class CutoffError(RuntimeError):
    """A repeat-until-exit stage ran past its round or draw budget."""

    def __init__(self, stage: str, rounds: int, count: int = 1):
        self.stage = stage
        self.rounds = rounds
        self.count = count
        super().__init__(
            f"{stage}: {count} output(s) still undecided after {rounds} rounds")


def exact(x) -> Fraction | mpmath.mpf:
    """Lift a number into the exact-probability substrate.

    Rationals (``int``, ``Fraction``, decimal strings) stay exact
    :class:`~fractions.Fraction`.  A float is read as the shortest decimal
    that round-trips to it, so ``0.004`` means 4/1000.  Anything else becomes
    a 60-digit ``mpf``.
    """
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    return _mp.mpf(x)


def mp(x) -> mpmath.mpf:
    """Convert to a high-precision float in the exact substrate."""
    if isinstance(x, Fraction):
        return _mp.mpf(x.numerator) / x.denominator
    return _mp.mpf(x)


def exact_sqrt(x) -> mpmath.mpf:
    return _mp.sqrt(mp(x))


def check_probability(value, name: str = "p"):
    if not isinstance(value, (Real, Fraction)) or not 0 <= value <= 1:
        raise ValueError(f"{name} must be a probability in [0, 1], got {value!r}")
    return value


@dataclass
class Draw:
    """A batch of emitted bits and the primitive cost of each one."""

    bits: np.ndarray
    cost: dict[str, np.ndarray]

    def __len__(self):
        return len(self.bits)

    @property
    def total_cost(self) -> np.ndarray:
        out = np.zeros(len(self.bits), dtype=np.int64)
        for v in self.cost.values():
            out += v
        return out


@dataclass
class ConsumptionMeter:
    """Primitive consumption, broken down by label (protocol step or basis)."""

    per_step: Counter = field(default_factory=Counter)
    tosses: int = 0

    @property
    def total(self) -> int:
        return int(sum(self.per_step.values()))

    def record(self, draw: Draw):
        self.tosses += len(draw)
        for label, v in draw.cost.items():
            self.per_step[label] += int(v.sum())


def seed_sequence(seed: int, *key) -> np.random.SeedSequence:
    """Seed sequence for ``(seed, *key)``; tuple key words are flattened."""
    flat = []
    for k in key:
        flat.extend(k if isinstance(k, tuple) else (k,))
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in flat))


def philox(seq: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seq))


class Source:
    """Base class for anything that emits coin tosses."""

    #: seed sequence that derived stages spawn their auxiliary streams from
    seq: np.random.SeedSequence

    def draw(self, size: int) -> Draw:
        raise NotImplementedError

    def toss(self) -> int:
        return int(self.draw(1).bits[0])

    def spawn_rng(self) -> np.random.Generator:
        """An independent generator for auxiliary randomness of a derived stage."""
        return philox(self.seq.spawn(1)[0])

    def describe(self):
        return type(self).__name__


class BiasedSource(Source):
    """An i.i.d. p-coin with a hidden bias.

    Parameters
    ----------
    p : float
        Probability of a head.
    seed : int
        64-bit reproducibility token.
    shard : int or tuple of int
        Extra key words; distinct keys give statistically independent streams
        (used for parallel shards).
    stream : int
        Final key word, separating the streams of one shard.
    label : str
        Cost label attributed to each emitted bit.
    """

    def __init__(self, p, seed: int = 0, shard: int | tuple = 0, stream: int = 0,
                 label: str = "p"):
        check_probability(p)
        self._p = float(p)
        self.seed = int(seed)
        self.label = label
        self.seq = seed_sequence(seed, shard, stream)
        self._rng = philox(self.seq)
        self.draws = 0

    @property
    def bias(self) -> float:
        return self._p

    def draw(self, size: int) -> Draw:
        u = self._rng.random(size)
        bits = (u >= self._p).astype(np.uint8)
        self.draws += size
        return Draw(bits, {self.label: np.ones(size, dtype=np.int64)})

    def describe(self):
        return f"coin[{self.label}]"


class FairBits(Source):
    """Fair bits from an auxiliary seeded stream; they cost nothing."""

    def __init__(self, seq: np.random.SeedSequence):
        self.seq = seq
        self._rng = philox(seq)

    def draw(self, size: int) -> Draw:
        return Draw(self._rng.integers(0, 2, size, dtype=np.uint8), {})

    def describe(self):
        return "fair"


class Metered(Source):
    """Transparent wrapper that meters every toss of ``source``."""

    def __init__(self, source: Source, meter: ConsumptionMeter | None = None):
        self.source = source
        self.meter = meter if meter is not None else ConsumptionMeter()

    @property
    def seq(self):
        return self.source.seq

    def draw(self, size: int) -> Draw:
        d = self.source.draw(size)
        self.meter.record(d)
        return d

    def describe(self):
        return ("metered", self.source.describe())


def make_bernoulli(p, seed: int = 0, shard: int = 0) -> BiasedSource:
    return BiasedSource(p, seed=seed, shard=shard)


def toss(source: Source) -> int:
    return source.toss()


def metered(source: Source) -> Metered:
    return Metered(source)


class CostAccumulator:
    """Per-output cost totals for a batch being assembled over several rounds."""

    def __init__(self, size: int):
        self.size = size
        self.cost: dict[str, np.ndarray] = {}

    def add(self, idx: np.ndarray, cost: dict[str, np.ndarray]):
        for label, v in cost.items():
            if label not in self.cost:
                self.cost[label] = np.zeros(self.size, dtype=np.int64)
            self.cost[label][idx] += v

    def add_rows(self, idx: np.ndarray, cost: dict[str, np.ndarray], width: int):
        """Add costs of ``len(idx) * width`` draws, ``width`` per output."""
        for label, v in cost.items():
            if label not in self.cost:
                self.cost[label] = np.zeros(self.size, dtype=np.int64)
            self.cost[label][idx] += v.reshape(len(idx), width).sum(axis=1)
