"""Monte Carlo drivers behind the command line modes.

Work is split into shards of at most ``shard_size`` outputs.  Every shard
builds its own sources from ``(seed, key, shard id)``, so a run produces the
same numbers whether its shards are evaluated in one process or many.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path
from typing import Callable

import numpy as np

from .analysis import (BiasEstimate, RunReport, TailBoundParams, np_min_n, np_tail_bound,
                       reports_to_csv, reports_to_json)
from .coins import HEAD, BiasedSource, CutoffError, Source
from .config import ExperimentConfig
from .factory import FactoryPipeline
from .quoin import X, Z, Basis, NoiseModel, QuoinSource, QuoinSpec

# key words separating the independent streams of one angle
_Z_ESTIMATE, _X_ESTIMATE, _PROTOCOL = 0, 1, 2


@dataclass
class CoinSample:
    """Aggregate of a sharded run of one coin."""

    heads: int = 0
    n: int = 0
    cost: Counter = field(default_factory=Counter)
    cutoffs: int = 0
    rejections: int = 0
    costs: np.ndarray | None = None

    @property
    def estimate(self) -> BiasEstimate | None:
        return BiasEstimate(self.n, self.heads) if self.n else None


def _shard_sizes(n: int, shard_size: int) -> list[int]:
    full, rest = divmod(n, shard_size)
    return [shard_size] * full + ([rest] if rest else [])


def _run_shard(make: Callable[[int], Source], keep_costs: bool, job: tuple[int, int]) -> dict:
    shard_id, size = job
    src = make(shard_id)
    try:
        d = src.draw(size)
    except CutoffError:
        return {"heads": 0, "n": 0, "cost": {}, "cutoffs": size, "rejections": 0,
                "costs": np.zeros(0, dtype=np.int64)}
    return {
        "heads": int(np.count_nonzero(d.bits == HEAD)),
        "n": size,
        "cost": {k: int(v.sum()) for k, v in d.cost.items()},
        "cutoffs": 0,
        "rejections": int(getattr(src, "rejections", 0)),
        "costs": d.total_cost if keep_costs else None,
    }


def sample_coin(make: Callable[[int], Source], n: int, shard_size: int = 2**16,
                workers: int = 1, keep_costs: bool = False) -> CoinSample:
    """Draw ``n`` outputs from ``make(shard_id)`` sources, shard by shard.

    ``make`` must be picklable when ``workers > 1``.  A shard whose draw hits a
    cutoff is dropped whole and counted in :attr:`CoinSample.cutoffs`.
    """
    jobs = list(enumerate(_shard_sizes(n, shard_size)))
    fn = partial(_run_shard, make, keep_costs)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(fn, jobs))
    else:
        parts = [fn(j) for j in jobs]
    out = CoinSample()
    for part in parts:
        out.heads += part["heads"]
        out.n += part["n"]
        out.cost.update(part["cost"])
        out.cutoffs += part["cutoffs"]
        out.rejections += part["rejections"]
    if keep_costs:
        out.costs = np.concatenate([p["costs"] for p in parts]) if parts else np.zeros(0)
    return out


# picklable source builders


def quoin_source(spec: QuoinSpec, basis: Basis, noise: NoiseModel, seed: int, key: tuple,
                 shard_id: int) -> QuoinSource:
    return QuoinSource(spec, basis, noise, seed, (*key, shard_id))


def quantum_source(spec: QuoinSpec, noise: NoiseModel, pipeline: FactoryPipeline, seed: int,
                   key: tuple, shard_id: int) -> Source:
    return pipeline.quantum(spec, noise, seed, (*key, shard_id))


def classical_source(kind: str, p, pipeline: FactoryPipeline, seed: int, key: tuple,
                     shard_id: int) -> Source:
    src = BiasedSource(p, seed, (*key, shard_id))
    if kind == "ft":
        return pipeline.classical_ft(src)
    if kind == "qt":
        return pipeline.classical_qt(src)
    raise ValueError(f"unknown classical construction {kind!r}")


# simulate


def simulate_angle(theta_deg: float, index: int, cfg: ExperimentConfig) -> RunReport:
    spec = QuoinSpec.from_degrees(theta_deg)
    noise, pipeline = cfg.noise(), cfg.pipeline()
    run = partial(sample_coin, n=cfg.n_quoins, shard_size=cfg.shard_size, workers=cfg.workers)
    z = run(partial(quoin_source, spec, Z, noise, cfg.seed, (index, _Z_ESTIMATE)))
    x = run(partial(quoin_source, spec, X, noise, cfg.seed, (index, _X_ESTIMATE)))
    f = sample_coin(partial(quantum_source, spec, noise, pipeline, cfg.seed, (index, _PROTOCOL)),
                    cfg.n_outputs, cfg.shard_size, cfg.workers)
    if f.cutoffs:
        warnings.warn(f"theta={theta_deg}: {f.cutoffs} outputs lost to cutoffs", stacklevel=2)
    return RunReport.from_estimates(theta_deg, z.estimate, x.estimate, f.estimate,
                                    dict(f.cost), f.cutoffs)


def run_simulate(cfg: ExperimentConfig) -> list[RunReport]:
    if cfg.n_quoins == 0 or cfg.n_outputs == 0:
        warnings.warn("zero sample budget: report is empty", stacklevel=2)
        return []
    return [simulate_angle(t, i, cfg) for i, t in enumerate(cfg.theta_list)]


# classical

CLASSICAL_COLUMNS = ("construction", "p", "target", "bias", "std_err", "n_outputs",
                     "mean_coins", "q50_coins", "q90_coins", "q99_coins", "max_coins",
                     "cutoffs")


@dataclass
class ClassicalRow:
    construction: str
    p: float
    target: float
    bias: float
    std_err: float
    n_outputs: int
    mean_coins: float
    q50_coins: float
    q90_coins: float
    q99_coins: float
    max_coins: float
    cutoffs: int


def classical_target(kind: str, p, eps1: float) -> float:
    f = min(4 * float(p) * (1 - float(p)), 1 - eps1)
    return f if kind == "ft" else (1 + math.sqrt(f)) / 2


def run_classical(cfg: ExperimentConfig) -> list[ClassicalRow]:
    pipeline = cfg.pipeline()
    rows = []
    if cfg.n_outputs == 0:
        warnings.warn("zero sample budget: report is empty", stacklevel=2)
        return rows
    for i, p in enumerate(cfg.p_list):
        for j, kind in enumerate(("ft", "qt")):
            s = sample_coin(partial(classical_source, kind, p, pipeline, cfg.seed, (i, j)),
                            cfg.n_outputs, cfg.shard_size, cfg.workers, keep_costs=True)
            est = s.estimate
            costs = s.costs if s.costs is not None and s.costs.size else np.full(1, np.nan)
            q50, q90, q99 = np.quantile(costs, [0.5, 0.9, 0.99])
            rows.append(ClassicalRow(
                f"classical_{kind}", float(p), classical_target(kind, p, cfg.eps1),
                est.p_hat if est else math.nan, est.std_err if est else math.nan,
                s.n, float(np.mean(costs)), float(q50), float(q90), float(q99),
                float(np.max(costs)), s.cutoffs))
    return rows


# bounds

BOUND_COLUMNS = ("kind", "eps1p", "n", "value")


@dataclass
class BoundRow:
    kind: str
    eps1p: float
    n: float
    value: float


def run_bounds(cfg: ExperimentConfig) -> list[BoundRow]:
    rows = []
    for e in cfg.eps1p_list:
        for n in cfg.n_list:
            rows.append(BoundRow("bound", e, n, np_tail_bound(TailBoundParams(e, n))))
        mn = np_min_n(e)
        rows.append(BoundRow("min_n", e, mn.exact, np_tail_bound(TailBoundParams(e, mn.exact))))
        rows.append(BoundRow("min_n_approx", e, mn.approx,
                             np_tail_bound(TailBoundParams(e, max(1, round(mn.approx))))))
        rows.append(BoundRow("classical_ft_cost", e, mn.classical_ft_cost, math.nan))
    return rows


# rendering


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.10g}"


def rows_to_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in columns])
    return buf.getvalue()


def rows_to_json(columns, rows) -> str:
    return json.dumps({"columns": list(columns), "rows": [asdict(r) for r in rows]},
                      indent=2, sort_keys=True, default=float) + "\n"


def render(cfg: ExperimentConfig, rows) -> str:
    if cfg.mode == "simulate":
        return reports_to_json(rows) if cfg.output_format == "json" else reports_to_csv(rows)
    columns = {"classical": CLASSICAL_COLUMNS, "bounds": BOUND_COLUMNS}[cfg.mode]
    return rows_to_json(columns, rows) if cfg.output_format == "json" else rows_to_csv(columns, rows)


# plot data


def _write_curve(path: Path, xs, ys):
    path.write_text("".join(f"{_fmt(x)} {_fmt(y)}\n" for x, y in zip(xs, ys)))


def write_plots(cfg: ExperimentConfig, rows) -> list[Path]:
    """Two-column ``x y`` text files, one per curve."""
    out = Path(cfg.plot_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def curve(name, xs, ys):
        path = out / f"{name}.dat"
        _write_curve(path, xs, ys)
        written.append(path)

    if cfg.mode == "simulate":
        p_grid = np.linspace(0, 1, 201)
        f_ideal = 4 * p_grid * (1 - p_grid)
        q_ideal = (1 + 2 * np.sqrt(p_grid * (1 - p_grid))) / 2
        curve("f_ideal", p_grid, f_ideal)
        curve("f_truncated", p_grid, np.minimum(f_ideal, 1 - cfg.eps1))
        curve("q_ideal", p_grid, q_ideal)
        curve("q_truncated", p_grid, np.minimum(q_ideal, 1 - 0.010))
        curve("f_exp", [r.p_hat for r in rows], [r.f_exp for r in rows])
        curve("q_exp", [r.p_hat for r in rows], [r.q_exp for r in rows])
        curve("quoins_per_f", [r.theta_deg for r in rows], [r.mean_quoins_per_f for r in rows])
    elif cfg.mode == "bounds":
        for e in cfg.eps1p_list:
            ns = np.unique(np.geomspace(1, 2 * np_min_n(e).exact, 200).astype(int))
            curve(f"tail_bound_eps{e:g}", ns, [np_tail_bound(TailBoundParams(e, int(n)))
                                                for n in ns])
    elif cfg.mode == "classical":
        for kind in ("ft", "qt"):
            sel = [r for r in rows if r.construction == f"classical_{kind}"]
            curve(f"classical_{kind}_bias", [r.p for r in sel], [r.bias for r in sel])
            curve(f"classical_{kind}_mean_coins", [r.p for r in sel], [r.mean_coins for r in sel])
    return written
