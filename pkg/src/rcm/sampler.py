"""Single-bond heat-bath chain and the independent Bernoulli reference sampler.

One sweep updates every interior edge once. Randomness comes from a numpy
``Generator`` over PCG64; uniforms are drawn in bulk in sweep order, so the
numba and pure-numpy builds produce identical chains for the same seed.
Multiple chains get child seeds from ``numpy.random.SeedSequence(seed).spawn``.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .field import Couplings, ModelParams
from .lattice import ClusterPartition, Graph, partition_from_labels
from .measure import bernoulli_probabilities, model_arrays

RNG_NAME = "PCG64"
Observable = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ChainConfig:
    params: ModelParams
    burn_in: int = 1000
    samples: int = 1000
    thin: int = 1
    seed: int = 0
    scan: str = "sequential"
    debug_check_every: int = 0

    def __post_init__(self):
        if min(self.burn_in, self.samples) < 0:
            raise ValueError("burn_in and samples must be >= 0")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.scan not in ("sequential", "random"):
            raise ValueError(f"scan must be 'sequential' or 'random', got {self.scan!r}")
        if self.debug_check_every < 0:
            raise ValueError("debug_check_every must be >= 0")

    @property
    def total_sweeps(self) -> int:
        return self.burn_in + self.samples * self.thin


def _finite_or_none(x: float):
    # JSON has no NaN; undefined estimates (e.g. zero samples) become null
    return float(x) if math.isfinite(x) else None


def _generator(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _seed_record(seed):
    if isinstance(seed, np.random.SeedSequence):
        return {"entropy": int(seed.entropy), "spawn_key": list(seed.spawn_key)}
    return int(seed)


@dataclass
class ChainState:
    """Configuration plus a cluster labelling kept in sync with it.

    ``labels`` names each cluster by one of its members; use ``partition``
    for canonical cluster ids.
    """

    graph: Graph
    params: ModelParams
    bits: np.ndarray
    labels: np.ndarray
    rng: np.random.Generator
    seed: object = 0
    sweep: int = 0
    rng_name: str = RNG_NAME
    _stamp: int = 0
    _visited: np.ndarray | None = field(default=None, repr=False)
    _arrays: tuple | None = field(default=None, repr=False)

    @classmethod
    def initial(cls, params: ModelParams, graph: Graph, seed=0, start: str = "closed"):
        bits = graph.empty_configuration(params.bc)
        if start == "open":
            bits[: graph.n_edges] = 1
        elif start != "closed":
            raise ValueError("start must be 'closed' or 'open'")
        labels = kernels.label_components(graph.n_vertices, graph.edge_array, bits).astype(np.int64)
        state = cls(graph=graph, params=params, bits=bits, labels=labels,
                    rng=_generator(seed), seed=seed)
        state._prepare()
        return state

    def _prepare(self):
        g = self.graph
        arr = model_arrays(self.params, g)
        ptr, vtx, eid = g.adjacency
        ea = g.edge_array
        self._arrays = (np.ascontiguousarray(ea[:, 0]), np.ascontiguousarray(ea[:, 1]),
                        arr.log_edge, ptr, vtx, eid, arr.beta_h, arr.beta_hmax,
                        g.is_boundary, arr.wired)
        self._visited = np.zeros(g.n_vertices, dtype=np.int64)
        self._stamp = 0

    @property
    def partition(self) -> ClusterPartition:
        return partition_from_labels(self.graph, self.labels)

    def update(self, order: np.ndarray, uniforms: np.ndarray) -> None:
        ea, eb, log_edge, ptr, vtx, eid, bh, bhm, bnd, wired = self._arrays
        self._stamp = kernels.heat_bath_updates(
            order, uniforms, self.bits, self.labels, ea, eb, log_edge, ptr, vtx,
            eid, bh, bhm, bnd, wired, self._visited, self._stamp)

    def check_partition(self) -> None:
        fresh = kernels.label_components(self.graph.n_vertices, self.graph.edge_array, self.bits)
        if not np.array_equal(self.partition.labels, fresh):
            raise AssertionError(f"cluster labels out of sync at sweep {self.sweep}")


def open_probability(params: ModelParams, graph: Graph, omega: np.ndarray, e: int) -> float:
    """Exact conditional probability that interior edge ``e`` is open given the rest."""
    if not 0 <= e < graph.n_edges:
        raise ValueError(f"edge {e} is not an interior edge")
    arr = model_arrays(params, graph)
    bits = np.array(omega, dtype=np.uint8)
    ptr, vtx, eid = graph.adjacency
    ea = graph.edge_array
    n, q = graph.n_vertices, params.q
    lo, lc, *_ = kernels.bond_log_odds(
        e, bits, np.ascontiguousarray(ea[:, 0]), np.ascontiguousarray(ea[:, 1]),
        arr.log_edge, ptr, vtx, eid, arr.beta_h, arr.beta_hmax, graph.is_boundary,
        arr.wired, np.zeros(n, dtype=np.int64), 1, np.empty(n, dtype=np.int64),
        np.empty(n, dtype=np.int64), np.empty(q), np.empty(q))
    if lo == -math.inf:
        return 0.0
    return 1.0 / (1.0 + math.exp(lc - lo))


def heat_bath_step(state: ChainState, e: int) -> ChainState:
    """Resample one interior edge from its exact conditional law."""
    if not 0 <= e < state.graph.n_edges:
        raise ValueError(f"edge {e} is not an interior edge")
    state.update(np.array([e], dtype=np.int64), state.rng.random(1))
    return state


def sweep(state: ChainState, n: int = 1, order_rng: np.random.Generator | None = None) -> ChainState:
    """Run ``n`` sweeps; random scan draws its edge order from ``order_rng``."""
    nE = state.graph.n_edges
    if nE == 0:
        state.sweep += n
        return state
    for _ in range(n):
        if order_rng is None:
            order = np.arange(nE, dtype=np.int64)
        else:
            order = order_rng.integers(0, nE, nE).astype(np.int64)
        state.update(order, state.rng.random(nE))
        state.sweep += 1
    return state


@dataclass(frozen=True)
class ObservableSummary:
    name: str
    mean: float
    stderr: float
    n: int
    series: np.ndarray | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {"name": self.name, "mean": _finite_or_none(self.mean),
                "stderr": _finite_or_none(self.stderr), "n": self.n}


@dataclass(frozen=True)
class ChainSummary:
    seed: object
    rng: str
    sweeps: int
    observables: list[ObservableSummary]

    def __getitem__(self, name: str) -> ObservableSummary:
        for o in self.observables:
            if o.name == name:
                return o
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"seed": _seed_record(self.seed), "rng": self.rng, "sweeps": self.sweeps,
                "observables": [o.to_dict() for o in self.observables]}

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def batch_means(x: np.ndarray, n_batches: int | None = None) -> tuple[float, float]:
    """Mean and batch-means standard error (nan with fewer than 2 batches)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n == 0:
        return math.nan, math.nan
    mean = float(x.mean())
    if n_batches is None:
        n_batches = max(int(math.isqrt(n)), 1)
    n_batches = min(n_batches, n)
    if n_batches < 2:
        return mean, math.nan
    b = n // n_batches
    means = x[: b * n_batches].reshape(n_batches, b).mean(axis=1)
    return mean, float(means.std(ddof=1) / math.sqrt(n_batches))


def _named(observables) -> list[tuple[str, Observable]]:
    out = []
    for ob in observables:
        if isinstance(ob, tuple):
            out.append(ob)
        else:
            out.append((getattr(ob, "__name__", "obs"), ob))
    names = [n for n, _ in out]
    if len(set(names)) != len(names):
        raise ValueError(f"observable names must be unique: {names}")
    return out


def run_chain(config: ChainConfig, graph: Graph, observables: Sequence = (),
              keep_series: bool = False, seed=None, start: str = "closed",
              block: int = 512) -> ChainSummary:
    """Burn in, then record every observable after every ``thin``-th sweep.

    Observables are ``f(bits, labels)`` callables (or ``(name, f)`` pairs),
    evaluated on stacked snapshots in blocks of ``block`` samples.
    """
    seed = config.seed if seed is None else seed
    obs = _named(observables)
    state = ChainState.initial(config.params, graph, seed=seed, start=start)
    order_rng = None
    if config.scan == "random":
        order_rng = _generator(_order_seed(seed))
    check = config.debug_check_every

    def advance(n):
        for _ in range(n):
            sweep(state, 1, order_rng)
            if check and state.sweep % check == 0:
                state.check_partition()

    advance(config.burn_in)
    series = [np.empty(config.samples) for _ in obs]
    buf_bits = np.empty((min(block, max(config.samples, 1)), graph.n_all_edges), dtype=np.uint8)
    buf_lab = np.empty((buf_bits.shape[0], graph.n_vertices), dtype=np.int64)
    filled = done = 0

    def flush():
        nonlocal filled, done
        for k, (name, f) in enumerate(obs):
            v = np.asarray(f(buf_bits[:filled], buf_lab[:filled]), dtype=float)
            if v.shape != (filled,):
                raise ValueError(f"observable {name!r} returned shape {v.shape}")
            series[k][done: done + filled] = v
        done += filled
        filled = 0

    for _ in range(config.samples):
        advance(config.thin)
        buf_bits[filled] = state.bits
        buf_lab[filled] = state.labels
        filled += 1
        if filled == buf_bits.shape[0]:
            flush()
    if filled:
        flush()

    summaries = []
    for (name, _), s in zip(obs, series):
        mean, se = batch_means(s)
        summaries.append(ObservableSummary(name, mean, se, int(s.size),
                                           s if keep_series else None))
    return ChainSummary(seed=seed, rng=RNG_NAME, sweeps=state.sweep, observables=summaries)


def _order_seed(seed) -> np.random.SeedSequence:
    # random-scan edge order: a fixed extra branch of the chain's seed tree
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + (2 ** 31,))
    return np.random.SeedSequence(seed, spawn_key=(2 ** 31,))


def chain_seeds(seed: int, n_chains: int) -> list[np.random.SeedSequence]:
    """Child seeds for independent chains: ``SeedSequence(seed).spawn(n)``."""
    return np.random.SeedSequence(seed).spawn(n_chains)


def run_chains(config: ChainConfig, graph: Graph, observables: Sequence = (),
               n_chains: int = 4, workers: int = 1, keep_series: bool = False
               ) -> tuple[ChainSummary, list[ChainSummary]]:
    """Independent chains from split seeds; returns (pooled, per-chain).

    The pooled mean averages chain means; its error combines the per-chain
    errors (or uses the spread of chain means when those are undefined).
    """
    seeds = chain_seeds(config.seed, n_chains)

    def one(s):
        return run_chain(config, graph, observables, keep_series=keep_series, seed=s)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            per = list(ex.map(one, seeds))
    else:
        per = [one(s) for s in seeds]
    pooled = []
    for k, o in enumerate(per[0].observables if per else []):
        means = np.array([c.observables[k].mean for c in per])
        ses = np.array([c.observables[k].stderr for c in per])
        if np.all(np.isfinite(ses)):
            se = float(np.sqrt(np.sum(ses ** 2)) / len(per))
        elif len(per) > 1:
            se = float(means.std(ddof=1) / math.sqrt(len(per)))
        else:
            se = math.nan
        pooled.append(ObservableSummary(o.name, float(means.mean()), se,
                                        sum(c.observables[k].n for c in per)))
    total = sum(c.sweeps for c in per)
    return ChainSummary(seed=config.seed, rng=RNG_NAME, sweeps=total, observables=pooled), per


def bernoulli_samples(graph: Graph, beta: float, q: int, couplings: Couplings | None = None,
                      n: int = 1, rng: np.random.Generator | int = 0, bc: str = "free"
                      ) -> tuple[np.ndarray, np.ndarray]:
    """``n`` independent draws of the product measure, p = 1 - exp(-q beta J).

    Returns stacked (bits, labels).
    """
    couplings = couplings or Couplings()
    if not isinstance(rng, np.random.Generator):
        rng = _generator(rng)
    p = bernoulli_probabilities(graph, beta, q, couplings)
    u = rng.random((n, graph.n_edges))
    bits, labels = kernels.bernoulli_label_batch(u, p, graph.n_vertices, graph.edge_array,
                                                 graph.n_edges, bc == "maxwired")
    return bits, labels


def bernoulli_sample(graph: Graph, beta: float, q: int, couplings: Couplings | None = None,
                     rng: np.random.Generator | int = 0, bc: str = "free") -> np.ndarray:
    bits, _ = bernoulli_samples(graph, beta, q, couplings, 1, rng, bc)
    return bits[0]


def run_bernoulli(graph: Graph, beta: float, q: int, observables: Sequence = (),
                  samples: int = 1000, seed=0, couplings: Couplings | None = None,
                  bc: str = "free", block: int = 4096) -> ChainSummary:
    """Summaries of observables under the product measure (samples are iid)."""
    obs = _named(observables)
    rng = _generator(seed)
    series = [[] for _ in obs]
    left = samples
    while left > 0:
        m = min(block, left)
        bits, labels = bernoulli_samples(graph, beta, q, couplings, m, rng, bc)
        for k, (_, f) in enumerate(obs):
            series[k].append(np.asarray(f(bits, labels), dtype=float))
        left -= m
    out = []
    for (name, _), parts in zip(obs, series):
        s = np.concatenate(parts) if parts else np.empty(0)
        mean = float(s.mean()) if s.size else math.nan
        se = float(s.std(ddof=1) / math.sqrt(s.size)) if s.size > 1 else math.nan
        out.append(ObservableSummary(name, mean, se, int(s.size)))
    return ChainSummary(seed=seed, rng=RNG_NAME, sweeps=samples, observables=out)
