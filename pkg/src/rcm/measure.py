"""Configuration weights, exact enumeration, and exact expectations.

All weights are handled as logarithms. The weight of a configuration is the
product of an edge factor exp(q beta J) - 1 per open interior edge and one
cluster weight per open cluster:

* free bc: clusters of (V, open edges); every cluster gets
  sum_m exp(beta * sum_{x in C} h[x, m]);
* max-wired bc: clusters of (V u dV, open edges) with all boundary edges
  open; clusters meeting dV get exp(beta * sum_{x in C} max_m h[x, m]) and the
  rest are weighted as in the free case.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

from . import kernels
from .field import Couplings, ModelParams, require_compatible
from .lattice import Graph, clusters

DEFAULT_EDGE_CAP = 22


class EnumerationTooLarge(ValueError):
    pass


def log_edge_factor(q: int, beta: float, J) -> np.ndarray:
    """log(exp(q beta J) - 1); -inf where beta * J == 0."""
    x = q * beta * np.asarray(J, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        small = np.log(np.expm1(np.minimum(x, 30.0)))
        # log(expm1(x)) = x + log1p(-exp(-x)) for large x, where expm1 overflows
        large = x + np.log1p(-np.exp(-x))
    return np.where(x > 30.0, large, small)


@dataclass(frozen=True)
class ModelArrays:
    """Dense per-vertex/per-edge arrays for one (params, graph) pair."""

    h: np.ndarray
    beta_h: np.ndarray
    beta_hmax: np.ndarray
    log_edge: np.ndarray
    wired: bool


def model_arrays(params: ModelParams, graph: Graph) -> ModelArrays:
    if params.bc == "maxwired":
        require_compatible(params.field, graph.all_vertices)
    h = params.field.array_for(graph)
    J = params.couplings.array_for(graph)
    if np.any(J < 0):
        raise ValueError("couplings must be nonnegative")
    return ModelArrays(
        h=h,
        beta_h=params.beta * h,
        beta_hmax=params.beta * h.max(axis=1),
        log_edge=log_edge_factor(params.q, params.beta, J),
        wired=params.bc == "maxwired",
    )


@dataclass(frozen=True)
class ClusterWeight:
    log_value: float

    @property
    def value(self) -> float:
        try:
            return math.exp(self.log_value)
        except OverflowError:
            raise OverflowError(
                f"cluster weight exp({self.log_value:.4g}) overflows; lower beta "
                "or use log_value") from None


def _log_theta(beta_sums: np.ndarray, beta_hmax_sum: float, touches: bool, wired: bool) -> float:
    if wired and touches:
        return float(beta_hmax_sum)
    top = float(np.max(beta_sums))
    return top + math.log(float(np.sum(np.exp(beta_sums - top))))


def cluster_weight(params: ModelParams, cluster: Sequence[Sequence[int]],
                   touches_boundary: bool) -> ClusterWeight:
    """Weight of one open cluster given as a list of vertex coordinates."""
    h = np.array([params.field.at(x) for x in cluster], dtype=float).reshape(-1, params.q)
    if touches_boundary and params.bc == "maxwired":
        require_compatible(params.field, cluster)
    return ClusterWeight(_log_theta(params.beta * h.sum(axis=0),
                                    params.beta * h.max(axis=1).sum(),
                                    touches_boundary, params.bc == "maxwired"))


def check_admissible(graph: Graph, omega: np.ndarray, bc: str) -> np.ndarray:
    omega = np.asarray(omega, dtype=np.uint8)
    if omega.shape != (graph.n_all_edges,):
        raise ValueError(f"configuration must have {graph.n_all_edges} entries")
    pinned = 1 if bc == "maxwired" else 0
    if np.any(omega[graph.n_edges:] != pinned):
        raise ValueError(f"boundary edges must all be {pinned} under {bc} bc")
    return omega


def log_cluster_product(params: ModelParams, graph: Graph, omega: np.ndarray) -> float:
    """log of the cluster-weight product alone (no edge factors)."""
    omega = check_admissible(graph, omega, params.bc)
    arr = model_arrays(params, graph)
    part = clusters(graph, omega)
    total = 0.0
    for members, touches in part.clusters:
        if not arr.wired and members[0] >= graph.n_interior:
            continue  # isolated dV vertex: not part of (V, open edges)
        m = np.asarray(members)
        total += _log_theta(arr.beta_h[m].sum(axis=0), arr.beta_hmax[m].sum(),
                            touches, arr.wired)
    return total


def log_config_weight(params: ModelParams, graph: Graph, omega: np.ndarray) -> float:
    omega = check_admissible(graph, omega, params.bc)
    arr = model_arrays(params, graph)
    open_e = omega[: graph.n_edges] == 1
    if np.any(arr.log_edge[open_e] == -np.inf):
        return -math.inf
    return float(arr.log_edge[open_e].sum()) + log_cluster_product(params, graph, omega)


def config_weight(params: ModelParams, graph: Graph, omega: np.ndarray) -> float:
    lw = log_config_weight(params, graph, omega)
    try:
        return math.exp(lw)
    except OverflowError:
        raise OverflowError(f"weight exp({lw:.4g}) overflows; lower beta or use "
                            "log_config_weight") from None


@lru_cache(maxsize=32)
def config_space(graph: Graph, bc: str) -> np.ndarray:
    """Cluster labels of every admissible configuration (read-only)."""
    labels = kernels.label_all_configs(graph.n_vertices, graph.edge_array,
                                       graph.n_edges, bc == "maxwired")
    labels.setflags(write=False)
    return labels


def config_bits(graph: Graph, bc: str) -> np.ndarray:
    idx = np.arange(1 << graph.n_edges, dtype=np.int64)
    bits = np.empty((idx.size, graph.n_all_edges), dtype=np.uint8)
    bits[:, : graph.n_edges] = (idx[:, None] >> np.arange(graph.n_edges)) & 1
    bits[:, graph.n_edges:] = 1 if bc == "maxwired" else 0
    return bits


def _log_cluster_products(labels: np.ndarray, arr: ModelArrays, n_interior: int) -> np.ndarray:
    """Vectorized log cluster-weight product for every row of ``labels``."""
    n_configs, n = labels.shape
    keep = np.ones(n, dtype=bool)
    if not arr.wired:
        keep[n_interior:] = False
    lab = labels[:, keep].astype(np.int64)
    flat = (lab + n * np.arange(n_configs)[:, None]).ravel()
    size = n_configs * n
    count = np.bincount(flat, minlength=size)
    present = count > 0
    q = arr.beta_h.shape[1]
    sums = np.empty((size, q))
    for m in range(q):
        sums[:, m] = np.bincount(flat, weights=np.tile(arr.beta_h[keep, m], n_configs),
                                 minlength=size)
    hmax = np.bincount(flat, weights=np.tile(arr.beta_hmax[keep], n_configs), minlength=size)
    bnd = np.zeros(n, dtype=float)
    bnd[n_interior:] = 1.0
    touches = np.bincount(flat, weights=np.tile(bnd[keep], n_configs), minlength=size) > 0
    top = sums.max(axis=1)
    lse = top + np.log(np.exp(sums - top[:, None]).sum(axis=1))
    theta = np.where(arr.wired & touches, hmax, lse)
    theta = np.where(present, theta, 0.0)
    return theta.reshape(n_configs, n).sum(axis=1)


@dataclass
class MeasureTable:
    """Exact law of a model on a small graph, indexed by configuration.

    Entry ``idx`` is the configuration whose interior edge ``e`` is open iff bit
    ``e`` of ``idx`` is set; boundary edges are pinned by the boundary
    condition.
    """

    params: ModelParams
    graph: Graph
    log_weights: np.ndarray
    log_Z: float
    probabilities: np.ndarray
    labels: np.ndarray
    log_cluster_weights: np.ndarray | None = None
    _bits: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_configs(self) -> int:
        return self.log_weights.size

    @property
    def bits(self) -> np.ndarray:
        if self._bits is None:
            self._bits = config_bits(self.graph, self.params.bc)
        return self._bits

    @property
    def Z(self) -> float:
        return math.exp(self.log_Z)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def entries(self) -> Iterator[tuple[np.ndarray, float, float]]:
        for i in range(self.n_configs):
            yield self.bits[i], float(np.exp(self.log_weights[i])), float(self.probabilities[i])

    def values(self, f: Callable) -> np.ndarray:
        v = np.asarray(f(self.bits, self.labels), dtype=float)
        if v.shape != (self.n_configs,):
            raise ValueError(f"function returned shape {v.shape}, expected ({self.n_configs},)")
        return v

    def to_csv(self, path: str | Path) -> None:
        """Columns: bitstring over E (edge 0 first), log weight, probability."""
        bits = self.bits[:, : self.graph.n_edges]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["config", "log_weight", "probability"])
            for i in range(self.n_configs):
                w.writerow(["".join(map(str, bits[i])),
                            repr(float(self.log_weights[i])),
                            repr(float(self.probabilities[i]))])


def _finish(params, graph, log_w, labels, log_g=None) -> MeasureTable:
    finite = log_w[np.isfinite(log_w)]
    if finite.size == 0:
        raise ValueError("every configuration has zero weight")
    log_Z = float(np.logaddexp.reduce(finite))
    probs = np.exp(log_w - log_Z)
    return MeasureTable(params=params, graph=graph, log_weights=log_w, log_Z=log_Z,
                        probabilities=probs, labels=labels, log_cluster_weights=log_g)


def _check_cap(graph: Graph, cap: int) -> None:
    if graph.n_edges > cap:
        raise EnumerationTooLarge(
            f"{graph.n_edges} interior edges means 2^{graph.n_edges} configurations; "
            f"the cap is {cap} edges (raise it explicitly if intended)")


def enumerate_measure(params: ModelParams, graph: Graph,
                      cap: int = DEFAULT_EDGE_CAP) -> MeasureTable:
    """Exact table over all 2^|E| admissible configurations."""
    _check_cap(graph, cap)
    arr = model_arrays(params, graph)
    labels = config_space(graph, params.bc)
    bits = config_bits(graph, params.bc)[:, : graph.n_edges].astype(bool)
    with np.errstate(invalid="ignore"):
        log_k = np.where(bits, arr.log_edge, 0.0).sum(axis=1)
    log_g = _log_cluster_products(labels, arr, graph.n_interior)
    return _finish(params, graph, log_k + log_g, labels, log_g)


def bernoulli_probabilities(graph: Graph, beta: float, q: int, couplings: Couplings) -> np.ndarray:
    """Edge probabilities p = 1 - exp(-q beta J) on the interior edges."""
    J = couplings.array_for(graph)
    return -np.expm1(-q * beta * J)


def bernoulli_table(graph: Graph, beta: float, q: int, couplings: Couplings,
                    bc: str = "free", cap: int = DEFAULT_EDGE_CAP) -> MeasureTable:
    """Independent bond percolation with p = 1 - exp(-q beta J), in closed form."""
    _check_cap(graph, cap)
    p = bernoulli_probabilities(graph, beta, q, couplings)
    bits = config_bits(graph, bc)[:, : graph.n_edges].astype(bool)
    with np.errstate(divide="ignore"):
        lp = np.log(p)
        lq = np.log1p(-p)
    log_w = np.where(bits, lp, lq).sum(axis=1)
    scaled = Couplings.from_edges(
        {frozenset((graph.all_vertices[a], graph.all_vertices[b])): q * j
         for (a, b), j in zip(graph.edges, couplings.array_for(graph))}, default=0.0)
    ref = ModelParams(beta=beta, q=1, couplings=scaled, bc=bc, mode="bernoulli")
    return _finish(ref, graph, log_w, config_space(graph, bc))


def exact_expectation(table: MeasureTable, f: Callable) -> float:
    """Sum of f(omega) P(omega); ``f`` takes stacked (bits, labels)."""
    return float(np.dot(table.values(f), table.probabilities))


def exact_connectivity(table: MeasureTable, x: Sequence[int], y: Sequence[int]) -> float:
    i = table.graph.index(x)
    j = table.graph.index(y)
    return float(np.dot(table.labels[:, i] == table.labels[:, j], table.probabilities))


def connectivity_row(table: MeasureTable, x: Sequence[int]) -> np.ndarray:
    """P(x <-> y) for every vertex y of V u dV, in graph index order."""
    i = table.graph.index(x)
    same = table.labels == table.labels[:, [i]]
    return same.T.astype(float) @ table.probabilities
