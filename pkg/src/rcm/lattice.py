"""Finite subgraphs of Z^d, their outer boundary, and open clusters.

Vertices are indexed with the interior ``V`` first (lexicographic order)
followed by the outer boundary ``dV``. Edges are indexed with the interior
edges ``E`` first (lexicographic by endpoint coordinates) followed by the
boundary edges ``dE``. A configuration is a ``uint8`` array over all edges.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import kernels

Vertex = tuple[int, ...]


def _unit_steps(d: int) -> list[Vertex]:
    steps = []
    for i in range(d):
        for s in (1, -1):
            v = [0] * d
            v[i] = s
            steps.append(tuple(v))
    return steps


@dataclass(frozen=True)
class Graph:
    d: int
    vertices: tuple[Vertex, ...]
    boundary_vertices: tuple[Vertex, ...]
    edges: tuple[tuple[int, int], ...]
    boundary_edges: tuple[tuple[int, int], ...]
    center: Vertex | None = None
    radius: int | None = None
    _index: dict = field(default=None, repr=False, compare=False)

    @property
    def n_interior(self) -> int:
        return len(self.vertices)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices) + len(self.boundary_vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_all_edges(self) -> int:
        return len(self.edges) + len(self.boundary_edges)

    @property
    def all_vertices(self) -> tuple[Vertex, ...]:
        return self.vertices + self.boundary_vertices

    def index(self, v: Sequence[int]) -> int:
        try:
            return self._index[tuple(int(c) for c in v)]
        except KeyError:
            raise KeyError(f"vertex {tuple(v)} is not in V or its boundary") from None

    def __contains__(self, v) -> bool:
        return tuple(v) in self._index

    def is_interior(self, v: Sequence[int]) -> bool:
        return self.index(v) < self.n_interior

    @cached_property
    def coords(self) -> np.ndarray:
        return np.array(self.all_vertices, dtype=np.int64).reshape(-1, self.d)

    @cached_property
    def edge_array(self) -> np.ndarray:
        """(n_all_edges, 2) endpoints; boundary edges store (inside, outside)."""
        return np.array(self.edges + self.boundary_edges, dtype=np.int64).reshape(-1, 2)

    @cached_property
    def is_boundary(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.n_interior:] = True
        return mask

    @cached_property
    def adjacency(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """CSR adjacency over E and dE: (ptr, neighbour, edge id)."""
        nbrs: list[list[tuple[int, int]]] = [[] for _ in range(self.n_vertices)]
        for e, (a, b) in enumerate(self.edges + self.boundary_edges):
            nbrs[a].append((b, e))
            nbrs[b].append((a, e))
        ptr = np.zeros(self.n_vertices + 1, dtype=np.int64)
        ptr[1:] = np.cumsum([len(n) for n in nbrs])
        flat = [p for n in nbrs for p in n]
        vtx = np.array([p[0] for p in flat], dtype=np.int64)
        eid = np.array([p[1] for p in flat], dtype=np.int64)
        return ptr, vtx, eid

    def edge_index(self, x: Sequence[int], y: Sequence[int]) -> int:
        a, b = sorted((self.index(x), self.index(y)))
        for e, (u, v) in enumerate(self.edges + self.boundary_edges):
            if sorted((u, v)) == [a, b]:
                return e
        raise KeyError(f"{tuple(x)}-{tuple(y)} is not an edge of the graph")

    def empty_configuration(self, bc: str = "free") -> np.ndarray:
        """All interior edges closed; boundary edges pinned by ``bc``."""
        bits = np.zeros(self.n_all_edges, dtype=np.uint8)
        if bc == "maxwired":
            bits[self.n_edges:] = 1
        return bits

    def configuration_from_index(self, idx: int, bc: str = "free") -> np.ndarray:
        bits = self.empty_configuration(bc)
        bits[: self.n_edges] = (idx >> np.arange(self.n_edges)) & 1
        return bits

    def configuration_index(self, bits: np.ndarray) -> int:
        b = np.asarray(bits)[: self.n_edges].astype(np.int64)
        return int((b << np.arange(self.n_edges)).sum())


def build_graph(vertices: Iterable[Sequence[int]], d: int | None = None) -> Graph:
    """Graph on an arbitrary finite vertex set of Z^d with its outer boundary."""
    vs = sorted({tuple(int(c) for c in v) for v in vertices})
    if not vs:
        raise ValueError("vertex set must be nonempty")
    d = len(vs[0]) if d is None else d
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    if any(len(v) != d for v in vs):
        raise ValueError("all vertices must have the same dimension")
    inside = set(vs)
    steps = _unit_steps(d)

    bnd = sorted({
        tuple(a + s for a, s in zip(v, st))
        for v in vs for st in steps
    } - inside)
    order = {v: i for i, v in enumerate(vs + bnd)}

    edges = []
    bedges = []
    for v in vs:
        for st in steps:
            w = tuple(a + s for a, s in zip(v, st))
            if w in inside:
                if v < w:
                    edges.append((v, w))
            else:
                bedges.append((v, w))
    edges.sort()
    bedges.sort()
    return Graph(
        d=d,
        vertices=tuple(vs),
        boundary_vertices=tuple(bnd),
        edges=tuple((order[a], order[b]) for a, b in edges),
        boundary_edges=tuple((order[a], order[b]) for a, b in bedges),
        _index=order,
    )


def build_box(d: int, radius: int, center: Sequence[int] | None = None) -> Graph:
    """L-infinity ball of the given radius around ``center`` (default origin)."""
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    if radius < 0:
        raise ValueError(f"radius must be nonnegative, got {radius}")
    c = tuple(center) if center is not None else (0,) * d
    if len(c) != d:
        raise ValueError("center has wrong dimension")
    ranges = [range(ci - radius, ci + radius + 1) for ci in c]
    g = build_graph(itertools.product(*ranges), d=d)
    object.__setattr__(g, "center", c)
    object.__setattr__(g, "radius", radius)
    return g


def euclidean_sphere(graph: Graph, center: Sequence[int], n: float) -> list[int]:
    """Indices of y in V u dV with n - 1 < |y - center|_2 <= n, sorted."""
    if tuple(center) not in graph:
        raise KeyError(f"center {tuple(center)} is not in the graph")
    if n <= 0:
        raise ValueError(f"sphere radius must be positive, got {n}")
    # integer coordinates: squared distances are exact, so compare those
    sq = ((graph.coords - np.asarray(center, dtype=np.int64)) ** 2).sum(axis=1)
    sel = sq <= n * n
    if n >= 1:
        sel &= sq > (n - 1) ** 2
    return [int(i) for i in np.flatnonzero(sel)]


@dataclass
class ClusterPartition:
    labels: np.ndarray
    clusters: list[tuple[tuple[int, ...], bool]]

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    def cluster_of(self, v: int) -> tuple[int, ...]:
        return self.clusters[int(self.labels[v])][0]


def partition_from_labels(graph: Graph, labels: np.ndarray) -> ClusterPartition:
    labels = np.asarray(labels)
    # canonical ids: clusters numbered by their smallest vertex index
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    canon = rank[inv.ravel()]
    members: list[list[int]] = [[] for _ in range(order.size)]
    for v, c in enumerate(canon):
        members[c].append(v)
    bnd = graph.is_boundary
    clusters = [(tuple(m), bool(bnd[m].any())) for m in members]
    return ClusterPartition(labels=canon.astype(np.int64), clusters=clusters)


def clusters(graph: Graph, omega: np.ndarray) -> ClusterPartition:
    """Connected components of (V u dV, open edges of omega)."""
    omega = np.asarray(omega, dtype=np.uint8)
    if omega.shape != (graph.n_all_edges,):
        raise ValueError(
            f"configuration must cover E u dE ({graph.n_all_edges} edges), got {omega.shape}"
        )
    labels = kernels.label_components(graph.n_vertices, graph.edge_array, omega)
    return partition_from_labels(graph, labels)


def connected(graph: Graph, omega: np.ndarray, x: Sequence[int], y: Sequence[int]) -> bool:
    part = clusters(graph, omega)
    return bool(part.labels[graph.index(x)] == part.labels[graph.index(y)])
