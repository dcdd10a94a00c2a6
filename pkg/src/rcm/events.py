"""Functions of a configuration, evaluated from (bits, labels).

Each factory returns ``f(bits, labels)``. ``bits`` is the edge array and
``labels`` the cluster-id array of one configuration, or a stack of them with
a leading configuration axis. The result has one value per configuration.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np


def constant(c: float = 1.0):
    def f(bits, labels):
        return np.full(np.shape(labels)[:-1], float(c))
    f.__name__ = f"const_{c:g}"
    return f


def edge_open(e: int):
    def f(bits, labels):
        return np.asarray(bits[..., e], dtype=float)
    f.__name__ = f"edge_{e}"
    return f


def all_open(edges: Sequence[int]):
    edges = list(edges)

    def f(bits, labels):
        return np.all(bits[..., edges] == 1, axis=-1).astype(float)
    f.__name__ = "all_open_" + "_".join(map(str, edges))
    return f


def all_closed(n_edges: int):
    def f(bits, labels):
        return np.all(bits[..., :n_edges] == 0, axis=-1).astype(float)
    f.__name__ = "all_closed"
    return f


def connection(x: int, y: int):
    def f(bits, labels):
        return (labels[..., x] == labels[..., y]).astype(float)
    f.__name__ = f"conn_{x}_{y}"
    return f


def reaches(x: int, targets: Sequence[int]):
    """Indicator that x's cluster meets any target vertex."""
    targets = np.asarray(list(targets), dtype=np.int64)
    if targets.size == 0:
        raise ValueError("target set is empty")

    def f(bits, labels):
        return np.any(labels[..., targets] == labels[..., [x]], axis=-1).astype(float)
    f.__name__ = f"reach_{x}"
    return f


def cluster_size(x: int, clip: int | None = None):
    def f(bits, labels):
        s = np.sum(labels == labels[..., [x]], axis=-1).astype(float)
        return s if clip is None else np.minimum(s, clip)
    f.__name__ = f"size_{x}" if clip is None else f"size_{x}_clip{clip}"
    return f


def crossing(left: Sequence[int], right: Sequence[int]):
    """Indicator that some open cluster meets both vertex sets."""
    left = np.asarray(list(left), dtype=np.int64)
    right = np.asarray(list(right), dtype=np.int64)

    def f(bits, labels):
        labels = np.asarray(labels)
        if labels.ndim == 1:
            return float(np.intersect1d(labels[left], labels[right]).size > 0)
        lab_l = labels[:, left]
        lab_r = labels[:, right]
        hit = (lab_l[:, :, None] == lab_r[:, None, :]).any(axis=(1, 2))
        return hit.astype(float)
    f.__name__ = "crossing"
    return f


def open_count(n_edges: int):
    def f(bits, labels):
        return np.sum(bits[..., :n_edges], axis=-1).astype(float)
    f.__name__ = "open_edges"
    return f


def config_index(n_edges: int):
    """Integer whose bit e is interior edge e (the measure-table index)."""
    w = (1 << np.arange(n_edges, dtype=np.int64)).astype(float)

    def f(bits, labels):
        return np.asarray(bits[..., :n_edges], dtype=float) @ w
    f.__name__ = "config_index"
    return f
