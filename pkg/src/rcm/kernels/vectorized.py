"""Pure NumPy versions of the enumeration and pair-scan kernels."""

import numpy as np


def label_all_configs(n_vertices, edges, n_interior, wired):
    n_configs = 1 << n_interior
    idx = np.arange(n_configs, dtype=np.int64)
    open_int = ((idx[:, None] >> np.arange(n_interior)) & 1).astype(bool)
    n_bnd = edges.shape[0] - n_interior
    open_bnd = np.full((n_configs, n_bnd), bool(wired))
    open_all = np.concatenate([open_int, open_bnd], axis=1)

    a = edges[:, 0]
    b = edges[:, 1]
    rows = np.arange(n_configs)[:, None]
    labels = np.broadcast_to(np.arange(n_vertices), (n_configs, n_vertices)).copy()
    # min-label propagation with pointer jumping; converges to the smallest
    # vertex id of each component
    while True:
        prev = labels
        la = labels[:, a]
        lb = labels[:, b]
        low = np.where(open_all, np.minimum(la, lb), n_vertices)
        r = np.broadcast_to(rows, low.shape)
        new = labels.copy()
        np.minimum.at(new, (r, np.broadcast_to(a, low.shape)), low)
        np.minimum.at(new, (r, np.broadcast_to(b, low.shape)), low)
        labels = new[rows, new]
        if np.array_equal(labels, prev):
            break
    is_root = labels == np.arange(n_vertices)
    rank = np.cumsum(is_root, axis=1) - 1
    return rank[rows, labels].astype(np.int16)


def lattice_margin(logw, block=256):
    n = logw.size
    best = np.inf
    best_a = -1
    best_b = -1
    b_all = np.arange(n)
    for start in range(0, n, block):
        a = np.arange(start, min(start + block, n))[:, None]
        meet = a & b_all
        join = a | b_all
        valid = (b_all > a) & (meet != a) & (meet != b_all)
        if not valid.any():
            continue
        m = logw[join] + logw[meet] - logw[a] - logw[b_all]
        m = np.where(valid, m, np.inf)
        k = np.argmin(m)
        i, j = np.unravel_index(k, m.shape)
        if m[i, j] < best:
            best = float(m[i, j])
            best_a = int(a[i, 0])
            best_b = int(j)
    return best, best_a, best_b
