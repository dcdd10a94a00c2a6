"""Explicit-loop kernels.

Every function here is valid nopython-mode numba. With ``RCM_NUMBA=0`` the
same source runs in the interpreter, which is slow but bit-for-bit the same
algorithm.
"""

import numpy as np

from ._jit import jit


@jit
def uf_find(parent, a):
    root = a
    while parent[root] != root:
        root = parent[root]
    while parent[a] != root:
        nxt = parent[a]
        parent[a] = root
        a = nxt
    return root


@jit
def uf_union(parent, size, a, b):
    ra = uf_find(parent, a)
    rb = uf_find(parent, b)
    if ra == rb:
        return
    # union by size; equal sizes keep the lower id as root
    if size[ra] < size[rb] or (size[ra] == size[rb] and rb < ra):
        ra, rb = rb, ra
    parent[rb] = ra
    size[ra] += size[rb]


@jit
def _canonical(parent, labels):
    n = parent.size
    remap = np.full(n, -1, dtype=np.int64)
    nxt = 0
    for v in range(n):
        r = uf_find(parent, v)
        if remap[r] < 0:
            remap[r] = nxt
            nxt += 1
        labels[v] = remap[r]
    return nxt


@jit
def label_components(n_vertices, edges, open_mask):
    """Canonical component labels: cluster ids numbered by smallest member."""
    parent = np.arange(n_vertices)
    size = np.ones(n_vertices, dtype=np.int64)
    for e in range(edges.shape[0]):
        if open_mask[e]:
            uf_union(parent, size, edges[e, 0], edges[e, 1])
    labels = np.empty(n_vertices, dtype=np.int64)
    _canonical(parent, labels)
    return labels


@jit
def label_all_configs(n_vertices, edges, n_interior, wired):
    """Component labels for every interior-edge configuration.

    Row ``idx`` holds the labels for the configuration whose interior edge
    ``e`` is open iff bit ``e`` of ``idx`` is set. Boundary edges (rows
    ``n_interior:`` of ``edges``) are all open when ``wired`` and all closed
    otherwise.
    """
    n_configs = 1 << n_interior
    out = np.empty((n_configs, n_vertices), dtype=np.int16)
    parent = np.empty(n_vertices, dtype=np.int64)
    size = np.empty(n_vertices, dtype=np.int64)
    labels = np.empty(n_vertices, dtype=np.int64)
    for idx in range(n_configs):
        for v in range(n_vertices):
            parent[v] = v
            size[v] = 1
        for e in range(n_interior):
            if (idx >> e) & 1:
                uf_union(parent, size, edges[e, 0], edges[e, 1])
        if wired:
            for e in range(n_interior, edges.shape[0]):
                uf_union(parent, size, edges[e, 0], edges[e, 1])
        _canonical(parent, labels)
        for v in range(n_vertices):
            out[idx, v] = labels[v]
    return out


@jit
def lattice_margin(logw):
    """Smallest log w(a|b) + log w(a&b) - log w(a) - log w(b) over incomparable pairs.

    Returns ``(margin, a, b)``; ``a = b = -1`` when no incomparable pair exists.
    """
    n = logw.size
    best = np.inf
    best_a = -1
    best_b = -1
    for a in range(n):
        la = logw[a]
        for b in range(a + 1, n):
            meet = a & b
            if meet == a or meet == b:
                continue
            m = logw[a | b] + logw[meet] - la - logw[b]
            if m < best:
                best = m
                best_a = a
                best_b = b
    return best, best_a, best_b


@jit
def _log_theta(sums, hmax_sum, touches, wired):
    if wired and touches:
        return hmax_sum
    top = sums[0]
    for m in range(1, sums.size):
        if sums[m] > top:
            top = sums[m]
    acc = 0.0
    for m in range(sums.size):
        acc += np.exp(sums[m] - top)
    return top + np.log(acc)


@jit
def _grow(start, stamp, visited, queue, bits, adj_ptr, adj_vtx, adj_edge,
          beta_h, beta_hmax, is_bnd, sums):
    """Breadth-first search over open edges; returns (count, hmax_sum, touches).

    Visited vertices are written to ``queue[:count]`` and field sums (already
    multiplied by beta) accumulate into ``sums``.
    """
    q = beta_h.shape[1]
    for m in range(q):
        sums[m] = 0.0
    hmax_sum = 0.0
    touches = False
    visited[start] = stamp
    queue[0] = start
    head = 0
    tail = 1
    while head < tail:
        v = queue[head]
        head += 1
        for m in range(q):
            sums[m] += beta_h[v, m]
        hmax_sum += beta_hmax[v]
        if is_bnd[v]:
            touches = True
        for k in range(adj_ptr[v], adj_ptr[v + 1]):
            if bits[adj_edge[k]]:
                w = adj_vtx[k]
                if visited[w] != stamp:
                    visited[w] = stamp
                    queue[tail] = w
                    tail += 1
    return tail, hmax_sum, touches


@jit
def bond_log_odds(e, bits, edge_a, edge_b, log_edge, adj_ptr, adj_vtx,
                  adj_edge, beta_h, beta_hmax, is_bnd, wired, visited, stamp,
                  queue_a, queue_b, sums_a, sums_b):
    """Log weights of (open, closed) for interior edge ``e`` given the rest.

    Leaves ``bits[e] = 0``. Returns ``(log_open, log_closed, same, na, nb)``
    where ``queue_a[:na]`` / ``queue_b[:nb]`` are the clusters of the two
    endpoints with ``e`` closed (``nb = 0`` when they coincide).
    """
    bits[e] = 0
    x = edge_a[e]
    y = edge_b[e]
    na, hmax_a, touch_a = _grow(x, stamp, visited, queue_a, bits, adj_ptr,
                                adj_vtx, adj_edge, beta_h, beta_hmax, is_bnd,
                                sums_a)
    if visited[y] == stamp:
        return log_edge[e], 0.0, True, na, 0
    nb, hmax_b, touch_b = _grow(y, stamp, visited, queue_b, bits, adj_ptr,
                                adj_vtx, adj_edge, beta_h, beta_hmax, is_bnd,
                                sums_b)
    log_closed = (_log_theta(sums_a, hmax_a, touch_a, wired)
                  + _log_theta(sums_b, hmax_b, touch_b, wired))
    for m in range(sums_a.size):
        sums_a[m] += sums_b[m]
    log_merged = _log_theta(sums_a, hmax_a + hmax_b, touch_a or touch_b, wired)
    return log_edge[e] + log_merged, log_closed, False, na, nb


@jit
def heat_bath_updates(order, uniforms, bits, labels, edge_a, edge_b, log_edge,
                      adj_ptr, adj_vtx, adj_edge, beta_h, beta_hmax, is_bnd,
                      wired, visited, stamp0):
    """Apply one heat-bath update per entry of ``order``.

    ``labels`` is kept as a valid partition (each cluster labelled by one of
    its members). Returns the next free visit stamp.
    """
    n = labels.size
    q = beta_h.shape[1]
    queue_a = np.empty(n, dtype=np.int64)
    queue_b = np.empty(n, dtype=np.int64)
    sums_a = np.empty(q)
    sums_b = np.empty(q)
    stamp = stamp0
    for k in range(order.size):
        e = order[k]
        stamp += 1
        lo, lc, same, na, nb = bond_log_odds(
            e, bits, edge_a, edge_b, log_edge, adj_ptr, adj_vtx, adj_edge,
            beta_h, beta_hmax, is_bnd, wired, visited, stamp, queue_a,
            queue_b, sums_a, sums_b)
        if lo == -np.inf:
            p_open = 0.0
        else:
            p_open = 1.0 / (1.0 + np.exp(lc - lo))
        is_open = uniforms[k] < p_open
        bits[e] = 1 if is_open else 0
        if not same:
            x = edge_a[e]
            y = edge_b[e]
            if is_open:
                for i in range(na):
                    labels[queue_a[i]] = x
                for i in range(nb):
                    labels[queue_b[i]] = x
            else:
                for i in range(na):
                    labels[queue_a[i]] = x
                for i in range(nb):
                    labels[queue_b[i]] = y
    return stamp


@jit
def bernoulli_label_batch(uniforms, p, n_vertices, edges, n_interior, wired):
    """Sample independent interior edges (open iff u < p) and label clusters.

    ``uniforms`` has shape (samples, n_interior). Returns (bits, labels).
    """
    n_samples = uniforms.shape[0]
    n_edges = edges.shape[0]
    bits = np.zeros((n_samples, n_edges), dtype=np.uint8)
    labels = np.empty((n_samples, n_vertices), dtype=np.int64)
    open_mask = np.zeros(n_edges, dtype=np.uint8)
    if wired:
        for e in range(n_interior, n_edges):
            open_mask[e] = 1
    for s in range(n_samples):
        for e in range(n_interior):
            open_mask[e] = 1 if uniforms[s, e] < p[e] else 0
        lab = label_components(n_vertices, edges, open_mask)
        for e in range(n_edges):
            bits[s, e] = open_mask[e]
        for v in range(n_vertices):
            labels[s, v] = lab[v]
    return bits, labels
