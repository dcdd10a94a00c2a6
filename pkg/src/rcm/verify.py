"""Exhaustive checks of the comparison inequalities on enumerable graphs.

Each check returns a VerdictReport whose ``worst_margin`` is the most
negative slack seen (lhs-to-rhs difference in the direction the inequality
asserts). Probability comparisons use absolute slack; weight comparisons are
done in log space, which is relative slack; inequalities carrying the
constant exp(beta * |h|_1) use relative slack.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import events, kernels
from .field import (
    Couplings,
    ExternalField,
    ModelParams,
    couplings_leq,
    field_leq,
    l1_norm,
    require_compatible,
)
from .lattice import Graph, build_box, build_graph, euclidean_sphere
from .measure import (
    MeasureTable,
    bernoulli_table,
    config_bits,
    config_space,
    enumerate_measure,
)

ABS_TOL = 1e-12
REL_TOL = 1e-10


@dataclass(frozen=True)
class IncreasingFunction:
    name: str
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    certified: bool = False


@dataclass
class VerdictReport:
    name: str
    trials: int
    worst_margin: float
    passed: bool
    tolerance: float
    counterexample: dict | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["worst_margin"] = _json_num(self.worst_margin)
        return d


def _json_num(x):
    return float(x) if math.isfinite(x) else (None if math.isnan(x) else str(x))


def _verdict(name, trials, worst, tol, counterexample, **details) -> VerdictReport:
    passed = worst >= -tol
    return VerdictReport(name=name, trials=trials, worst_margin=float(worst), passed=passed,
                         tolerance=tol, counterexample=None if passed else counterexample,
                         details=details)


def merge_reports(reports: Sequence[VerdictReport], name: str | None = None) -> VerdictReport:
    """Global worst margin over independent trials."""
    if not reports:
        raise ValueError("nothing to merge")
    worst = min(reports, key=lambda r: r.worst_margin)
    return VerdictReport(
        name=name or reports[0].name, trials=sum(r.trials for r in reports),
        worst_margin=worst.worst_margin, passed=all(r.passed for r in reports),
        tolerance=max(r.tolerance for r in reports),
        counterexample=next((r.counterexample for r in reports if not r.passed), None),
        details={"merged": len(reports)})


# increasing-function corpus

def certify(f: IncreasingFunction, graph: Graph, bc: str, tol: float = 0.0) -> IncreasingFunction:
    """Exhaustive single-flip check f(w) <= f(w + e) over all configurations."""
    bits = config_bits(graph, bc)
    vals = np.asarray(f.fn(bits, config_space(graph, bc)), dtype=float)
    idx = np.arange(vals.size)
    for e in range(graph.n_edges):
        low = idx[(idx >> e) & 1 == 0]
        bad = vals[low | (1 << e)] < vals[low] - tol
        if bad.any():
            w = int(low[np.argmax(bad)])
            raise ValueError(f"{f.name} is not increasing: opening edge {e} at config {w} "
                             f"lowers it from {vals[w]} to {vals[w | (1 << e)]}")
    return IncreasingFunction(f.name, f.fn, certified=True)


def corpus(graph: Graph, bc: str, center=None, seed: int = 0, n_upsets: int = 4
           ) -> list[IncreasingFunction]:
    """Constant, edge indicators, k-edge up-sets, connections, radius event,
    clipped cluster size and left-right crossing; all certified."""
    rng = np.random.default_rng(seed)
    c = graph.index(center if center is not None else (graph.center or graph.vertices[0]))
    fs = [IncreasingFunction("constant", events.constant(1.0))]
    fs += [IncreasingFunction(f"edge_{e}", events.edge_open(e)) for e in range(graph.n_edges)]
    for k in range(n_upsets):
        size = int(rng.integers(2, min(4, graph.n_edges) + 1)) if graph.n_edges >= 2 else 1
        es = sorted(rng.choice(graph.n_edges, size=size, replace=False).tolist())
        fs.append(IncreasingFunction(f"upset_{'_'.join(map(str, es))}", events.all_open(es)))
    for y in range(graph.n_interior):
        if y != c:
            fs.append(IncreasingFunction(f"conn_{c}_{y}", events.connection(c, y)))
    sphere = euclidean_sphere(graph, graph.all_vertices[c], 1)
    if sphere:
        fs.append(IncreasingFunction("radius_1", events.reaches(c, sphere)))
    fs.append(IncreasingFunction("cluster_size_clipped",
                                 events.cluster_size(c, clip=graph.n_interior)))
    first = graph.coords[: graph.n_interior, 0]
    left = np.flatnonzero(first == first.min())
    right = np.flatnonzero(first == first.max())
    fs.append(IncreasingFunction("crossing", events.crossing(left, right)))
    return [certify(f, graph, bc) for f in fs]


def _require_certified(fs):
    for f in fs:
        if not f.certified:
            raise ValueError(f"function {f.name!r} has not been certified increasing")


def _expectations(table: MeasureTable, fs) -> np.ndarray:
    return np.array([float(table.values(f.fn) @ table.probabilities) for f in fs])


def _ordered(name, lo: np.ndarray, hi: np.ndarray, fs, tol=ABS_TOL, **details):
    slack = hi - lo
    k = int(np.argmin(slack))
    return _verdict(name, len(fs), float(slack[k]), tol,
                    {"function": fs[k].name, "lower_side": float(lo[k]),
                     "upper_side": float(hi[k])}, **details)


# checks

def check_fkg_lattice(table: MeasureTable, tol: float = ABS_TOL) -> VerdictReport:
    """w(a|b) w(a&b) >= w(a) w(b) over all pairs, in log space."""
    if not np.all(np.isfinite(table.log_weights)):
        raise ValueError("table has zero-weight configurations; use check_fkg_functional")
    margin, a, b = kernels.lattice_margin(table.log_weights)
    n = table.n_configs
    if a < 0:
        margin = 0.0
    return _verdict("fkg_lattice", n * (n - 1) // 2, float(margin), tol,
                    {"a": int(a), "b": int(b), "log_margin": float(margin)},
                    beta=table.params.beta, q=table.params.q, bc=table.params.bc)


def check_fkg_functional(table: MeasureTable, fs: Sequence[IncreasingFunction],
                         tol: float = ABS_TOL) -> VerdictReport:
    """mu(fg) >= mu(f) mu(g) for all pairs of certified increasing functions."""
    _require_certified(fs)
    vals = np.array([table.values(f.fn) for f in fs])
    p = table.probabilities
    mean = vals @ p
    joint = (vals * p) @ vals.T
    slack = joint - np.outer(mean, mean)
    i, j = np.unravel_index(np.argmin(slack), slack.shape)
    return _verdict("fkg_functional", len(fs) * (len(fs) + 1) // 2, float(slack[i, j]), tol,
                    {"f": fs[i].name, "g": fs[j].name, "mu_fg": float(joint[i, j]),
                     "mu_f_mu_g": float(mean[i] * mean[j])})


def check_weight_monotone(graph: Graph, params: ModelParams, tol: float = ABS_TOL
                          ) -> VerdictReport:
    """Cluster-weight product never increases when a closed edge is opened."""
    if params.bc == "maxwired":
        require_compatible(params.field, graph.all_vertices)
    table = enumerate_measure(params, graph)
    g = table.log_cluster_weights
    idx = np.arange(g.size)
    worst, where = math.inf, None
    for e in range(graph.n_edges):
        low = idx[(idx >> e) & 1 == 0]
        slack = g[low] - g[low | (1 << e)]
        k = int(np.argmin(slack))
        if slack[k] < worst:
            worst, where = float(slack[k]), (int(low[k]), e)
    trials = graph.n_edges * (g.size // 2)
    return _verdict("weight_monotone", trials, worst, tol,
                    {"config": where[0], "edge": where[1]} if where else None, bc=params.bc)


def check_domination_bernoulli(params: ModelParams, graph: Graph,
                               fs: Sequence[IncreasingFunction], tol: float = ABS_TOL
                               ) -> VerdictReport:
    """phi(f) <= Bernoulli(f) with p = 1 - exp(-q beta J)."""
    _require_certified(fs)
    rcm = _expectations(enumerate_measure(params, graph), fs)
    ref = _expectations(bernoulli_table(graph, params.beta, params.q, params.couplings,
                                        params.bc), fs)
    return _ordered("domination_bernoulli", rcm, ref, fs, tol, bc=params.bc)


def check_coupling_monotone(params: ModelParams, couplings_hi: Couplings, graph: Graph,
                            fs: Sequence[IncreasingFunction], tol: float = ABS_TOL
                            ) -> VerdictReport:
    _require_certified(fs)
    if not couplings_leq(params.couplings, couplings_hi, graph):
        raise ValueError("couplings are not ordered J <= J'")
    lo = _expectations(enumerate_measure(params, graph), fs)
    hi = _expectations(enumerate_measure(params.replace(couplings=couplings_hi), graph), fs)
    return _ordered("coupling_monotone", lo, hi, fs, tol, bc=params.bc)


def check_beta_monotone(params: ModelParams, betas: Sequence[float], graph: Graph,
                        fs: Sequence[IncreasingFunction], tol: float = ABS_TOL
                        ) -> VerdictReport:
    _require_certified(fs)
    betas = list(betas)
    if any(b <= a for a, b in zip(betas, betas[1:])):
        raise ValueError("beta grid must be strictly increasing")
    ex = [_expectations(enumerate_measure(params.replace(beta=b), graph), fs) for b in betas]
    reports = [_ordered("beta_monotone", ex[k], ex[k + 1], fs, tol,
                        betas=(betas[k], betas[k + 1])) for k in range(len(betas) - 1)]
    return merge_reports(reports, "beta_monotone")


def check_field_monotone(params: ModelParams, field_hi: ExternalField, graph: Graph,
                         fs: Sequence[IncreasingFunction], tol: float = ABS_TOL
                         ) -> VerdictReport:
    """phi_h(f) <= phi_h'(f) for h below h' in the field order."""
    _require_certified(fs)
    if not field_leq(params.field, field_hi, sites=graph.all_vertices):
        raise ValueError("fields are not ordered h <= h'")
    lo = _expectations(enumerate_measure(params, graph), fs)
    hi = _expectations(enumerate_measure(params.replace(field=field_hi), graph), fs)
    return _ordered("field_monotone", lo, hi, fs, tol, bc=params.bc)


def zero_field_constant(params: ModelParams, graph: Graph) -> float:
    """exp(beta * |h|_1) over V u dV."""
    return math.exp(params.beta * l1_norm(params.field, graph.all_vertices))


def _relative(lhs: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    scale = np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), 1e-300)
    return (rhs - lhs) / scale


def _require_positive(params: ModelParams, graph: Graph):
    h = params.field.array_for(graph)
    if np.any(h <= 0):
        raise ValueError("field entries must be strictly positive")


def check_zero_field_bound(params: ModelParams, graph: Graph,
                           fs: Sequence[IncreasingFunction], tol: float = REL_TOL
                           ) -> VerdictReport:
    """phi_h(f) <= exp(beta |h|_1) phi^free_0(f) for nonnegative f."""
    _require_positive(params, graph)
    table = enumerate_measure(params, graph)
    free0 = enumerate_measure(params.replace(field=ExternalField.zero(params.q), bc="free"),
                              graph)
    vals = [table.values(f.fn) for f in fs]
    if any(np.any(v < 0) for v in vals):
        raise ValueError("zero-field bound needs nonnegative functions")
    C = zero_field_constant(params, graph)
    lhs = _expectations(table, fs)
    rhs = C * _expectations(free0, fs)
    slack = _relative(lhs, rhs)
    k = int(np.argmin(slack))
    return _verdict("zero_field_bound", len(fs), float(slack[k]), tol,
                    {"function": fs[k].name, "lhs": float(lhs[k]), "rhs": float(rhs[k]),
                     "C": C}, bc=params.bc, C=C)


def separating_path(graph: Graph, x, z, W) -> list | None:
    """A path of interior edges from x to z avoiding W, or None if W separates."""
    xi, zi = graph.index(x), graph.index(z)
    blocked = {graph.index(w) for w in W}
    if xi in blocked or zi in blocked:
        raise ValueError("x and z must not lie in W")
    ptr, vtx, eid = graph.adjacency
    prev = {xi: None}
    dq = deque([xi])
    while dq:
        v = dq.popleft()
        if v == zi:
            path = []
            while v is not None:
                path.append(graph.all_vertices[v])
                v = prev[v]
            return path[::-1]
        for k in range(ptr[v], ptr[v + 1]):
            w = int(vtx[k])
            if eid[k] < graph.n_edges and w not in blocked and w not in prev:
                prev[w] = v
                dq.append(w)
    return None


def check_simon_lieb(params: ModelParams, graph: Graph, x, z, W, tol: float = REL_TOL
                     ) -> VerdictReport:
    """phi(x<->z) <= C sum_{y in W} phi(x<->y) phi(y<->z), free bc, q = 2."""
    if params.q != 2:
        raise ValueError("the modified Simon-Lieb inequality is stated for q = 2")
    if params.bc != "free":
        raise ValueError("the modified Simon-Lieb inequality is stated for the free measure")
    _require_positive(params, graph)
    if tuple(x) == tuple(z):
        raise ValueError("x and z must be distinct")
    path = separating_path(graph, x, z, W)
    if path is not None:
        raise ValueError(f"W does not separate x and z: path {path}")
    t = enumerate_measure(params, graph)
    lab = t.labels
    xi, zi = graph.index(x), graph.index(z)

    def conn(a, b):
        return float((lab[:, a] == lab[:, b]) @ t.probabilities)

    C = zero_field_constant(params, graph)
    lhs = conn(xi, zi)
    rhs = C * sum(conn(xi, graph.index(y)) * conn(graph.index(y), zi) for y in W)
    slack = float(_relative(np.array([lhs]), np.array([rhs]))[0])
    return _verdict("simon_lieb", 1, slack, tol, {"lhs": lhs, "rhs": rhs, "C": C}, C=C)


def check_free_wired_order(params: ModelParams, graph: Graph,
                           fs: Sequence[IncreasingFunction], tol: float = ABS_TOL
                           ) -> VerdictReport:
    """phi^free(f) <= phi^maxwired(f)."""
    _require_certified(fs)
    lo = _expectations(enumerate_measure(params.replace(bc="free"), graph), fs)
    hi = _expectations(enumerate_measure(params.replace(bc="maxwired"), graph), fs)
    return _ordered("free_wired_order", lo, hi, fs, tol)


# randomized inputs

def random_compatible_field(rng: np.random.Generator, q: int, sites) -> ExternalField:
    """Entries uniform in (0, 1], then one color boosted by +1 everywhere."""
    sites = list(sites)
    h = 1.0 - rng.random((len(sites), q))
    h[:, int(rng.integers(q))] += 1.0
    return ExternalField(q, {x: tuple(r) for x, r in zip(sites, h)})


def shrunk_field(rng: np.random.Generator, hi: ExternalField, sites) -> ExternalField:
    """A field below ``hi``: per site, c_x + lambda_x * h'_x with lambda_x in [0, 1]."""
    vals = {}
    for x in sites:
        lam = rng.random()
        c = rng.normal()
        vals[x] = tuple(c + lam * a for a in hi.at(x))
    return ExternalField(hi.q, vals)


def suite_graphs() -> dict[str, Graph]:
    return {"box_r1": build_box(2, 1),
            "staircase": build_graph([(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (0, 2)])}


def run_suite(seed: int = 0, n_fields: int = 5, betas: Sequence[float] = (0.2, 0.5, 1.0),
              qs: Sequence[int] = (2,)) -> list[VerdictReport]:
    """The verification suite over randomized compatible fields.

    With the default q = 2 every report passes. For q >= 3 the lattice
    condition can fail under the free boundary condition (fields that rank
    the non-maximal colors differently at neighbouring sites); the report
    carries the counterexample. The zero-field comparison is run under the
    free boundary condition only.
    """
    rng = np.random.default_rng(seed)
    reports: list[VerdictReport] = []
    for gname, g in suite_graphs().items():
        fs = {bc: corpus(g, bc, seed=seed) for bc in ("free", "maxwired")}
        reports.append(VerdictReport(f"corpus_certified[{gname}]",
                                     sum(len(v) for v in fs.values()), 0.0, True, 0.0))
        lattice, functional, monotone, dom, coup, betam, fieldm, zf, fw = ([] for _ in range(9))
        for _ in range(n_fields):
            for q in qs:
                h = random_compatible_field(rng, q, g.all_vertices)
                for bc in ("free", "maxwired"):
                    for beta in betas:
                        p = ModelParams(beta=beta, q=q, field=h, bc=bc)
                        t = enumerate_measure(p, g)
                        lat = check_fkg_lattice(t)
                        fun = check_fkg_functional(t, fs[bc])
                        if lat.passed and not fun.passed:
                            raise AssertionError("lattice condition passed but FKG failed: "
                                                 "inconsistent build")
                        lattice.append(lat)
                        functional.append(fun)
                        dom.append(check_domination_bernoulli(p, g, fs[bc]))
                    p = ModelParams(beta=betas[1], q=q, field=h, bc=bc)
                    monotone.append(check_weight_monotone(g, p))
                    coup.append(check_coupling_monotone(p, Couplings(uniform=1.7), g, fs[bc]))
                    betam.append(check_beta_monotone(p, betas, g, fs[bc]))
                    for lo in (h.scaled(0.1), h.scaled(0.5), ExternalField.zero(q),
                               shrunk_field(rng, h, g.all_vertices)):
                        fieldm.append(check_field_monotone(p.replace(field=lo), h, g, fs[bc]))
                fw.append(check_free_wired_order(ModelParams(beta=betas[1], q=q, field=h),
                                                 g, fs["maxwired"]))
                zf.append(check_zero_field_bound(ModelParams(beta=betas[1], q=q, field=h),
                                                 g, fs["free"]))
        for name, rs in [("fkg_lattice", lattice), ("fkg_functional", functional),
                         ("weight_monotone", monotone), ("domination_bernoulli", dom),
                         ("coupling_monotone", coup), ("beta_monotone", betam),
                         ("field_monotone", fieldm), ("free_wired_order", fw),
                         ("zero_field_bound[free]", zf)]:
            reports.append(merge_reports(rs, f"{name}[{gname}]"))
    g = build_box(2, 1)
    sl = []
    for _ in range(n_fields):
        h = random_compatible_field(rng, 2, g.all_vertices)
        for beta in betas:
            sl.append(check_simon_lieb(ModelParams(beta=beta, q=2, field=h), g, (-1, 0), (1, 0),
                                       [(0, -1), (0, 0), (0, 1)]))
    reports.append(merge_reports(sl, "simon_lieb[box_r1]"))
    return reports
