"""Finite-volume order parameters, two-point functions, decay fits, beta_c scans.

Every estimate is either exact (enumerated table) or a chain estimate with a
batch-means standard error. Nothing is extrapolated to infinite volume: the
theta and chi values here are finite-box proxies labelled with the box.
"""

from __future__ import annotations

import csv
import dataclasses
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import events
from .field import ModelParams, ModelTemplate
from .lattice import Graph, build_box, euclidean_sphere
from .measure import connectivity_row, enumerate_measure, exact_expectation
from .sampler import ChainConfig, batch_means, bernoulli_samples, run_chain

EXACT = "exact"


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    n: int
    method: str
    label: str = ""

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "n": self.n,
                "method": self.method, "label": self.label}


def _with_params(estimator, params: ModelParams):
    if isinstance(estimator, str):
        if estimator != EXACT:
            raise ValueError(f"estimator must be 'exact' or a ChainConfig, got {estimator!r}")
        return EXACT
    if not isinstance(estimator, ChainConfig):
        raise TypeError("estimator must be 'exact' or a ChainConfig")
    return dataclasses.replace(estimator, params=params)


def _estimate(params: ModelParams, graph: Graph, fs: Sequence, estimator) -> list[Estimate]:
    """Expectations of several functions from one table or one chain."""
    est = _with_params(estimator, params)
    if est == EXACT:
        t = enumerate_measure(params, graph)
        return [Estimate(exact_expectation(t, f), 0.0, t.n_configs, EXACT) for f in fs]
    named = [(f"f{k}", f) for k, f in enumerate(fs)]
    s = run_chain(est, graph, named)
    return [Estimate(o.mean, o.stderr, o.n, "chain") for o in s.observables]


def _center(graph: Graph, center) -> tuple[int, ...]:
    c = graph.center if center is None else tuple(center)
    if c is None:
        raise ValueError("graph has no center; pass one explicitly")
    if not graph.is_interior(c):
        raise ValueError(f"center {c} must be an interior vertex")
    return c


def _annulus_targets(graph: Graph, center, n: float, interior_only: bool = False) -> list[int]:
    """Sphere indices, refusing spheres that leave V u dV (or V)."""
    if n <= 0:
        raise ValueError("n must be positive")
    r = math.floor(n)
    c = np.asarray(center)
    for off in itertools.product(range(-r, r + 1), repeat=graph.d):
        sq = sum(o * o for o in off)
        if (n - 1) ** 2 < sq <= n * n:
            y = tuple(int(v) for v in c + np.asarray(off))
            inside = graph.is_interior(y) if (interior_only and y in graph) else y in graph
            if not inside:
                raise ValueError(f"sphere of radius {n} around {tuple(center)} leaves the box at {y}")
    idx = euclidean_sphere(graph, center, n)
    if not idx:
        raise ValueError(f"sphere of radius {n} around {tuple(center)} is empty")
    return idx


def largest_radius(graph: Graph, center=None) -> int:
    """Largest integer n whose sphere around ``center`` lies inside V."""
    c = _center(graph, center)
    n = 1
    while True:
        try:
            _annulus_targets(graph, c, n + 1, interior_only=True)
        except ValueError:
            return n
        n += 1


def radius_probability(params: ModelParams, graph: Graph, center=None, n: float = 1,
                       estimator=EXACT) -> Estimate:
    """P(center <-> sphere of radius n)."""
    c = _center(graph, center)
    targets = _annulus_targets(graph, c, n)
    est, = _estimate(params, graph, [events.reaches(graph.index(c), targets)], estimator)
    return dataclasses.replace(est, label=f"box radius {graph.radius}, n={n}")


@dataclass(frozen=True)
class RadiusCurve:
    ns: np.ndarray
    p: np.ndarray
    se: np.ndarray
    params: ModelParams
    box_radius: int | None
    method: str

    def rows(self):
        for n, p, se in zip(self.ns, self.p, self.se):
            yield {"beta": self.params.beta, "n": float(n), "p": float(p), "se": float(se)}

    def to_csv(self, path: str | Path) -> None:
        _write_csv(path, ["beta", "n", "p", "se"], self.rows())


def radius_curve(params: ModelParams, graph: Graph, ns: Sequence[float], center=None,
                 estimator=EXACT) -> RadiusCurve:
    c = _center(graph, center)
    i = graph.index(c)
    fs = [events.reaches(i, _annulus_targets(graph, c, n)) for n in ns]
    ests = _estimate(params, graph, fs, estimator)
    return RadiusCurve(np.asarray(ns, dtype=float), np.array([e.value for e in ests]),
                       np.array([e.stderr for e in ests]), params, graph.radius, ests[0].method)


def finite_theta(params: ModelParams, graph: Graph, center=None, estimator=EXACT) -> Estimate:
    """Finite-box proxy for theta: radius probability at the largest n inside V.

    Pinned to the free boundary condition that defines theta.
    """
    if params.bc != "free":
        raise ValueError("theta is defined with the free boundary condition")
    c = _center(graph, center)
    n = largest_radius(graph, c)
    est = radius_probability(params, graph, c, n, estimator)
    return dataclasses.replace(est, label=f"theta proxy: box radius {graph.radius}, n={n}")


@dataclass(frozen=True)
class ChiEstimate:
    direct: float
    direct_se: float
    summed: float
    summed_se: float
    method: str
    label: str = ""


def finite_chi(params: ModelParams, graph: Graph, center=None, estimator=EXACT) -> ChiEstimate:
    """E|C_x| over V u dV, directly and as sum_y P(x <-> y); max-wired only."""
    if params.bc != "maxwired":
        raise ValueError("chi is defined with the max-wired boundary condition")
    c = _center(graph, center)
    i = graph.index(c)
    label = f"chi proxy: box radius {graph.radius}"
    est = _with_params(estimator, params)
    if est == EXACT:
        t = enumerate_measure(params, graph)
        direct = exact_expectation(t, events.cluster_size(i))
        summed = float(connectivity_row(t, c).sum())
        return ChiEstimate(direct, 0.0, summed, 0.0, EXACT, label)

    def summed_f(bits, labels):
        # per-sample sum of two-point indicators, vertex by vertex
        labels = np.asarray(labels)
        acc = np.zeros(labels.shape[:-1])
        for y in range(labels.shape[-1]):
            acc += labels[..., y] == labels[..., i]
        return acc

    s = run_chain(est, graph, [("direct", events.cluster_size(i)), ("summed", summed_f)])
    d, m = s.observables
    return ChiEstimate(d.mean, d.stderr, m.mean, m.stderr, "chain", label)


def two_point(params: ModelParams, graph: Graph, x, y, estimator=EXACT) -> Estimate:
    f = events.connection(graph.index(x), graph.index(y))
    est, = _estimate(params, graph, [f], estimator)
    return est


@dataclass(frozen=True)
class TwoPointRow:
    beta: float
    x: tuple
    y: tuple
    dist: float
    p: float
    se: float


def two_point_table(params: ModelParams, graph: Graph, x, ys: Sequence, estimator=EXACT
                    ) -> list[TwoPointRow]:
    i = graph.index(x)
    fs = [events.connection(i, graph.index(y)) for y in ys]
    ests = _estimate(params, graph, fs, estimator)
    return [TwoPointRow(params.beta, tuple(x), tuple(y),
                        float(np.linalg.norm(np.subtract(y, x))), e.value, e.stderr)
            for y, e in zip(ys, ests)]


def write_two_point_csv(rows: Sequence[TwoPointRow], path: str | Path) -> None:
    _write_csv(path, ["beta", "x", "y", "dist", "p", "se"],
               ({"beta": r.beta, "x": " ".join(map(str, r.x)), "y": " ".join(map(str, r.y)),
                 "dist": r.dist, "p": r.p, "se": r.se} for r in rows))


def axis_profile(params: ModelParams, graph: Graph, distances: Sequence[int], x=None,
                 estimator=EXACT) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Two-point function from x to the 2d axis points at each integer distance.

    Per sample, the indicators of the 2d points are averaged before the
    error is computed, so correlations between directions are accounted for.
    Returns (distances, p, se).
    """
    c = _center(graph, x)
    i = graph.index(c)
    groups = []
    for k in distances:
        pts = []
        for a in range(graph.d):
            for s in (1, -1):
                y = list(c)
                y[a] += s * int(k)
                pts.append(graph.index(y))
        groups.append(np.array(pts))

    def make(pts, k):
        def f(bits, labels):
            return (np.asarray(labels)[..., pts] == np.asarray(labels)[..., [i]]).mean(axis=-1)
        f.__name__ = f"axis_{k}"
        return f

    ests = _estimate(params, graph, [make(p, k) for p, k in zip(groups, distances)], estimator)
    return (np.asarray(distances, dtype=float), np.array([e.value for e in ests]),
            np.array([e.stderr for e in ests]))


@dataclass(frozen=True)
class DecayFit:
    rate: float
    intercept: float
    r2: float
    window: tuple[float, float]
    n_points: int

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def fit_decay(dist, p=None, se=None, window: tuple[float, float] | None = None) -> DecayFit:
    """Least squares of log p against distance; rate = -slope.

    ``dist`` may be a RadiusCurve. Points within 2 standard errors of zero,
    nonpositive points, and windows with fewer than 3 points are refused.
    """
    if isinstance(dist, RadiusCurve):
        dist, p, se = dist.ns, dist.p, dist.se
    x = np.asarray(dist, dtype=float)
    y = np.asarray(p, dtype=float)
    s = np.zeros_like(y) if se is None else np.asarray(se, dtype=float)
    if x.shape != y.shape or s.shape != y.shape:
        raise ValueError("distances, estimates and errors must have the same length")
    if window is not None:
        keep = (x >= window[0]) & (x <= window[1])
        x, y, s = x[keep], y[keep], s[keep]
    if x.size < 3:
        raise ValueError(f"need at least 3 points in the window, got {x.size}")
    if np.any(y <= 0):
        raise ValueError(f"nonpositive estimate at distance {x[np.argmax(y <= 0)]}")
    weak = y <= 2 * s
    if np.any(weak):
        raise ValueError(f"estimate at distance {x[np.argmax(weak)]} is within 2 SE of zero")
    ly = np.log(y)
    slope, intercept = np.polyfit(x, ly, 1)
    resid = ly - (slope * x + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res < 1e-24 else 0.0)
    return DecayFit(rate=float(-slope), intercept=float(intercept), r2=r2,
                    window=(float(x.min()), float(x.max())), n_points=int(x.size))


# beta_c scan

def crossing_event(graph: Graph):
    """Left-right crossing of V by an open cluster (first coordinate extremes)."""
    first = graph.coords[: graph.n_interior, 0]
    left = np.flatnonzero(first == first.min())
    right = np.flatnonzero(first == first.max())
    return events.crossing(left, right)


@dataclass(frozen=True)
class ScanSettings:
    burn_in: int = 500
    samples: int = 10000
    thin: int = 1
    seed: int = 0
    batches: int = 50
    n_boot: int = 200


@dataclass
class BetaScan:
    grid: np.ndarray
    sizes: tuple[int, ...]
    p: np.ndarray
    se: np.ndarray
    beta_c_hat: float
    ci_low: float
    ci_high: float
    sigma: float
    resolved: bool
    pair_crossings: list[float]
    monotonicity_violations: list[tuple[int, float]] = field(default_factory=list)
    boot_unresolved: int = 0
    model: str = ""
    statistic: str = "left-right crossing of V"

    def rows(self):
        for a, b in enumerate(self.grid):
            for k, n in enumerate(self.sizes):
                yield {"beta": float(b), "n": n, "p": float(self.p[a, k]),
                       "se": float(self.se[a, k])}

    def to_csv(self, path: str | Path) -> None:
        _write_csv(path, ["beta", "n", "p", "se"], self.rows())

    def verdict(self) -> dict:
        def num(v):
            return float(v) if math.isfinite(v) else None
        return {"beta_c_hat": num(self.beta_c_hat), "ci_low": num(self.ci_low),
                "ci_high": num(self.ci_high), "resolved": bool(self.resolved)}

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.verdict(), indent=2) + "\n")


def first_crossing(grid: np.ndarray, diff: np.ndarray) -> float:
    """First -/+ sign change of ``diff`` along ``grid``, linearly interpolated.

    Returns nan when the difference never changes sign from below to above.
    """
    for a in range(len(grid) - 1):
        d0, d1 = diff[a], diff[a + 1]
        if d0 < 0 <= d1:
            return float(grid[a] + (grid[a + 1] - grid[a]) * (-d0) / (d1 - d0))
    return math.nan


def crossing_estimate(grid: np.ndarray, p: np.ndarray) -> tuple[float, list[float]]:
    """Mean of the crossings of successive-size curves; nan if any is unresolved."""
    pairs = [first_crossing(grid, p[:, k + 1] - p[:, k]) for k in range(p.shape[1] - 1)]
    if any(math.isnan(c) for c in pairs):
        return math.nan, pairs
    return float(np.mean(pairs)), pairs


def _batch(series: np.ndarray, n_batches: int) -> np.ndarray:
    b = series.size // n_batches
    if b < 1:
        raise ValueError(f"{series.size} samples cannot form {n_batches} batches")
    return series[: b * n_batches].reshape(n_batches, b).mean(axis=1)


def _sample_crossing(template: ModelTemplate, beta: float, graph: Graph, st: ScanSettings,
                     seed) -> np.ndarray:
    f = crossing_event(graph)
    params = template.at(beta, graph)
    if template.mode == "bernoulli":
        rng = np.random.Generator(np.random.PCG64(seed))
        out = []
        left = st.samples
        while left > 0:
            m = min(4096, left)
            bits, labels = bernoulli_samples(graph, beta, 1, params.couplings, m, rng, params.bc)
            out.append(f(bits, labels))
            left -= m
        return np.concatenate(out) if out else np.empty(0)
    cfg = ChainConfig(params, burn_in=st.burn_in, samples=st.samples, thin=st.thin)
    s = run_chain(cfg, graph, [("cross", f)], keep_series=True, seed=seed)
    return s.observables[0].series


def scan_beta_c(grid: Sequence[float], template: ModelTemplate, sizes: Sequence[int],
                settings: ScanSettings = ScanSettings(), d: int = 2) -> BetaScan:
    """Crossing estimate of beta_c from left-right crossing probabilities.

    Sizes are box radii (side 2n+1). For each beta and size the crossing
    probability is estimated from one chain (or iid draws in bernoulli mode).
    The estimate is the mean over successive size pairs of the first beta
    where the larger box overtakes the smaller one. Uncertainty: bootstrap
    over batch means, ``settings.n_boot`` resamples, percentile interval.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing with at least 2 points")
    sizes = tuple(int(n) for n in sizes)
    if len(sizes) < 2 or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("need at least 2 strictly increasing sizes")
    graphs = [build_box(d, n) for n in sizes]
    seeds = np.random.SeedSequence(settings.seed).spawn(grid.size * len(sizes))
    batches = np.empty((grid.size, len(sizes), settings.batches))
    p = np.empty((grid.size, len(sizes)))
    se = np.empty_like(p)
    for a, beta in enumerate(grid):
        for k, g in enumerate(graphs):
            series = _sample_crossing(template, float(beta), g, settings,
                                      seeds[a * len(sizes) + k])
            p[a, k], se[a, k] = batch_means(series, settings.batches)
            batches[a, k] = _batch(series, settings.batches)

    viol = []
    for k in range(len(sizes)):
        for a in range(grid.size - 1):
            drop = p[a, k] - p[a + 1, k]
            if drop > 3 * math.hypot(se[a, k], se[a + 1, k]):
                viol.append((sizes[k], float(grid[a + 1])))

    est, pairs = crossing_estimate(grid, p)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(settings.seed).spawn(
        grid.size * len(sizes) + 1)[-1]))
    boots = []
    unresolved = 0
    nb = settings.batches
    for _ in range(settings.n_boot):
        pick = rng.integers(0, nb, size=(grid.size, len(sizes), nb))
        pb = np.take_along_axis(batches, pick, axis=2).mean(axis=2)
        b, _ = crossing_estimate(grid, pb)
        if math.isnan(b):
            unresolved += 1
        else:
            boots.append(b)
    resolved = not math.isnan(est) and len(boots) >= 0.9 * settings.n_boot
    if boots:
        lo, hi = np.percentile(boots, [2.5, 97.5])
        sigma = float(np.std(boots, ddof=1)) if len(boots) > 1 else math.nan
    else:
        lo = hi = sigma = math.nan
    return BetaScan(grid=grid, sizes=sizes, p=p, se=se, beta_c_hat=est, ci_low=float(lo),
                    ci_high=float(hi), sigma=sigma, resolved=resolved, pair_crossings=pairs,
                    monotonicity_violations=viol, boot_unresolved=unresolved,
                    model=template.name)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
