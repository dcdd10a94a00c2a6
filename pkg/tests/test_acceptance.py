"""Acceptance criteria 1-9.

Each test prints one ``ACCEPTANCE <n> PASS|FAIL: ...`` line (visible with or
without ``-s``) and then asserts the criterion at its stated tolerance.
Criterion 2 fails for q = 3 under the free boundary condition; see
notes/decisions.md for the analysis. It is reported, not masked.
"""

import math
import time

import numpy as np
import pytest

from rcm import events
from rcm.field import (
    Couplings,
    ExternalField,
    ModelParams,
    ModelTemplate,
    decaying_field,
    decaying_values,
)
from rcm.lattice import build_box, build_graph
from rcm.measure import enumerate_measure
from rcm.observables import ScanSettings, axis_profile, finite_chi, fit_decay, scan_beta_c
from rcm.sampler import ChainConfig, open_probability, run_chain
from rcm.verify import (
    check_beta_monotone,
    check_coupling_monotone,
    check_domination_bernoulli,
    check_field_monotone,
    check_fkg_lattice,
    check_free_wired_order,
    check_simon_lieb,
    check_weight_monotone,
    check_zero_field_bound,
    corpus,
    random_compatible_field,
)

STAIRCASE = [(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (0, 2)]


@pytest.fixture
def report(capsys):
    def emit(n, ok, msg, t0):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {msg} "
                  f"[{time.perf_counter() - t0:.1f}s]")
    return emit


def random_field(rng, q, sites, lo=-2.0, hi=2.0):
    return ExternalField(q, {x: tuple(rng.uniform(lo, hi, q)) for x in sites})


def positive_field(rng, q, sites, scale=1.0):
    # compatible and strictly positive
    h = random_compatible_field(rng, q, sites)
    return ExternalField(q, {x: tuple(scale * (v + 0.05) for v in h.at(x)) for x in sites},
                         summable_positive=True)


def small_graphs():
    """Every graph here has at most 12 interior edges."""
    yield "edge", build_graph([(0, 0), (1, 0)])
    yield "path4", build_graph([(0, 0), (1, 0), (2, 0), (3, 0)])
    yield "staircase", build_graph(STAIRCASE)
    yield "square_plus", build_graph([(0, 0), (1, 0), (0, 1), (1, 1), (2, 1), (1, 2)])
    yield "box_r1", build_box(2, 1)
    yield "cube", build_graph([(a, b, c) for a in (0, 1) for b in (0, 1) for c in (0, 1)])
    yield "box_r0", build_box(2, 0)


def product_measure(graph, beta, J):
    """Independent law with p = 1 - exp(-beta J), in natural binary order."""
    p = -np.expm1(-beta * J)
    idx = np.arange(1 << graph.n_edges)
    bits = (idx[:, None] >> np.arange(graph.n_edges)) & 1
    return np.prod(np.where(bits == 1, p, 1 - p), axis=1)


def test_acceptance_1_q1_reduction(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst, n = 0.0, 0
    for name, g in small_graphs():
        assert g.n_edges <= 12
        for bc in ("free", "maxwired"):
            for beta in (0.0, 0.3, 1.0, 2.5):
                for _ in range(5):
                    J = rng.uniform(0.0, 2.0, g.n_edges)
                    coup = Couplings.from_edges(
                        {frozenset((g.all_vertices[a], g.all_vertices[b])): float(j)
                         for (a, b), j in zip(g.edges, J)})
                    h = random_field(rng, 1, g.all_vertices, -3.0, 3.0)
                    p = ModelParams(beta=beta, q=1, couplings=coup, field=h, bc=bc,
                                    mode="bernoulli")
                    t = enumerate_measure(p, g)
                    ref = product_measure(g, beta, J)
                    worst = max(worst, float(np.abs(t.probabilities - ref).max()))
                    n += 1
    ok = worst <= 1e-12
    report(1, ok, f"q=1 enumerated vs product measure over {n} cases, "
                  f"max |dev| = {worst:.2e} (tol 1e-12)", t0)
    assert ok


def test_acceptance_2_fkg_lattice(report):
    t0 = time.perf_counter()
    g = build_box(2, 1)
    rng = np.random.default_rng(2)
    fields = {q: [random_compatible_field(rng, q, g.all_vertices) for _ in range(100)]
              for q in (2, 3)}
    worst = {}
    for q in (2, 3):
        for bc in ("free", "maxwired"):
            w, arg = math.inf, None
            for k, h in enumerate(fields[q]):
                for beta in (0.2, 0.5, 1.0):
                    r = check_fkg_lattice(enumerate_measure(
                        ModelParams(beta=beta, q=q, field=h, bc=bc), g))
                    if r.worst_margin < w:
                        w, arg = r.worst_margin, (k, beta)
            worst[(q, bc)] = (w, arg)
    ok = all(w >= -1e-12 for w, _ in worst.values())
    parts = ", ".join(f"q={q} {bc}: {w:.2e}" + (f" (field #{a[0]}, beta={a[1]})" if w < -1e-12
                                                 else "")
                      for (q, bc), (w, a) in worst.items())
    report(2, ok, f"worst lattice-condition log margin over 100 fields x 3 betas: {parts} "
                  f"(tol -1e-12)", t0)
    assert ok, f"lattice condition violated: {worst}"


def test_acceptance_3_weight_monotone(report):
    t0 = time.perf_counter()
    g = build_box(2, 1)
    rng = np.random.default_rng(3)
    worst, n = math.inf, 0
    for _ in range(100):
        for q in (2, 3):
            h = random_compatible_field(rng, q, g.all_vertices)
            for bc in ("free", "maxwired"):
                r = check_weight_monotone(g, ModelParams(beta=float(rng.uniform(0.1, 2.0)), q=q,
                                                         field=h, bc=bc))
                worst = min(worst, r.worst_margin)
                n += r.trials
    ok = worst >= -1e-12
    report(3, ok, f"{n} single-flip comparisons, worst slack {worst:.2e} (tol -1e-12)", t0)
    assert ok


def test_acceptance_4_domination_chain(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    betas = (0.1, 0.3, 0.5, 0.8, 1.2)
    reports = []
    for g in (build_box(2, 1), build_graph(STAIRCASE)):
        fs = {bc: corpus(g, bc) for bc in ("free", "maxwired")}
        for q in (2, 3):
            for _ in range(4):
                h = positive_field(rng, q, g.all_vertices)
                Jlo = Couplings.from_edges(
                    {frozenset((g.all_vertices[a], g.all_vertices[b])): float(rng.uniform(0.2, 1))
                     for a, b in g.edges})
                Jhi = Couplings.from_edges(
                    {e: j + float(rng.uniform(0, 0.5)) for e, j in Jlo.per_edge.items()})
                for beta in (0.3, 0.8):
                    p = ModelParams(beta=beta, q=q, couplings=Jlo, field=h, bc="free")
                    # phi^f_0 <= phi^f_h <= Bernoulli
                    reports.append(check_field_monotone(
                        p.replace(field=ExternalField.zero(q)), h, g, fs["free"]))
                    reports.append(check_domination_bernoulli(p, g, fs["free"]))
                    reports.append(check_free_wired_order(p, g, fs["free"]))
                    for bc in ("free", "maxwired"):
                        reports.append(check_coupling_monotone(p.replace(bc=bc), Jhi, g, fs[bc]))
                        reports.append(check_domination_bernoulli(p.replace(bc=bc), g, fs[bc]))
                for bc in ("free", "maxwired"):
                    p = ModelParams(beta=betas[0], q=q, couplings=Jlo, field=h, bc=bc)
                    reports.append(check_beta_monotone(p, betas, g, fs[bc]))
    by = {}
    for r in reports:
        by[r.name] = min(by.get(r.name, math.inf), r.worst_margin)
    ok = all(v >= -1e-12 for v in by.values())
    parts = ", ".join(f"{k} {v:.2e}" for k, v in sorted(by.items()))
    report(4, ok, f"{len(reports)} comparisons, worst slack per check: {parts} (tol -1e-12)", t0)
    assert ok, by


def test_acceptance_5_zero_field_and_simon_lieb(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    zf, sl = math.inf, math.inf
    box, stair = build_box(2, 1), build_graph(STAIRCASE)
    rect = build_graph([(a, b) for a in range(4) for b in range(3)])
    separations = [
        (box, (-1, 0), (1, 0), [(0, -1), (0, 0), (0, 1)]),
        (box, (-1, -1), (1, 1), [(-1, 1), (0, 0), (1, -1), (0, 1), (1, 0)]),
        (stair, (0, 0), (2, 0), [(1, 0)]),
        (stair, (0, 0), (1, 1), [(1, 0), (0, 1)]),
        (rect, (0, 1), (3, 1), [(1, 0), (1, 1), (1, 2)]),
        (rect, (0, 0), (3, 2), [(2, 0), (2, 1), (2, 2)]),
    ]
    n_zf = n_sl = 0
    for g in (box, stair):
        fs = corpus(g, "free")
        for q in (2, 3):
            # small scales make exp(beta |h|_1) close to 1, where the bound is tight
            for scale in (1.0, 1e-2, 1e-4, 1e-6):
                h = positive_field(rng, q, g.all_vertices, scale)
                for beta in (0.2, 0.5, 1.0):
                    r = check_zero_field_bound(ModelParams(beta=beta, q=q, field=h), g, fs)
                    zf = min(zf, r.worst_margin)
                    n_zf += r.trials
    for g, x, z, W in separations:
        for scale in (1.0, 1e-2, 1e-4, 1e-6):
            h = positive_field(rng, 2, g.all_vertices, scale)
            for beta in (0.2, 0.5, 1.0):
                r = check_simon_lieb(ModelParams(beta=beta, q=2, field=h), g, x, z, W)
                sl = min(sl, r.worst_margin)
                n_sl += 1
    ok = zf >= -1e-10 and sl >= -1e-10
    report(5, ok, f"zero-field bound (free bc) {n_zf} checks, worst rel. slack {zf:.2e}; "
                  f"Simon-Lieb (q=2, free) {n_sl} checks, worst rel. slack {sl:.2e} "
                  f"(tol -1e-10)", t0)
    assert ok


def test_acceptance_6_sampler(report):
    t0 = time.perf_counter()
    g = build_graph(STAIRCASE)
    assert g.n_edges == 6
    rng = np.random.default_rng(6)
    tvs, db = {}, 0.0
    for q, bc in ((2, "free"), (3, "maxwired")):
        h = positive_field(rng, q, g.all_vertices)
        p = ModelParams(beta=0.8, q=q, field=h, bc=bc)
        t = enumerate_measure(p, g)
        for idx in range(t.n_configs):
            for e in range(g.n_edges):
                if not (idx >> e) & 1:
                    up = idx | (1 << e)
                    po = open_probability(p, g, t.bits[idx], e)
                    want = t.probabilities[up] / (t.probabilities[up] + t.probabilities[idx])
                    db = max(db, abs(po - want))
        s = run_chain(ChainConfig(p, burn_in=1000, samples=100_000, seed=6), g,
                      [events.config_index(g.n_edges)], keep_series=True)
        counts = np.bincount(s.observables[0].series.astype(int), minlength=t.n_configs)
        tvs[(q, bc)] = 0.5 * float(np.abs(counts / counts.sum() - t.probabilities).sum())
    elapsed = time.perf_counter() - t0
    ok = max(tvs.values()) < 0.02 and db <= 1e-12 and elapsed < 300
    parts = ", ".join(f"q={q} {bc} TV={v:.4f}" for (q, bc), v in tvs.items())
    report(6, ok, f"10^5 sweeps on 6 edges: {parts} (tol 0.02); detailed balance max |dev| "
                  f"{db:.1e} (tol 1e-12)", t0)
    assert ok


@pytest.mark.slow
def test_acceptance_7_decay(report):
    t0 = time.perf_counter()
    g = build_box(2, 8)
    p = ModelParams(beta=0.3, q=2, field=decaying_field(2, g.all_vertices))
    d, pr, se = axis_profile(p, g, range(2, 7),
                             estimator=ChainConfig(p, burn_in=1000, samples=50_000, seed=7))
    fit = fit_decay(d, pr, se, window=(2, 6))
    ok = fit.rate > 0.1 and fit.r2 > 0.9 and time.perf_counter() - t0 < 1800
    report(7, ok, f"log two-point vs distance 2..6: slope {-fit.rate:.3f} (need < -0.1), "
                  f"R^2 {fit.r2:.4f} (need > 0.9)", t0)
    assert ok


@pytest.mark.slow
def test_acceptance_8_beta_c_sandwich(report):
    t0 = time.perf_counter()
    sizes = (4, 6, 8)
    st = ScanSettings(burn_in=500, samples=10_000, seed=8, batches=50, n_boot=200)
    # J = 1/q so that q beta J = beta: the Bernoulli reference is the q=1, J=1 model
    q_grid = np.linspace(0.76, 1.0, 9)
    zero = scan_beta_c(q_grid, ModelTemplate(q=2, J=0.5, name="q2_zero"), sizes, st)
    fld = scan_beta_c(q_grid, ModelTemplate(q=2, J=0.5, field_fn=decaying_values(2),
                                            name="q2_field"), sizes, st)
    st_b = ScanSettings(samples=20_000, seed=8, batches=50, n_boot=200)
    bern = scan_beta_c(np.linspace(0.6, 0.8, 9),
                       ModelTemplate(q=1, J=1.0, mode="bernoulli", name="bernoulli"), sizes, st_b)

    def below(lo, hi):
        return lo.beta_c_hat - hi.beta_c_hat <= 1.96 * math.hypot(lo.sigma, hi.sigma)

    resolved = zero.resolved and fld.resolved and bern.resolved
    anchor = abs(bern.beta_c_hat - math.log(2)) <= 0.05
    ok = resolved and below(bern, fld) and below(fld, zero) and anchor
    fmt = "{:.4f} [{:.4f}, {:.4f}]".format
    report(8, ok, f"beta_c(1,0)={fmt(bern.beta_c_hat, bern.ci_low, bern.ci_high)} <= "
                  f"beta_c(2,h)={fmt(fld.beta_c_hat, fld.ci_low, fld.ci_high)} <= "
                  f"beta_c(2,0)={fmt(zero.beta_c_hat, zero.ci_low, zero.ci_high)}; "
                  f"|beta_c(1,0) - ln 2| = {abs(bern.beta_c_hat - math.log(2)):.4f} "
                  f"(tol 0.05)", t0)
    assert ok


def test_acceptance_9_chi_identity(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    worst, n = 0.0, 0
    for g in (build_box(2, 1), build_graph(STAIRCASE), build_graph([(0, 0), (1, 0)])):
        for q in (2, 3, 4):
            for beta in (0.0, 0.2, 0.7, 1.5):
                for _ in range(3):
                    h = random_compatible_field(rng, q, g.all_vertices)
                    for center in (g.vertices[0], g.vertices[-1]):
                        chi = finite_chi(ModelParams(beta=beta, q=q, field=h, bc="maxwired"), g,
                                         center=center)
                        worst = max(worst, abs(chi.direct - chi.summed))
                        n += 1
    ok = worst <= 1e-12
    report(9, ok, f"E|C_x| vs sum_y phi(x<->y) over {n} tables, max |dev| {worst:.2e} "
                  f"(tol 1e-12)", t0)
    assert ok
