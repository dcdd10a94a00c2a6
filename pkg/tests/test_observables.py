import csv
import json
import math

import numpy as np
import pytest

from rcm.field import ExternalField, ModelParams, ModelTemplate, decaying_field
from rcm.lattice import build_box
from rcm.observables import (
    RadiusCurve,
    ScanSettings,
    axis_profile,
    crossing_estimate,
    finite_chi,
    finite_theta,
    first_crossing,
    fit_decay,
    largest_radius,
    radius_curve,
    radius_probability,
    scan_beta_c,
    two_point,
    two_point_table,
    write_two_point_csv,
)
from rcm.sampler import ChainConfig

from . import oracle


def test_radius_probability_refusals():
    g = build_box(2, 1)
    p = ModelParams(beta=0.5, q=2)
    with pytest.raises(ValueError, match="leaves the box"):
        radius_probability(p, g, (0, 0), 3)
    with pytest.raises(ValueError):
        radius_probability(p, g, (0, 0), 0)
    with pytest.raises(ValueError, match="interior"):
        radius_probability(p, g, (2, 0), 1)


def test_radius_probability_beta_zero():
    g = build_box(2, 1)
    for n in (1, 2):
        assert radius_probability(ModelParams(beta=0.0, q=2), g, (0, 0), n).value == 0.0


def test_radius_probability_matches_oracle():
    g = build_box(2, 1)
    beta = 0.6
    tab, struct = oracle.table(g.vertices, beta, 2)
    V, dV, E, dE = struct
    nbrs = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    want = oracle.prob(tab, struct, lambda op: any(
        oracle.connected(op, (0, 0), y, V, dV, dE, "free") for y in nbrs), "free")
    got = radius_probability(ModelParams(beta=beta, q=2), g, (0, 0), 1)
    assert got.value == pytest.approx(want, rel=1e-12)
    assert got.method == "exact" and "radius 1" in got.label


@pytest.mark.parametrize("bc", ["free", "maxwired"])
def test_radius_curve_nested_exact(bc):
    g = build_box(2, 1)
    p = ModelParams(beta=0.9, q=3, bc=bc)
    c = radius_curve(p, g, [1, 2])
    assert np.all(np.diff(c.p) <= 1e-12)
    assert np.all((c.p >= 0) & (c.p <= 1))


def test_radius_curve_chain_nested_and_csv(tmp_path):
    g = build_box(2, 3)
    p = ModelParams(beta=0.4, q=2)
    c = radius_curve(p, g, [1, 2, 3], estimator=ChainConfig(p, burn_in=100, samples=3000))
    for a, b in zip(range(2), range(1, 3)):
        assert c.p[b] <= c.p[a] + 2 * math.hypot(c.se[a], c.se[b])
    c.to_csv(tmp_path / "r.csv")
    rows = list(csv.DictReader(open(tmp_path / "r.csv")))
    assert [r["n"] for r in rows] == ["1.0", "2.0", "3.0"] and set(rows[0]) == {"beta", "n", "p", "se"}


def test_chain_estimate_agrees_with_table():
    g = build_box(2, 1)
    p = ModelParams(beta=0.5, q=2, field=decaying_field(2, g.all_vertices))
    exact = radius_probability(p, g, (0, 0), 1)
    mc = radius_probability(p, g, (0, 0), 1, ChainConfig(p, burn_in=200, samples=20000, seed=3))
    assert abs(mc.value - exact.value) < 3.5 * mc.stderr


def test_finite_theta():
    g = build_box(2, 1)
    assert largest_radius(g) == 1
    assert largest_radius(build_box(2, 3)) == 3
    assert finite_theta(ModelParams(beta=0.0, q=2), g).value == 0.0
    th = finite_theta(ModelParams(beta=0.7, q=2), g)
    assert "theta proxy" in th.label
    with pytest.raises(ValueError):
        finite_theta(ModelParams(beta=0.7, q=2, bc="maxwired"), g)


def test_finite_theta_large_beta_near_one():
    g = build_box(2, 3)
    p = ModelParams(beta=3.0, q=2)
    th = finite_theta(p, g, estimator=ChainConfig(p, burn_in=100, samples=1000))
    assert th.value > 0.99


def test_finite_theta_monotone_in_box():
    # a larger box reaches further: theta proxies along the exact small box and chain
    g1 = build_box(2, 1)
    p = ModelParams(beta=0.8, q=2)
    t1 = finite_theta(p, g1)
    g2 = build_box(2, 2)
    t2 = finite_theta(p, g2, estimator=ChainConfig(p, burn_in=200, samples=20000, seed=1))
    assert t2.value <= t1.value + 3 * t2.stderr


def test_chi_exact_forms_agree():
    g = build_box(2, 1)
    rng = np.random.default_rng(0)
    for beta in (0.1, 0.6, 1.5):
        vals = {x: (1.0 + rng.random(), rng.random()) for x in g.all_vertices}
        p = ModelParams(beta=beta, q=2, field=ExternalField(2, vals), bc="maxwired")
        chi = finite_chi(p, g)
        assert abs(chi.direct - chi.summed) < 1e-12
    assert finite_chi(ModelParams(beta=0.0, q=2, bc="maxwired"), g).direct == pytest.approx(1.0)
    big = finite_chi(ModelParams(beta=40.0, q=2, bc="maxwired"), g)
    assert big.direct == pytest.approx(g.n_vertices, rel=1e-9)
    with pytest.raises(ValueError):
        finite_chi(ModelParams(beta=0.3, q=2), g)


def test_chi_chain_forms_agree():
    g = build_box(2, 2)
    p = ModelParams(beta=0.5, q=2, bc="maxwired")
    chi = finite_chi(p, g, estimator=ChainConfig(p, burn_in=50, samples=500))
    assert chi.direct == chi.summed and chi.method == "chain"


def test_two_point_examples(tmp_path):
    g = build_box(2, 1)
    p = ModelParams(beta=0.7, q=3, bc="maxwired")
    assert two_point(p, g, (0, 0), (0, 0)).value == pytest.approx(1.0)
    a = two_point(p, g, (0, 0), (1, 1)).value
    assert a == pytest.approx(two_point(p, g, (1, 1), (0, 0)).value, abs=1e-15)
    tab, struct = oracle.table(g.vertices, 0.7, 3, bc="maxwired")
    V, dV, E, dE = struct
    want = oracle.prob(tab, struct, lambda op: oracle.connected(op, (0, 0), (1, 1), V, dV, dE,
                                                                 "maxwired"), "maxwired")
    assert a == pytest.approx(want, rel=1e-11)
    rows = two_point_table(p, g, (0, 0), [(1, 0), (1, 1)])
    assert rows[1].dist == pytest.approx(math.sqrt(2)) and rows[1].p == pytest.approx(a)
    write_two_point_csv(rows, tmp_path / "tp.csv")
    got = list(csv.DictReader(open(tmp_path / "tp.csv")))
    assert got[0]["y"] == "1 0" and set(got[0]) == {"beta", "x", "y", "dist", "p", "se"}


def test_axis_profile_exact_matches_two_point():
    g = build_box(2, 1)
    p = ModelParams(beta=0.6, q=2)
    d, pr, se = axis_profile(p, g, [1])
    want = np.mean([two_point(p, g, (0, 0), y).value for y in [(1, 0), (-1, 0), (0, 1), (0, -1)]])
    assert pr[0] == pytest.approx(want, rel=1e-12) and se[0] == 0


def test_fit_decay_synthetic():
    n = np.arange(1, 10, dtype=float)
    f = fit_decay(n, np.exp(-0.5 * n))
    assert abs(f.rate - 0.5) < 1e-9 and f.r2 == pytest.approx(1.0)
    f = fit_decay(n, np.exp(1.3 - 0.25 * n), window=(2, 6))
    assert abs(f.rate - 0.25) < 1e-9 and f.intercept == pytest.approx(1.3, abs=1e-9)
    assert f.window == (2.0, 6.0) and f.n_points == 5
    c = fit_decay(n, np.full(n.size, 0.3))
    assert abs(c.rate) < 1e-12


def test_fit_decay_accepts_curve():
    ns = np.array([1.0, 2.0, 3.0])
    curve = RadiusCurve(ns, np.exp(-ns), np.zeros(3), ModelParams(beta=0.1, q=2), 3, "exact")
    assert fit_decay(curve).rate == pytest.approx(1.0, abs=1e-9)


def test_fit_decay_refusals():
    with pytest.raises(ValueError, match="at least 3"):
        fit_decay([1, 2], [0.5, 0.2])
    with pytest.raises(ValueError, match="at least 3"):
        fit_decay([1, 2, 3, 4], [0.5, 0.2, 0.1, 0.05], window=(3, 9))
    with pytest.raises(ValueError, match="nonpositive"):
        fit_decay([1, 2, 3], [0.5, 0.0, 0.1])
    with pytest.raises(ValueError, match="2 SE"):
        fit_decay([1, 2, 3], [0.5, 0.2, 0.01], [0.01, 0.01, 0.006])


def test_first_crossing():
    grid = np.array([0.0, 1.0, 2.0, 3.0])
    assert first_crossing(grid, np.array([-2.0, -1.0, 1.0, 2.0])) == pytest.approx(1.5)
    assert math.isnan(first_crossing(grid, np.array([-2.0, -1.0, -0.5, -0.1])))
    est, pairs = crossing_estimate(grid, np.array([[0.5, 0.4, 0.3], [0.5, 0.45, 0.4],
                                                  [0.5, 0.55, 0.6], [0.5, 0.6, 0.7]]))
    assert pairs == [pytest.approx(1.5), pytest.approx(1.5)] and est == pytest.approx(1.5)


def test_scan_unresolved_below_transition(tmp_path):
    tpl = ModelTemplate(q=1, J=1.0, mode="bernoulli", name="perc")
    s = scan_beta_c([0.1, 0.2, 0.3], tpl, [2, 3], ScanSettings(samples=2000, n_boot=50))
    assert not s.resolved and math.isnan(s.beta_c_hat)
    assert s.verdict()["resolved"] is False and s.verdict()["beta_c_hat"] is None
    s.to_json(tmp_path / "v.json")
    assert json.loads((tmp_path / "v.json").read_text())["resolved"] is False


def test_scan_bernoulli_resolves_and_is_deterministic(tmp_path):
    tpl = ModelTemplate(q=1, J=1.0, mode="bernoulli")
    st = ScanSettings(samples=4000, n_boot=100, seed=4)
    grid = np.linspace(0.4, 1.0, 7)
    a = scan_beta_c(grid, tpl, [2, 4], st)
    assert a.resolved and a.ci_low <= a.beta_c_hat <= a.ci_high
    assert 0.5 < a.beta_c_hat < 0.9
    b = scan_beta_c(grid, tpl, [2, 4], st)
    a.to_csv(tmp_path / "a.csv")
    b.to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert a.verdict() == b.verdict()
    assert not a.monotonicity_violations


def test_scan_chain_model_runs():
    tpl = ModelTemplate(q=2, J=0.5, name="q2")
    s = scan_beta_c([0.5, 1.2], tpl, [1, 2], ScanSettings(burn_in=20, samples=500, batches=10,
                                                         n_boot=20))
    assert s.p.shape == (2, 2) and np.all(s.p[1] > s.p[0])


def test_scan_input_validation():
    tpl = ModelTemplate(q=1, mode="bernoulli")
    with pytest.raises(ValueError):
        scan_beta_c([0.3, 0.2], tpl, [2, 3])
    with pytest.raises(ValueError):
        scan_beta_c([0.2, 0.3], tpl, [3])
