import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcm.field import (
    Couplings,
    ExternalField,
    IncompatibleFieldError,
    ModelParams,
    check_compatibility,
    couplings_leq,
    field_leq,
    l1_norm,
    load_field_document,
    q_max,
    require_compatible,
)
from rcm.lattice import build_box


def one_site(*h):
    return ExternalField(q=len(h), values={(0, 0): h})


@pytest.mark.parametrize("h, expected", [
    ((1.0, 1.0), {1, 2}),
    ((0.3, 0.7), {2}),
    ((0.0, 0.0, 5.0), {3}),
])
def test_q_max(h, expected):
    assert q_max(one_site(*h), (0, 0)) == expected


def test_q_max_tie_needs_identical_bits():
    assert q_max(one_site(0.1 + 0.2, 0.3), (0, 0)) == {1}


@settings(max_examples=60)
@given(st.lists(st.integers(-5, 5), min_size=2, max_size=5), st.integers(-100, 100))
def test_q_max_shift_invariant(h, c):
    # integer-valued entries keep the shifted comparison exact
    a = one_site(*map(float, h))
    b = one_site(*(float(x + c) for x in h))
    assert q_max(a, (0, 0)) == q_max(b, (0, 0))


def test_compatibility_examples():
    sites = [(0, 0), (1, 0)]
    ok, common = check_compatibility(ExternalField.zero(3), sites)
    assert ok and common == {1, 2, 3}
    f = ExternalField(2, {(0, 0): (1, 0), (1, 0): (1, 0)})
    assert check_compatibility(f, sites) == (True, frozenset({1}))
    g = ExternalField(2, {(0, 0): (1, 0), (1, 0): (0, 1)})
    ok, common = check_compatibility(g, sites)
    assert not ok and common == frozenset()
    with pytest.raises(IncompatibleFieldError, match=r"\(0, 0\).*\(1, 0\)"):
        require_compatible(g, sites)


def test_compatibility_without_a_bad_pair():
    f = ExternalField(3, {(0, 0): (1, 1, 0), (1, 0): (0, 1, 1), (2, 0): (1, 0, 1)})
    with pytest.raises(IncompatibleFieldError, match="earlier sites"):
        require_compatible(f, [(0, 0), (1, 0), (2, 0)])


def test_maxwired_model_refuses_incompatible_field():
    from rcm.measure import enumerate_measure
    g = build_box(2, 0)
    vals = {v: (1.0, 0.0) for v in g.all_vertices}
    vals[(1, 0)] = (0.0, 1.0)
    p = ModelParams(beta=1.0, q=2, field=ExternalField(2, vals), bc="maxwired")
    with pytest.raises(IncompatibleFieldError):
        enumerate_measure(p, g)


def test_field_order_examples():
    h = ExternalField(2, {(0, 0): (0.7, 0.2), (1, 0): (0.5, 0.5)})
    assert field_leq(h, h)
    for eps in (0.1, 0.5, 0.99):
        assert field_leq(h.scaled(eps), h)
    assert not field_leq(one_site(1.0, 0.0), one_site(0.0, 1.0))
    # zero field is below everything in the default reading, not in strict mode
    assert field_leq(ExternalField.zero(2), one_site(0.0, 1.0))
    assert not field_leq(ExternalField.zero(2), one_site(0.0, 1.0), strict=True)


def test_field_order_domain_mismatch():
    a = ExternalField(2, {(0, 0): (1, 0)})
    b = ExternalField(2, {(1, 0): (1, 0)})
    with pytest.raises(ValueError):
        field_leq(a, b)
    with pytest.raises(ValueError):
        field_leq(a, ExternalField(3, {(0, 0): (1, 0, 0)}))


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 4))
def test_field_order_is_a_preorder(seed, q):
    rng = np.random.default_rng(seed)
    sites = [(0, 0), (1, 0)]

    def draw():
        return ExternalField(q, {s: tuple(rng.integers(-2, 3, q).astype(float)) for s in sites})

    for _ in range(10):
        a, b, c = draw(), draw(), draw()
        assert field_leq(a, a)
        if field_leq(a, b) and field_leq(b, c):
            assert field_leq(a, c)
        # a chain built by scaling always composes
        pos = ExternalField(q, {s: tuple(rng.random(q)) for s in sites})
        assert field_leq(pos.scaled(0.2), pos.scaled(0.6)) and field_leq(pos.scaled(0.6), pos)
        assert field_leq(pos.scaled(0.2), pos)


def test_l1_norm_examples():
    assert l1_norm(ExternalField.zero(2)) == 0
    assert l1_norm(one_site(1.0, 2.0)) == 3
    f = ExternalField(2, {(0, 0): (0.5, 0.5), (1, 0): (0.5, 0.5)})
    assert l1_norm(f) == 2.0


@settings(max_examples=50)
@given(st.lists(st.floats(-10, 10), min_size=4, max_size=4), st.floats(-5, 5))
def test_l1_norm_homogeneous(vals, c):
    f = ExternalField(2, {(0, 0): vals[:2], (1, 0): vals[2:]})
    assert l1_norm(f.scaled(c)) == pytest.approx(abs(c) * l1_norm(f), rel=1e-12, abs=1e-12)


def test_couplings_order():
    one, two = Couplings(uniform=1.0), Couplings(uniform=2.0)
    assert couplings_leq(one, one)
    assert couplings_leq(one, two)
    assert not couplings_leq(two, one)
    e1 = frozenset({(0, 0), (1, 0)})
    e2 = frozenset({(0, 0), (0, 1)})
    a = Couplings.from_edges({e1: 1.0, e2: 2.0})
    b = Couplings.from_edges({e1: 2.0, e2: 1.0})
    assert not couplings_leq(a, b) and not couplings_leq(b, a)
    with pytest.raises(ValueError):
        couplings_leq(a, Couplings.from_edges({e1: 1.0}))


def test_negative_coupling_rejected():
    with pytest.raises(ValueError):
        Couplings(uniform=-1.0)


def test_positive_flag_is_checked():
    with pytest.raises(ValueError):
        ExternalField(2, {(0, 0): (1.0, 0.0)}, summable_positive=True)
    ExternalField(2, {(0, 0): (1.0, 0.1)}, summable_positive=True)


def test_unpadded_field_refuses_missing_sites():
    f = ExternalField(2, {(0, 0): (1.0, 0.0)})
    with pytest.raises(KeyError):
        f.array_for(build_box(2, 0))
    padded = ExternalField(2, {(0, 0): (1.0, 0.0)}, padded=True)
    arr = padded.array_for(build_box(2, 0))
    assert arr.shape == (5, 2) and arr[0, 0] == 1.0 and arr[1:].sum() == 0


def test_model_params_validation():
    with pytest.raises(ValueError):
        ModelParams(beta=-0.1, q=2)
    with pytest.raises(ValueError):
        ModelParams(beta=1.0, q=1)
    ModelParams(beta=1.0, q=1, mode="bernoulli")
    with pytest.raises(ValueError):
        ModelParams(beta=1.0, q=2, bc="wired")
    with pytest.raises(ValueError):
        ModelParams(beta=1.0, q=3, field=ExternalField.zero(2))


def test_load_field_document(tmp_path):
    doc = {
        "q": 2,
        "sites": [{"coords": [0, 0], "h": [0.25, 0.1]}, {"coords": [1, 0], "h": [0.5, 0]}],
        "couplings": [{"edge": [[0, 0], [1, 0]], "J": 1.5}],
    }
    path = tmp_path / "field.json"
    path.write_text(json.dumps(doc))
    f, J = load_field_document(path)
    assert f.at((0, 0)) == (0.25, 0.1)
    assert J.value((1, 0), (0, 0)) == 1.5
    f2, J2 = load_field_document({"q": 3, "sites": [], "padded": True, "couplings": {"uniform": 2}})
    assert f2.at((9, 9)) == (0.0, 0.0, 0.0) and J2.uniform == 2.0


@pytest.mark.parametrize("doc, msg", [
    ({"sites": []}, "missing key 'q'"),
    ({"q": 2, "sites": [{"coords": [0, 0], "h": [1.0]}]}, "expected q=2"),
    ({"q": 2, "sites": [{"h": [1.0, 0]}]}, r"sites\[0\]"),
    ({"q": 2, "couplings": "strong"}, "couplings"),
])
def test_load_field_document_errors(doc, msg):
    with pytest.raises(ValueError, match=msg):
        load_field_document(doc)
