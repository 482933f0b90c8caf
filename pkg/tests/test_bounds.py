import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scquery.bounds import (
    binary_convolution,
    binary_entropy,
    bound_report,
    necessary_for_scenario,
    necessary_omega,
    queries_total,
    s_quantized_uniform,
    sample_size,
    sufficient_S,
)
from scquery.errors import InvalidParams
from scquery.model import Params

# Reference values below were evaluated independently at 30 digits with mpmath.


def test_entropy_values():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == binary_entropy(1.0) == 0.0
    assert binary_entropy(0.11) == pytest.approx(0.499915958164528, rel=1e-12)
    assert binary_convolution(0.3, 0.0) == pytest.approx(0.3)
    with pytest.raises(InvalidParams):
        binary_entropy(1.5)
    with pytest.raises(InvalidParams):
        binary_convolution(-0.1, 0.2)


@given(st.floats(0, 1))
def test_entropy_symmetry(x):
    assert binary_entropy(x) == pytest.approx(binary_entropy(1 - x), abs=1e-12)


@given(st.floats(0, 1), st.floats(0, 1))
def test_convolution_commutes(p, q):
    assert binary_convolution(p, q) == pytest.approx(binary_convolution(q, p), abs=1e-15)


@given(st.floats(0, 0.5), st.floats(0, 1))
def test_convolution_adds_entropy(p, q):
    assert binary_entropy(binary_convolution(p, q)) >= binary_entropy(q) - 1e-12


def test_quantized_threshold_value():
    P = Params(n=2000, k=6, delta=2, q=0.0, epsilon=1.0)
    assert sufficient_S("quantized-uniform", P) == pytest.approx(2643.28363790844664, rel=1e-12)
    assert sufficient_S("unknown-q", P) / sufficient_S("quantized-uniform", P) == pytest.approx(9.0)


def test_direct_thresholds():
    assert sufficient_S("direct-uniform", Params(n=1000, k=6, delta=2)) == pytest.approx(43.0922783153934, rel=1e-12)
    assert sufficient_S("direct-iid", Params(n=1000, k=8, p=0.5)) == pytest.approx(19.9657842846621, rel=1e-12)
    assert sample_size("direct-uniform", Params(n=1000, k=6, delta=2)) == 44


def test_worstcase_threshold():
    P = Params(n=3470, k=5, delta=2)
    assert sufficient_S("worstcase", P, alpha=0.0152) == pytest.approx(642.193933248356, rel=1e-12)
    three = sufficient_S("worstcase-delta2", P, alpha=0.0152)
    assert three == pytest.approx((3 * math.log(5) + math.log(3470)) / 0.0152)
    with pytest.raises(InvalidParams):
        sufficient_S("worstcase", P)
    assert math.isinf(sufficient_S("worstcase", P, alpha=0.0))


def test_disjoint_membership_size():
    P = Params(n=1000, k=5, delta=1, epsilon=1.0)
    assert sufficient_S("direct-disjoint", P, n_min=200) == pytest.approx(5 * (math.log(5) + math.log(1000)))


def test_zero_separation_is_infinite():
    assert math.isinf(sufficient_S("quantized-uniform", Params(n=100, k=4, delta=2)))
    assert math.isinf(s_quantized_uniform(6, 2, 0.5, 100, 1.0))
    assert sample_size("quantized-uniform", Params(n=100, k=4, delta=2)) == 100
    with pytest.raises(InvalidParams):
        sufficient_S("bogus", Params(n=10, k=2, delta=1))


def test_threshold_monotone_in_q():
    vals = [sufficient_S("quantized-uniform", Params(n=2000, k=6, delta=2, q=q)) for q in np.linspace(0, 0.45, 10)]
    assert np.all(np.diff(vals) > 0)


def test_threshold_falls_with_separation():
    # the separation grows with k at fixed delta
    vals = []
    for k in (6, 7, 8, 9):
        sep = math.comb(k - 3, 2) - math.comb(k - 4, 2)
        vals.append((sep, sufficient_S("quantized-uniform", Params(n=2000, k=k, delta=2)) / math.comb(k, 2) ** 2))
    vals.sort()
    assert all(a[1] >= b[1] for a, b in zip(vals, vals[1:]))


def test_query_totals():
    assert queries_total(245, 3470, 5, "full") == 820015
    assert queries_total(44, 1000, 6, "basis") == math.comb(44, 2) + 6 * 956
    assert queries_total(500, 500, 6, "full") == math.comb(500, 2)
    assert queries_total(0, 500, 6, "full") == 0
    with pytest.raises(InvalidParams):
        queries_total(600, 500, 6, "full")


def test_lower_bound_values():
    n = 1000
    assert necessary_omega("uniform", "direct", Params(n=n, k=4, delta=2), 0.0) == pytest.approx(
        2.58496250072115618 * n, rel=1e-12
    )
    got = necessary_omega("iid", "quantized", Params(n=n, k=1, p=0.5), 0.0)
    assert got == pytest.approx(1.23262290680731127 * n, rel=1e-12)


def test_vacuous_lower_bound():
    P = Params(n=100, k=4, p=0.2)
    assert necessary_omega("iid", "direct", P, binary_entropy(0.2)) == 0.0
    assert necessary_omega("iid", "quantized", P, 0.9) == 0.0
    with pytest.raises(InvalidParams):
        necessary_omega("iid", "direct", P, 1.0)


def test_dithered_lower_bound_positive_and_finite():
    v = necessary_omega("uniform", "dithered", Params(n=500, k=6, delta=2, sigma=0.5), 0.01)
    assert 0 < v < math.inf
    v2 = necessary_omega("iid", "dithered", Params(n=500, k=6, p=0.3, sigma=0.5), 0.01)
    assert 0 < v2 < math.inf


def test_scenarios_without_lower_bound():
    assert necessary_for_scenario("worstcase", Params(n=10, k=2, delta=1)) is None
    assert necessary_for_scenario("direct-disjoint", Params(n=10, k=2, delta=1)) is None


def test_report_json():
    rep = bound_report("quantized-uniform", Params(n=2000, k=6, delta=2))
    d = rep.to_dict()
    assert d["omega_sufficient"] == queries_total(2000, 2000, 6, "full")
    assert d["inputs"]["delta_err"] == 0.01
    json.dumps(d)
    inf = bound_report("quantized-uniform", Params(n=100, k=4, delta=2)).to_dict()
    assert inf["s_sufficient"] == "inf" and inf["omega_sufficient"] == "inf"
