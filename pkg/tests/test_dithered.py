import numpy as np
import pytest
from scipy.integrate import quad

from scquery.dithered import (
    dithered_means,
    expected_count_dithered,
    g_ell,
    joint_overlap_law,
    mean_single_q,
    q_function,
    recover_dithered,
    separation,
)
from scquery.errors import DegenerateSeparation, InvalidInput, InvalidParams
from scquery.model import Params, binom, gram, overlap_distribution_uniform, sample_uniform
from scquery.oracle import OracleHandle, OracleKind
from scquery.quantized import expected_count_uniform


def test_q_function_values():
    assert q_function(0.0) == 0.5
    for x in (0.5, 1.0, 2.0):
        assert q_function(x) + q_function(-x) == pytest.approx(1.0, abs=1e-15)
    ref, _ = quad(lambda t: np.exp(-t * t / 2) / np.sqrt(2 * np.pi), 1.0, np.inf)
    assert abs(q_function(1.0) - ref) < 1e-9
    assert abs(q_function(1.0) - 0.158655) < 1e-6


def test_joint_law_degenerate_cases():
    law = joint_overlap_law(3, 3, 3)
    assert law.support == {(3, 3): pytest.approx(1.0)}
    law = joint_overlap_law(4, 2, 2)
    marg = overlap_distribution_uniform(4, 2)
    assert set(law.support) == {(u, u) for u in range(3)}
    for (u, _), pr in law.support.items():
        assert pr == pytest.approx(marg[u])
    with pytest.raises(InvalidParams):
        joint_overlap_law(4, 2, 3)
    with pytest.raises(InvalidParams):
        joint_overlap_law(4, 3, 0)


@pytest.mark.parametrize("k,delta", [(6, 2), (7, 3), (9, 3)])
def test_joint_law_sums_to_one(k, delta):
    for ell in range(delta + 1):
        if k - 2 * delta + ell >= 0:
            assert joint_overlap_law(k, delta, ell).total() == pytest.approx(1.0)


def test_joint_law_monte_carlo():
    k, delta, ell, N = 6, 2, 1, 100_000
    a1 = np.array([1, 1, 0, 0, 0, 0])
    a2 = np.array([1, 0, 1, 0, 0, 0])
    A3 = sample_uniform(Params(n=N, k=k, delta=delta), 3).entries.astype(int)
    u, v = A3 @ a1, A3 @ a2
    law = joint_overlap_law(k, delta, ell).support
    for uu in range(delta + 1):
        for vv in range(delta + 1):
            p = law.get((uu, vv), 0.0)
            emp = np.mean((u == uu) & (v == vv))
            assert abs(emp - p) <= 3 * np.sqrt(p * (1 - p) / N) + 1e-12


def test_g_ell_limits():
    assert g_ell(6, 2, 1e9, 1) == pytest.approx(0.25, abs=1e-8)
    assert g_ell(3, 3, 0.8, 3) == pytest.approx(q_function(3 / 0.8) ** 2)


@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
def test_g_ell_against_simulation(sigma):
    k, delta, N = 6, 2, 1_000_000
    rng = np.random.default_rng(int(sigma * 10))
    for ell, (a1, a2) in {0: ([0, 1], [2, 3]), 1: ([0, 1], [0, 2])}.items():
        cols = np.argsort(rng.random((N, k)), axis=1)[:, :delta]
        u = np.isin(cols, a1).sum(axis=1)
        v = np.isin(cols, a2).sum(axis=1)
        mc = np.mean(q_function(u / sigma) * q_function(v / sigma))
        assert abs(mc - g_ell(k, delta, sigma, ell)) < 1e-2
        assert abs(mc - g_ell(k, delta, sigma, ell)) < 4 * 0.25 / np.sqrt(N) * 4


@pytest.mark.parametrize("sigma", [1e-3, 0.05, 0.3, 1.0, 5.0])
@pytest.mark.parametrize("within", [True, False])
def test_expected_counts_stay_in_range(sigma, within):
    s, k, delta = 200, 6, 2
    top = s - 2 if within else s - 1
    e = dithered_means(s, k, delta, sigma, within).e
    assert np.all(e >= 0) and np.all(e <= top)


def test_minus_sign_variant_leaves_range():
    # a minus sign on the joint term, 1 - 2E[Q] - E[QQ], goes negative for small sigma
    s, k, delta, sigma = 200, 6, 2, 1e-3
    minus = (s - 2) * (1 - 2 * mean_single_q(k, delta, sigma) - g_ell(k, delta, sigma, 0))
    plus = expected_count_dithered(0, s, k, delta, sigma)
    assert plus >= 0
    assert minus < plus


def test_means_increase_with_overlap():
    e = dithered_means(300, 6, 2, 1.0).e
    assert np.all(np.diff(e) > 0)


def test_small_sigma_limit_closed_form():
    s, k, delta = 120, 6, 2
    a = binom(k - delta, delta) / binom(k, delta)
    for ell in range(delta + 1):
        b = binom(k - 2 * delta + ell, delta) / binom(k, delta)
        got = expected_count_dithered(ell, s, k, delta, 1e-6)
        assert got == pytest.approx((s - 2) * (1 - a + b / 4), abs=1e-6)
        # the noiseless quantized mean differs because zero overlaps answer a fair coin
        assert abs(got - expected_count_uniform(ell, s, k, delta, 0.0)) > 1


def test_degenerate_separation_rejected():
    assert separation(6, 2, 1e6) < 1e-12
    A = sample_uniform(Params(n=50, k=6, delta=2), 0)
    o = OracleHandle(A, OracleKind.dithered(1e6), 0)
    with pytest.raises(DegenerateSeparation):
        recover_dithered(o, Params(n=50, k=6, delta=2, sigma=1e6), 50, 0)


def test_dithered_recovery_when_well_separated():
    # zero overlaps answer a fair coin, so counts stay noisy; a wide gap needs a large sample
    P = Params(n=4000, k=2, delta=1, sigma=0.3)
    A = sample_uniform(P, 1)
    o = OracleHandle(A, OracleKind.dithered(0.3), 1)
    r = recover_dithered(o, P, 3500, 0)
    assert np.array_equal(r.similarity, gram(A))
    assert o.ledger_size() == 3500 * 3499 // 2 + 3500 * 500


def test_wrong_oracle_rejected(animals):
    o = OracleHandle(animals, OracleKind.quantized(0.0))
    with pytest.raises(InvalidInput):
        recover_dithered(o, Params(n=7, k=4, delta=2), 7, 0)
