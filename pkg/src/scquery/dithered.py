"""Dithered oracle: exact G_l and the matching count-based recovery."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .direct import RecoveryResult, _require, sample_subset
from .errors import DegenerateSeparation, InvalidParams
from .model import Params, binom, overlap_distribution_uniform
from .oracle import DITHERED
from .quantized import HypothesisMeans, finish_uniform, infer_inner_product, query_phase


def q_function(x):
    """Gaussian tail probability P(Z > x)."""
    out = 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class JointOverlapLaw:
    support: dict

    def total(self):
        return sum(self.support.values())


def joint_overlap_law(k, delta, ell) -> JointOverlapLaw:
    """Law of (<A1, A3>, <A2, A3>) given <A1, A2> = ell, all rows uniform of weight delta.

    The k coordinates split into: both A1 and A2 (ell), A1 only, A2 only
    (delta - ell each) and neither (k - 2 delta + ell).
    """
    if not 0 <= ell <= delta <= k:
        raise InvalidParams(f"need 0 <= ell={ell} <= delta={delta} <= k={k}")
    sizes = (ell, delta - ell, delta - ell, k - 2 * delta + ell)
    if sizes[3] < 0:
        raise InvalidParams(f"overlap ell={ell} impossible for k={k}, delta={delta}")
    total = binom(k, delta)
    law = {}
    for a in range(min(sizes[0], delta) + 1):
        for b in range(min(sizes[1], delta - a) + 1):
            for c in range(min(sizes[2], delta - a - b) + 1):
                d = delta - a - b - c
                w = binom(sizes[0], a) * binom(sizes[1], b) * binom(sizes[2], c) * binom(sizes[3], d)
                if w:
                    key = (a + b, a + c)
                    law[key] = law.get(key, 0.0) + w / total
    return JointOverlapLaw(law)


def g_ell(k, delta, sigma, ell):
    """E[Q(u / sigma) Q(v / sigma)] under the joint overlap law."""
    law = joint_overlap_law(k, delta, ell)
    return float(sum(pr * q_function(u / sigma) * q_function(v / sigma) for (u, v), pr in law.support.items()))


def mean_single_q(k, delta, sigma):
    """E[Q(<A1, A2> / sigma)] for independent uniform rows."""
    dist = overlap_distribution_uniform(k, delta)
    return float(np.dot(dist, q_function(np.arange(delta + 1) / sigma)))


def expected_count_dithered(ell, s_size, k, delta, sigma, within=True):
    m = s_size - 2 if within else s_size - 1
    val = 1.0 - 2.0 * mean_single_q(k, delta, sigma) + g_ell(k, delta, sigma, ell)
    return m * val


def dithered_means(s_size, k, delta, sigma, within=True):
    e = [expected_count_dithered(l, s_size, k, delta, sigma, within) for l in range(delta + 1)]
    return HypothesisMeans(np.array(e), "DitheredWithin" if within else "DitheredCross")


def separation(k, delta, sigma):
    return abs(g_ell(k, delta, sigma, 1) - g_ell(k, delta, sigma, 0))


def recover_dithered(oracle, params: Params, s_size, seed) -> RecoveryResult:
    """Uniform-ensemble pipeline with dithered hypothesis means."""
    _require(oracle, DITHERED)
    sigma = oracle.kind.sigma
    k, delta = params.k, params.delta
    if separation(k, delta, sigma) < 1e-12:
        raise DegenerateSeparation(f"|G1 - G0| vanishes for k={k}, delta={delta}, sigma={sigma}")
    rng = np.random.default_rng(seed)
    S, rest = sample_subset(oracle.n, s_size, rng)
    m = S.size
    _, _, T_S, T_C = query_phase(oracle, S, rest)
    L_S = infer_inner_product(T_S, dithered_means(m, k, delta, sigma, True))
    L_C = infer_inner_product(T_C, dithered_means(m, k, delta, sigma, False))
    result = RecoveryResult(None, S, rest, within=L_S, cross=L_C, within_counts=T_S, cross_counts=T_C)
    return finish_uniform(result, params)
