"""Recovery from noisy one-bit responses via triangle-count hypothesis tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .direct import RecoveryResult, _require, sample_subset
from .errors import (
    FactorizationFailed,
    IncompleteData,
    InvalidInput,
    NotApplicable,
    NotPossible,
    ScqError,
)
from .factorize import (
    factorization1,
    factorization2,
    find_basis_subset,
    real_rank_factorization,
    round_exact,
    solve_membership,
)
from .model import Params, binom
from .oracle import QUANTIZED

WITHIN = "within"
CROSS = "cross"
CROSS_EXCL = "cross-excl"


@dataclass(frozen=True)
class HypothesisMeans:
    e: np.ndarray
    regime: str
    labels: np.ndarray | None = None

    def __post_init__(self):
        e = np.asarray(self.e, dtype=float)
        object.__setattr__(self, "e", e)
        if self.labels is None:
            object.__setattr__(self, "labels", np.arange(e.shape[-1]))


@dataclass(frozen=True)
class CountTable:
    pairs: np.ndarray
    counts: np.ndarray
    mode: str
    basis_size: int

    def as_dict(self):
        return {(int(i), int(j)): int(c) for (i, j), c in zip(self.pairs, self.counts)}


# --- hypothesis means --------------------------------------------------------


def _summands(s_size, within):
    return s_size - 2 if within else s_size - 1


def expected_count_uniform(ell, s_size, k, delta, q, within=True):
    """Mean triangle count for a pair with overlap ``ell``, uniform ensemble."""
    total = binom(k, delta)
    base = (1 - q) ** 2 - 2 * (1 - 2 * q) * (1 - q) * binom(k - delta, delta) / total
    ell = np.asarray(ell)
    joint = np.vectorize(lambda l: binom(k - 2 * delta + int(l), delta) / total, otypes=[float])(ell)
    out = _summands(s_size, within) * (base + (1 - 2 * q) ** 2 * joint)
    return float(out) if out.ndim == 0 else out


def uniform_means(s_size, k, delta, q, within=True):
    e = expected_count_uniform(np.arange(delta + 1), s_size, k, delta, q, within)
    return HypothesisMeans(e, "UniformWithin" if within else "UniformCross")


def expected_degree_iid(ell, s_size, q, p, within=True):
    """Mean number of positive answers for an element with support size ``ell``."""
    m = s_size - 1 if within else s_size
    out = m * (1 - q - (1 - 2 * q) * (1 - p) ** np.asarray(ell, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def expected_count_iid(ell, s_size, q, p, w_i, w_j, within=True):
    """Mean triangle count for a pair with support sizes w_i, w_j and overlap ``ell``."""
    ell = np.asarray(ell, dtype=float)
    b = 1 - p
    val = (
        (1 - q) ** 2
        - (1 - q) * (1 - 2 * q) * (b**w_i + b**w_j)
        + (1 - 2 * q) ** 2 * b ** (w_i + w_j - ell)
    )
    out = _summands(s_size, within) * val
    return float(out) if out.ndim == 0 else out


def overlap_range(w_i, w_j, k):
    """Feasible nonzero overlaps of two rows with support sizes w_i and w_j."""
    return max(1, w_i + w_j - k), min(w_i, w_j)


# --- counts ------------------------------------------------------------------


def _as_float(Y):
    return np.asarray(Y, dtype=np.float32)


def within_counts(Y_S):
    """T[a, b] = #{r != a, b : Y[a, r] = Y[b, r] = 1}; Y_S has a zero diagonal."""
    Y = _as_float(Y_S)
    T = np.rint(Y @ Y).astype(np.int64)
    np.fill_diagonal(T, 0)
    return T


def cross_counts(Y_cross, Y_S, exclude_first=False):
    """T[j, a] = #{r in S, r != a : Y[j, r] = Y[a, r] = 1}.

    With ``exclude_first`` the smallest-position element of S other than a is
    also left out, so every count sums |S| - 2 indicators.
    """
    Yc, Ys = _as_float(Y_cross), _as_float(Y_S)
    T = np.rint(Yc @ Ys).astype(np.int64)
    if exclude_first and Ys.shape[0] >= 2:
        x = np.zeros(Ys.shape[0], dtype=np.int64)
        x[0] = 1
        T -= (Y_cross[:, x].astype(np.int64) * Y_S[np.arange(Ys.shape[0]), x].astype(np.int64)[None, :])
    return T


def triangle_counts(responses, S, pair_mode, pairs):
    """Counts for explicit pairs from a dense response table (-1 marks missing).

    ``pair_mode`` is ``within`` (r in S minus {i, j}), ``cross`` (r in S minus
    {i}) or ``cross-excl`` (r in S minus {i, x}, x the smallest element of S
    other than i). Pairs are (i, j) with i in S.
    """
    R = np.asarray(responses)
    S = np.asarray(sorted(int(s) for s in S))
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    out = np.empty(len(pairs), dtype=np.int64)
    for idx, (i, j) in enumerate(pairs.tolist()):
        if pair_mode == WITHIN:
            others = S[(S != i) & (S != j)]
        elif pair_mode == CROSS:
            others = S[S != i]
        elif pair_mode == CROSS_EXCL:
            cand = S[S != i]
            others = cand[1:]
        else:
            raise InvalidInput(f"unknown pair mode {pair_mode!r}")
        others = others[others != j]
        yi, yj = R[i, others], R[j, others]
        if np.any(yi < 0) or np.any(yj < 0):
            raise IncompleteData(f"missing responses for pair ({i}, {j})")
        out[idx] = int(np.sum((yi == 1) & (yj == 1)))
    return CountTable(pairs, out, pair_mode, len(S))


def infer_inner_product(T, means: HypothesisMeans):
    """Nearest-mean decision; exact ties go to the smaller hypothesis."""
    T = np.asarray(T, dtype=float)
    e = means.e
    if e.ndim == 1:
        d = np.abs(T[..., None] - e)
        return means.labels[np.argmin(d, axis=-1)]
    d = np.abs(T[..., None] - e)
    return np.take_along_axis(means.labels, np.argmin(d, axis=-1)[..., None], axis=-1)[..., 0]


# --- shared skeleton ---------------------------------------------------------


def query_phase(oracle, S, rest, exclude_first=False):
    """All S x S and rest x S queries plus their triangle counts."""
    Y_S = oracle.batch_pairwise(S)
    Y_C = oracle.batch_cross(rest, S)
    return Y_S, Y_C, within_counts(Y_S), cross_counts(Y_C, Y_S, exclude_first)


def _fail(exc_type, msg, result):
    raise exc_type(msg, partial=result)


def finish_uniform(result: RecoveryResult, params: Params):
    """Binary factor of the inferred S-gram, then rest rows solved on a basis."""
    k, delta = params.k, params.delta
    L_S, L_C = result.within.copy(), result.cross
    np.fill_diagonal(L_S, delta)
    try:
        A_S = factorization1(L_S, k, delta, params.tol, params.node_budget).entries.astype(np.int64)
        T = find_basis_subset(A_S.astype(float), k)
        X = round_exact(solve_membership(A_S[T].astype(float), L_C[:, T].T.astype(float)).T)
    except ScqError as exc:
        raise type(exc)(str(exc), partial=result) from None
    if X.size and (X.min() < 0 or X.max() > 1 or np.any(X.sum(axis=1) != delta)):
        _fail(FactorizationFailed, "solved membership is not a weight-delta bit vector", result)
    n = result.sample.size + result.rest.size
    A = np.zeros((n, k), dtype=np.int64)
    A[result.sample] = A_S
    A[result.rest] = X
    result.membership = A.astype(np.uint8)
    result.similarity = A @ A.T
    result.notes["cross_inconsistent"] = int(np.count_nonzero(X @ A_S.T != L_C))
    return result


# --- uniform ensemble, known q ---------------------------------------------


def recover_uniform_quantized(oracle, params: Params, s_size, seed) -> RecoveryResult:
    _require(oracle, QUANTIZED)
    rng = np.random.default_rng(seed)
    q = oracle.kind.q
    S, rest = sample_subset(oracle.n, s_size, rng)
    m = S.size
    _, _, T_S, T_C = query_phase(oracle, S, rest)
    L_S = infer_inner_product(T_S, uniform_means(m, params.k, params.delta, q, True))
    L_C = infer_inner_product(T_C, uniform_means(m, params.k, params.delta, q, False))
    result = RecoveryResult(None, S, rest, within=L_S, cross=L_C, within_counts=T_S, cross_counts=T_C)
    return finish_uniform(result, params)


# --- unknown q ------------------------------------------------------------------


@dataclass(frozen=True)
class CountGrouping:
    lows: np.ndarray
    highs: np.ndarray

    def label(self, counts):
        return np.searchsorted(self.lows, np.asarray(counts), side="right") - 1

    @property
    def max_diameter(self):
        return float(np.max(self.highs - self.lows))

    @property
    def min_gap(self):
        return float(np.min(self.lows[1:] - self.highs[:-1])) if self.lows.size > 1 else np.inf


def group_counts(all_counts, delta) -> CountGrouping:
    """Split counts into delta+1 groups, cutting at the delta largest gaps.

    The grouping is accepted only if every group's diameter is strictly below
    every gap between neighbouring groups.
    """
    v = np.unique(np.asarray(all_counts).ravel())
    if v.size < delta + 1:
        raise NotPossible(f"{v.size} distinct counts cannot form {delta + 1} groups")
    gaps = np.diff(v)
    # largest gaps first; equal gaps resolved by position
    cut = np.sort(np.lexsort((np.arange(gaps.size), -gaps))[:delta])
    lows = np.concatenate([[v[0]], v[cut + 1]])
    highs = np.concatenate([v[cut], [v[-1]]])
    grouping = CountGrouping(lows, highs)
    if delta > 0 and not grouping.max_diameter < grouping.min_gap:
        raise NotPossible(
            f"largest group diameter {grouping.max_diameter} is not below smallest gap {grouping.min_gap}"
        )
    return grouping


def recover_unknown_q(oracle, params: Params, s_size, seed) -> RecoveryResult:
    """Parameter-free variant: the noise level is never read."""
    _require(oracle, QUANTIZED)
    rng = np.random.default_rng(seed)
    k, delta = params.k, params.delta
    S, rest = sample_subset(oracle.n, s_size, rng)
    m = S.size
    _, _, T_S, T_C = query_phase(oracle, S, rest, exclude_first=True)
    iu = np.triu_indices(m, k=1)
    result = RecoveryResult(None, S, rest, within_counts=T_S, cross_counts=T_C)
    try:
        grouping = group_counts(np.concatenate([T_S[iu], T_C.ravel()]), delta)
    except NotPossible as exc:
        raise NotPossible(str(exc), partial=result) from None
    result.notes["grouping"] = {"lows": grouping.lows.tolist(), "highs": grouping.highs.tolist()}
    L_S = grouping.label(T_S)
    np.fill_diagonal(L_S, delta)
    L_C = grouping.label(T_C)
    result.within, result.cross = L_S, L_C
    try:
        B = real_rank_factorization(L_S, k, params.tol).rows
        T = find_basis_subset(B, k, params.tol)
        X = solve_membership(B[T], L_C[:, T].T.astype(float)).T
        cross = round_exact(B @ X.T)
        rr = round_exact(X @ X.T)
    except ScqError as exc:
        raise type(exc)(str(exc), partial=result) from None
    n = oracle.n
    sim = np.zeros((n, n), dtype=np.int64)
    sim[np.ix_(S, S)] = L_S
    sim[np.ix_(S, rest)] = cross
    sim[np.ix_(rest, S)] = cross.T
    sim[np.ix_(rest, rest)] = rr
    result.similarity = sim
    return result


# --- i.i.d. ensemble -------------------------------------------------------------


def infer_support_size(T, s_size, k, q, p, within=True):
    e = expected_degree_iid(np.arange(k + 1), s_size, q, p, within)
    return infer_inner_product(T, HypothesisMeans(e, "SupportSizeWithin" if within else "SupportSizeCross"))


def infer_intersections_iid(T, Y, w_a, w_b, s_size, k, q, p, within, trust_zero=True):
    """Overlaps for a block of pairs; rows carry support sizes w_a, columns w_b.

    Returns (overlaps, conflicts) where conflicts counts positive answers whose
    feasible overlap range is empty.
    """
    out = np.zeros(T.shape, dtype=np.int64)
    conflicts = 0
    wa_vals = np.unique(w_a)
    wb_vals = np.unique(w_b)
    for wa in wa_vals.tolist():
        rows = w_a == wa
        for wb in wb_vals.tolist():
            block = rows[:, None] & (w_b == wb)[None, :]
            lo, hi = overlap_range(wa, wb, k)
            if trust_zero:
                active = block & (Y > 0)
            else:
                active = block
            if not active.any():
                continue
            if hi < lo:
                if trust_zero:
                    conflicts += int(active.sum())
                continue
            ells = np.arange(lo, hi + 1)
            e = expected_count_iid(ells, s_size, q, p, wa, wb, within)
            if not trust_zero:
                ells = np.concatenate([[0], ells])
                e = np.concatenate([[expected_count_iid(0, s_size, q, p, wa, wb, within)], e])
            out[active] = infer_inner_product(T[active], HypothesisMeans(e, "IID", labels=ells))
    return out, conflicts


def recover_iid_quantized(oracle, params: Params, s_size, seed, trust_zero=True) -> RecoveryResult:
    """Support sizes first, then overlaps tested against support-dependent means."""
    _require(oracle, QUANTIZED)
    rng = np.random.default_rng(seed)
    q, p, k = oracle.kind.q, params.p, params.k
    S, rest = sample_subset(oracle.n, s_size, rng)
    m = S.size
    Y_S, Y_C, T_S, T_C = query_phase(oracle, S, rest)
    w_S = infer_support_size(Y_S.sum(axis=1), m, k, q, p, within=True)
    w_R = infer_support_size(Y_C.sum(axis=1), m, k, q, p, within=False)
    L_S, c1 = infer_intersections_iid(T_S, Y_S, w_S, w_S, m, k, q, p, True, trust_zero)
    L_S = np.triu(L_S, 1)
    L_S = L_S + L_S.T
    L_S[np.arange(m), np.arange(m)] = w_S
    L_C, c2 = infer_intersections_iid(T_C, Y_C, w_R, w_S, m, k, q, p, False, trust_zero)
    result = RecoveryResult(
        None, S, rest, within=L_S, cross=L_C, within_counts=T_S, cross_counts=T_C,
        support_sample=w_S, support_rest=w_R,
    )
    result.notes["conflicts"] = c1 // 2 + c2
    try:
        try:
            A_S = factorization2(L_S, k).entries.astype(np.int64)
            result.notes["extraction"] = "unit-rows"
        except NotApplicable:
            A_S = None
            result.notes["extraction"] = "real-basis"
        if A_S is not None:
            T = find_basis_subset(A_S.astype(float), k)
            X = round_exact(solve_membership(A_S[T].astype(float), L_C[:, T].T.astype(float)).T)
            if X.size and (X.min() < 0 or X.max() > 1):
                raise FactorizationFailed("solved membership is not a bit vector")
            if np.any(X.sum(axis=1) != w_R):
                raise FactorizationFailed("solved membership disagrees with inferred support size")
            n = oracle.n
            A = np.zeros((n, k), dtype=np.int64)
            A[S] = A_S
            A[rest] = X
            result.membership = A.astype(np.uint8)
            result.similarity = A @ A.T
            return result
        B = real_rank_factorization(L_S, k, params.tol).rows
        T = find_basis_subset(B, k, params.tol)
        X = solve_membership(B[T], L_C[:, T].T.astype(float)).T
        cross = round_exact(B @ X.T)
        rr = round_exact(X @ X.T)
        if np.any(np.diag(rr) != w_R):
            raise FactorizationFailed("solved membership disagrees with inferred support size")
    except ScqError as exc:
        raise type(exc)(str(exc), partial=result) from None
    n = oracle.n
    sim = np.zeros((n, n), dtype=np.int64)
    sim[np.ix_(S, S)] = L_S
    sim[np.ix_(S, rest)] = cross
    sim[np.ix_(rest, S)] = cross.T
    sim[np.ix_(rest, rest)] = rr
    result.similarity = sim
    return result
