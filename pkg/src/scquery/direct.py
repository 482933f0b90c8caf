"""Recovery from unquantized (direct) responses."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import InvalidInput, RankDeficient, RepresentativesMissing, UnassignedElement
from .factorize import (
    complete_diagonal,
    find_basis_subset,
    real_rank_factorization,
    round_exact,
    solve_membership,
)
from .model import IID, ClusterAssignment, Params
from .oracle import DIRECT


@dataclass
class RecoveryResult:
    """Output of a recovery pipeline plus what the harness needs for scoring.

    ``within`` and ``cross`` hold inferred inner products for S x S and
    rest x S pairs when the pipeline infers them from counts.
    """

    similarity: np.ndarray | None
    sample: np.ndarray
    rest: np.ndarray
    membership: np.ndarray | None = None
    within: np.ndarray | None = None
    cross: np.ndarray | None = None
    within_counts: np.ndarray | None = None
    cross_counts: np.ndarray | None = None
    support_sample: np.ndarray | None = None
    support_rest: np.ndarray | None = None
    notes: dict = field(default_factory=dict)


def sample_subset(n, s_size, rng):
    s = int(min(max(s_size, 0), n))
    S = np.sort(rng.choice(n, size=s, replace=False)) if s < n else np.arange(n)
    rest = np.setdiff1d(np.arange(n), S)
    return S, rest


def _require(oracle, variant):
    if oracle.kind.variant != variant:
        raise InvalidInput(f"expected a {variant} oracle, got {oracle.kind.variant}")


def membership_sample_size(n, n_min, k, epsilon):
    return min(n, max(1, math.ceil((n / n_min) * (math.log(k) + epsilon * math.log(n)))))


def find_membership_disjoint(oracle, n, k, n_min, epsilon, seed) -> ClusterAssignment:
    """Disjoint clusters: classes inside a sample, then one representative test per element."""
    _require(oracle, DIRECT)
    rng = np.random.default_rng(seed)
    m = membership_sample_size(n, n_min, k, epsilon)
    S, rest = sample_subset(n, m, rng)
    Y = oracle.batch_pairwise(S) > 0
    ncomp, labels = connected_components(csr_matrix(Y), directed=False)
    if ncomp < k:
        raise RepresentativesMissing(f"sample of {m} elements hit {ncomp} of {k} clusters")
    if ncomp > k:
        raise RepresentativesMissing(f"sample splits into {ncomp} > k={k} classes")
    reps = np.array([S[labels == c].min() for c in range(ncomp)])
    order = np.argsort(reps)
    reps, members = reps[order], [list(S[labels == c]) for c in order]
    for j in rest.tolist():
        for c in rng.permutation(k).tolist():
            if oracle.query(j, int(reps[c])) > 0:
                members[c].append(j)
                break
        else:
            raise UnassignedElement(f"element {j} matched no representative")
    return ClusterAssignment(members, source="disjoint", n=n)


def find_similarity_direct(oracle, params: Params, s_size, seed, resample=0) -> RecoveryResult:
    """Similarity matrix from a sampled gram, a rank factorization and k queries per element."""
    _require(oracle, DIRECT)
    rng = np.random.default_rng(seed)
    n, k = oracle.n, params.k
    for attempt in range(resample + 1):
        S, rest = sample_subset(n, s_size, rng)
        G = oracle.batch_pairwise(S).astype(np.int64)
        try:
            if params.ensemble == IID:
                d = round_exact(complete_diagonal(G, k, seed=int(rng.integers(2**32))))
            else:
                d = np.full(S.size, params.delta, dtype=np.int64)
            G[np.arange(S.size), np.arange(S.size)] = d
            if rest.size == 0:
                # the whole gram was observed; no basis is needed
                return RecoveryResult(G, S, rest, notes={"basis": []})
            B = real_rank_factorization(G, k, params.tol).rows
            T = find_basis_subset(B, k, params.tol)
            break
        except RankDeficient as exc:
            if attempt == resample:
                raise RankDeficient(str(exc), partial=RecoveryResult(None, S, rest)) from None
    C = oracle.batch_cross(rest, S[T]).astype(float)
    X = solve_membership(B[T], C.T).T
    sim = np.zeros((n, n), dtype=np.int64)
    sim[np.ix_(S, S)] = G
    cross = round_exact(B @ X.T)
    sim[np.ix_(S, rest)] = cross
    sim[np.ix_(rest, S)] = cross.T
    sim[np.ix_(rest, rest)] = round_exact(X @ X.T)
    return RecoveryResult(sim, S, rest, notes={"basis": S[T].tolist()})
