"""Noiseless worst-case recovery through maximal-clique edge covers."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .direct import RecoveryResult, sample_subset
from .errors import BudgetExceeded, CoverNotFound, IncompleteData, InvalidInput, UnassignedElement
from .model import ClusterAssignment, ClusteringMatrix
from .oracle import QUANTIZED


@dataclass(frozen=True)
class SimilarityGraph:
    vertices: np.ndarray
    adjacency: np.ndarray

    @property
    def edges(self):
        a, b = np.nonzero(np.triu(self.adjacency, 1))
        return [(int(self.vertices[x]), int(self.vertices[y])) for x, y in zip(a, b)]


def build_graph(responses, S) -> SimilarityGraph:
    """Edge between two sampled elements iff their answer is 1.

    ``responses`` is the |S|x|S| answer table of S in the given order;
    negative entries mark missing answers.
    """
    R = np.asarray(responses)
    S = np.asarray(S, dtype=np.int64)
    if R.shape != (S.size, S.size):
        raise InvalidInput("response table must be |S| x |S|")
    off = ~np.eye(S.size, dtype=bool)
    if np.any(R[off] < 0):
        raise IncompleteData("missing responses inside S")
    adj = (R == 1) & off
    if not np.array_equal(adj, adj.T):
        raise InvalidInput("responses are not symmetric")
    return SimilarityGraph(S, adj)


def _twin_classes(adj):
    """Vertices with equal closed neighbourhoods; each maximal clique takes all or none."""
    closed = adj | np.eye(adj.shape[0], dtype=bool)
    _, first, inverse = np.unique(closed, axis=0, return_index=True, return_inverse=True)
    order = np.argsort(first)
    relabel = np.empty_like(order)
    relabel[order] = np.arange(order.size)
    labels = relabel[inverse.ravel()]
    classes = [np.flatnonzero(labels == c) for c in range(order.size)]
    reps = np.array([c[0] for c in classes], dtype=np.int64)
    return classes, reps


def _bron_kerbosch(nbrs, budget):
    """Maximal cliques of a graph given as bitset neighbourhoods (Tomita pivoting)."""
    out = []
    calls = 0

    def rec(R, P, X):
        nonlocal calls
        calls += 1
        if calls > budget:
            raise BudgetExceeded(f"clique enumeration exceeded {budget} calls")
        if not P and not X:
            out.append(R)
            return
        PX = P | X
        pivot = max(_bits(PX), key=lambda u: (P & nbrs[u]).bit_count())
        for v in _bits(P & ~nbrs[pivot]):
            rec(R | (1 << v), P & nbrs[v], X & nbrs[v])
            P &= ~(1 << v)
            X |= 1 << v

    rec(0, (1 << len(nbrs)) - 1, 0)
    return out


def _bits(x):
    out = []
    while x:
        low = x & -x
        out.append(low.bit_length() - 1)
        x ^= low
    return out


def maximal_cliques(graph: SimilarityGraph, budget=1_000_000):
    """All maximal cliques as sorted tuples of element ids."""
    m = graph.vertices.size
    if m == 0:
        return []
    classes, reps = _twin_classes(graph.adjacency)
    sub = graph.adjacency[np.ix_(reps, reps)]
    nbrs = [sum(1 << int(u) for u in np.flatnonzero(row)) for row in sub]
    found = _bron_kerbosch(nbrs, budget)
    cliques = []
    for mask in found:
        members = np.concatenate([classes[c] for c in _bits(mask)])
        cliques.append(tuple(sorted(int(graph.vertices[x]) for x in members)))
    return sorted(cliques)


def clique_cover_clusters(cliques, graph: SimilarityGraph, k, delta2_mode=False, budget=200_000):
    """Exactly k maximal cliques covering every vertex and edge of the graph.

    Search branches over cliques containing the least-covered uncovered item,
    trying the clique with the most uncovered edges first. In ``delta2_mode``
    no vertex may lie in three chosen cliques. Returns (clusters, unique) where
    ``unique`` is False if a second valid cover was seen within the budget.
    """
    pos = {int(v): i for i, v in enumerate(graph.vertices)}
    classes, reps = _twin_classes(graph.adjacency)
    class_of = np.empty(graph.vertices.size, dtype=np.int64)
    for c, members in enumerate(classes):
        class_of[members] = c
    m = len(classes)
    cl = [frozenset(int(class_of[pos[v]]) for v in c) for c in cliques]
    if any(len(c) == 0 for c in cl):
        raise InvalidInput("empty clique")
    # twins share every clique, so the search runs on one vertex per class
    adj = graph.adjacency[np.ix_(reps, reps)]
    ea, eb = np.nonzero(np.triu(adj, 1))
    items = [("v", i) for i in range(m)] + [("e", a, b) for a, b in zip(ea.tolist(), eb.tolist())]
    item_index = {it: idx for idx, it in enumerate(items)}
    covers = []
    for c in cl:
        bits = 0
        for v in c:
            bits |= 1 << item_index[("v", v)]
        for a, b in combinations(sorted(c), 2):
            if adj[a, b]:
                bits |= 1 << item_index[("e", a, b)]
        covers.append(bits)
    full = (1 << len(items)) - 1
    n_items = len(items)
    holders = [[] for _ in range(n_items)]
    for ci, bits in enumerate(covers):
        for it in _bits(bits):
            holders[it].append(ci)
    for it in range(n_items):
        if not holders[it]:
            raise CoverNotFound(f"item {items[it]} lies in no clique")
    edge_mask = full & ~((1 << m) - 1)
    solutions = []
    nodes = 0

    def rec(chosen, covered, load, banned):
        nonlocal nodes
        nodes += 1
        if nodes > budget:
            raise BudgetExceeded("cover search budget exhausted")
        if covered == full:
            if len(chosen) == k and frozenset(chosen) not in solutions:
                solutions.append(frozenset(chosen))
            return len(solutions) >= 2
        if len(chosen) >= k:
            return False
        uncovered = _bits(full & ~covered)
        target = min(uncovered, key=lambda it: (len(holders[it]), it))
        opts = sorted(
            (ci for ci in holders[target] if ci not in banned),
            key=lambda ci: (-((covers[ci] & ~covered) & edge_mask).bit_count(), sorted(cl[ci])),
        )
        # covers using an earlier sibling were all explored in its subtree
        banned = set(banned)
        for ci in opts:
            new_load = load
            if delta2_mode:
                new_load = dict(load)
                bad = False
                for v in cl[ci]:
                    new_load[v] = new_load.get(v, 0) + 1
                    if new_load[v] >= 3:
                        bad = True
                        break
                if bad:
                    banned.add(ci)
                    continue
            if rec(chosen + [ci], covered | covers[ci], new_load, banned):
                return True
            banned.add(ci)
        return False

    try:
        rec([], 0, {}, set())
    except BudgetExceeded:
        if not solutions:
            raise CoverNotFound("cover search budget exhausted") from None
    if not solutions:
        raise CoverNotFound(f"no cover by exactly {k} maximal cliques")
    first = solutions[0]
    clusters = sorted(
        tuple(sorted(int(graph.vertices[x]) for c in cl[ci] for x in classes[c])) for ci in first
    )
    return clusters, len(solutions) == 1


def assign_remaining(oracle, cluster_cliques, remaining, S, n=None) -> ClusterAssignment:
    """Each remaining element joins every cluster whose whole clique answers 1."""
    S = np.asarray(S, dtype=np.int64)
    remaining = np.asarray(remaining, dtype=np.int64)
    pos = {int(v): i for i, v in enumerate(S)}
    Y = oracle.batch_cross(remaining, S) if remaining.size else np.zeros((0, S.size), dtype=np.int16)
    members = [list(c) for c in cluster_cliques]
    hit = np.zeros((remaining.size, len(members)), dtype=bool)
    for c, clique in enumerate(cluster_cliques):
        idx = [pos[v] for v in clique]
        hit[:, c] = np.all(Y[:, idx] == 1, axis=1)
    for c in range(len(members)):
        members[c].extend(remaining[hit[:, c]].tolist())
    assignment = ClusterAssignment(members, n=n if n is not None else oracle.n)
    lost = remaining[~hit.any(axis=1)]
    if lost.size:
        raise UnassignedElement(f"{lost.size} elements match no cluster", partial=assignment)
    return assignment


def exclusive_counts(A):
    a = np.asarray(A.entries if isinstance(A, ClusteringMatrix) else A, dtype=bool)
    return np.array([int(np.sum(a[:, i] & (a.sum(axis=1) == 1))) for i in range(a.shape[1])])


def verify_separation(truth, mode="general"):
    """Smallest exclusive mass over clusters (or cluster triplets when mode='delta2'), over n."""
    if isinstance(truth, ClusterAssignment):
        truth = truth.to_matrix()
    a = np.asarray(truth.entries if isinstance(truth, ClusteringMatrix) else truth, dtype=bool)
    n, k = a.shape
    if n == 0 or k == 0:
        return 0.0
    if mode == "delta2" and k >= 3:
        best = n
        for p in range(k):
            for q, r in combinations([c for c in range(k) if c != p], 2):
                best = min(best, int(np.sum(a[:, p] & ~a[:, q] & ~a[:, r])))
        return best / n
    if mode not in ("general", "delta2"):
        raise InvalidInput(f"unknown separation mode {mode!r}")
    return float(exclusive_counts(a).min()) / n


def recover_worstcase(oracle, k, s_size, seed, delta2_mode=False, clique_budget=1_000_000,
                      cover_budget=200_000) -> RecoveryResult:
    """Sample, cover the answer graph by k maximal cliques, then assign everyone else."""
    if oracle.kind.variant != QUANTIZED or oracle.kind.q != 0:
        raise InvalidInput("worst-case recovery needs a noiseless quantized oracle")
    rng = np.random.default_rng(seed)
    S, rest = sample_subset(oracle.n, s_size, rng)
    Y = oracle.batch_pairwise(S)
    graph = build_graph(Y, S)
    result = RecoveryResult(None, S, rest)
    try:
        cliques = maximal_cliques(graph, clique_budget)
        clusters, unique = clique_cover_clusters(cliques, graph, k, delta2_mode, cover_budget)
    except (CoverNotFound, BudgetExceeded) as exc:
        # the rest of the queries are still issued so query accounting is uniform
        if rest.size:
            oracle.batch_cross(rest, S)
        raise type(exc)(str(exc), partial=result) from None
    result.notes["unique_cover"] = unique
    result.notes["maximal_cliques"] = len(cliques)
    try:
        assignment = assign_remaining(oracle, clusters, rest, S)
    except UnassignedElement as exc:
        A = exc.partial.to_matrix(oracle.n).entries.astype(np.int64)
        result.membership = A.astype(np.uint8)
        result.similarity = A @ A.T
        raise UnassignedElement(str(exc), partial=result) from None
    A = assignment.to_matrix(oracle.n).entries.astype(np.int64)
    result.membership = A.astype(np.uint8)
    result.similarity = A @ A.T
    return result
