"""Binary and real factorizations of gram matrices, and basis selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BudgetExceeded,
    FactorizationFailed,
    NonIntegerSolution,
    NotApplicable,
    NotPSD,
    RankDeficient,
)
from .model import EXTERNAL, UNIFORM, ClusteringMatrix, binom

ROUNDING_TOL = 1e-6


def default_tol(M):
    M = np.asarray(M, dtype=float)
    scale = float(np.abs(M).max()) if M.size else 0.0
    return 1e-8 * max(scale, 1.0)


def round_exact(x, tol=ROUNDING_TOL):
    """Round to integers, refusing entries further than ``tol`` from one."""
    r = np.rint(x)
    if x.size and np.abs(x - r).max() > tol:
        raise NonIntegerSolution(f"entries {np.abs(x - r).max():.3g} away from integers")
    return r.astype(np.int64)


@dataclass(frozen=True)
class RealFactor:
    rows: np.ndarray
    tol: float
    residual: float


def _pivoted_cholesky(G, k, tol):
    """Greedy diagonal-pivoted Cholesky; returns (pivots, L) with at most k pivots."""
    n = G.shape[0]
    d = np.diag(G).astype(float).copy()
    L = np.zeros((n, k))
    piv = []
    for t in range(k):
        cand = d.copy()
        cand[piv] = -np.inf
        p = int(np.argmax(cand))
        if cand[p] <= tol:
            break
        piv.append(p)
        col = (G[:, p] - L[:, :t] @ L[p, :t]) / np.sqrt(cand[p])
        L[:, t] = col
        d -= col**2
    return piv, L


def find_full_rank_submatrix(G, k, tol=None):
    """k indices whose principal submatrix of the PSD matrix G is nonsingular."""
    G = np.asarray(G, dtype=float)
    tol = default_tol(G) if tol is None else tol
    piv, _ = _pivoted_cholesky(G, k, tol)
    if len(piv) < k:
        raise RankDeficient(f"gram has rank {len(piv)} < k={k}")
    return sorted(piv)


def real_rank_factorization(G, k, tol=None) -> RealFactor:
    """B with B B^T = G, equal to U sqrt(Lambda) over the top-k eigenpairs.

    G = L L^T is obtained by pivoted Cholesky first, so the eigenproblem is
    only k-by-k; rank deficiency leaves zero columns in B.
    """
    G = np.asarray(G, dtype=float)
    tol = default_tol(G) if tol is None else tol
    piv, L = _pivoted_cholesky(G, k, tol)
    R = G - L @ L.T
    residual = float(np.abs(R).max()) if R.size else 0.0
    if residual > max(tol, 1e-9 * max(1.0, float(np.abs(G).max()))) * 10:
        ev = np.linalg.eigvalsh((G + G.T) / 2)
        if ev.min() < -tol:
            raise NotPSD(f"eigenvalue {ev.min():.3g} below -tol")
        raise RankDeficient(f"effective rank {int((ev > tol).sum())} exceeds k={k}")
    lam, V = np.linalg.eigh(L.T @ L)
    order = np.argsort(lam)[::-1]
    B = L @ V[:, order]
    return RealFactor(rows=B, tol=tol, residual=residual)


def find_basis_subset(B, k, tol=None):
    """k row indices of B spanning its row space (pivoted Gram-Schmidt)."""
    B = np.asarray(B.rows if isinstance(B, RealFactor) else B, dtype=float)
    tol = default_tol(B) if tol is None else tol
    R = B.copy()
    chosen = []
    for _ in range(k):
        norms = np.einsum("ij,ij->i", R, R)
        norms[chosen] = -1.0
        p = int(np.argmax(norms))
        if np.sqrt(max(norms[p], 0.0)) <= tol:
            raise RankDeficient(f"rows span rank {len(chosen)} < k={k}")
        chosen.append(p)
        u = R[p] / np.sqrt(norms[p])
        R -= np.outer(R @ u, u)
    return sorted(chosen)


def solve_membership(basis_rows, rhs):
    """Solve basis_rows @ x = rhs; rhs may hold several right-hand sides as columns."""
    M = np.asarray(basis_rows, dtype=float)
    if M.shape[0] != M.shape[1]:
        raise RankDeficient("basis must be square")
    cond = np.linalg.cond(M) if M.size else np.inf
    if not np.isfinite(cond) or cond > 1e12:
        raise RankDeficient(f"singular basis (condition {cond:.3g})")
    return np.linalg.solve(M, np.asarray(rhs, dtype=float))


def complete_diagonal(G, k, seed=0, tries=64):
    """Fill the unknown diagonal of a rank-k gram from its off-diagonal part.

    For disjoint index blocks T, U not containing i with G[T, U] nonsingular,
    G[i, i] = G[i, U] G[T, U]^{-1} G[T, i].
    """
    G = np.asarray(G, dtype=float)
    m = G.shape[0]
    if m < 2 * k + 1:
        raise RankDeficient(f"need at least {2 * k + 1} elements to complete the diagonal")
    rng = np.random.default_rng(seed)
    idx = np.arange(m)
    for _ in range(tries):
        perm = rng.permutation(idx) if _ else idx
        X, Y = np.sort(perm[: m // 2]), np.sort(perm[m // 2:])
        try:
            T = X[find_basis_subset(G[np.ix_(X, Y)], k)]
            U = Y[find_basis_subset(G[np.ix_(Y, T)], k)]
        except RankDeficient:
            continue
        if np.linalg.cond(G[np.ix_(T, U)]) > 1e10:
            continue
        d = np.empty(m)
        ok = True
        base_inv = np.linalg.inv(G[np.ix_(T, U)])
        outside = np.setdiff1d(idx, np.concatenate([T, U]))
        d[outside] = np.einsum("iu,ut,ti->i", G[np.ix_(outside, U)], base_inv, G[np.ix_(T, outside)])
        for i in np.concatenate([T, U]):
            pair = _swap_out(G, T, U, i, idx)
            if pair is None:
                ok = False
                break
            T2, U2 = pair
            d[i] = G[i, U2] @ np.linalg.solve(G[np.ix_(T2, U2)], G[T2, i])
        if ok:
            return d
    raise RankDeficient("no pair of disjoint spanning blocks found")


def _swap_out(G, T, U, i, idx):
    """Replace i in T or U by an unused index keeping G[T, U] well conditioned."""
    T, U = list(T), list(U)
    used = set(T) | set(U)
    spare = [a for a in idx.tolist() if a not in used]
    for a in spare:
        if i in T:
            T2 = [a if t == i else t for t in T]
            U2 = U
        else:
            T2 = T
            U2 = [a if u == i else u for u in U]
        if np.linalg.cond(G[np.ix_(T2, U2)]) < 1e10:
            return T2, U2
    return None


# --- binary factorization -------------------------------------------------


class _Search:
    """Backtracking over weight-delta rows, up to column permutation.

    Columns that agree on every row placed so far form a class; a new row is
    described by how many ones it puts in each class, placed at the front of
    the class. This enumerates each factor once per orbit of column swaps.
    """

    def __init__(self, H, k, delta, budget):
        self.H = H
        self.k = k
        self.delta = delta
        self.budget = budget
        self.nodes = 0

    def _compositions(self, sizes, values, targets):
        """Counts t_c per class with sum delta and sum_c t_c*values[r, c] == targets[r]."""
        nc = len(sizes)
        out = []
        t = [0] * nc
        rem_cap = np.cumsum(np.asarray(sizes)[::-1])[::-1].tolist() + [0]
        # capacity of remaining classes per constraint row
        if len(targets):
            vcap = [
                [sum(sizes[c] * values[r][c] for c in range(j, nc)) for j in range(nc + 1)]
                for r in range(len(targets))
            ]
        else:
            vcap = []

        def rec(c, left, partial):
            self.nodes += 1
            if self.nodes > self.budget:
                raise BudgetExceeded(f"node budget {self.budget} exhausted")
            if c == nc:
                if left == 0 and all(p == tg for p, tg in zip(partial, targets)):
                    out.append(tuple(t))
                return
            if left > rem_cap[c]:
                return
            for r, tg in enumerate(targets):
                if partial[r] > tg or partial[r] + vcap[r][c] < tg:
                    return
            for x in range(min(sizes[c], left), -1, -1):
                t[c] = x
                rec(c + 1, left - x, [p + x * values[r][c] for r, p in enumerate(partial)])
            t[c] = 0

        rec(0, self.delta, [0] * len(targets))
        return out

    def run(self, order, accept):
        """Depth-first over rows in ``order``; ``accept(rows)`` decides completion."""
        k = self.k
        classes0 = [list(range(k))]

        def rec(depth, classes, placed):
            if depth == len(order):
                return accept(np.array(placed, dtype=np.int64).reshape(len(placed), k))
            r = order[depth]
            sizes = [len(c) for c in classes]
            values = [[int(placed[p][c[0]]) for c in classes] for p in range(depth)]
            targets = [int(self.H[r, order[p]]) for p in range(depth)]
            for comp in self._compositions(sizes, values, targets):
                row = np.zeros(k, dtype=np.int64)
                new_classes = []
                for cls, x in zip(classes, comp):
                    row[cls[:x]] = 1
                    if x:
                        new_classes.append(cls[:x])
                    if x < len(cls):
                        new_classes.append(cls[x:])
                result = rec(depth + 1, new_classes, placed + [row])
                if result is not None:
                    return result
            return None

        return rec(0, classes0, [])


def _dedupe(G, delta):
    """Group identical rows: weight-delta rows a, b are equal iff <a, b> = delta."""
    n = G.shape[0]
    rep_of = np.full(n, -1, dtype=np.int64)
    reps = []
    for i in range(n):
        if rep_of[i] >= 0:
            continue
        same = np.flatnonzero((G[i] == delta) & (rep_of < 0))
        rep_of[same] = len(reps)
        reps.append(i)
    reps = np.array(reps, dtype=np.int64)
    if not np.array_equal(G, G[reps][rep_of][:, reps][:, rep_of]):
        raise FactorizationFailed("gram rows disagree within a group of identical elements")
    return reps, rep_of


def factorization1(G, k, delta, tol=None, node_budget=2_000_000) -> ClusteringMatrix:
    """Binary factor with every row of weight ``delta`` and A A^T == G.

    Identical elements are collapsed first. With a full-rank pivot set the
    pivot rows are searched and every other row is solved linearly; otherwise
    all distinct rows are searched jointly.
    """
    G = np.asarray(G)
    if not np.array_equal(G, np.rint(G)):
        raise FactorizationFailed("gram has non-integer entries")
    G = np.rint(G).astype(np.int64)
    if not np.all(np.diag(G) == delta):
        raise FactorizationFailed("gram diagonal differs from delta")
    if not np.array_equal(G, G.T):
        raise FactorizationFailed("gram is not symmetric")
    reps, rep_of = _dedupe(G, delta)
    H = G[np.ix_(reps, reps)]
    m = reps.size
    if m > binom(k, delta):
        raise FactorizationFailed(f"{m} distinct rows exceed the {binom(k, delta)} weight-{delta} patterns")
    search = _Search(H, k, delta, node_budget)
    try:
        pivots = find_full_rank_submatrix(H, k, tol)
    except RankDeficient:
        pivots = None

    if pivots is not None:
        others = np.setdiff1d(np.arange(m), pivots)
        rhs = H[np.ix_(pivots, others)].astype(float)

        def accept(Q):
            try:
                X = solve_membership(Q, rhs).T
                X = round_exact(X)
            except (RankDeficient, NonIntegerSolution):
                return None
            if X.size and (X.min() < 0 or X.max() > 1 or np.any(X.sum(axis=1) != delta)):
                return None
            F = np.zeros((m, k), dtype=np.int64)
            F[pivots] = Q
            F[others] = X
            return F if np.array_equal(F @ F.T, H) else None

        F = search.run(list(pivots), accept)
    else:
        order = _search_order(H)
        F = search.run(order, lambda rows: rows)
        if F is not None:
            F_full = np.zeros_like(F)
            F_full[order] = F
            F = F_full
    if F is None:
        raise FactorizationFailed("no consistent binary factor")
    A = F[rep_of]
    if not np.array_equal(A @ A.T, G):
        raise FactorizationFailed("factor does not reproduce the gram")
    return ClusteringMatrix(A.astype(np.uint8), ensemble=UNIFORM, delta=delta)


def _search_order(H):
    """Rows ordered so that each next row has the most nonzero links to placed ones."""
    m = H.shape[0]
    order = [0]
    left = set(range(1, m))
    while left:
        nxt = max(sorted(left), key=lambda r: int(np.count_nonzero(H[r, order])))
        order.append(nxt)
        left.remove(nxt)
    return order


def factorization2(G, k) -> ClusteringMatrix:
    """Read the factor off the columns of a k-by-k identity principal submatrix."""
    G = np.rint(np.asarray(G)).astype(np.int64)
    units = np.flatnonzero(np.diag(G) == 1)
    T = []
    for u in units:
        if all(G[u, t] == 0 for t in T):
            T.append(int(u))
            if len(T) == k:
                break
    if len(T) < k:
        raise NotApplicable(f"only {len(T)} mutually orthogonal unit rows (need {k})")
    A = G[:, T]
    if A.min() < 0 or A.max() > 1:
        raise FactorizationFailed("entries against the unit rows are not bits")
    if not np.array_equal(A @ A.T, G):
        raise FactorizationFailed("unit-row reading does not reproduce the gram")
    return ClusteringMatrix(A.astype(np.uint8), ensemble=EXTERNAL)
