"""Ground-truth clusterings, their gram matrices and overlap laws."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, replace
from itertools import combinations

import numpy as np
from scipy import stats

from .errors import InvalidInput, InvalidParams

UNIFORM = "uniform"
IID = "iid"
EXTERNAL = "external"
ENSEMBLES = (UNIFORM, IID, EXTERNAL)


def binom(a, b):
    """Binomial coefficient that is 0 whenever a < b, a < 0 or b < 0."""
    if a < 0 or b < 0 or a < b:
        return 0
    return math.comb(a, b)


@dataclass(frozen=True)
class Params:
    """Model and algorithm parameters.

    ``ensemble`` selects how recovery pipelines treat row weights:
    ``uniform`` rows all weigh ``delta``; ``iid`` rows have unknown weights.
    """

    n: int
    k: int
    delta: int = 1
    p: float = 0.5
    q: float = 0.0
    sigma: float = 1.0
    epsilon: float = 1.0
    c: float = 2.0
    c1: float = 2.0
    c2: float = 1.0
    c3: float = 1.0
    ensemble: str = UNIFORM
    tol: float | None = None
    node_budget: int = 2_000_000

    def __post_init__(self):
        if self.n < 1 or self.k < 1:
            raise InvalidParams(f"n and k must be positive (n={self.n}, k={self.k})")
        if self.n < self.k:
            raise InvalidParams(f"n={self.n} must be at least k={self.k}")
        if not 1 <= self.delta <= self.k:
            raise InvalidParams(f"delta={self.delta} outside [1, k={self.k}]")
        if not 0.0 <= self.p <= 1.0:
            raise InvalidParams(f"p={self.p} outside [0, 1]")
        if not 0.0 <= self.q < 0.5:
            raise InvalidParams(f"q={self.q} outside [0, 0.5)")
        if not self.sigma > 0:
            raise InvalidParams(f"sigma={self.sigma} must be positive")
        if not self.epsilon > 0:
            raise InvalidParams(f"epsilon={self.epsilon} must be positive")
        if self.ensemble not in ENSEMBLES:
            raise InvalidParams(f"unknown ensemble {self.ensemble!r}")

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class ClusteringMatrix:
    """Binary n-by-k membership matrix with its ensemble tag."""

    entries: np.ndarray
    ensemble: str = EXTERNAL
    delta: int | None = None
    p: float | None = None

    def __post_init__(self):
        a = np.array(self.entries, dtype=np.uint8, copy=True)
        if a.ndim != 2:
            raise InvalidInput("membership matrix must be two-dimensional")
        if a.size and a.max() > 1:
            raise InvalidInput("membership entries must be bits")
        if self.ensemble not in ENSEMBLES:
            raise InvalidInput(f"unknown ensemble {self.ensemble!r}")
        w = a.sum(axis=1)
        if self.ensemble == UNIFORM:
            if self.delta is None or not np.all(w == self.delta):
                raise InvalidInput("uniform-tagged rows must all have weight delta")
        elif self.ensemble == EXTERNAL and self.delta is not None:
            if a.shape[0] and (w.min() < 1 or w.max() > self.delta):
                raise InvalidInput("external rows must have weight in [1, delta]")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def n(self):
        return self.entries.shape[0]

    @property
    def k(self):
        return self.entries.shape[1]

    def weights(self):
        return self.entries.sum(axis=1).astype(np.int64)


@dataclass(frozen=True)
class ClusterAssignment:
    """k clusters given as sorted tuples of element indices."""

    clusters: tuple
    source: str = "overlapping"
    n: int | None = None

    def __post_init__(self):
        cl = tuple(tuple(sorted(int(x) for x in c)) for c in self.clusters)
        object.__setattr__(self, "clusters", cl)
        if self.source == "disjoint":
            seen = [x for c in cl for x in c]
            if len(seen) != len(set(seen)):
                raise InvalidInput("disjoint clusters overlap")

    @property
    def k(self):
        return len(self.clusters)

    def to_matrix(self, n=None, ensemble=EXTERNAL, delta=None):
        n = self.n if n is None else n
        if n is None:
            n = 1 + max((x for c in self.clusters for x in c), default=-1)
        a = np.zeros((n, self.k), dtype=np.uint8)
        for col, members in enumerate(self.clusters):
            a[list(members), col] = 1
        return ClusteringMatrix(a, ensemble=ensemble, delta=delta)

    @classmethod
    def from_matrix(cls, A, source="overlapping"):
        a = A.entries if isinstance(A, ClusteringMatrix) else np.asarray(A)
        clusters = tuple(tuple(np.flatnonzero(a[:, c]).tolist()) for c in range(a.shape[1]))
        return cls(clusters, source=source, n=a.shape[0])


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_uniform(params: Params, seed) -> ClusteringMatrix:
    """Rows drawn independently and uniformly from the weight-delta patterns."""
    n, k, d = params.n, params.k, params.delta
    if not 1 <= d <= k:
        raise InvalidParams(f"delta={d} outside [1, k={k}]")
    rng = _rng(seed)
    cols = np.argsort(rng.random((n, k)), axis=1)[:, :d]
    a = np.zeros((n, k), dtype=np.uint8)
    np.put_along_axis(a, cols, 1, axis=1)
    return ClusteringMatrix(a, ensemble=UNIFORM, delta=d)


def sample_iid(params: Params, seed) -> ClusteringMatrix:
    if not 0.0 <= params.p <= 1.0:
        raise InvalidParams(f"p={params.p} outside [0, 1]")
    rng = _rng(seed)
    a = (rng.random((params.n, params.k)) < params.p).astype(np.uint8)
    return ClusteringMatrix(a, ensemble=IID, p=params.p)


def sample_planted(n, k, delta, alpha, seed) -> ClusteringMatrix:
    """Instance where each cluster owns more than ``alpha*n`` exclusive elements.

    Every other element belongs to between 2 and ``delta`` clusters (one
    cluster when ``delta == 1``), chosen uniformly among such patterns, so the
    exclusive mass is exactly the planted amount.
    """
    rng = _rng(seed)
    own = math.floor(alpha * n) + 1
    if own * k > n:
        raise InvalidParams(f"cannot plant {own} exclusive elements in each of {k} clusters with n={n}")
    low = 1 if delta == 1 else 2
    patterns = []
    for w in range(low, delta + 1):
        for combo in _combinations(k, w):
            patterns.append(combo)
    rows = np.zeros((n, k), dtype=np.uint8)
    for c in range(k):
        rows[c * own:(c + 1) * own, c] = 1
    rest = n - own * k
    picks = rng.integers(0, len(patterns), size=rest)
    for r, idx in enumerate(picks):
        rows[own * k + r, list(patterns[idx])] = 1
    rows = rows[rng.permutation(n)]
    return ClusteringMatrix(rows, ensemble=EXTERNAL, delta=delta)


def _combinations(k, w):
    return list(combinations(range(k), w))


def gram(A) -> np.ndarray:
    """Similarity matrix A A^T with integer entries."""
    a = A.entries if isinstance(A, ClusteringMatrix) else np.asarray(A)
    a = a.astype(np.int64)
    return a @ a.T


def quantize(G) -> np.ndarray:
    return (np.asarray(G) > 0).astype(np.int8)


def is_column_permutation(A, B):
    """Return pi with B[:, c] == A[:, pi[c]] for every column c, or None.

    Equal columns are interchangeable, so matching column multisets is exact.
    """
    a = A.entries if isinstance(A, ClusteringMatrix) else np.asarray(A)
    b = B.entries if isinstance(B, ClusteringMatrix) else np.asarray(B)
    if a.shape != b.shape:
        raise InvalidInput(f"shape mismatch {a.shape} vs {b.shape}")
    pool = defaultdict(list)
    for c in range(a.shape[1]):
        pool[a[:, c].astype(np.uint8).tobytes()].append(c)
    for cols in pool.values():
        cols.reverse()
    pi = []
    for c in range(b.shape[1]):
        cols = pool.get(b[:, c].astype(np.uint8).tobytes())
        if not cols:
            return None
        pi.append(cols.pop())
    return tuple(pi)


def overlap_distribution_uniform(k, delta) -> np.ndarray:
    """P(<A1, A2> = l) for l = 0..delta, rows uniform over weight-delta patterns."""
    total = binom(k, delta)
    return np.array(
        [binom(delta, l) * binom(k - delta, delta - l) / total for l in range(delta + 1)]
    )


def overlap_distribution_iid(k, p) -> np.ndarray:
    """P(<A1, A2> = l) for l = 0..k: Binomial(k, p^2)."""
    if not 0.0 <= p <= 1.0:
        raise InvalidParams(f"p={p} outside [0, 1]")
    return stats.binom.pmf(np.arange(k + 1), k, p * p)


def write_truth(A: ClusteringMatrix, path):
    tag = A.ensemble if A.ensemble != IID else f"iid:{A.p}"
    delta = A.delta if A.delta is not None else A.k
    with open(path, "w") as fh:
        fh.write(f"{A.n} {A.k} {delta} {tag}\n")
        for row in A.entries:
            fh.write("".join("1" if x else "0" for x in row) + "\n")


def read_truth(path) -> ClusteringMatrix:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4:
            raise InvalidInput("header must read: n k delta ensemble")
        n, k, delta = int(header[0]), int(header[1]), int(header[2])
        tag = header[3]
        rows = [line.strip() for line in fh if line.strip()]
    if len(rows) != n or any(len(r) != k or set(r) - {"0", "1"} for r in rows):
        raise InvalidInput("body must be n lines of k characters in {0,1}")
    a = np.array([[c == "1" for c in r] for r in rows], dtype=np.uint8).reshape(n, k)
    if tag.startswith("iid"):
        p = float(tag.split(":", 1)[1]) if ":" in tag else None
        return ClusteringMatrix(a, ensemble=IID, p=p)
    return ClusteringMatrix(a, ensemble=tag, delta=delta)


ANIMALS = ("TS", "GB", "BW", "BD", "GO", "Os", "KD")
ANIMAL_CATEGORIES = ("mammals", "marine", "non-mammals", "land")


def animal_matrix() -> ClusteringMatrix:
    """Seven animals over four categories: mammals, marine, non-mammals, land."""
    rows = [
        [0, 1, 1, 0],  # tiger shark
        [1, 0, 0, 1],  # grizzly bear
        [1, 1, 0, 0],  # blue whale
        [1, 0, 0, 1],  # bush dog
        [0, 1, 1, 0],  # giant octopus
        [0, 0, 1, 1],  # ostrich
        [0, 0, 1, 1],  # komodo dragon
    ]
    return ClusteringMatrix(np.array(rows), ensemble=UNIFORM, delta=2)
