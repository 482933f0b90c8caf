"""Same-cluster query oracles with pair-keyed noise and a query ledger.

Noise for a pair is a pure function of ``(noise_seed, min(i, j), max(i, j))``,
so the answer to a pair never depends on when it is asked. Repeated queries
therefore return the first answer, and the ledger counts distinct pairs only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IncompleteData, InvalidInput, InvalidParams, SelfQuery
from .model import ClusteringMatrix

DIRECT = "direct"
QUANTIZED = "quantized"
DITHERED = "dithered"

# Dense ledgers are used up to this many elements; above it a set of pair keys.
DENSE_LEDGER_LIMIT = 8192

_M64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)


def _mix(x):
    """splitmix64 finalizer on a uint64 array (wrapping arithmetic)."""
    x = x ^ (x >> np.uint64(30))
    x = x * _C1
    x = x ^ (x >> np.uint64(27))
    x = x * _C2
    return x ^ (x >> np.uint64(31))


def _seed_key(seed, stream):
    s = np.array([int(seed) & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    return _mix(_mix(s + _GOLDEN) + np.uint64(stream + 1) * _GOLDEN)[0]


def pair_uniforms(seed, i, j, stream=0):
    """Uniform(0, 1) variates keyed by unordered pairs; i, j are int arrays."""
    i = np.asarray(i, dtype=np.uint64)
    j = np.asarray(j, dtype=np.uint64)
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    with np.errstate(over="ignore"):
        h = _mix(((lo << np.uint64(32)) | hi) ^ _seed_key(seed, stream))
        h = _mix(h + _GOLDEN)
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def pair_normals(seed, i, j):
    """Standard normal variates keyed by unordered pairs (Box-Muller)."""
    u1 = pair_uniforms(seed, i, j, stream=1)
    u2 = pair_uniforms(seed, i, j, stream=2)
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)


@dataclass(frozen=True)
class OracleKind:
    variant: str = DIRECT
    q: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.variant not in (DIRECT, QUANTIZED, DITHERED):
            raise InvalidParams(f"unknown oracle variant {self.variant!r}")
        if not 0.0 <= self.q < 0.5:
            raise InvalidParams(f"q={self.q} outside [0, 0.5)")
        if not self.sigma > 0:
            raise InvalidParams(f"sigma={self.sigma} must be positive")

    @classmethod
    def direct(cls):
        return cls(DIRECT)

    @classmethod
    def quantized(cls, q):
        return cls(QUANTIZED, q=q)

    @classmethod
    def dithered(cls, sigma):
        return cls(DITHERED, sigma=sigma)


class _Ledger:
    """Set of distinct unordered pairs."""

    def __init__(self, n):
        self.n = n
        self.count = 0
        self.dense = np.zeros((n, n), dtype=bool) if n <= DENSE_LEDGER_LIMIT else None
        self.keys = None if self.dense is not None else set()

    def add(self, lo, hi):
        """Record pairs (lo < hi elementwise); return the mask of new pairs."""
        if self.dense is not None:
            seen = self.dense[lo, hi]
            new = ~seen
            # duplicates inside one batch must count once
            nl, nh = lo[new], hi[new]
            if nl.size:
                key = nl.astype(np.int64) * self.n + nh
                _, first = np.unique(key, return_index=True)
                mask = np.zeros(nl.size, dtype=bool)
                mask[first] = True
                self.dense[nl, nh] = True
                self.count += int(first.size)
                new[np.flatnonzero(new)] = mask
            return new
        key = lo.astype(np.int64) * self.n + hi
        new = np.zeros(key.size, dtype=bool)
        for idx, kk in enumerate(key.tolist()):
            if kk not in self.keys:
                self.keys.add(kk)
                new[idx] = True
        self.count += int(new.sum())
        return new

    def pairs(self):
        if self.dense is not None:
            lo, hi = np.nonzero(self.dense)
            return np.stack([lo, hi], axis=1)
        keys = np.array(sorted(self.keys), dtype=np.int64)
        return np.stack([keys // self.n, keys % self.n], axis=1)


class OracleHandle:
    """Query endpoint over a hidden clustering.

    :param truth: ground-truth membership matrix (never exposed to recovery code)
    :param kind: oracle map
    :param noise_seed: key of the pair-indexed noise
    :param log: keep every first-time answer for :meth:`write_log`
    """

    def __init__(self, truth: ClusteringMatrix, kind: OracleKind, noise_seed=0, log=False):
        self._truth = truth
        self._rows = truth.entries.astype(np.int32)
        self.kind = kind
        self.noise_seed = int(noise_seed)
        self.n = truth.n
        self._ledger = _Ledger(self.n)
        self._log = [] if log else None

    # -- answers ---------------------------------------------------------
    def _answers(self, lo, hi, overlaps=None):
        if overlaps is None:
            overlaps = np.einsum("ij,ij->i", self._rows[lo], self._rows[hi])
        v = self.kind.variant
        if v == DIRECT:
            return overlaps.astype(np.int16)
        if v == QUANTIZED:
            flip = pair_uniforms(self.noise_seed, lo, hi) < self.kind.q
            return ((overlaps > 0) ^ flip).astype(np.int16)
        z = self.kind.sigma * pair_normals(self.noise_seed, lo, hi)
        return (overlaps + z > 0).astype(np.int16)

    def _check(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.n):
            raise InvalidInput(f"index out of range [0, {self.n})")
        return idx

    def _record(self, lo, hi, ans):
        new = self._ledger.add(lo, hi)
        if self._log is not None and new.any():
            self._log.append(np.stack([lo[new], hi[new], ans[new]], axis=1))

    # -- public API ------------------------------------------------------
    def query(self, i, j):
        i, j = int(i), int(j)
        if i == j:
            raise SelfQuery(f"self-query ({i}, {i}) rejected")
        idx = self._check([i, j])
        lo, hi = idx.min(keepdims=True), idx.max(keepdims=True)
        ans = self._answers(lo, hi)
        self._record(lo, hi, ans)
        return int(ans[0])

    def batch_pairwise(self, S):
        """Answers for every unordered pair in S as a symmetric |S|x|S| array.

        The diagonal is filled with 0 and is not a response.
        """
        S = self._check(S)
        if np.unique(S).size != S.size:
            raise InvalidInput("batch index set has repeated elements")
        m = S.size
        out = np.zeros((m, m), dtype=np.int16)
        if m < 2:
            return out
        a, b = np.triu_indices(m, k=1)
        si, sj = S[a], S[b]
        lo, hi = np.minimum(si, sj), np.maximum(si, sj)
        sub = self._rows[S]
        overlaps = (sub @ sub.T)[a, b]
        ans = self._answers(lo, hi, overlaps)
        self._record(lo, hi, ans)
        out[a, b] = ans
        out[b, a] = ans
        return out

    def batch_cross(self, rows, cols):
        """Answers for every pair (rows[a], cols[b]) as a |rows|x|cols| array."""
        rows, cols = self._check(rows), self._check(cols)
        out = np.zeros((rows.size, cols.size), dtype=np.int16)
        if out.size == 0:
            return out
        ri = np.repeat(rows, cols.size)
        cj = np.tile(cols, rows.size)
        if np.any(ri == cj):
            raise SelfQuery("cross batch contains a self-query")
        lo, hi = np.minimum(ri, cj), np.maximum(ri, cj)
        overlaps = (self._rows[rows] @ self._rows[cols].T).ravel()
        ans = self._answers(lo, hi, overlaps)
        self._record(lo, hi, ans)
        return ans.reshape(rows.size, cols.size)

    def ledger_size(self):
        return self._ledger.count

    def ledger_pairs(self):
        return self._ledger.pairs()

    def reset_noise(self, seed):
        """Reseed the noise; answers given so far are forgotten, the ledger is kept."""
        self.noise_seed = int(seed)

    def reset_ledger(self):
        self._ledger = _Ledger(self.n)
        if self._log is not None:
            self._log = []

    def answer_function(self):
        """Pure view: (i, j) -> answer, without touching the ledger."""

        def answer(i, j):
            if i == j:
                raise SelfQuery(f"self-query ({i}, {i}) rejected")
            lo, hi = np.array([min(i, j)]), np.array([max(i, j)])
            return int(self._answers(lo, hi)[0])

        return answer

    def truth_for_scoring(self):
        """Escape hatch for the harness; recovery code must not call this."""
        return self._truth

    def write_log(self, path):
        if self._log is None:
            raise InvalidInput("handle was created without log=True")
        with open(path, "w") as fh:
            for block in self._log:
                for i, j, r in block.tolist():
                    fh.write(f"{i} {j} {r}\n")


class LogOracle(OracleHandle):
    """Answers replayed from a response log (lines ``i j response``)."""

    def __init__(self, path, n, kind: OracleKind):
        self.kind = kind
        self.n = int(n)
        self.noise_seed = 0
        self._truth = None
        self._log = None
        self._ledger = _Ledger(self.n)
        table = {}
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.split()
                if not parts:
                    continue
                if len(parts) != 3:
                    raise InvalidInput(f"{path}:{lineno}: expected 'i j response'")
                i, j, r = (int(x) for x in parts)
                if i == j or not (0 <= i < self.n and 0 <= j < self.n):
                    raise InvalidInput(f"{path}:{lineno}: invalid pair ({i}, {j})")
                table[(min(i, j), max(i, j))] = r
        self._table = table

    def _answers(self, lo, hi, overlaps=None):
        out = np.empty(lo.size, dtype=np.int16)
        for idx, (a, b) in enumerate(zip(lo.tolist(), hi.tolist())):
            try:
                out[idx] = self._table[(a, b)]
            except KeyError:
                raise IncompleteData(f"pair ({a}, {b}) missing from the response log") from None
        return out

    def batch_pairwise(self, S):
        S = self._check(S)
        m = S.size
        out = np.zeros((m, m), dtype=np.int16)
        if m < 2:
            return out
        a, b = np.triu_indices(m, k=1)
        lo, hi = np.minimum(S[a], S[b]), np.maximum(S[a], S[b])
        ans = self._answers(lo, hi)
        self._record(lo, hi, ans)
        out[a, b] = ans
        out[b, a] = ans
        return out

    def batch_cross(self, rows, cols):
        rows, cols = self._check(rows), self._check(cols)
        ri = np.repeat(rows, cols.size)
        cj = np.tile(cols, rows.size)
        if np.any(ri == cj):
            raise SelfQuery("cross batch contains a self-query")
        lo, hi = np.minimum(ri, cj), np.maximum(ri, cj)
        ans = self._answers(lo, hi)
        self._record(lo, hi, ans)
        return ans.reshape(rows.size, cols.size)

    def truth_for_scoring(self):
        raise InvalidInput("a replayed log carries no ground truth")
