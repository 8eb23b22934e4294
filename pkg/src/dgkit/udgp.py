"""Unassigned distance geometry on complete graphs.

``tribond`` rebuilds a point set from the bare multiset of its pairwise
distances. It grows a realization one vertex at a time. Each new vertex is
positioned from distances to the anchor simplex, and it is kept only when
its distances to every point already placed can be taken from the unused
part of the list. Dead ends backtrack.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import InvariantError, ParseError, Realization, dumps, _int_field, _num, _parse
from .errors import BadCardinality, IncompleteAssignment

TRIBOND_TOL = 1e-6
MERGE_DIST = 1e-7
_PAIR_CHUNK = 4096


@dataclass(frozen=True)
class DistanceList:
    K: int
    n: int
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.K < 1 or self.n < 1:
            raise InvariantError("K and n must be positive")
        if any(not (v > 0 and np.isfinite(v)) for v in self.values):
            raise InvariantError("distances must be positive and finite")
        if len(self.values) > self.n * (self.n - 1) // 2:
            raise InvariantError(f"{len(self.values)} distances exceed the {self.n * (self.n - 1) // 2} pairs of n={self.n}")

    @property
    def m(self) -> int:
        return len(self.values)

    @property
    def complete(self) -> bool:
        return self.m == self.n * (self.n - 1) // 2


def load_distance_list(text: str) -> DistanceList:
    data = _parse(text)
    vals = data.get("distances")
    if not isinstance(vals, list):
        raise ParseError("field 'distances' must be a list")
    return DistanceList(_int_field(data, "K"), _int_field(data, "n"),
                        tuple(_num(v, "distance") for v in vals))


def dump_distance_list(lst: DistanceList) -> str:
    return dumps({"K": lst.K, "n": lst.n, "distances": list(lst.values)})


Assignment = dict  # list index -> (u, v), both 0-based


def _pairs(n: int) -> list[tuple[int, int]]:
    return list(combinations(range(n), 2))


def udgp_cost(x: Realization, lst: DistanceList, a: Assignment) -> float:
    """Sum of squared residuals ``(|x_u - x_v| - d_i)^2`` under assignment ``a``."""
    missing = [i for i in range(lst.m) if i not in a]
    if missing:
        raise IncompleteAssignment(f"list indices {[i + 1 for i in missing]} are unassigned")
    if len(set(map(_key, a.values()))) != len(a):
        raise IncompleteAssignment("assignment maps two indices to the same pair")
    c = x.coords
    total = 0.0
    for i, (u, v) in a.items():
        r = float(np.linalg.norm(c[u] - c[v])) - lst.values[i]
        total += r * r
    return total


def _key(p):
    u, v = p
    return (u, v) if u < v else (v, u)


def best_assignment(x: Realization, lst: DistanceList) -> tuple[Assignment, float]:
    """Cheapest assignment of list values to vertex pairs for a fixed ``x``."""
    pairs = _pairs(x.n)
    if lst.m > len(pairs):
        raise InvariantError("more distances than vertex pairs")
    c = x.coords
    realized = np.array([np.linalg.norm(c[u] - c[v]) for u, v in pairs])
    vals = np.asarray(lst.values)
    if lst.m == len(pairs):
        # sorted-to-sorted matching is optimal for a full list
        vi = np.argsort(vals, kind="stable")
        pi = np.argsort(realized, kind="stable")
        a = {int(i): pairs[int(p)] for i, p in zip(vi, pi)}
    else:
        cost = (vals[:, None] - realized[None, :]) ** 2
        rows, cols = linear_sum_assignment(cost)
        a = {int(i): pairs[int(p)] for i, p in zip(rows, cols)}
    a = dict(sorted(a.items()))
    return a, udgp_cost(x, lst, a)


# -- tribond -----------------------------------------------------------------

@dataclass
class TribondResult:
    realization: Realization | None
    status: str  # "found", "infeasible" or "timeout"
    depth: int = 0
    nodes: int = 0

    @property
    def feasible(self) -> bool:
        return self.realization is not None

    def to_dict(self) -> dict:
        out: dict = {"status": self.status, "depth": self.depth}
        if self.realization is not None:
            out["x"] = self.realization.coords.tolist()
        return out


class _Timeout(Exception):
    pass


@dataclass
class _Pool:
    """Sorted distance values with an availability mask."""

    vals: np.ndarray
    avail: np.ndarray
    tol: float

    def available(self) -> np.ndarray:
        return self.vals[self.avail]

    def take(self, dists) -> np.ndarray | None:
        # greedy interval matching of each query to an unused value within tol;
        # processing queries in ascending order makes the greedy choice optimal
        avail = self.avail.copy()
        for q in np.sort(np.asarray(dists, dtype=float)):
            lo = np.searchsorted(self.vals, q - self.tol, side="left")
            hi = np.searchsorted(self.vals, q + self.tol, side="right")
            free = np.flatnonzero(avail[lo:hi])
            if free.size == 0:
                return None
            avail[lo + free[0]] = False
        return avail

    def bounds_sq(self) -> tuple[np.ndarray, np.ndarray]:
        """Squared tolerance windows of the unused values, overlaps merged.

        Squared distances from the dot-product expansion carry a small
        absolute error, so the windows are padded slightly.
        """
        arr = self.available()
        if arr.size == 0:
            return np.array([np.inf]), np.array([-np.inf])
        lo = np.clip(arr - self.tol, 0.0, None) ** 2
        hi = (arr + self.tol) ** 2
        pad = 1e-12 * max(1.0, float(hi[-1]))
        lo, hi = lo - pad, hi + pad
        keep = np.ones(arr.size, dtype=bool)
        keep[1:] = lo[1:] > hi[:-1]
        return lo[keep], np.maximum.reduceat(hi, np.flatnonzero(keep))

    def present(self, D: np.ndarray) -> np.ndarray:
        """Elementwise: is some unused value within tol of D?"""
        arr = self.available()
        if arr.size == 0:
            return np.zeros(D.shape, dtype=bool)
        idx = np.searchsorted(arr, D - self.tol, side="left")
        idx = np.minimum(idx, arr.size - 1)
        return np.abs(arr[idx] - D) <= self.tol


class _Tribond:
    def __init__(self, lst: DistanceList, tol: float, deadline: float | None):
        self.K, self.n = lst.K, lst.n
        self.tol = tol
        self.deadline = deadline
        self.best_depth = 0
        self.nodes = 0
        self.vals = np.sort(np.asarray(lst.values, dtype=float))

    def _tick(self, depth: int):
        self.nodes += 1
        self.best_depth = max(self.best_depth, depth)
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise _Timeout

    def _tuples(self, pool: _Pool, L: int) -> np.ndarray:
        """Ordered L-tuples of available values, multiplicities respected,
        lexicographic over values sorted in decreasing order."""
        u, counts = np.unique(np.round(pool.available() / self.tol) * self.tol, return_counts=True)
        # distinct representative values, largest first
        reps, cnt = [], []
        arr = pool.available()
        for val, c in zip(u[::-1], counts[::-1]):
            reps.append(arr[np.argmin(np.abs(arr - val))])
            cnt.append(c)
        reps, cnt = np.array(reps), np.array(cnt)
        if reps.size == 0:
            return np.zeros((0, L))
        grids = np.indices((reps.size,) * L).reshape(L, -1).T
        ok = np.ones(len(grids), dtype=bool)
        for k in range(L):
            mult = (grids == grids[:, [k]]).sum(axis=1)
            ok &= cnt[grids[:, k]] >= mult
        return reps[grids[ok]]

    def _place(self, pts: np.ndarray, T: np.ndarray, both: bool):
        """Positions of a new point at distances T[:, k] from anchors 0..L-1."""
        L = T.shape[1]
        K = self.K
        d0 = T[:, 0]
        if L > 1:
            X = pts[1:L, :L - 1]
            rhs = 0.5 * (d0[:, None] ** 2 - T[:, 1:] ** 2 + np.sum(X * X, axis=1)[None, :])
            Y = np.linalg.solve(X, rhs.T).T
        else:
            Y = np.zeros((len(T), 0))
        yy = np.sum(Y * Y, axis=1)
        h2 = d0 ** 2 - yy
        keep = (h2 >= 0) | (np.sqrt(yy) - d0 <= self.tol)
        h = np.sqrt(np.clip(h2, 0.0, None))
        base = np.zeros((len(T), K))
        base[:, :L - 1] = Y
        P, src = [], []
        for s in ((1.0, -1.0) if both else (1.0,)):
            sel = keep if s > 0 else keep & (h >= MERGE_DIST / 2)
            Q = base[sel].copy()
            Q[:, L - 1] = s * h[sel]
            P.append(Q)
            src.append(np.flatnonzero(sel))
        return np.concatenate(P), np.concatenate(src)

    def solve(self) -> Realization | None:
        n, K = self.n, self.K
        if n == 1:
            return Realization(np.zeros((1, K)))
        # a largest distance joins some pair; put that pair at vertices 0 and 1
        dmax = self.vals[-1]
        full = _Pool(self.vals, np.ones(self.vals.size, dtype=bool), self.tol)
        pool = _Pool(self.vals, full.take([dmax]), self.tol)
        pts = np.zeros((2, K))
        pts[1, 0] = dmax
        found = self._extend(pts, pool)
        return None if found is None else Realization(found)

    def _near(self, T: np.ndarray, value: float) -> np.ndarray:
        return np.abs(T - value) <= self.tol

    def _extend(self, pts: np.ndarray, pool: _Pool, fix=None):
        j = len(pts)
        self._tick(j)
        n, K = self.n, self.K
        if j == n:
            return pts
        if K >= 2 and j == K and n >= K + 2:
            return self._extend_pair(pts, pool, fix)
        if j == 2 and K >= 3 and n >= 4:
            return self._extend_split(pts, pool)
        L = min(j, K)
        T = self._tuples(pool, L)
        if fix is not None:
            T = T[self._near(T[:, fix[0]], fix[1])]
        cand, src = self._place(pts, T, both=j > K)
        if len(cand) and j > K:
            ok = pool.present(_dist(cand, pts[K:])).all(axis=1)
            cand, src = cand[ok], src[ok]
        for idx in np.argsort(src, kind="stable"):
            out = self._descend(pts, pool, cand[idx])
            if out is not None:
                return out
        return None

    def _descend(self, pts, pool, p, fix=None):
        avail = pool.take(np.linalg.norm(pts - p, axis=1))
        if avail is None:
            return None
        return self._extend(np.vstack([pts, p]), _Pool(pool.vals, avail, self.tol), fix)

    def _extend_split(self, pts: np.ndarray, pool: _Pool):
        # the largest unused value l joins some pair. Either that pair touches
        # vertex 0 or 1 (then take its other end as vertex 2), or it avoids
        # both (then take its ends as vertices 2 and 3)
        T = self._tuples(pool, 2)
        l2 = pool.available()[-1]
        touch = self._near(T, l2).any(axis=1)
        for fix, sel in ((None, touch), ((2, l2), ~touch)):
            cand, src = self._place(pts, T[sel], both=False)
            for idx in np.argsort(src, kind="stable"):
                out = self._descend(pts, pool, cand[idx], fix)
                if out is not None:
                    return out
        return None

    def _extend_pair(self, pts: np.ndarray, pool: _Pool, fix=None):
        # the last simplex vertex is only checked once the next vertex exists,
        # so choose both together: a from the canonical side, b from either side
        K = self.K
        T = self._tuples(pool, K)
        TA = T if fix is None else T[self._near(T[:, fix[0]], fix[1])]
        A, _ = self._place(pts, TA, both=False)
        B, sb = self._place(pts, T, both=True)
        if len(A) == 0 or len(B) == 0:
            return None
        B = B[np.argsort(sb, kind="stable")]
        lo, hi = pool.bounds_sq()
        table, scale = _bin_table(lo, hi)
        # one matmul yields scaled squared distances: |a|^2 + |b|^2 - 2 a.b
        Bx = np.hstack([-2.0 * B, np.ones((len(B), 1)), np.sum(B * B, axis=1)[:, None]]) * scale
        Ax = np.hstack([A, np.sum(A * A, axis=1)[:, None], np.ones((len(A), 1))])
        top = table.size - 1
        step = max(1, _PAIR_CHUNK * 64 // len(B))
        for start in range(0, len(A), step):
            Ablk = A[start:start + step]
            S = Ax[start:start + step] @ Bx.T
            np.clip(S, 0.0, top, out=S)
            ia, ib = np.nonzero(table[S.astype(np.intp)])
            if ia.size:
                D2 = S[ia, ib] / scale
                k = np.minimum(np.searchsorted(hi, D2), hi.size - 1)
                ok = (lo[k] <= D2) & (D2 <= hi[k])
                ia, ib = ia[ok], ib[ok]
            for i, j in zip(ia, ib):
                self._tick(len(pts) + 1)
                a, b = Ablk[i], B[j]
                avail = pool.take(np.linalg.norm(pts - a, axis=1))
                if avail is None:
                    continue
                sub = _Pool(pool.vals, avail, self.tol)
                out = self._descend(np.vstack([pts, a]), sub, b)
                if out is not None:
                    return out
        return None


def _bin_table(lo: np.ndarray, hi: np.ndarray, bins: int = 1 << 16):
    """Boolean bins over [0, max hi] marking those that meet some window, plus the bin scale."""
    if not np.isfinite(hi[-1]) or hi[-1] <= 0.0:
        return np.zeros(2, dtype=bool), 1.0
    scale = bins / hi[-1]
    table = np.zeros(bins + 2, dtype=bool)
    # widen by a bin on each side to absorb rounding in the scaled matmul
    first = np.maximum(np.floor(lo * scale).astype(np.intp) - 1, 0)
    last = np.minimum(np.floor(hi * scale).astype(np.intp) + 1, bins)
    for f, l in zip(first, last):
        table[f:l + 1] = True
    table[-1] = False
    return table, scale


def _dist(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    return np.linalg.norm(P[:, None, :] - Q[None, :, :], axis=2)


def tribond(lst: DistanceList, tol: float = TRIBOND_TOL,
            timeout_seconds: float | None = None) -> TribondResult:
    """Realize a complete, noise-free distance list in R^K, or report infeasibility."""
    if not lst.complete:
        raise BadCardinality(f"tribond needs n(n-1)/2 = {lst.n * (lst.n - 1) // 2} distances, got {lst.m}")
    deadline = None if timeout_seconds is None else time.monotonic() + timeout_seconds
    search = _Tribond(lst, tol, deadline)
    try:
        x = search.solve()
    except _Timeout:
        return TribondResult(None, "timeout", search.best_depth, search.nodes)
    if x is None:
        return TribondResult(None, "infeasible", search.best_depth, search.nodes)
    return TribondResult(x, "found", lst.n, search.nodes)
