"""Reductions and embeddings.

Partition reduces to the one-dimensional DGP on a cycle, any finite metric
embeds isometrically in l-infinity through the rows of its distance matrix,
and a Gaussian random projection approximately preserves Euclidean
distances in a dimension logarithmic in the number of points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .core import DgpInstance, Edge, InvariantError, ParseError, Realization, _parse
from .errors import BadEpsilon, InvalidRealization, MetricViolation, NotAWitness, TooShort
from .rng import generator

METRIC_TOL = 1e-12
JLL_CONSTANT = 4.0


# -- Partition <-> EDGP_1 ----------------------------------------------------

def _weights(a: Sequence[int]) -> list[int]:
    out = []
    for v in a:
        if isinstance(v, bool) or int(v) != v or v <= 0:
            raise InvariantError(f"Partition entries must be positive integers, got {v!r}")
        out.append(int(v))
    return out


def partition_to_edgp1(a: Sequence[int]) -> DgpInstance:
    """Cycle 1-2-...-n-1 on the line with weights a_i on {i-1, i} and a_1 on {1, n}."""
    a = _weights(a)
    n = len(a)
    if n < 3:
        raise TooShort(f"a cycle needs at least 3 entries, got {n}")
    edges = [Edge(0, n - 1, float(a[0]))]
    edges += [Edge(i - 1, i, float(a[i])) for i in range(1, n)]
    return DgpInstance(n, 1, tuple(edges))


def partition_sums(a: Sequence[int], I) -> tuple[int, int]:
    inside = sum(a[i - 1] for i in I)
    return inside, sum(a) - inside


def _check_subset(I, n: int) -> set[int]:
    s = set(int(i) for i in I)
    if any(i < 1 or i > n for i in s):
        raise InvariantError(f"witness indices must lie in 1..{n}")
    return s


def realize_partition_yes(a: Sequence[int], I) -> Realization:
    """Walk along the line, stepping right by a_i when i is in I and left otherwise.

    Indices in ``I`` are 1-based. When 1 is not in ``I`` the complement is
    used, which is also a witness and mirrors the walk.
    """
    a = _weights(a)
    n = len(a)
    if n < 3:
        raise TooShort(f"a cycle needs at least 3 entries, got {n}")
    I = _check_subset(I, n)
    lhs, rhs = partition_sums(a, I)
    if lhs != rhs:
        raise NotAWitness(f"sum over I is {lhs} but the rest sums to {rhs}")
    if 1 not in I:
        I = set(range(1, n + 1)) - I
    x = [0]
    for i in range(2, n + 1):
        x.append(x[-1] + a[i - 1] if i in I else x[-1] - a[i - 1])
    return Realization(np.array(x, dtype=float).reshape(-1, 1))


def partition_from_realization(a: Sequence[int], x: Realization) -> set[int]:
    """Indices whose cycle step (into vertex i, and from n back to 1 for i=1) goes right."""
    a = _weights(a)
    n = len(a)
    inst = partition_to_edgp1(a)
    if x.n != n or x.K != 1:
        raise InvalidRealization(f"expected {n} points on the line, got n={x.n}, K={x.K}")
    c = x.coords[:, 0]
    for e in inst.edges:
        if abs(abs(c[e.u] - c[e.v]) - e.d) > 1e-9 * max(1.0, e.d):
            raise InvalidRealization(f"edge ({e.u + 1}, {e.v + 1}) needs length {e.d:g}, "
                                     f"realized {abs(c[e.u] - c[e.v]):g}")
    I = {1} if c[0] > c[n - 1] else set()
    I |= {i for i in range(2, n + 1) if c[i - 1] > c[i - 2]}
    return I


def partition_bruteforce(a: Sequence[int]) -> set[int] | None:
    """A witness containing index 1, or None when the entries cannot be split."""
    a = _weights(a)
    total = sum(a)
    if total % 2:
        return None
    rest = a[1:]
    for mask in range(1 << len(rest)):
        s = a[0] + sum(v for k, v in enumerate(rest) if mask >> k & 1)
        if 2 * s == total:
            return {1} | {k + 2 for k in range(len(rest)) if mask >> k & 1}
    return None


# -- Frechet embedding -------------------------------------------------------

@dataclass(frozen=True)
class FiniteMetric:
    n: int
    d: np.ndarray

    def __post_init__(self):
        d = np.array(self.d, dtype=float)
        if d.shape != (self.n, self.n) or self.n < 1:
            raise InvariantError(f"metric must be {self.n} x {self.n}, got shape {d.shape}")
        if not np.all(np.isfinite(d)):
            raise MetricViolation("metric entries must be finite")
        scale = max(1.0, float(np.abs(d).max(initial=0.0)))
        if np.abs(d - d.T).max(initial=0.0) > METRIC_TOL * scale:
            raise MetricViolation("metric is not symmetric")
        if np.any(np.diag(d) != 0.0):
            raise MetricViolation("metric must have a zero diagonal")
        off = ~np.eye(self.n, dtype=bool)
        if np.any(d[off] <= 0.0):
            raise MetricViolation("distinct points must be at positive distance")
        # d[u, w] <= d[u, v] + d[v, w] for every middle vertex v
        excess = d[:, None, :] - d[:, :, None] - d[None, :, :]
        worst = float(excess.max(initial=0.0))
        if worst > METRIC_TOL * scale:
            u, v, w = np.unravel_index(int(np.argmax(excess)), excess.shape)
            raise MetricViolation(f"triangle inequality fails: d({u + 1},{w + 1}) exceeds "
                                  f"d({u + 1},{v + 1}) + d({v + 1},{w + 1}) by {worst:.3e}")
        d.setflags(write=False)
        object.__setattr__(self, "d", d)


def load_metric(text: str) -> FiniteMetric:
    data = _parse(text)
    d = data.get("d")
    if not isinstance(d, list):
        raise ParseError("metric JSON needs a list-of-rows field 'd'")
    try:
        arr = np.array(d, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad metric rows: {exc}") from None
    n = data.get("n", len(d))
    if not isinstance(n, int) or isinstance(n, bool):
        raise ParseError("field 'n' must be an integer")
    return FiniteMetric(n, arr)


def linf_distances(coords: np.ndarray) -> np.ndarray:
    return np.abs(coords[:, None, :] - coords[None, :, :]).max(axis=2)


def frechet_embed(metric: FiniteMetric) -> Realization:
    """Point v gets the coordinates (d(u, v) for u in V)."""
    return Realization(np.array(metric.d, dtype=float))


# -- Johnson-Lindenstrauss ---------------------------------------------------

@dataclass(frozen=True)
class DistortionReport:
    epsilon_target: float
    K_used: int
    fraction_within_bounds: float
    worst_ratio_low: float
    worst_ratio_high: float

    def to_dict(self) -> dict:
        return {"epsilon_target": self.epsilon_target, "K_used": self.K_used,
                "fraction_within_bounds": self.fraction_within_bounds,
                "worst_ratio_low": self.worst_ratio_low,
                "worst_ratio_high": self.worst_ratio_high}


def jll_dimension(count: int, epsilon: float, C: float = JLL_CONSTANT) -> int:
    _check_epsilon(epsilon)
    return max(1, math.ceil(C * math.log(count) / epsilon ** 2))


def _check_epsilon(epsilon: float) -> None:
    if not (0.0 < epsilon < 1.0):
        raise BadEpsilon(f"epsilon must lie in (0, 1), got {epsilon}")


def distortion(X: np.ndarray, Y: np.ndarray, epsilon: float, K: int) -> DistortionReport:
    """Ratios of projected to original distances over all pairs at positive distance."""
    ratios = []
    for i, j in combinations(range(len(X)), 2):
        d0 = float(np.linalg.norm(X[i] - X[j]))
        if d0 > 0.0:
            ratios.append(float(np.linalg.norm(Y[i] - Y[j])) / d0)
    if not ratios:
        return DistortionReport(epsilon, K, 1.0, 1.0, 1.0)
    r = np.array(ratios)
    inside = (r >= 1.0 - epsilon) & (r <= 1.0 + epsilon)
    return DistortionReport(epsilon, K, float(inside.mean()), float(r.min()), float(r.max()))


def jll_project(points, epsilon: float, seed: int = 0,
                C: float = JLL_CONSTANT) -> tuple[np.ndarray, DistortionReport]:
    """Project onto K = ceil(C ln|Y| / eps^2) dimensions with a scaled Gaussian matrix."""
    _check_epsilon(epsilon)
    X = np.atleast_2d(np.asarray(points, dtype=float))
    if X.ndim != 2 or X.shape[0] < 2:
        raise InvariantError("need at least two points")
    if not np.all(np.isfinite(X)):
        raise InvariantError("points must be finite")
    K = jll_dimension(X.shape[0], epsilon, C)
    A = generator(seed, "jll").standard_normal((X.shape[1], K)) / math.sqrt(K)
    Y = X @ A
    return Y, distortion(X, Y, epsilon, K)
