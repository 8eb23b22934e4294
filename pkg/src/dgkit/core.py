"""Instances, realizations, validation, congruence and the JSON file formats.

Vertices are 0-based everywhere in memory. The JSON formats use 1-based
labels; the conversion happens only in the ``load_*``/``dump_*`` helpers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, InvariantError, ParseError

DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class Edge:
    """An edge ``{u, v}`` with either an exact distance ``d`` or an interval ``[dl, du]``."""

    u: int
    v: int
    d: float | None = None
    dl: float | None = None
    du: float | None = None

    @property
    def exact(self) -> bool:
        return self.d is not None

    @property
    def lower(self) -> float:
        return self.d if self.d is not None else self.dl

    @property
    def upper(self) -> float:
        return self.d if self.d is not None else self.du

    @property
    def key(self) -> tuple[int, int]:
        return (self.u, self.v) if self.u < self.v else (self.v, self.u)

    def error(self, dist: float) -> float:
        """Distance from ``dist`` to the admissible value (or interval)."""
        if self.d is not None:
            return abs(dist - self.d)
        return max(self.dl - dist, dist - self.du, 0.0)


@dataclass(frozen=True)
class Graph:
    """Unweighted simple graph on vertices ``0..n-1``."""

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        canon = []
        seen = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise InvariantError(f"self-loop at vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise InvariantError(f"edge ({u}, {v}) out of range for n={self.n}")
            k = (min(u, v), max(u, v))
            if k in seen:
                raise InvariantError(f"duplicate edge {k}")
            seen.add(k)
            canon.append(k)
        object.__setattr__(self, "edges", tuple(canon))

    @property
    def m(self) -> int:
        return len(self.edges)

    def adjacency(self) -> list[set[int]]:
        adj: list[set[int]] = [set() for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return adj

    def without_edge(self, idx: int) -> "Graph":
        return Graph(self.n, self.edges[:idx] + self.edges[idx + 1:])

    def is_complete(self) -> bool:
        return self.m == self.n * (self.n - 1) // 2


@dataclass(frozen=True)
class DgpInstance:
    n: int
    K: int
    edges: tuple[Edge, ...]

    def __post_init__(self):
        if self.n < 1:
            raise InvariantError("n must be positive")
        if self.K < 1:
            raise InvariantError("K must be positive")
        object.__setattr__(self, "edges", tuple(self.edges))
        seen = set()
        for e in self.edges:
            if e.u == e.v:
                raise InvariantError(f"self-loop at vertex {e.u + 1}")
            if not (0 <= e.u < self.n and 0 <= e.v < self.n):
                raise InvariantError(f"edge ({e.u + 1}, {e.v + 1}) out of range for n={self.n}")
            if e.key in seen:
                raise InvariantError(f"duplicate edge ({e.key[0] + 1}, {e.key[1] + 1})")
            seen.add(e.key)
            if e.exact:
                if e.dl is not None or e.du is not None:
                    raise InvariantError("edge carries both an exact and an interval weight")
                if not (math.isfinite(e.d) and e.d > 0):
                    raise InvariantError(f"nonpositive weight on edge ({e.u + 1}, {e.v + 1})")
            else:
                if e.dl is None or e.du is None:
                    raise InvariantError("interval edge needs both dl and du")
                if not (math.isfinite(e.dl) and math.isfinite(e.du) and 0 < e.dl <= e.du):
                    raise InvariantError(f"bad interval on edge ({e.u + 1}, {e.v + 1}): need 0 < dl <= du")

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def graph(self) -> Graph:
        return Graph(self.n, tuple((e.u, e.v) for e in self.edges))

    @property
    def has_intervals(self) -> bool:
        return any(not e.exact for e in self.edges)

    def edge_map(self) -> dict[tuple[int, int], Edge]:
        return {e.key: e for e in self.edges}

    @classmethod
    def from_distances(cls, K: int, n: int, triples: Iterable[tuple[int, int, float]]) -> "DgpInstance":
        """Build an exact instance from 0-based ``(u, v, d)`` triples."""
        return cls(n, K, tuple(Edge(int(u), int(v), float(d)) for u, v, d in triples))


@dataclass(frozen=True)
class Realization:
    """``n`` points in ``R^K`` stored row-wise in a read-only array."""

    coords: np.ndarray

    def __post_init__(self):
        x = np.array(self.coords, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise InvariantError(f"realization must be an n x K array, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise InvariantError("realization has non-finite coordinates")
        x.setflags(write=False)
        object.__setattr__(self, "coords", x)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def K(self) -> int:
        return self.coords.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Realization):
            return NotImplemented
        return self.coords.shape == other.coords.shape and bool(np.array_equal(self.coords, other.coords))

    def __hash__(self):
        return hash((self.coords.shape, self.coords.tobytes()))


@dataclass(frozen=True)
class Framework:
    instance: DgpInstance
    realization: Realization

    def __post_init__(self):
        _check_dims(self.instance, self.realization)


@dataclass
class ValidationReport:
    max_abs_error: float
    mean_sq_error: float
    violated_edges: list[tuple[int, int, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violated_edges


def _check_dims(instance: DgpInstance, x: Realization) -> None:
    if instance.n != x.n or instance.K != x.K:
        raise DimensionMismatch(
            f"instance is n={instance.n}, K={instance.K} but realization is n={x.n}, K={x.K}")


def pairwise_distances(coords: np.ndarray) -> np.ndarray:
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def validate(instance: DgpInstance, x: Realization, tol: float = DEFAULT_TOL) -> ValidationReport:
    """Check every edge of ``instance`` against the distances realized by ``x``.

    Exact edges contribute ``|dist - d|``; interval edges contribute the
    distance from ``dist`` to ``[dl, du]``. Edges whose error exceeds ``tol``
    are listed (0-based) with the realized distance.
    """
    _check_dims(instance, x)
    if not instance.edges:
        return ValidationReport(0.0, 0.0, [])
    c = x.coords
    errs = []
    violated = []
    for e in instance.edges:
        dist = float(np.linalg.norm(c[e.u] - c[e.v]))
        err = e.error(dist)
        errs.append(err)
        if err > tol:
            violated.append((e.u, e.v, dist))
    errs = np.asarray(errs)
    return ValidationReport(float(errs.max()), float(np.mean(errs ** 2)), violated)


def _orientation_frame(c: np.ndarray, tol: float) -> list[int] | None:
    """Indices of the first K+1 affinely independent points, greedily by index."""
    n, K = c.shape
    scale = 1.0 + float(np.abs(c).max())
    idx = [0]
    basis: list[np.ndarray] = []
    for i in range(1, n):
        r = c[i] - c[0]
        for b in basis:
            r = r - (r @ b) * b
        nr = float(np.linalg.norm(r))
        if nr > max(tol, 1e-9 * scale):
            basis.append(r / nr)
            idx.append(i)
            if len(idx) == K + 1:
                return idx
    return None


def _frame_det(c: np.ndarray, idx: list[int]) -> float:
    return float(np.linalg.det(c[idx[1:]] - c[idx[0]]))


def congruent(x: Realization, y: Realization, tol: float = DEFAULT_TOL,
              allow_reflection: bool = False) -> bool:
    """True iff ``x`` and ``y`` have the same pairwise distances within ``tol``.

    With ``allow_reflection=False`` the two point sets must also share their
    orientation, read off the sign of the determinant of a common local frame.
    Point sets whose affine hull is lower-dimensional than ``K`` can always be
    mirrored by a rotation, so no orientation check applies to them.
    """
    if x.n != y.n or x.K != y.K:
        raise DimensionMismatch(f"cannot compare shapes {x.coords.shape} and {y.coords.shape}")
    if np.max(np.abs(pairwise_distances(x.coords) - pairwise_distances(y.coords))) > tol:
        return False
    if allow_reflection:
        return True
    idx = _orientation_frame(x.coords, tol)
    if idx is None:
        return True
    return np.sign(_frame_det(x.coords, idx)) == np.sign(_frame_det(y.coords, idx))


def eta(instance: DgpInstance | Graph) -> float:
    n, m = instance.n, len(instance.edges)
    if n < 2:
        raise InvariantError("eta needs at least two vertices")
    return 2.0 * m / (n * (n - 1))


# -- JSON ------------------------------------------------------------------

def _fmt(obj: Any) -> str:
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return json.dumps(None)
        return "%.17g" % v
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_fmt(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any) -> str:
    """JSON text with every float written to 17 significant digits."""
    return _fmt(obj)


def _parse(text: str) -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ParseError("top-level JSON value must be an object")
    return data


def _int_field(data: dict, key: str) -> int:
    if key not in data:
        raise ParseError(f"missing field {key!r}")
    v = data[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(f"field {key!r} must be an integer")
    return v


def _num(v: Any, what: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"{what} must be a number")
    return float(v)


def load_instance(text: str) -> DgpInstance:
    data = _parse(text)
    K = _int_field(data, "K")
    n = _int_field(data, "n")
    raw = data.get("edges")
    if not isinstance(raw, list):
        raise ParseError("field 'edges' must be a list")
    edges = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict):
            raise ParseError(f"edge #{i} must be an object")
        u = _int_field(item, "u")
        v = _int_field(item, "v")
        if "d" in item:
            if "dl" in item or "du" in item:
                raise ParseError(f"edge #{i} mixes 'd' with 'dl'/'du'")
            edges.append(Edge(u - 1, v - 1, _num(item["d"], f"edge #{i} weight")))
        elif "dl" in item and "du" in item:
            edges.append(Edge(u - 1, v - 1, dl=_num(item["dl"], f"edge #{i} dl"),
                              du=_num(item["du"], f"edge #{i} du")))
        else:
            raise ParseError(f"edge #{i} needs 'd' or both 'dl' and 'du'")
    return DgpInstance(n, K, tuple(edges))


def instance_to_dict(instance: DgpInstance) -> dict:
    edges = []
    for e in instance.edges:
        if e.exact:
            edges.append({"u": e.u + 1, "v": e.v + 1, "d": e.d})
        else:
            edges.append({"u": e.u + 1, "v": e.v + 1, "dl": e.dl, "du": e.du})
    return {"K": instance.K, "n": instance.n, "edges": edges}


def dump_instance(instance: DgpInstance) -> str:
    return dumps(instance_to_dict(instance))


def realization_to_dict(x: Realization) -> dict:
    return {"K": x.K, "n": x.n, "x": x.coords.tolist()}


def realization_from_dict(data: dict) -> Realization:
    K = _int_field(data, "K")
    n = _int_field(data, "n")
    rows = data.get("x")
    if not isinstance(rows, list) or len(rows) != n:
        raise ParseError("field 'x' must be a list of n rows")
    parsed = []
    for r in rows:
        if not isinstance(r, list) or len(r) != K:
            raise ParseError("each row of 'x' must hold K numbers")
        parsed.append([_num(v, "coordinate") for v in r])
    return Realization(np.array(parsed, dtype=float).reshape(n, K))


def load_realization(text: str) -> Realization:
    return realization_from_dict(_parse(text))


def dump_realization(x: Realization) -> str:
    return dumps(realization_to_dict(x))


def load_matrix(text: str) -> np.ndarray:
    data = _parse(text)
    n = _int_field(data, "n")
    rows = data.get("m")
    if not isinstance(rows, list) or len(rows) != n:
        raise ParseError("field 'm' must be a list of n rows")
    out = np.empty((n, len(rows[0]) if n else 0))
    for i, r in enumerate(rows):
        if not isinstance(r, list) or len(r) != out.shape[1]:
            raise ParseError("matrix rows must have equal length")
        out[i] = [_num(v, "matrix entry") for v in r]
    return out


def dump_matrix(m: np.ndarray) -> str:
    return dumps({"n": int(m.shape[0]), "m": np.asarray(m).tolist()})


def instance_from_realization(x: Realization, pairs: Sequence[tuple[int, int]]) -> DgpInstance:
    """Exact instance whose weights are the distances of ``x`` on ``pairs``."""
    c = x.coords
    return DgpInstance(x.n, x.K, tuple(Edge(u, v, float(np.linalg.norm(c[u] - c[v]))) for u, v in pairs))
