"""Branch-and-Prune for discretizable distance geometry instances.

Vertices are placed in label order. The first K+1 form a clique and are
laid out canonically: vertex 0 at the origin, vertex j in the span of the
first j axes with a nonnegative last coordinate. Every later vertex sits on
the intersection of K spheres centred at its reference predecessors, which
has at most two points. Extra (pruning) edges discard candidates that
violate them.

Levels are 1-based: level i is reached once vertices 0..i-1 are placed.
"""

from __future__ import annotations

import enum
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import rng as _rng
from .core import (DEFAULT_TOL, DgpInstance, Realization, dumps, pairwise_distances,
                   realization_from_dict, realization_to_dict, validate, _orientation_frame,
                   _frame_det)
from .errors import (DegenerateCenters, DegenerateHyperplane, InfeasibleInitialClique,
                     InvalidSeedSolution, NotDiscretizable, NotDmdgp, ParseError)

MERGE_DIST = 1e-7


class OrderKind(str, enum.Enum):
    DMDGP = "DMDGP"
    DDGP = "DDGP"
    NOT_DISCRETIZABLE = "NotDiscretizable"


@dataclass(frozen=True)
class DiscretizationOrder:
    kind: OrderKind
    n: int
    K: int
    reference_predecessors: tuple[tuple[int, ...], ...] = ()
    discretization_edges: tuple[tuple[int, int], ...] = ()
    pruning_edges: tuple[tuple[int, int], ...] = ()
    interval_pruning: bool = False
    reason: str = ""


@dataclass
class SolutionSet:
    solutions: list[Realization]
    level_counts: list[int]
    pruned_count: int = 0
    reflection_fixed: bool = True
    truncated: bool = False

    def __len__(self):
        return len(self.solutions)

    def to_dict(self) -> dict:
        stats = {"level_counts": list(self.level_counts), "pruned": self.pruned_count}
        if self.truncated:
            stats["truncated"] = True
        return {"solutions": [realization_to_dict(x) for x in self.solutions], "tree_stats": stats}

    def dumps(self) -> str:
        return dumps(self.to_dict())


def load_solution_set(text: str) -> SolutionSet:
    import json
    try:
        data = json.loads(text)
        sols = [realization_from_dict(s) for s in data["solutions"]]
        stats = data.get("tree_stats", {})
        return SolutionSet(sols, list(stats.get("level_counts", [])), int(stats.get("pruned", 0)),
                           truncated=bool(stats.get("truncated", False)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed solution set: {exc}") from None


@dataclass(frozen=True)
class PruningGroup:
    generator_levels: tuple[int, ...]
    K: int

    @property
    def order(self) -> int:
        return 2 ** len(self.generator_levels)


@dataclass(frozen=True)
class BPOptions:
    tol: float = DEFAULT_TOL
    max_solutions: int | None = None
    fix_reflection: bool = True
    seed: int | None = None
    jobs: int = 1


# -- ordering ---------------------------------------------------------------

def classify_order(instance: DgpInstance) -> DiscretizationOrder:
    """Decide whether the label order is DMDGP, DDGP or neither.

    Only exact edges count as adjacencies for discretization; interval edges
    always end up among the pruning edges.
    """
    n, K = instance.n, instance.K
    exact = {e.key for e in instance.edges if e.exact}

    def adj(u, v):
        return (min(u, v), max(u, v)) in exact

    head = min(n, K + 1)
    for u, v in combinations(range(head), 2):
        if not adj(u, v):
            return DiscretizationOrder(OrderKind.NOT_DISCRETIZABLE, n, K,
                                       reason=f"vertices {u + 1} and {v + 1} of the initial clique are not adjacent")
    refs: list[tuple[int, ...]] = [tuple(range(i)) for i in range(head)]
    kind = OrderKind.DMDGP
    for i in range(head, n):
        if all(adj(i, i - k) for k in range(1, K + 1)):
            refs.append(tuple(range(i - K, i)))
            continue
        kind = OrderKind.DDGP
        preds = [j for j in range(i) if adj(i, j)]
        if len(preds) < K:
            return DiscretizationOrder(OrderKind.NOT_DISCRETIZABLE, n, K,
                                       reason=f"vertex {i + 1} has only {len(preds)} exact predecessors, needs {K}")
        refs.append(tuple(preds[-K:]))
    disc = set()
    for i, r in enumerate(refs):
        for j in r:
            disc.add((j, i))
    pruning = tuple(sorted(e.key for e in instance.edges if e.key not in disc))
    interval = any(not e.exact for e in instance.edges)
    return DiscretizationOrder(kind, n, K, tuple(refs), tuple(sorted(disc)), pruning, interval)


# -- geometry ---------------------------------------------------------------

def _hyperplane(points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray] | None:
    """Orthonormal frame for the affine hull of K points in R^K.

    Returns ``(Q1, R1, normal)`` for the differences to ``points[0]`` or None if
    the points are affinely dependent. The normal is oriented so that the
    differences followed by the normal have a positive determinant.
    """
    K = points.shape[1]
    A = points[1:] - points[0]
    if K == 1:
        return np.zeros((1, 0)), np.zeros((0, 0)), np.ones(1)
    Q, R = np.linalg.qr(A.T, mode="complete")
    R1 = R[:K - 1, :]
    scale = max(1.0, float(np.abs(A).max()))
    if np.min(np.abs(np.diag(R1))) <= 1e-12 * scale:
        return None
    normal = Q[:, K - 1].copy()
    if np.linalg.det(np.vstack([A, normal])) < 0:
        normal = -normal
    return Q[:, :K - 1], R1, normal


def sphere_intersect(centers, radii, tol: float = DEFAULT_TOL) -> list[np.ndarray]:
    """Intersect K spheres in R^K: zero, one or two points.

    With two points, the first lies on the positive side of the centres'
    hyperplane. Points closer than ``MERGE_DIST`` collapse into one.
    """
    C = np.atleast_2d(np.asarray(centers, dtype=float))
    r = np.asarray(radii, dtype=float).ravel()
    K = C.shape[1]
    if C.shape[0] != K or r.size != K:
        raise ValueError(f"need exactly K={K} centres and radii")
    frame = _hyperplane(C)
    if frame is None:
        raise DegenerateCenters("sphere centres are affinely dependent")
    return _intersect(C, r, frame, tol)


def _intersect(C, r, frame, tol):
    Q1, R1, normal = frame
    c0 = C[0]
    A = C[1:] - c0
    if A.shape[0]:
        b = 0.5 * (r[0] ** 2 - r[1:] ** 2 + np.einsum("ij,ij->i", A, A))
        z = np.linalg.solve(R1.T, b)
        p0 = c0 + Q1 @ z
        zz = float(z @ z)
    else:
        p0 = c0.copy()
        zz = 0.0
    t2 = r[0] ** 2 - zz
    if t2 < 0.0:
        if np.sqrt(zz) - r[0] <= tol:
            return [p0]
        return []
    t = float(np.sqrt(t2))
    if 2.0 * t < MERGE_DIST:
        return [p0]
    return [p0 + t * normal, p0 - t * normal]


def _place_clique(instance: DgpInstance, head: int, tol: float, both_signs: bool) -> list[np.ndarray]:
    """Canonical coordinates for vertices 0..head-1 (one or two mirror layouts)."""
    K = instance.K
    em = instance.edge_map()

    def d(u, v):
        return em[(min(u, v), max(u, v))].d

    x = np.zeros((head, K))
    for j in range(1, head):
        d0 = d(0, j)
        y = np.zeros(j)
        if j > 1:
            X = x[1:j, :j - 1]
            rhs = 0.5 * (d0 ** 2 - np.array([d(k, j) ** 2 for k in range(1, j)])
                         + np.einsum("ij,ij->i", X, X))
            y[:j - 1] = np.linalg.solve(X, rhs)
        h2 = d0 ** 2 - float(y[:j - 1] @ y[:j - 1])
        if h2 < 0.0 and np.sqrt(float(y[:j - 1] @ y[:j - 1])) - d0 > tol:
            raise InfeasibleInitialClique(f"distances among vertices 1..{j + 1} cannot be realized")
        h = float(np.sqrt(max(h2, 0.0)))
        if h < MERGE_DIST:
            raise InfeasibleInitialClique(f"initial clique is degenerate at vertex {j + 1}")
        y[j - 1] = h
        x[j, :j] = y
    layouts = [x]
    if both_signs and head == K + 1:
        mirror = x.copy()
        mirror[K, K - 1] = -mirror[K, K - 1]
        layouts.append(mirror)
    return layouts


# -- search -------------------------------------------------------------------

class _Search:
    def __init__(self, instance: DgpInstance, order: DiscretizationOrder, opts: BPOptions):
        self.instance = instance
        self.order = order
        self.opts = opts
        self.n, self.K = instance.n, instance.K
        em = instance.edge_map()
        self.ref_radii = [np.array([em[(j, i)].d for j in refs]) for i, refs in enumerate(order.reference_predecessors)]
        self.checks: list[list[tuple[int, object]]] = [[] for _ in range(self.n)]
        for u, v in order.pruning_edges:
            self.checks[v].append((u, em[(u, v)]))
        self.level_counts = [0] * self.n
        self.pruned = 0
        self.leaves: list[np.ndarray] = []
        self.stopped = False
        self.rng = _rng.generator(opts.seed, "bp-order") if opts.seed is not None else None

    def children(self, x: np.ndarray, i: int) -> list[np.ndarray]:
        refs = self.order.reference_predecessors[i]
        C = x[list(refs)]
        frame = _hyperplane(C)
        if frame is None:
            self.pruned += 1
            return []
        out = []
        for p in _intersect(C, self.ref_radii[i], frame, self.opts.tol):
            ok = True
            for u, e in self.checks[i]:
                if e.error(float(np.linalg.norm(p - x[u]))) > self.opts.tol:
                    ok = False
                    break
            if ok:
                out.append(p)
            else:
                self.pruned += 1
        if self.rng is not None and len(out) == 2 and self.rng.random() < 0.5:
            out.reverse()
        return out

    def run(self, x: np.ndarray, depth: int) -> None:
        # iterative DFS from a node with vertices 0..depth-1 placed
        stack = [(x, depth)]
        limit = self.opts.max_solutions
        while stack:
            x, depth = stack.pop()
            if depth == self.n:
                self.leaves.append(x)
                if limit is not None and len(self.leaves) >= limit:
                    self.stopped = bool(stack)
                    return
                continue
            kids = self.children(x, depth)
            self.level_counts[depth] += len(kids)
            for p in reversed(kids):
                y = x.copy()
                y[depth] = p
                stack.append((y, depth + 1))


def _run_subtree(args):
    instance, order, opts, x, depth = args
    s = _Search(instance, order, opts)
    s.run(x, depth)
    return s.leaves, s.level_counts, s.pruned


def _canonical_key(x: np.ndarray):
    return tuple(np.round(x.ravel(), 9).tolist())


def dedupe(realizations, tol: float, allow_reflection: bool) -> list[Realization]:
    """Keep one representative per congruence class, in input order."""
    kept: list[Realization] = []
    dists: list[np.ndarray] = []
    frames: list[float] = []
    for r in realizations:
        D = pairwise_distances(r.coords)
        dup = False
        if dists:
            diff = np.max(np.abs(np.stack(dists) - D), axis=(1, 2))
            for k in np.flatnonzero(diff <= tol):
                if allow_reflection:
                    dup = True
                    break
                idx = _orientation_frame(kept[k].coords, tol)
                if idx is None or np.sign(_frame_det(kept[k].coords, idx)) == np.sign(_frame_det(r.coords, idx)):
                    dup = True
                    break
        if not dup:
            kept.append(r)
            dists.append(D)
    return kept


def bp_solve(instance: DgpInstance, options: BPOptions | None = None, **kw) -> SolutionSet:
    """Enumerate the incongruent realizations of a discretizable instance."""
    opts = options or BPOptions(**kw)
    order = classify_order(instance)
    if order.kind is OrderKind.NOT_DISCRETIZABLE:
        raise NotDiscretizable(order.reason)
    n, K = instance.n, instance.K
    head = min(n, K + 1)
    layouts = _place_clique(instance, head, opts.tol, both_signs=not opts.fix_reflection)
    search = _Search(instance, order, opts)
    # the clique layouts still have to pass pruning edges inside the clique
    roots = []
    for lay in layouts:
        x = np.zeros((n, K))
        x[:head] = lay
        ok = all(e.error(float(np.linalg.norm(x[v] - x[u]))) <= opts.tol
                 for v in range(head) for u, e in search.checks[v])
        if ok:
            roots.append(x)
        else:
            search.pruned += 1
    for lvl in range(head - 1):
        search.level_counts[lvl] = 1 if roots else 0
    search.level_counts[head - 1] = len(roots)

    jobs = max(1, int(opts.jobs))
    if jobs == 1 or opts.max_solutions is not None:
        for k, x in enumerate(roots):
            search.run(x, head)
            if opts.max_solutions is not None and len(search.leaves) >= opts.max_solutions:
                search.stopped = search.stopped or k < len(roots) - 1
                break
        leaves, counts, pruned = search.leaves, search.level_counts, search.pruned
    else:
        frontier = [(x, head) for x in roots]
        while frontier and len(frontier) < jobs and frontier[0][1] < n:
            nxt = []
            for x, depth in frontier:
                kids = search.children(x, depth)
                search.level_counts[depth] += len(kids)
                for p in kids:
                    y = x.copy()
                    y[depth] = p
                    nxt.append((y, depth + 1))
            frontier = nxt
        counts, pruned = list(search.level_counts), search.pruned
        leaves = [x for x, depth in frontier if depth == n]
        tasks = [(instance, order, opts, x, depth) for x, depth in frontier if depth < n]
        if tasks:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for sub_leaves, sub_counts, sub_pruned in pool.map(_run_subtree, tasks):
                    leaves.extend(sub_leaves)
                    counts = [a + b for a, b in zip(counts, sub_counts)]
                    pruned += sub_pruned
    sols = dedupe([Realization(x) for x in leaves], opts.tol, allow_reflection=False)
    sols.sort(key=lambda r: _canonical_key(r.coords))
    return SolutionSet(sols, counts, pruned, opts.fix_reflection, search.stopped)


# -- symmetry -----------------------------------------------------------------

def pruning_group(order: DiscretizationOrder, n: int | None = None, K: int | None = None) -> PruningGroup:
    """Generators g_i of the partial-reflection group: levels i > K such that
    no pruning edge {u, v} has u + K < i <= v (1-based labels)."""
    if order.kind is not OrderKind.DMDGP:
        raise NotDmdgp(f"partial reflection symmetry needs a DMDGP order, got {order.kind.value}")
    n = order.n if n is None else n
    K = order.K if K is None else K
    gens = []
    for i in range(K + 1, n + 1):
        if not any(u + 1 + K < i <= v + 1 for u, v in order.pruning_edges):
            gens.append(i)
    return PruningGroup(tuple(gens), K)


def partial_reflection(x: Realization, level: int, K: int | None = None) -> Realization:
    """Reflect vertices level..n (1-based) through the hyperplane spanned by
    the K vertices just before them; earlier vertices stay put."""
    c = np.array(x.coords)
    K = x.K if K is None else K
    if level <= K or level > x.n:
        raise ValueError(f"level must lie in ({K}, {x.n}], got {level}")
    anchors = c[level - 1 - K:level - 1]
    frame = _hyperplane(anchors)
    if frame is None:
        raise DegenerateHyperplane(f"vertices {level - K}..{level - 1} are affinely dependent")
    nrm = frame[2]
    tail = c[level - 1:]
    c[level - 1:] = tail - 2.0 * np.outer((tail - anchors[0]) @ nrm, nrm)
    return Realization(c)


def orbit_generate(x: Realization, group: PruningGroup, instance: DgpInstance,
                   tol: float = DEFAULT_TOL, fix_reflection: bool = False) -> SolutionSet:
    """All images of ``x`` under the pruning group that still satisfy the instance.

    With ``fix_reflection`` the generator at level K+1 (a global mirror image)
    is left out, matching a BP run that fixed the first branching.
    """
    if validate(instance, x, tol).max_abs_error > tol:
        raise InvalidSeedSolution("seed realization does not satisfy the instance")
    gens = [g for g in group.generator_levels if not (fix_reflection and g == group.K + 1)]
    images = []
    for mask in range(1 << len(gens)):
        y = x
        for b, lvl in enumerate(gens):
            if mask >> b & 1:
                y = partial_reflection(y, lvl, group.K)
        if validate(instance, y, tol).max_abs_error <= tol:
            images.append(y)
    sols = dedupe(images, tol, allow_reflection=False)
    sols.sort(key=lambda r: _canonical_key(r.coords))
    return SolutionSet(sols, [], 0, fix_reflection)


def predicted_solution_count(order: DiscretizationOrder, fix_reflection: bool = True) -> int | None:
    """Incongruent solution count implied by the pruning group, or None when
    interval pruning edges make it unavailable."""
    if order.kind is not OrderKind.DMDGP:
        raise NotDmdgp(f"solution count prediction needs a DMDGP order, got {order.kind.value}")
    if order.interval_pruning:
        return None
    if order.n <= order.K:
        return 1
    g = pruning_group(order)
    return 2 ** (len(g.generator_levels) - (1 if fix_reflection else 0))
