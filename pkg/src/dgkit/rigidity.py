"""Rigidity of frameworks and graphs.

Infinitesimal rigidity comes from the rank of the rigidity matrix. Generic
rigidity uses that test at random realizations, so its answers are
probabilistic. Plane rigidity also has a combinatorial answer through
Laman counts and the (2,3) pebble game.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from itertools import combinations

import networkx as nx
import numpy as np

from . import rng as _rng
from .core import DgpInstance, Framework, Graph, Realization
from .errors import TooLarge, UnsupportedDimension
from .linalg import numerical_rank

LAMAN_MAX_VERTICES = 16
DEFAULT_TRIALS = 3


class Status(str, enum.Enum):
    RIGID = "Rigid"
    FLEXIBLE = "Flexible"
    DEGENERATE = "DegenerateAffineHull"


class PebbleVerdict(str, enum.Enum):
    MINIMALLY_RIGID = "MinimallyRigid"
    REDUNDANT = "RigidWithRedundancy"
    FLEXIBLE = "Flexible"


@dataclass(frozen=True)
class RigidityMatrix:
    entries: np.ndarray
    edge_index: tuple[tuple[int, int], ...]
    K: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


@dataclass(frozen=True)
class RigidityVerdict:
    status: Status
    rank: int
    dof: int
    probabilistic: bool = False

    def to_dict(self) -> dict:
        out = {"status": self.status.value, "rank": self.rank, "dof": self.dof}
        if self.probabilistic:
            out["kind"] = "generic (probabilistic)"
        return out


def as_graph(obj: Graph | DgpInstance | Framework) -> Graph:
    if isinstance(obj, Framework):
        return obj.instance.graph
    if isinstance(obj, DgpInstance):
        return obj.graph
    return obj


def _rigidity_entries(n: int, K: int, edges, coords: np.ndarray) -> np.ndarray:
    R = np.zeros((len(edges), K * n))
    for row, (u, v) in enumerate(edges):
        diff = coords[u] - coords[v]
        R[row, u * K:(u + 1) * K] = diff
        R[row, v * K:(v + 1) * K] = -diff
    return R


def rigidity_matrix(fw: Framework) -> RigidityMatrix:
    g = fw.instance.graph
    K = fw.instance.K
    return RigidityMatrix(_rigidity_entries(g.n, K, g.edges, fw.realization.coords), g.edges, K)


def affine_dimension(coords: np.ndarray) -> int:
    if coords.shape[0] < 2:
        return 0
    return numerical_rank(coords[1:] - coords[0])


def _full_rank_target(n: int, K: int) -> int:
    return K * n - K * (K + 1) // 2


def infinitesimal_rigidity(fw: Framework, tol: float = 1e-10) -> RigidityVerdict:
    """Rank test on the rigidity matrix of a concrete framework."""
    n, K = fw.instance.n, fw.instance.K
    R = rigidity_matrix(fw).entries
    rank = numerical_rank(R, tol) if R.size else 0
    dof = K * n - rank
    if n < K + 1 or affine_dimension(fw.realization.coords) < K:
        return RigidityVerdict(Status.DEGENERATE, rank, dof)
    status = Status.RIGID if rank == _full_rank_target(n, K) else Status.FLEXIBLE
    return RigidityVerdict(status, rank, dof)


def _generic_rank(g: Graph, K: int, trials: int, seed: int) -> int:
    best = 0
    for t in range(trials):
        gen = _rng.generator(seed, "generic-rigidity", t)
        coords = gen.random((g.n, K))
        if g.m:
            best = max(best, numerical_rank(_rigidity_entries(g.n, K, g.edges, coords)))
    return best


def generic_rigidity(graph: Graph | DgpInstance, K: int, trials: int = DEFAULT_TRIALS,
                     seed: int = 0) -> RigidityVerdict:
    """Randomized generic rigidity: maximum rigidity-matrix rank over ``trials``
    uniform random realizations in the unit cube.

    Graphs with at most K vertices cannot span R^K; they are rigid exactly
    when complete.
    """
    g = as_graph(graph)
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rank = _generic_rank(g, K, trials, seed)
    dof = K * g.n - rank
    if g.n <= K:
        target = g.n * (g.n - 1) // 2
    else:
        target = _full_rank_target(g.n, K)
    status = Status.RIGID if rank == target else Status.FLEXIBLE
    return RigidityVerdict(status, rank, dof, probabilistic=True)


def connected_components(g: Graph) -> list[list[int]]:
    adj = g.adjacency()
    seen = [False] * g.n
    comps = []
    for s in range(g.n):
        if seen[s]:
            continue
        seen[s] = True
        comp, queue = [s], deque([s])
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                if not seen[w]:
                    seen[w] = True
                    comp.append(w)
                    queue.append(w)
        comps.append(sorted(comp))
    return comps


def rigid_k1(graph: Graph | DgpInstance) -> bool:
    """On the line, generic rigidity is connectivity."""
    return len(connected_components(as_graph(graph))) <= 1


def count_condition(graph: Graph | DgpInstance, K: int = 2) -> bool:
    """Maxwell/Laman counts in dimension ``K``, by subset enumeration.

    Requires ``|E| = K|V| - K(K+1)/2`` and ``|E'| <= K|V'| - K(K+1)/2`` for the
    induced subgraph on every vertex subset with at least ``K`` vertices
    (smaller subsets make the bound negative even for a single edge when
    ``K >= 3``). For ``K = 2`` this is exactly Laman's condition.
    """
    g = as_graph(graph)
    n = g.n
    if n > LAMAN_MAX_VERTICES:
        raise TooLarge(f"subset enumeration is capped at {LAMAN_MAX_VERTICES} vertices, got {n}")
    c = K * (K + 1) // 2
    if g.m != K * n - c:
        return False
    masks = [(1 << u) | (1 << v) for u, v in g.edges]
    lo = max(K, 2)
    for S in range(1, 1 << n):
        size = S.bit_count()
        if size < lo or size == n:
            continue
        induced = sum(1 for em in masks if em & S == em)
        if induced > K * size - c:
            return False
    return True


def laman_bruteforce(graph: Graph | DgpInstance) -> bool:
    g = as_graph(graph)
    if g.n < 2:
        raise ValueError("Laman check needs at least two vertices")
    return count_condition(g, 2)


class PebbleGame:
    """(2,3) pebble game with rigid-component extraction.

    Each vertex starts with two pebbles. An edge is independent when four
    pebbles can be gathered on its endpoints; it is then covered by a pebble
    from one endpoint and oriented away from it. Otherwise the edge is
    redundant.
    """

    def __init__(self, n: int):
        self.n = n
        self.pebbles = [2] * n
        self.out: list[set[int]] = [set() for _ in range(n)]
        self.independent: list[tuple[int, int]] = []
        self.redundant: list[tuple[int, int]] = []

    def _find_pebble(self, root: int, blocked: set[int]) -> bool:
        # move one free pebble from somewhere reachable to root
        parent = {root: None}
        stack = [root]
        while stack:
            u = stack.pop()
            for w in self.out[u]:
                if w in parent or w in blocked:
                    continue
                parent[w] = u
                if self.pebbles[w] > 0:
                    self.pebbles[w] -= 1
                    while parent[w] is not None:
                        p = parent[w]
                        self.out[p].discard(w)
                        self.out[w].add(p)
                        w = p
                    self.pebbles[root] += 1
                    return True
                stack.append(w)
        return False

    def _gather(self, u: int, v: int, want_u: int, want_v: int) -> bool:
        while self.pebbles[u] < want_u:
            if not self._find_pebble(u, {v}):
                return False
        while self.pebbles[v] < want_v:
            if not self._find_pebble(v, {u}):
                return False
        return True

    def add_edge(self, u: int, v: int) -> bool:
        if self._gather(u, v, 2, 2):
            self.pebbles[u] -= 1
            self.out[u].add(v)
            self.independent.append((u, v))
            return True
        self.redundant.append((u, v))
        return False

    @property
    def rank(self) -> int:
        return len(self.independent)

    def is_rigid(self) -> bool:
        if self.n < 2:
            return True
        return self.rank == 2 * self.n - 3

    def components(self) -> list[list[int]]:
        """Maximal rigid clusters as sorted vertex lists.

        Two clusters share at most one vertex. Vertices touched by no edge
        form singleton clusters.
        """
        assigned: set[tuple[int, int]] = set()
        comps: list[list[int]] = []
        touched = [False] * self.n
        for u, v in self.independent:
            touched[u] = touched[v] = True
            if (u, v) in assigned:
                continue
            # hold three pebbles on the edge, then probe every other vertex
            self._gather(u, v, 2, 1)
            if self.pebbles[u] + self.pebbles[v] < 3:
                self._gather(u, v, 1, 2)
            rigid = {u, v}
            floppy: set[int] = set()
            for w in range(self.n):
                if w in rigid or w in floppy:
                    continue
                visited = self._probe(w, {u, v})
                if visited is None:
                    floppy.add(w)
                else:
                    rigid |= visited
            comp = sorted(rigid)
            comps.append(comp)
            for e in self.independent:
                if e[0] in rigid and e[1] in rigid:
                    assigned.add(e)
        for w in range(self.n):
            if not touched[w]:
                comps.append([w])
        comps.sort(key=lambda c: (-len(c), c))
        return comps

    def _probe(self, w: int, blocked: set[int]) -> set[int] | None:
        # None if a pebble reaches w; otherwise the vertices the failed search saw
        if self.pebbles[w] > 0:
            return None
        seen = {w}
        stack = [w]
        while stack:
            u = stack.pop()
            for x in self.out[u]:
                if x in seen or x in blocked:
                    continue
                if self.pebbles[x] > 0:
                    return None
                seen.add(x)
                stack.append(x)
        return seen


def pebble_game_2_3(graph: Graph | DgpInstance) -> tuple[PebbleVerdict, list[list[int]]]:
    g = as_graph(graph)
    if g.n < 2:
        raise ValueError("pebble game needs at least two vertices")
    game = PebbleGame(g.n)
    for u, v in g.edges:
        game.add_edge(u, v)
    comps = game.components()
    if not game.is_rigid():
        verdict = PebbleVerdict.FLEXIBLE
    elif game.redundant:
        verdict = PebbleVerdict.REDUNDANT
    else:
        verdict = PebbleVerdict.MINIMALLY_RIGID
    return verdict, comps


def redundantly_rigid(graph: Graph | DgpInstance, K: int, trials: int = DEFAULT_TRIALS,
                      seed: int = 0) -> bool:
    g = as_graph(graph)
    if generic_rigidity(g, K, trials, seed).status is not Status.RIGID:
        return False
    for i in range(g.m):
        sub_seed = _rng.derive_seed(seed, "redundant", i)
        if generic_rigidity(g.without_edge(i), K, trials, sub_seed).status is not Status.RIGID:
            return False
    return True


def vertex_connectivity(g: Graph) -> int:
    G = nx.Graph()
    G.add_nodes_from(range(g.n))
    G.add_edges_from(g.edges)
    return nx.node_connectivity(G)


def globally_rigid(graph: Graph | DgpInstance, K: int, trials: int = DEFAULT_TRIALS,
                   seed: int = 0) -> bool:
    """Generic global rigidity on the line (2-connected) or in the plane
    (3-connected and redundantly rigid). Complete graphs are always globally rigid."""
    g = as_graph(graph)
    if K not in (1, 2):
        raise UnsupportedDimension(f"global rigidity is only characterized for K in {{1, 2}}, got {K}")
    if g.is_complete():
        return True
    if K == 1:
        return vertex_connectivity(g) >= 2
    return vertex_connectivity(g) >= 3 and redundantly_rigid(g, 2, trials, seed)


# -- fixtures --------------------------------------------------------------

def complete_graph(n: int) -> Graph:
    return Graph(n, tuple(combinations(range(n), 2)))


def double_banana() -> Graph:
    """Two K5-minus-an-edge bananas sharing their two non-adjacent tips (vertices 0, 1)."""
    edges = []
    for body in ((2, 3, 4), (5, 6, 7)):
        edges += list(combinations(body, 2))
        for tip in (0, 1):
            edges += [(tip, b) for b in body]
    return Graph(8, tuple(edges))
