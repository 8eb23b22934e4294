"""Rigidity percolation in the plane.

Edges of a finite patch (a piece of the triangular tessellation, or the
complete graph for Erdos-Renyi sampling) are retained independently with
probability p and added one at a time in random order. A (2,3) pebble game
tracks rank and rigid clusters as the graph grows.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import Graph, InvariantError
from .rigidity import PebbleGame
from .rng import generator

SPANNING_MODES = ("all", "boundary")
PROCESSES = ("dilution", "resample")


@dataclass(frozen=True)
class LatticePatch:
    generator: str  # "triangular", "erdos_renyi" or "graph"
    n: int
    edges: tuple[tuple[int, int], ...]
    rows: int | None = None
    cols: int | None = None

    @property
    def graph(self) -> Graph:
        return Graph(self.n, self.edges)

    def sides(self) -> list[tuple[set[int], set[int]]]:
        """Pairs of opposite boundary vertex sets (triangular patches only)."""
        if self.generator != "triangular":
            raise InvariantError("boundary spanning is defined for triangular patches only")
        R, C = self.rows, self.cols
        left = {r * C for r in range(R)}
        right = {r * C + C - 1 for r in range(R)}
        top = set(range(C))
        bottom = {(R - 1) * C + c for c in range(C)}
        return [(left, right), (top, bottom)]


def triangular_patch(rows: int, cols: int) -> LatticePatch:
    """rows x cols vertices, open boundary; (r, c) joins (r, c+1), (r+1, c), (r+1, c+1)."""
    if rows < 1 or cols < 1:
        raise InvariantError("patch needs at least one row and one column")
    edges = []
    for r in range(rows):
        for c in range(cols):
            for dr, dc in ((0, 1), (1, 0), (1, 1)):
                if r + dr < rows and c + dc < cols:
                    edges.append((r * cols + c, (r + dr) * cols + c + dc))
    return LatticePatch("triangular", rows * cols, tuple(edges), rows, cols)


def gnp_patch(n: int) -> LatticePatch:
    """Complete graph on n vertices; retaining each edge with probability p gives G(n, p)."""
    if n < 1:
        raise InvariantError("n must be positive")
    edges = tuple((u, v) for u in range(n) for v in range(u + 1, n))
    return LatticePatch("erdos_renyi", n, edges)


def graph_patch(graph: Graph) -> LatticePatch:
    return LatticePatch("graph", graph.n, tuple(graph.edges))


@dataclass(frozen=True)
class Snapshot:
    edge_count: int
    eta: float
    largest_rigid_component_size: int
    is_spanning_rigid: bool


@dataclass
class PercolationTrajectory:
    n: int
    snapshots: list[Snapshot] = field(default_factory=list)
    edges: list[tuple[int, int]] = field(default_factory=list)
    components: list[list[int]] = field(default_factory=list)

    @property
    def final(self) -> Snapshot:
        return self.snapshots[-1]


def _eta(m: int, n: int) -> float:
    return 2.0 * m / (n * (n - 1)) if n > 1 else 0.0


def _spans(patch: LatticePatch, game: PebbleGame, comps, mode: str) -> bool:
    if mode == "all":
        return game.is_rigid()
    for comp in comps:
        s = set(comp)
        if len(s) > 1 and any(s & a and s & b for a, b in patch.sides()):
            return True
    return False


def _edge_sequence(patch: LatticePatch, p: float, rng: np.random.Generator,
                   process: str, max_steps: int | None) -> list[tuple[int, int]]:
    edges = patch.edges
    if process == "dilution":
        keep = np.flatnonzero(rng.random(len(edges)) < p)
        return [edges[i] for i in keep[rng.permutation(keep.size)]]
    if process != "resample":
        raise InvariantError(f"unknown process {process!r}; expected one of {PROCESSES}")
    # repeatedly draw a candidate edge and add it with probability p
    budget = 10 * len(edges) if max_steps is None else max_steps
    present: set[int] = set()
    out = []
    for _ in range(budget):
        if len(present) == len(edges):
            break
        i = int(rng.integers(len(edges)))
        if i not in present and rng.random() < p:
            present.add(i)
            out.append(edges[i])
    return out


def run_percolation(patch: LatticePatch, p: float, seed: int = 0, spanning: str = "all",
                    process: str = "dilution", max_steps: int | None = None,
                    keys: tuple = ()) -> PercolationTrajectory:
    """Grow the retained edge set one edge at a time, snapshotting after each addition.

    The first snapshot is the empty graph. Rigid clusters only change when
    an independent edge arrives, so they are recomputed only then.
    """
    if not (0.0 <= p <= 1.0):
        raise InvariantError(f"p must lie in [0, 1], got {p}")
    if spanning not in SPANNING_MODES:
        raise InvariantError(f"unknown spanning mode {spanning!r}; expected one of {SPANNING_MODES}")
    n = patch.n
    rng = generator(seed, "percolation", *keys)
    seq = _edge_sequence(patch, p, rng, process, max_steps)
    game = PebbleGame(n)
    comps = [[v] for v in range(n)]
    traj = PercolationTrajectory(n)
    traj.snapshots.append(Snapshot(0, 0.0, 1, n == 1))
    for m, (u, v) in enumerate(seq, start=1):
        if game.add_edge(u, v):
            comps = game.components()
        traj.snapshots.append(Snapshot(m, _eta(m, n), len(comps[0]), _spans(patch, game, comps, spanning)))
    traj.edges = list(seq)
    traj.components = comps
    return traj


def _first_spanning(patch: LatticePatch, seq, spanning: str) -> int | None:
    """Smallest prefix length of ``seq`` that is spanning rigid, or None."""
    n = patch.n
    if spanning == "all":
        game = PebbleGame(n)
        if game.is_rigid():
            return 0
        for m, (u, v) in enumerate(seq, start=1):
            if game.add_edge(u, v) and game.is_rigid():
                return m
        return None

    # boundary spanning is monotone in the prefix, so bisect on it
    def spans(m: int) -> bool:
        game = PebbleGame(n)
        for u, v in seq[:m]:
            game.add_edge(u, v)
        return _spans(patch, game, game.components(), spanning)

    if not spans(len(seq)):
        return None
    lo, hi = 0, len(seq)
    while lo < hi:
        mid = (lo + hi) // 2
        if spans(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def _trial(args) -> tuple[bool, float | None]:
    patch, p, seed, pi, t, spanning, process, max_steps = args
    rng = generator(seed, "percolation", pi, t)
    seq = _edge_sequence(patch, p, rng, process, max_steps)
    m = _first_spanning(patch, seq, spanning)
    return (False, None) if m is None else (True, _eta(m, patch.n))


@dataclass(frozen=True)
class SweepRow:
    p: float
    fraction_spanning_rigid: float
    mean_eta_at_rigidity: float  # nan when no trial became rigid


def sweep(patch: LatticePatch, p_values, trials_per_p: int, seed: int = 0,
          jobs: int = 1, spanning: str = "all", process: str = "dilution",
          max_steps: int | None = None) -> list[SweepRow]:
    """Monte-Carlo fraction of spanning-rigid outcomes per p.

    Trial t at the i-th p uses the stream keyed by (seed, i, t), so the
    table does not depend on ``jobs``.
    """
    if trials_per_p < 1:
        raise InvariantError("trials_per_p must be at least 1")
    if spanning not in SPANNING_MODES:
        raise InvariantError(f"unknown spanning mode {spanning!r}; expected one of {SPANNING_MODES}")
    p_values = [float(p) for p in p_values]
    for p in p_values:
        if not (0.0 <= p <= 1.0):
            raise InvariantError(f"p must lie in [0, 1], got {p}")
    tasks = [(patch, p, seed, i, t, spanning, process, max_steps)
             for i, p in enumerate(p_values) for t in range(trials_per_p)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_trial, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_trial(t) for t in tasks]
    rows = []
    for i, p in enumerate(p_values):
        chunk = results[i * trials_per_p:(i + 1) * trials_per_p]
        etas = [e for ok, e in chunk if ok]
        frac = sum(ok for ok, _ in chunk) / trials_per_p
        rows.append(SweepRow(p, frac, float(np.mean(etas)) if etas else math.nan))
    return rows


def crossing(rows: list[SweepRow], level: float = 0.5) -> float | None:
    """Linearly interpolated p where the fraction first reaches ``level``."""
    prev = None
    for r in rows:
        if r.fraction_spanning_rigid >= level:
            if prev is None or r.fraction_spanning_rigid == prev.fraction_spanning_rigid:
                return r.p
            t = (level - prev.fraction_spanning_rigid) / (r.fraction_spanning_rigid - prev.fraction_spanning_rigid)
            return prev.p + t * (r.p - prev.p)
        prev = r
    return None


def sweep_csv(rows: list[SweepRow]) -> str:
    lines = ["p,fraction_spanning_rigid,mean_eta"]
    lines += [f"{r.p!r},{r.fraction_spanning_rigid!r},{r.mean_eta_at_rigidity!r}" for r in rows]
    return "\n".join(lines) + "\n"
