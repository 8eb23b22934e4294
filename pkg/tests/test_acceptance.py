"""End-to-end acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line with its measured runtime; the lines are
printed in the terminal summary.
"""

import contextlib
import io
import itertools
import json
import math
import time

import numpy as np
import pytest
from scipy.sparse.csgraph import shortest_path

from dgkit.bp import bp_solve, classify_order, orbit_generate, predicted_solution_count, pruning_group
from dgkit.cli import main
from dgkit.core import Graph, congruent, validate
from dgkit.embed import (FiniteMetric, frechet_embed, linf_distances, partition_bruteforce,
                         partition_from_realization, partition_sums, partition_to_edgp1, realize_partition_yes)
from dgkit.linalg import gram_from_sqedm, realize_from_gram, sqedm_from_realization
from dgkit.percolation import crossing, sweep, triangular_patch
from dgkit.rigidity import (PebbleVerdict, Status, connected_components, count_condition, double_banana,
                            generic_rigidity, laman_bruteforce, pebble_game_2_3)
from dgkit.udgp import DistanceList, tribond

from _support import random_dmdgp, same_point_set

pytestmark = pytest.mark.acceptance


def finish(report, k: int, ok: bool, detail: str, elapsed: float, limit: float) -> None:
    passed = ok and elapsed < limit
    line = f"ACCEPTANCE {k}: {'PASS' if passed else 'FAIL'} - {detail} ({elapsed:.2f} s, limit {limit:g} s)"
    report(line)
    print(line)
    assert ok, detail
    assert elapsed < limit, f"runtime {elapsed:.2f} s exceeds {limit:g} s"


def test_edm_gram_roundtrip(report):
    rng = np.random.default_rng(20240101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(500):
        n, K = int(rng.integers(1, 31)), int(rng.integers(1, 6))
        x = rng.standard_normal((n, K))
        D = sqedm_from_realization(x)
        y = realize_from_gram(gram_from_sqedm(D), K)
        worst = max(worst, float(np.abs(sqedm_from_realization(y) - D).max()))
    elapsed = time.perf_counter() - t0
    finish(report, 1, worst < 1e-8, f"500 roundtrips, worst sqEDM error {worst:.2e} < 1e-8", elapsed, 10)


def test_double_banana(report):
    t0 = time.perf_counter()
    g = double_banana()
    counts = g.m == 3 * g.n - 6 == 18 and count_condition(g, 3)
    verdicts = [generic_rigidity(g, 3, seed=s).status for s in range(20)]
    flexible = all(v is Status.FLEXIBLE for v in verdicts)
    elapsed = time.perf_counter() - t0
    finish(report, 2, counts and flexible,
           f"|E|={g.m}, 3D counts hold={counts}, Flexible on {sum(v is Status.FLEXIBLE for v in verdicts)}/20 seeds",
           elapsed, 5)


def test_pebble_matches_laman(report):
    t0 = time.perf_counter()
    checked = mismatches = 0
    for n in range(2, 7):
        pairs = list(itertools.combinations(range(n), 2))
        for mask in range(1, 1 << len(pairs)):
            if bin(mask).count("1") < n - 1:
                continue
            g = Graph(n, tuple(p for k, p in enumerate(pairs) if mask >> k & 1))
            if len(connected_components(g)) != 1:
                continue
            checked += 1
            minimal = pebble_game_2_3(g)[0] is PebbleVerdict.MINIMALLY_RIGID
            mismatches += minimal != laman_bruteforce(g)
    elapsed = time.perf_counter() - t0
    finish(report, 3, mismatches == 0 and checked > 0,
           f"{checked} connected graphs on 2..6 vertices, {mismatches} disagreements", elapsed, 60)


def _dmdgp_family(seed: int, pruning_edges: int):
    rng = np.random.default_rng(seed)
    for _ in range(100):
        K = int(rng.choice([2, 3]))
        n = int(rng.integers(K + 2, 11))
        yield K, n, random_dmdgp(rng, K, n, pruning_edges)[0]


def test_bp_solution_counts(report):
    t0 = time.perf_counter()
    bad = []
    for K, n, inst in _dmdgp_family(7, 0):
        sols = bp_solve(inst)
        expect = [2 ** max(0, i - K - 1) for i in range(1, n + 1)]
        if len(sols) != 2 ** (n - K - 1) or sols.level_counts != expect:
            bad.append((K, n, len(sols)))
    elapsed = time.perf_counter() - t0
    finish(report, 4, not bad, f"100 DMDGP instances, {len(bad)} with wrong count or level counts", elapsed, 30)


def test_bp_symmetry_orbits(report):
    t0 = time.perf_counter()
    bad = []
    for K, n, inst in _dmdgp_family(8, 1):
        sols = bp_solve(inst)
        order = classify_order(inst)
        orbit = orbit_generate(sols.solutions[0], pruning_group(order), inst, tol=1e-6, fix_reflection=True)
        same = len(orbit) == len(sols) and all(
            any(congruent(y, x, 1e-6) for x in sols.solutions) for y in orbit.solutions)
        if not same or len(sols) != predicted_solution_count(order):
            bad.append((K, n))
    elapsed = time.perf_counter() - t0
    finish(report, 5, not bad, f"100 DMDGP instances with a pruning edge, {len(bad)} mismatches", elapsed, 30)


def test_partition_reduction(report):
    rng = np.random.default_rng(6)
    t0 = time.perf_counter()
    bad = yes = 0
    for _ in range(500):
        a = [int(v) for v in rng.integers(1, 10, 6)]
        witness = partition_bruteforce(a)
        inst = partition_to_edgp1(a)
        sols = bp_solve(inst)
        if (witness is not None) != (len(sols) > 0):
            bad += 1
            continue
        if witness is not None:
            yes += 1
            x = realize_partition_yes(a, witness)
            ok = validate(inst, x).max_abs_error == 0
            ok &= all(len(set(partition_sums(a, partition_from_realization(a, y)))) == 1 for y in sols.solutions)
            bad += not ok
    elapsed = time.perf_counter() - t0
    finish(report, 6, bad == 0, f"500 draws (n=6), {yes} YES, {bad} failures", elapsed, 20)


def test_frechet_isometry(report):
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 21))
        W = np.triu(np.where(rng.random((n, n)) < 0.3, rng.uniform(0.1, 10, (n, n)), 0), 1)
        W[np.arange(n - 1), np.arange(1, n)] = rng.uniform(0.1, 10, n - 1)
        d = shortest_path(W, directed=False)
        x = frechet_embed(FiniteMetric(n, d))
        worst = max(worst, float(np.abs(linf_distances(x.coords) - d).max()))
    elapsed = time.perf_counter() - t0
    finish(report, 7, worst < 1e-12, f"100 shortest-path metrics, worst l-inf error {worst:.1e}", elapsed, 5)


def test_tribond_recovery(report):
    rng = np.random.default_rng(8)
    t0 = time.perf_counter()
    misses = []
    for _ in range(100):
        K = int(rng.integers(1, 4))
        # four points in space have six distances and six degrees of freedom,
        # so their list does not pin down the tetrahedron; start at five there
        n = int(rng.integers(5 if K == 3 else K + 1, 8))
        x = rng.random((n, K))
        D = np.linalg.norm(x[:, None] - x[None], axis=2)
        lst = DistanceList(K, n, tuple(rng.permutation(D[np.triu_indices(n, 1)])))
        r = tribond(lst)
        if r.status != "found" or not same_point_set(r.realization.coords, x):
            misses.append((K, n, r.status))
    infeasible = tribond(DistanceList(1, 3, (1, 1, 5))).status == "infeasible"
    elapsed = time.perf_counter() - t0
    finish(report, 8, not misses and infeasible,
           f"100 random sets, {len(misses)} not recovered; {{1,1,5}} infeasible={infeasible}", elapsed, 120)


def test_percolation_threshold(report):
    t0 = time.perf_counter()
    ps = [round(0.50 + 0.05 * i, 2) for i in range(8)]
    rows = sweep(triangular_patch(10, 10), ps, 100, seed=0)
    p_star = crossing(rows)
    elapsed = time.perf_counter() - t0
    table = ", ".join(f"{r.p:.2f}:{r.fraction_spanning_rigid:.2f}" for r in rows)
    where = "no crossing up to 0.85" if p_star is None else f"crossing at p={p_star:.3f}"
    finish(report, 9, p_star is not None and 0.55 <= p_star <= 0.80,
           f"10x10 patch, {where} [{table}]", elapsed, 120)


SUBCOMMANDS = {
    "convert": (["convert", "--to", "sqedm"], "x"),
    "validate": (["validate", "--x", "{x}"], "inst"),
    "edm2gram": (["edm2gram"], "edm"),
    "gram2x": (["gram2x", "--dim", "2"], "gram"),
    "rank": (["rank"], "gram"),
    "rigidity": (["rigidity", "--mode", "generic", "--seed", "3"], "inst"),
    "solve-bp": (["solve-bp", "--stats"], "dmdgp"),
    "udgp-tribond": (["udgp-tribond"], "list"),
    "reduce-partition": (["reduce-partition"], "partition"),
    "embed-frechet": (["embed-frechet"], "metric"),
    "jll": (["jll", "--epsilon", "0.3", "--seed", "11"], "points"),
    "percolate": (["percolate", "--rows", "5", "--cols", "5", "--p-list", "0.6,0.8,1.0", "--trials", "10",
                   "--seed", "4"], None),
}


def _capture(argv) -> tuple[int, str]:
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = main(argv)
    return code, buf.getvalue()


def test_cli_determinism(report, tmp_path):
    rng = np.random.default_rng(10)
    x = rng.random((6, 2))
    inst, _ = random_dmdgp(rng, 2, 9)
    from dgkit.core import dump_instance, instance_from_realization, Realization
    D = sqedm_from_realization(x)
    inputs = {
        "x": json.dumps({"K": 2, "n": 6, "x": x.tolist()}),
        "inst": dump_instance(instance_from_realization(Realization(x), [(i, i + 1) for i in range(5)] + [(0, 5)])),
        "edm": json.dumps({"n": 6, "m": D.tolist()}),
        "gram": json.dumps({"n": 6, "m": gram_from_sqedm(D).tolist()}),
        "dmdgp": dump_instance(inst),
        "list": json.dumps({"K": 2, "n": 5, "distances": rng.permutation(
            np.sqrt(D[:5, :5][np.triu_indices(5, 1)])).tolist()}),
        "partition": json.dumps([3, 1, 1, 2, 2, 1]),
        "metric": json.dumps({"n": 6, "d": np.sqrt(D).tolist()}),
        "points": json.dumps({"points": rng.standard_normal((8, 30)).tolist()}),
    }
    paths = {}
    for name, text in inputs.items():
        p = tmp_path / f"{name}.json"
        p.write_text(text)
        paths[name] = str(p)

    t0 = time.perf_counter()
    failures = []
    for name, (argv, src) in SUBCOMMANDS.items():
        argv = [a.replace("{x}", paths["x"]) for a in argv]
        if src is not None:
            argv = argv + ["--in", paths[src]]
        runs = [_capture(argv), _capture(argv)]
        if "--jobs" not in argv and name in ("solve-bp", "percolate"):
            runs.append(_capture(argv + ["--jobs", "4"]))
        codes = {c for c, _ in runs}
        outs = {o for _, o in runs}
        if codes != {0} or len(outs) != 1 or not runs[0][1]:
            failures.append(name)
    elapsed = time.perf_counter() - t0
    finish(report, 10, not failures,
           f"{len(SUBCOMMANDS)} subcommands byte-identical across reruns and --jobs 4; failing: {failures or 'none'}",
           elapsed, 30)
