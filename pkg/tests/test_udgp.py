import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dgkit.core import Realization, pairwise_distances
from dgkit.errors import BadCardinality, IncompleteAssignment
from dgkit.udgp import (DistanceList, best_assignment, dump_distance_list, load_distance_list, tribond,
                        udgp_cost)

from _support import as_realization, same_point_set

R2 = math.sqrt(2)
SQUARE = [[0, 0], [1, 0], [1, 1], [0, 1]]


def distance_list(x: np.ndarray) -> DistanceList:
    n, K = x.shape
    D = pairwise_distances(x)
    return DistanceList(K, n, tuple(D[u, v] for u in range(n) for v in range(u + 1, n)))


class TestTribond:
    def test_line(self):
        r = tribond(DistanceList(1, 3, (1, 2, 3)))
        assert r.status == "found"
        assert same_point_set(r.realization.coords, np.array([[0.0], [1], [3]]))

    def test_square(self):
        r = tribond(DistanceList(2, 4, (1, 1, 1, 1, R2, R2)))
        assert same_point_set(r.realization.coords, np.array(SQUARE, dtype=float))

    def test_infeasible(self):
        r = tribond(DistanceList(1, 3, (1, 1, 5)))
        assert r.status == "infeasible" and r.realization is None

    def test_cardinality(self):
        with pytest.raises(BadCardinality):
            tribond(DistanceList(1, 3, (1, 2)))

    def test_regular_tetrahedron(self):
        r = tribond(DistanceList(3, 4, (1,) * 6))
        assert np.allclose(pairwise_distances(r.realization.coords)[np.triu_indices(4, 1)], 1)

    def test_timeout(self):
        x = np.random.default_rng(5).random((7, 3))
        r = tribond(distance_list(x), timeout_seconds=0.0)
        assert r.status == "timeout"

    def test_noisy_list_fails_fast(self):
        x = np.random.default_rng(6).random((6, 2))
        lst = distance_list(x)
        noisy = DistanceList(2, 6, tuple(v + 1e-3 * (-1) ** i for i, v in enumerate(lst.values)))
        t0 = time.perf_counter()
        r = tribond(noisy)
        assert r.status == "infeasible" and r.depth < 6
        assert time.perf_counter() - t0 < 10

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 2), st.integers(2, 6))
    def test_recovers_random_sets(self, seed, K, n):
        x = np.random.default_rng(seed).random((n, K))
        lst = distance_list(x)
        r = tribond(lst)
        assert r.status == "found"
        assert same_point_set(r.realization.coords, x)
        assert best_assignment(r.realization, lst)[1] < 1e-12 * lst.m


class TestCost:
    def test_exact(self):
        x = as_realization(SQUARE)
        a, cost = best_assignment(x, DistanceList(2, 4, (1, 1, 1, 1, R2, R2)))
        assert cost < 1e-30
        assert udgp_cost(x, DistanceList(2, 4, (1, 1, 1, 1, R2, R2)), a) == cost

    def test_single_pair(self):
        assert udgp_cost(as_realization([[0], [1]]), DistanceList(1, 2, (2.0,)), {0: (0, 1)}) == 1.0

    def test_equal_value_swap(self):
        x = as_realization(SQUARE)
        lst = DistanceList(2, 4, (1, 1, 1.2, 1, R2, R2))
        a, _ = best_assignment(x, lst)
        b = dict(a)
        b[0], b[1] = a[1], a[0]
        assert udgp_cost(x, lst, a) == udgp_cost(x, lst, b)

    def test_incomplete(self):
        with pytest.raises(IncompleteAssignment):
            udgp_cost(as_realization([[0], [1], [3]]), DistanceList(1, 3, (1, 2, 3)), {0: (0, 1)})

    def test_sorted_matching(self):
        a, cost = best_assignment(as_realization([[0], [1], [3]]), DistanceList(1, 3, (1, 2, 3)))
        assert cost == 0 and a == {0: (0, 1), 1: (1, 2), 2: (0, 2)}

    def test_partial_list(self):
        _, cost = best_assignment(as_realization([[0], [1]]), DistanceList(1, 2, (1.1,)))
        assert cost == pytest.approx(0.01)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_correction_drives_cost_to_zero(self, seed):
        # under the generating assignment the cost falls with every corrected
        # value, and the optimal cost never exceeds it
        rng = np.random.default_rng(seed)
        x = rng.random((5, 2))
        true = list(distance_list(x).values)
        pairs = [(u, v) for u in range(5) for v in range(u + 1, 5)]
        a_true = dict(enumerate(pairs))
        vals = list(rng.random(len(true)) * 2)
        X = Realization(x)
        last = math.inf
        for i in range(len(true) + 1):
            lst = DistanceList(2, 5, tuple(vals))
            fixed = udgp_cost(X, lst, a_true)
            assert 0 <= best_assignment(X, lst)[1] <= fixed + 1e-12
            assert fixed <= last + 1e-12
            last = fixed
            if i < len(true):
                vals[i] = true[i]
        assert best_assignment(X, DistanceList(2, 5, tuple(true)))[1] < 1e-24

    def test_optimal_cost_can_rise_after_a_correction(self):
        # points 0, 1, 3 realize (1, 3, 2) on pairs (1,2), (1,3), (2,3); the list
        # (0.5, 0.5, 2.5) costs 2.75, and fixing its last value to the true 2 costs 3.5
        x = as_realization([[0], [1], [3]])
        before = best_assignment(x, DistanceList(1, 3, (0.5, 0.5, 2.5)))[1]
        after = best_assignment(x, DistanceList(1, 3, (0.5, 0.5, 2.0)))[1]
        assert before == pytest.approx(2.75) and after == pytest.approx(3.5)


def test_distance_list_roundtrip():
    lst = DistanceList(2, 3, (1.0, 0.1, math.pi))
    assert load_distance_list(dump_distance_list(lst)) == lst


def flat_sorted(x):
    return np.sort(pairwise_distances(x)[np.triu_indices(len(x), 1)])


def test_four_points_in_space_are_not_determined_by_their_list():
    # swapping two opposite edge lengths of a tetrahedron keeps the list and
    # usually still closes up, giving a non-congruent solution
    x = np.array([[0, 0, 0], [1.0, 0, 0], [0.3, 0.9, 0], [0.2, 0.3, 0.8]])
    D = np.linalg.norm(x[:, None] - x[None], axis=2) ** 2
    D2 = D.copy()
    D2[0, 1] = D2[1, 0] = D[2, 3]
    D2[2, 3] = D2[3, 2] = D[0, 1]
    G = -0.5 * (np.eye(4) - 1 / 4) @ D2 @ (np.eye(4) - 1 / 4)
    w, V = np.linalg.eigh(G)
    assert w.min() > -1e-12
    y = V[:, -3:] * np.sqrt(np.clip(w[-3:], 0, None))
    assert np.allclose(flat_sorted(y), flat_sorted(x))
    assert not same_point_set(y, x)
    r = tribond(distance_list(x))
    assert r.status == "found"
    assert np.allclose(flat_sorted(r.realization.coords), flat_sorted(x))
