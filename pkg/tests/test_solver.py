import json
import math

import numpy as np
import pytest

from pfreal.distribution import sample_sphere
from pfreal.monodromy import DEDUP_TOL, OrbitSet, is_nontrivial
from pfreal.network import (
    ModelError, build_system, complete_graph, cycle_graph, network_count_bounds, tree_from_edges,
    trivial_solutions,
)
from pfreal.solver import (
    IncompleteStartSet, StartSet, check_tree_trivial, classify_real, family_residuals,
    max_real_construction, solve_all, verify_infinite_family,
)
from pfreal.tracker import total_degree_start, track_all


def _set_distance(A, B):
    return max(max(np.min(np.max(np.abs(B - a), axis=1)) for a in A),
               max(np.min(np.max(np.abs(A - b), axis=1)) for b in B))


def test_k4_random_solution_counts(starts, rng):
    st = starts("complete", 4)
    sol = solve_all(st.network, sample_sphere(6, rng), st, rng)
    assert sol.n_nontrivial == 12 and len(sol.trivial) == 8
    assert sol.paths_tracked == 6 and sol.complete
    assert sol.n_real_nontrivial % 2 == 0


@pytest.mark.parametrize("n", [3, 4])
def test_matches_total_degree_oracle(starts, n):
    st = starts("cycle", n)
    net = st.network
    s = build_system(net)
    for trial in range(5):
        r = np.random.default_rng(1000 + trial)
        b = sample_sphere(n, r)
        sol = solve_all(net, b, st, r)
        hom, starts_td = total_degree_start(s, b, r)
        reg = OrbitSet(np.ones((1, s.n_eqs)), DEDUP_TOL)
        for res in track_all(hom, starts_td):
            if res.success and is_nontrivial(res.endpoint):
                reg.add(res.endpoint)
        td = reg.representatives
        assert len(td) == sol.n_nontrivial
        assert _set_distance(td, sol.nontrivial) < 1e-7
        _, _, count = classify_real(td, s, b)
        assert count == sol.n_real_nontrivial


def test_y_pairing(starts):
    st = starts("cycle", 5)
    for seed in range(10):
        r = np.random.default_rng(seed)
        sol = solve_all(st.network, sample_sphere(5, r), st, r)
        real = sol.real_nontrivial
        h = real.shape[1] // 2
        for z in real:
            w = np.concatenate((z[:h], -z[h:]))
            assert np.min(np.max(np.abs(real - w), axis=1)) < 1e-8


def test_classify_real():
    s = build_system(cycle_graph(3))
    b = np.ones(3)
    mask, _, count = classify_real(trivial_solutions(3), s, b)
    assert mask.all() and count == 0
    z = np.array([0.5, 0.5, 0.3j, 0.3j])
    mask, _, count = classify_real([z], s, b)
    assert not mask[0] and count == 0


def test_c3_all_ones_six_real(starts):
    st = starts("cycle", 3)
    sol = solve_all(st.network, np.ones(3) / math.sqrt(3), st, np.random.default_rng(0))
    assert sol.n_real == 6 and sol.n_real_nontrivial == 2


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_max_real_construction(starts, n):
    st = starts("cycle", n)
    b, expected = max_real_construction("cycle", n)
    sol = solve_all(st.network, b, st, np.random.default_rng(n))
    assert sol.n_real == expected == n * math.comb(n - 1, (n - 1) // 2)
    assert sol.real_mask.all()
    pts = sol.all_solutions()
    d = np.max(np.abs(pts[:, None] - pts[None]), axis=2) + np.eye(len(pts))
    assert d.min() > 1e-6


def test_max_real_construction_values():
    b, total = max_real_construction("cycle", 8)
    assert total == 280 and b[0] == -1.0 and np.all(b[1:] == 1.0)
    assert max_real_construction("cycle", 5)[1] == 30
    with pytest.raises(ModelError):
        max_real_construction("complete", 4)


@pytest.mark.parametrize("kind,n", [("cycle", 4), ("cycle", 8), ("complete", 4), ("complete", 6)])
def test_equal_susceptances_degenerate(starts, kind, n):
    st = starts(kind, n)
    net = st.network
    b = np.ones(net.n_edges)
    assert verify_infinite_family(net, b)
    assert family_residuals(net, b).max() < 1e-10
    sol = solve_all(net, b, st, np.random.default_rng(0))
    assert sol.degenerate and not sol.complete


def test_family_fails_generic(rng):
    assert not verify_infinite_family(complete_graph(4), sample_sphere(6, rng))
    with pytest.raises(ModelError):
        verify_infinite_family(cycle_graph(5), np.ones(5))


def test_odd_complete_family():
    assert verify_infinite_family(complete_graph(5), np.ones(10))


@pytest.mark.parametrize("edges", [[(0, 1), (1, 2), (2, 3)], [(0, 1), (0, 2), (0, 3)]])
def test_trees_only_trivial(edges):
    assert check_tree_trivial(tree_from_edges(edges), trials=20)


def test_tree_check_rejects_cycle():
    with pytest.raises(ModelError):
        check_tree_trivial(cycle_graph(3))


def test_input_validation(starts):
    st = starts("cycle", 3)
    with pytest.raises(ValueError):
        solve_all(st.network, np.zeros(3), st)
    with pytest.raises(ValueError):
        solve_all(st.network, np.ones(4), st)
    with pytest.raises(ModelError):
        solve_all(cycle_graph(4), np.ones(4), st)
    bad = StartSet.from_dict({**st.to_dict(), "complete": False})
    with pytest.raises(IncompleteStartSet):
        solve_all(st.network, np.ones(3), bad)


def test_scale_invariance(starts, rng):
    st = starts("complete", 4)
    b = sample_sphere(6, rng)
    a = solve_all(st.network, b, st, np.random.default_rng(1))
    c = solve_all(st.network, -7.5 * b, st, np.random.default_rng(1))
    assert a.n_real_nontrivial == c.n_real_nontrivial


def test_serialization(starts, rng):
    st = starts("cycle", 4)
    again = StartSet.from_json(st.to_json())
    assert again.digest == st.digest and np.array_equal(again.representatives, st.representatives)
    sol = solve_all(st.network, sample_sphere(4, rng), st, rng)
    doc = json.loads(sol.to_json())
    assert doc["start_set"] == st.digest and len(doc["nontrivial"]) == 4
    assert doc["n_real"] == sol.n_real


def test_path_count_economy(starts):
    for kind, n in (("complete", 4), ("cycle", 5), ("cycle", 4)):
        st = starts(kind, n)
        assert st.n_paths == network_count_bounds(st.network)[1] // st.group_order
