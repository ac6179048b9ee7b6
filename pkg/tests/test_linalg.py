import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pfreal.linalg import (
    RankError, SingularMatrixError, kernel_basis, lu_solve, newton_refine, newton_trace,
    nullspace_vector, particular_solution,
)
from pfreal.monodromy import construct_seed
from pfreal.network import build_system, cycle_graph, complete_graph, trivial_solutions
from pfreal.solver import infinite_family_points


def test_lu_identity_and_permutation():
    v = np.array([1 + 2j, -3.0, 0.5j])
    assert np.allclose(lu_solve(np.eye(3), v), v)
    assert np.allclose(lu_solve([[0, 1], [1, 0]], [2.0, 7.0]), [7.0, 2.0])


def test_lu_recovers_known_solution(rng):
    A = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    x = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    assert np.max(np.abs(lu_solve(A, A @ x) - x)) < 1e-10


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 32), st.integers(0, 2**31))
def test_lu_roundtrip_property(n, seed):
    r = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(r.standard_normal((n, n)) + 1j * r.standard_normal((n, n)))
    A = Q @ np.diag(1 + r.random(n))  # condition number <= 2
    x = r.standard_normal(n) + 1j * r.standard_normal(n)
    rhs = A @ x
    sol = lu_solve(A, rhs)
    assert np.linalg.norm(sol - x) <= 1e-10 * np.linalg.norm(x)
    assert np.linalg.norm(A @ sol - rhs) <= 1e-12 * (np.linalg.norm(A, 2) * np.linalg.norm(sol) + np.linalg.norm(rhs))


def test_lu_errors():
    with pytest.raises(SingularMatrixError):
        lu_solve([[1.0, 2.0], [2.0, 4.0]], [1.0, 1.0])
    with pytest.raises(ValueError):
        lu_solve(np.ones((2, 3)), np.ones(2))
    with pytest.raises(ValueError):
        lu_solve(np.eye(2), np.ones(3))
    with pytest.raises(ValueError):
        lu_solve([[np.nan, 0], [0, 1]], [1.0, 1.0])


def test_nullspace_simple(rng):
    v = nullspace_vector(np.array([[1.0, 1.0]]), rng)
    assert abs(np.linalg.norm(v) - 1) < 1e-12
    w = v / v[0]
    assert np.allclose(w, [1, -1])


def test_nullspace_zero_matrix(rng):
    v = nullspace_vector(np.zeros((2, 3)), rng)
    assert abs(np.linalg.norm(v) - 1) < 1e-12


def test_nullspace_c3_seed_matrix(rng):
    s = build_system(cycle_graph(3))
    x = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    z = np.concatenate((x, np.sqrt(1 - x * x)))
    A = s.flow_matrix(z)
    assert A.shape == (2, 3)
    assert np.max(np.abs(A @ nullspace_vector(A, rng))) < 1e-10


def test_nullspace_is_random_and_valid():
    A = np.random.default_rng(0).standard_normal((2, 5))
    v1 = nullspace_vector(A, np.random.default_rng(1))
    v2 = nullspace_vector(A, np.random.default_rng(2))
    assert np.max(np.abs(A @ v1)) < 1e-10 and np.max(np.abs(A @ v2)) < 1e-10
    assert abs(abs(np.vdot(v1, v2)) - 1) > 1e-6  # not the same direction


def test_nullspace_errors(rng):
    with pytest.raises(ValueError):
        nullspace_vector(np.eye(3), rng)
    A = np.array([[1.0, 0, 0], [0, 1, 0]])
    assert kernel_basis(A).shape == (3, 1)
    # square input is rejected even when singular
    with pytest.raises(ValueError):
        nullspace_vector(np.ones((3, 3)), rng)


def test_nullspace_full_column_rank_in_wide_shape(rng):
    # the flow matrix of a tree is square and generically invertible
    from pfreal.network import tree_from_edges
    s = build_system(tree_from_edges([(0, 1), (1, 2), (2, 3)]))
    x = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    A = s.flow_matrix(np.concatenate((x, np.sqrt(1 - x * x))))
    assert A.shape == (3, 3)
    assert kernel_basis(A).shape[1] == 0


def test_particular_solution(rng):
    A = rng.standard_normal((3, 5)) + 1j * rng.standard_normal((3, 5))
    rhs = rng.standard_normal(3)
    x = particular_solution(A, rhs, rng)
    assert np.max(np.abs(A @ x - rhs)) < 1e-10
    with pytest.raises(RankError):
        particular_solution(np.array([[1.0, 1.0], [1.0, 1.0]]), np.array([1.0, 2.0]), rng)


def test_newton_exact_trivial_unchanged():
    s = build_system(cycle_graph(4))
    z = trivial_solutions(4)[3]
    r = newton_refine(s, np.ones(4), z)
    assert r.converged and r.residual == 0.0 and np.array_equal(r.point, z)


def test_newton_perturbed_trivial_returns_quickly(rng):
    # recorded behavior: 3 or 4 iterations from a 1e-3 perturbation
    s = build_system(complete_graph(4))
    b = rng.standard_normal(6)
    for z in trivial_solutions(4):
        r = newton_refine(s, b, z + 1e-3 * rng.standard_normal(6))
        assert r.converged and r.iterations <= 5
        assert np.max(np.abs(r.point - z)) < 1e-12


def test_newton_singular_family_point_not_converged():
    net = cycle_graph(4)
    s = build_system(net)
    for z in infinite_family_points(net, np.random.default_rng(0), 5):
        r = newton_refine(s, np.ones(4), z)
        assert not r.converged


@pytest.mark.parametrize("seed", range(100))
def test_newton_monotone_in_basin(seed):
    r = np.random.default_rng(seed)
    s = build_system(complete_graph(4))
    sp = construct_seed(s, r)
    start = sp.point + 1e-4 * (r.standard_normal(6) + 1j * r.standard_normal(6))
    res = newton_trace(s, sp.b_hat, start)
    floor = 1e-13
    for a, c in zip(res, res[1:]):
        if a < floor:
            break
        assert c < a
    assert res[-1] < 1e-12


def test_newton_rejects_nonfinite():
    s = build_system(cycle_graph(3))
    with pytest.raises(ValueError):
        newton_refine(s, np.ones(3), np.array([np.nan, 0, 0, 0]))
