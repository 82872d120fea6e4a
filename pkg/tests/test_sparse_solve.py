import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from sktlab.mesh import Grid
from sktlab.sparse_solve import SolverError, assemble_implicit_step, face_average, is_m_matrix, solve_spd


def _random_system(seed, cells):
    rng = np.random.default_rng(seed)
    g = Grid((0,) * len(cells), (1,) * len(cells), cells)
    D = face_average(g, rng.uniform(0.1, 2.0, g.shape))
    c = rng.uniform(0.0, 1.0, g.shape)
    return g, assemble_implicit_step(g, D, c, rng.uniform(0.01, 1.0))


def test_hand_assembled_three_cell_matrix():
    A = assemble_implicit_step(Grid((0,), (3,), (3,)), (np.ones(2),), 0.0, 1.0)
    assert np.array_equal(A.toarray(), [[2, -1, 0], [-1, 3, -1], [0, -1, 2]])


def test_three_cell_solve_matches_dense_oracle():
    A = assemble_implicit_step(Grid((0,), (3,), (3,)), (np.ones(2),), 0.0, 1.0)
    b = np.ones(3)
    x, _ = solve_spd(A, b)
    expected = np.linalg.solve(A.toarray(), b)
    assert np.allclose(x, expected, atol=1e-10)
    # the row sums of this matrix are all 1, so the constant vector solves it
    assert np.allclose(x, [1.0, 1.0, 1.0], atol=1e-10)


def test_pure_time_term_is_scaled_identity():
    g = Grid.unit(3, 4)
    A = assemble_implicit_step(g, (np.zeros((2, 4)), np.zeros((3, 3))), 0.0, 0.5)
    assert np.array_equal(A.toarray(), 2.0 * np.eye(12))


def test_coefficient_sign_errors():
    g = Grid.unit(4)
    with pytest.raises(ValueError, match="coefficient sign"):
        assemble_implicit_step(g, (-np.ones(3),), 0.0, 1.0)
    with pytest.raises(ValueError, match="coefficient sign"):
        assemble_implicit_step(g, (np.ones(3),), -1.0, 1.0)
    with pytest.raises(ValueError):
        assemble_implicit_step(g, (np.ones(3),), 0.0, 0.0)


def test_identity_solve_and_zero_rhs():
    A = sp.identity(7, format="csr")
    b = np.arange(7.0)
    x, stats = solve_spd(A, b)
    assert np.allclose(x, b) and stats.iterations <= 1
    x, stats = solve_spd(A, np.zeros(7))
    assert np.array_equal(x, np.zeros(7)) and stats.iterations == 0


def test_solver_reports_non_convergence():
    _, A = _random_system(3, (10, 10))
    with pytest.raises(SolverError) as info:
        solve_spd(A, np.random.default_rng(1).normal(size=100), rel_tol=1e-14, max_iter=2)
    assert info.value.residual > 0


def test_solve_is_deterministic():
    _, A = _random_system(5, (9, 7))
    b = np.random.default_rng(2).normal(size=63)
    x1, s1 = solve_spd(A, b)
    x2, s2 = solve_spd(A, b)
    assert np.array_equal(x1, x2) and s1 == s2


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([(12,), (40,), (200,), (5, 8), (10, 20), (14, 14)]))
def test_assembled_matrices_are_m_matrices_and_match_dense(seed, cells):
    g, A = _random_system(seed, cells)
    assert is_m_matrix(A)
    dense = A.toarray()
    off = dense - np.diag(np.diag(dense))
    assert np.all(off <= 0)
    b = np.random.default_rng(seed).normal(size=g.size)
    x, stats = solve_spd(A, b, rel_tol=1e-10)
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)
    assert np.allclose(x, np.linalg.solve(dense, b), atol=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_nonnegative_rhs_gives_nonnegative_solution(seed):
    g, A = _random_system(seed, (8, 6))
    rng = np.random.default_rng(seed + 1)
    b = rng.uniform(0, 1, g.size) * (rng.uniform(size=g.size) < 0.3)
    x, _ = solve_spd(A, b, rel_tol=1e-13)
    assert x.min() >= -1e-14


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_row_sums_dominate_time_plus_reaction(seed):
    rng = np.random.default_rng(seed)
    g = Grid.unit(6, 5)
    c = rng.uniform(0, 2, g.shape)
    dt = rng.uniform(0.1, 1)
    A = assemble_implicit_step(g, face_average(g, rng.uniform(0, 1, g.shape)), c, dt)
    assert np.all(A.toarray().sum(axis=1) >= 1 / dt + c.ravel() - 1e-12)
