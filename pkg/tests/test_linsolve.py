import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from stiga.linsolve import ORDERING_CACHE, SolverError, SparseSystem, solve_direct, solve_spd


def test_identity():
    f = np.arange(5.0)
    np.testing.assert_array_equal(solve_direct(sp.identity(5, format="csr"), f), f)


def test_two_by_two_by_hand():
    x = solve_direct(sp.csr_matrix([[2.0, 1.0], [0.0, 1.0]]), np.array([3.0, 1.0]))
    np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-15)


def test_spd_diagonal():
    np.testing.assert_allclose(solve_spd(sp.diags([4.0] * 4).tocsr(), np.ones(4)), 0.25)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_random_spd_against_dense(seed):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((10, 10))
    A = B @ B.T + 10 * np.eye(10)
    b = rng.standard_normal(10)
    np.testing.assert_allclose(solve_spd(sp.csr_matrix(A), b), np.linalg.solve(A, b), rtol=1e-10, atol=1e-12)


def test_indefinite_detected():
    with pytest.raises(SolverError, match="positive definite"):
        solve_spd(sp.diags([1.0, -1.0, 2.0]).tocsr(), np.ones(3))


def test_nonsymmetric_rejected_by_spd():
    with pytest.raises(SolverError, match="symmetric"):
        solve_spd(sp.csr_matrix([[2.0, 1.0], [0.0, 1.0]]), np.ones(2))


def test_singular_raises():
    with pytest.raises(SolverError):
        solve_direct(sp.csr_matrix([[1.0, 1.0], [1.0, 1.0]]), np.array([1.0, 0.0]))


def test_gmres_matches_direct():
    rng = np.random.default_rng(0)
    A = sp.random(60, 60, density=0.1, random_state=1) + sp.identity(60) * 5
    A = A.tocsr()
    b = rng.standard_normal(60)
    np.testing.assert_allclose(solve_direct(A, b, method="iterative"), solve_direct(A, b), atol=1e-9)


def test_ordering_reused_for_same_pattern():
    A = sp.diags([4.0, 1.0, 1.0], [0, -1, 1], shape=(30, 30)).tocsr()
    solve_direct(SparseSystem(A, np.ones(30)))
    hits = ORDERING_CACHE.hits
    solve_direct(SparseSystem(A * 2.0, np.ones(30)))
    assert ORDERING_CACHE.hits == hits + 1


def test_bad_inputs():
    with pytest.raises(ValueError):
        SparseSystem(sp.identity(3, format="csr"), np.ones(2))
    with pytest.raises(ValueError):
        solve_direct(sp.identity(2, format="csr"), np.ones(2), method="magic")


def test_deterministic():
    A = sp.random(40, 40, density=0.2, random_state=3) + sp.identity(40) * 4
    b = np.linspace(0, 1, 40)
    assert np.array_equal(solve_direct(A.tocsr(), b), solve_direct(A.tocsr(), b))
