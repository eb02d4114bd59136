import numpy as np
import pytest
import scipy.sparse as sp

from depthres.sparse_linear import SolverDivergedError, SparseSystem, pcg_solve, spmv


def random_spd_dd(rng, n, density=0.2):
    a = rng.uniform(-1.0, 1.0, (n, n)) * (rng.uniform(size=(n, n)) < density)
    a = np.triu(a, 1)
    a = a + a.T
    np.fill_diagonal(a, np.abs(a).sum(axis=1) + rng.uniform(0.1, 2.0, n))
    return a


def test_spmv_examples():
    x = np.array([3.0, -1.0, 2.0])
    assert np.array_equal(spmv(sp.identity(3, format="csr"), x), x)
    sys2 = SparseSystem.from_dense([[2, -1], [-1, 2]], [0, 0])
    assert np.allclose(spmv(sys2, [1, 1]), [1, 1])
    assert np.array_equal(spmv(sp.csr_matrix((3, 3)), x), np.zeros(3))
    with pytest.raises(ValueError, match="dimension"):
        spmv(sys2, [1, 2, 3])


def test_pcg_identity_one_iteration():
    b = np.array([1.0, -2.0, 3.5])
    res = pcg_solve(SparseSystem.from_dense(np.eye(3), b))
    assert res.converged and res.iterations <= 1
    assert np.allclose(res.x, b)


def test_pcg_two_by_two():
    res = pcg_solve(SparseSystem.from_dense([[4, 1], [1, 3]], [1, 2]), tol=1e-12)
    assert np.allclose(res.x, [1 / 11, 7 / 11], atol=1e-10)
    assert np.allclose(res.x, [0.0909091, 0.6363636], atol=1e-7)


def test_pcg_random_matches_dense_solve(rng):
    for _ in range(10):
        a = random_spd_dd(rng, 50)
        b = rng.normal(size=50)
        system = SparseSystem.from_dense(a, b)
        assert system.is_symmetric() and system.is_strictly_diagonally_dominant() and system.columns_sorted()
        res = pcg_solve(system, tol=1e-13)
        assert np.max(np.abs(res.x - np.linalg.solve(a, b))) < 1e-8


def test_pcg_warm_start_and_zero_rhs(rng):
    a = random_spd_dd(rng, 30)
    x_true = rng.normal(size=30)
    system = SparseSystem.from_dense(a, a @ x_true)
    assert pcg_solve(system, x0=x_true).iterations == 0
    zero = pcg_solve(SparseSystem.from_dense(a, np.zeros(30)))
    assert zero.converged and not zero.x.any()


def test_pcg_restart_from_partial_iterate_is_monotone(rng):
    a = random_spd_dd(rng, 60, density=0.5)
    b = rng.normal(size=60)
    system = SparseSystem.from_dense(a, b)
    partial = pcg_solve(system, tol=1e-14, max_iters=3)
    assert not partial.converged
    resumed = pcg_solve(system, x0=partial.x, tol=1e-14, max_iters=3)
    assert resumed.residual <= partial.residual


def test_pcg_rejects_indefinite():
    with pytest.raises(SolverDivergedError):
        pcg_solve(SparseSystem.from_dense([[1, 3], [3, 1]], [1, 0]))
    with pytest.raises(SolverDivergedError):
        pcg_solve(SparseSystem.from_dense([[-1, 0], [0, 1]], [1, 1]))


def test_system_validation():
    with pytest.raises(ValueError):
        SparseSystem(np.array([0, 1]), np.array([0]), np.array([1.0]), np.zeros(2))
    s = SparseSystem(np.array([0, 2, 3]), np.array([1, 0, 1]), np.array([1.0, 2.0, 3.0]), np.zeros(2))
    assert not s.columns_sorted()
    assert not SparseSystem.from_dense([[1, 2], [0, 1]], [0, 0]).is_symmetric()
