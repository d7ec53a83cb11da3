import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import nnls

from snmf.errors import InvalidConfig, NegativeEntry, RankTooLarge, ShapeMismatch, ZeroMatrix
from snmf.factorization import (
    ConvergenceConfig,
    FactorPair,
    PgdConfig,
    fit_nmf,
    grad_U_reconstruction,
    grad_V_reconstruction,
    nmf_objective,
    nndsvd_init,
    pgd_step,
    reconstruction_loss,
    transform_nnls,
)
from snmf.numerics import finite_diff_grad


def low_rank(seed, n=6, m=5, r=2):
    g = np.random.default_rng(seed)
    U = g.uniform(0.1, 1.0, (n, r))
    V = g.uniform(0.1, 1.0, (r, m))
    return U, V, U @ V


def test_factor_pair_invariants():
    with pytest.raises(NegativeEntry):
        FactorPair(-np.ones((3, 2)), np.ones((2, 4)))
    with pytest.raises(ShapeMismatch):
        FactorPair(np.ones((3, 2)), np.ones((3, 4)))
    with pytest.raises(RankTooLarge):
        FactorPair(np.ones((3, 4)), np.ones((4, 5)))
    F = FactorPair(np.ones((3, 2)), np.ones((2, 4)))
    assert F.rank == 2


def test_config_validation():
    with pytest.raises(InvalidConfig):
        PgdConfig(backtrack_ratio=1.0)
    with pytest.raises(InvalidConfig):
        PgdConfig(initial_step=0.0)
    with pytest.raises(InvalidConfig):
        ConvergenceConfig(max_outer_iters=0)
    with pytest.raises(InvalidConfig):
        ConvergenceConfig(rel_tol=0.0)


def test_nmf_objective_examples(rng):
    U, V, X = low_rank(0)
    assert nmf_objective(X, FactorPair(U, V)) == pytest.approx(0.0, abs=1e-24)
    assert nmf_objective([[2.0]], FactorPair(np.zeros((1, 1)), np.ones((1, 1)))) == 2.0
    X = rng.uniform(size=(6, 4))
    U = rng.uniform(size=(6, 2))
    V = rng.uniform(size=(2, 4))
    brute = 0.0
    for i in range(6):
        for j in range(4):
            brute += (X[i, j] - sum(U[i, k] * V[k, j] for k in range(2))) ** 2
    assert nmf_objective(X, FactorPair(U, V)) == pytest.approx(0.5 * brute, rel=1e-13)
    with pytest.raises(ShapeMismatch):
        nmf_objective(np.ones((5, 4)), FactorPair(U, V))


@pytest.mark.parametrize("seed", range(5))
def test_reconstruction_gradients_match_finite_differences(seed):
    g = np.random.default_rng(seed)
    X = g.uniform(size=(10, 6))
    U = g.uniform(0.1, 1, (10, 3))
    V = g.uniform(0.1, 1, (3, 6))
    num_U = finite_diff_grad(lambda Z: reconstruction_loss(X, Z, V), U, relative=True)
    num_V = finite_diff_grad(lambda Z: reconstruction_loss(X, U, Z), V, relative=True)
    for analytic, numeric in ((grad_U_reconstruction(X, U, V), num_U),
                              (grad_V_reconstruction(X, U, V), num_V)):
        rel = np.linalg.norm(analytic - numeric) / np.linalg.norm(numeric)
        assert rel <= 1e-5


def test_pgd_step_examples():
    cfg = PgdConfig()
    x = np.array([[1.0, -2.0]])
    res = pgd_step(x, np.zeros_like(x), cfg, lambda z: 0.5 * np.vdot(z, z), False)
    np.testing.assert_array_equal(res.value, x)
    assert res.step == 0.0 and not res.stalled

    f = lambda z: 0.5 * float(np.vdot(z, z))
    res = pgd_step(np.array([[1.0]]), np.array([[1.0]]), cfg, f, False)
    assert res.objective < 0.5

    # any step >= 0.01 clamps 0.1 - eta * 10 to zero
    res = pgd_step(np.array([[0.1]]), np.array([[10.0]]), PgdConfig(initial_step=0.5),
                   lambda z: float(z[0, 0]), True)
    np.testing.assert_array_equal(res.value, [[0.0]])


def test_pgd_step_stalls_without_descent():
    # an ascent "gradient" can never satisfy the decrease test
    res = pgd_step(np.array([[1.0]]), np.array([[-1.0]]), PgdConfig(max_backtracks=5),
                   lambda z: 0.5 * float(np.vdot(z, z)), False)
    assert res.stalled and res.step == 0.0
    np.testing.assert_array_equal(res.value, [[1.0]])


def test_nndsvd_rank_one_exact():
    g = np.random.default_rng(3)
    u, v = g.uniform(0.5, 2, 7), g.uniform(0.5, 2, 5)
    X = np.outer(u, v)
    F = nndsvd_init(X, 1)
    # independent oracle: leading singular triplet from scipy
    from scipy.linalg import svd

    s = svd(X, compute_uv=False)
    assert s[0] ** 2 == pytest.approx(np.sum(X ** 2), rel=1e-12)
    assert np.sum((X - F.U @ F.V) ** 2) / np.sum(X ** 2) <= 1e-10


def test_nndsvd_errors_and_determinism(rng):
    with pytest.raises(RankTooLarge):
        nndsvd_init(np.ones((3, 4)), 4)
    with pytest.raises(ZeroMatrix):
        nndsvd_init(np.zeros((3, 4)), 2)
    with pytest.raises(NegativeEntry):
        nndsvd_init(-np.ones((3, 4)), 2)
    X = rng.uniform(size=(12, 9))
    a, b = nndsvd_init(X, 4, seed=0), nndsvd_init(X, 4, seed=99)
    np.testing.assert_array_equal(a.U, b.U)
    np.testing.assert_array_equal(a.V, b.V)
    assert np.all(a.U > 0) and np.all(a.V > 0)


@given(st.integers(0, 10_000), st.integers(2, 12), st.integers(2, 12), st.data())
def test_nndsvd_nonneg_property(seed, n, m, data):
    r = data.draw(st.integers(1, min(n, m)))
    X = np.random.default_rng(seed).uniform(size=(n, m))
    F = nndsvd_init(X, r)
    assert np.all(F.U >= 0) and np.all(F.V >= 0)
    assert F.U.shape == (n, r) and F.V.shape == (r, m)


@pytest.mark.parametrize("seed", range(3))
def test_fit_nmf_recovers_exact_low_rank(seed):
    _, _, X = low_rank(seed)
    res = fit_nmf(X, 2, conv=ConvergenceConfig(500, 1e-12))
    assert res.n_iter <= 500
    assert res.trace[-1] <= 1e-8 * np.sum(X ** 2)


def test_fit_nmf_monotone_full_rank_and_deterministic(rng):
    X = rng.uniform(size=(8, 5))
    a = fit_nmf(X, 5, conv=ConvergenceConfig(200, 1e-9))
    assert np.all(np.diff(a.trace) <= 0)
    assert a.trace[-1] <= a.trace[0]
    b = fit_nmf(X, 5, conv=ConvergenceConfig(200, 1e-9))
    assert a.trace == b.trace


def test_fit_nmf_iterates_stay_nonnegative(rng):
    X = rng.uniform(size=(15, 7))
    seen = []
    fit_nmf(X, 3, conv=ConvergenceConfig(50, 1e-12),
            callback=lambda t, U, V: seen.append(bool(np.all(U >= 0) and np.all(V >= 0))))
    assert len(seen) == 50 and all(seen)


def test_fit_nmf_handles_zero_rows(rng):
    X = rng.uniform(size=(10, 6))
    X[[2, 7]] = 0.0
    res = fit_nmf(X, 2)
    assert np.all(np.isfinite(res.factors.U))
    assert np.abs(res.factors.U[[2, 7]]).max() < 1e-3


def test_compiled_and_reference_engines_agree(rng):
    X = rng.uniform(size=(20, 8))
    a = fit_nmf(X, 3, conv=ConvergenceConfig(100, 1e-12))
    b = fit_nmf(X, 3, conv=ConvergenceConfig(100, 1e-12), engine="reference")
    np.testing.assert_allclose(a.factors.U, b.factors.U, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(a.trace, b.trace, rtol=1e-10)


def test_transform_examples():
    U, V, _ = low_rank(4, n=5, m=7, r=3)
    np.testing.assert_allclose(transform_nnls(U @ V, V), U, rtol=1e-6)
    X = np.vstack([U @ V, np.zeros((1, 7))])
    out = transform_nnls(X, V)
    np.testing.assert_array_equal(out[-1], 0.0)
    assert np.all(out >= 0)
    with pytest.raises(ShapeMismatch):
        transform_nnls(np.ones((2, 6)), V)


def test_transform_matches_scipy_nnls_and_is_row_separable(rng):
    V = rng.uniform(size=(4, 9))
    X = rng.uniform(size=(12, 9)) * 3
    out = transform_nnls(X, V)
    oracle = np.array([nnls(V.T, x)[0] for x in X])
    np.testing.assert_allclose(out, oracle, atol=1e-8)
    rows = np.vstack([transform_nnls(x[None, :], V) for x in X])
    np.testing.assert_allclose(rows, out, atol=1e-8)


def test_transform_not_worse_than_fit(rng):
    X = rng.uniform(size=(30, 10))
    res = fit_nmf(X, 3)
    U = transform_nnls(X, res.factors.V)
    assert reconstruction_loss(X, U, res.factors.V) <= res.trace[-1] + 1e-8
