import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snmf.errors import InvalidConfig
from snmf.factorization import ConvergenceConfig, fit_nmf
from snmf.simulation import CountConfig, SimConfig, gen_counts, gen_simulation


def test_default_shape_and_labels():
    d = gen_simulation()
    assert d.X.shape == (500, 10)
    np.testing.assert_array_equal(d.y, np.repeat([0, 1], 250))
    assert d.truth.U.shape == (500, 5) and d.truth.V.shape == (5, 10)


def test_noise_free_data_is_exact_product():
    d = gen_simulation(SimConfig(seed=4))
    np.testing.assert_array_equal(d.X, d.truth.U @ d.truth.V)


@pytest.mark.parametrize("seed", range(5))
def test_class_shift_survives_clamping(seed):
    d = gen_simulation(SimConfig(seed=seed))
    U, y = d.truth.U, d.y
    shift = U[y == 1, :2].mean(axis=0) - U[y == 0, :2].mean(axis=0)
    assert np.all(shift >= 1.0)


@settings(max_examples=20)
@given(st.floats(0, 2), st.integers(0, 2**31))
def test_nonnegative_and_deterministic(noise, seed):
    cfg = SimConfig(n_per_class=20, noise=noise, seed=seed)
    a, b = gen_simulation(cfg), gen_simulation(cfg)
    assert np.all(a.X >= 0)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.truth.U, b.truth.U)
    assert np.sum(a.y == 0) == np.sum(a.y == 1) == 20


def test_invalid_config():
    with pytest.raises(InvalidConfig):
        SimConfig(noise=-1.0)
    with pytest.raises(InvalidConfig):
        SimConfig(mu1=(1.0,))


def test_generating_rank_fits_noise_free_data():
    X = gen_simulation(SimConfig(seed=0)).X
    res = fit_nmf(X, 5, conv=ConvergenceConfig(3000, 1e-12))
    err = np.sum((X - res.factors.U @ res.factors.V) ** 2)
    assert err <= 1e-3 * np.sum(X ** 2)


def test_count_generator():
    X, y = gen_counts(CountConfig(n_samples=400, n_features=30, latent_dim=4, n_positive=40, seed=1))
    assert X.shape == (400, 30) and int(y.sum()) == 40
    assert np.all(X >= 0) and np.all(X == np.round(X))
    X2, y2 = gen_counts(CountConfig(n_samples=400, n_features=30, latent_dim=4, n_positive=40, seed=1))
    np.testing.assert_array_equal(X, X2)
    with pytest.raises(InvalidConfig):
        CountConfig(n_positive=0)
