"""The compiled solver against the plain-numpy reference built on pgd_step."""

import numpy as np
import pytest

from snmf.factorization import ConvergenceConfig, fit_nmf
from snmf.supervised import SnmfHyper, fit_snmf


@pytest.mark.parametrize("seed", range(3))
def test_supervised_engines_agree(seed):
    g = np.random.default_rng(seed)
    X = g.uniform(size=(25, 7))
    y = np.arange(25) % 2
    h = SnmfHyper(0.5, 0.1, 0.1, 3)
    conv = ConvergenceConfig(120, 1e-12)
    a = fit_snmf(X, y, h, conv=conv)
    b = fit_snmf(X, y, h, conv=conv, engine="reference")
    assert a.n_iter == b.n_iter
    np.testing.assert_allclose(a.factors.U, b.factors.U, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(a.factors.V, b.factors.V, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(a.logreg.w, b.logreg.w, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(a.totals, b.totals, rtol=1e-11)


def test_callback_path_matches_compiled_loop():
    g = np.random.default_rng(9)
    X = g.uniform(size=(18, 6))
    y = np.arange(18) % 2
    h = SnmfHyper(0.2, 0.1, 0.0, 2)
    a = fit_snmf(X, y, h)
    calls = []
    b = fit_snmf(X, y, h, callback=lambda *args: calls.append(args[0]))
    assert calls == list(range(1, b.n_iter + 1))
    assert a.trace == b.trace
    np.testing.assert_array_equal(a.factors.U, b.factors.U)


def test_large_rank_screening_keeps_exact_trace():
    # the cheap quadratic screen must not change which steps are accepted
    g = np.random.default_rng(4)
    X = g.poisson(1.0, (120, 40)).astype(float)
    res = fit_nmf(X, 15, conv=ConvergenceConfig(80, 1e-12))
    ref = fit_nmf(X, 15, conv=ConvergenceConfig(80, 1e-12), engine="reference")
    np.testing.assert_allclose(res.trace, ref.trace, rtol=1e-9)
    assert np.all(np.diff(res.trace) <= 0)
