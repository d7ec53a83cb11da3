"""Dense float64 arithmetic shared by the solvers.

Matrices are plain ``numpy.ndarray`` objects of dtype float64; the helpers
here validate shapes and finiteness at the library boundary so the inner
loops can stay free of checks.

Random streams come from ``numpy.random.Philox`` (a counter-based generator,
Philox-4x64-10) keyed through ``numpy.random.SeedSequence``.  Both are
specified bit-for-bit by numpy, so a seed reproduces the same stream on
every platform.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import NonFiniteValue, NonPositiveVariance, ShapeMismatch, ZeroDenominator

RNG_NAME = "numpy.Philox-4x64-10/SeedSequence"
RNG_VERSION = 1


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D float64 array with at least one entry."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeMismatch(f"{name} must be a non-empty 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        i, j = np.argwhere(~np.isfinite(arr))[0]
        raise NonFiniteValue(f"{name} has a non-finite entry at ({i}, {j})")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "operands") -> None:
    if a.shape != b.shape:
        raise ShapeMismatch(f"{what} differ in shape: {a.shape} vs {b.shape}")


def frobenius_sq(a) -> float:
    a = np.asarray(a, dtype=np.float64)
    return float(np.vdot(a, a))


def project_nonneg(a) -> np.ndarray:
    return np.maximum(np.asarray(a, dtype=np.float64), 0.0)


def elementwise_mul(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    check_same_shape(a, b)
    return a * b


def elementwise_div(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    check_same_shape(a, b)
    if np.any(b == 0.0):
        i = tuple(np.argwhere(b == 0.0)[0])
        raise ZeroDenominator(f"zero denominator at index {i}")
    return a / b


def softplus(z) -> np.ndarray:
    """ln(1 + exp(z)) without overflow."""
    z = np.asarray(z, dtype=np.float64)
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def sigmoid(z) -> np.ndarray:
    """1 / (1 + exp(-z)) without overflow."""
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Generator for ``seed``; extra integers select an independent sub-stream."""
    seq = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(s) for s in stream)])
    return np.random.Generator(np.random.Philox(seq))


def sample_gaussian(mean, cov_diag, count: int, seed: int | np.random.Generator) -> np.ndarray:
    """Draw ``count`` rows with column j ~ Normal(mean[j], cov_diag[j]).

    ``cov_diag`` holds variances, not standard deviations.
    """
    mean = np.asarray(mean, dtype=np.float64).ravel()
    var = np.asarray(cov_diag, dtype=np.float64).ravel()
    if mean.shape != var.shape:
        raise ShapeMismatch(f"mean has length {mean.size} but cov_diag has {var.size}")
    if np.any(~(var > 0)):
        raise NonPositiveVariance("every variance in cov_diag must be > 0")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    z = rng.standard_normal((int(count), mean.size))
    return mean + z * np.sqrt(var)


def finite_diff_grad(
    f: Callable[[np.ndarray], float],
    a,
    h: float = 1e-6,
    relative: bool = False,
) -> np.ndarray:
    """Central-difference gradient of a scalar function of an array.

    With ``relative=True`` the step for entry x is ``h * (1 + |x|)``.
    Works for arrays of any shape, including 0-d.
    """
    a = np.array(a, dtype=np.float64)
    grad = np.zeros_like(a)
    flat = a.reshape(-1)
    g = grad.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        step = h * (1.0 + abs(orig)) if relative else h
        flat[k] = orig + step
        fp = f(a)
        flat[k] = orig - step
        fm = f(a)
        flat[k] = orig
        g[k] = (fp - fm) / (2.0 * step)
    return grad
