"""Synthetic two-class data with a known nonnegative factorization.

Coefficients for the two classes are drawn from Gaussians that differ in
their first two coordinates and clamped at zero, the basis is uniform on
(0, 1), and Gaussian noise matching the column means and variances of the
clean product is scaled by ``noise`` and added before a final clamp.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig
from .factorization import FactorPair
from .numerics import make_rng, sample_gaussian

# stream ids under the run seed
_CLASS0, _CLASS1, _BASIS, _NOISE = 10, 11, 12, 13


@dataclass(frozen=True)
class SimConfig:
    n_per_class: int = 250
    latent_dim: int = 5
    ambient_dim: int = 10
    mu1: tuple = (1.0, 1.0, 1.0, 1.0, 1.0)
    mu2: tuple = (3.0, 3.0, 1.0, 1.0, 1.0)
    cov_diag: tuple = (1.0, 1.0, 1.0, 1.0, 1.0)
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.noise >= 0:
            raise InvalidConfig(f"noise level must be >= 0, got {self.noise}")
        if self.n_per_class < 1 or self.ambient_dim < 1:
            raise InvalidConfig("n_per_class and ambient_dim must be >= 1")
        if not len(self.mu1) == len(self.mu2) == len(self.cov_diag) == self.latent_dim:
            raise InvalidConfig("mu1, mu2 and cov_diag must all have latent_dim entries")


@dataclass
class SimData:
    X: np.ndarray
    y: np.ndarray
    truth: FactorPair
    config: SimConfig


def gen_simulation(cfg: SimConfig = SimConfig()) -> SimData:
    """Rows 0..n_per_class-1 are class 0 (label 0), the rest class 1 (label 1)."""
    k = cfg.n_per_class
    U = np.vstack([
        sample_gaussian(cfg.mu1, cfg.cov_diag, k, make_rng(cfg.seed, _CLASS0)),
        sample_gaussian(cfg.mu2, cfg.cov_diag, k, make_rng(cfg.seed, _CLASS1)),
    ])
    U = np.maximum(U, 0.0)
    V = np.maximum(make_rng(cfg.seed, _BASIS).uniform(0.0, 1.0, (cfg.latent_dim, cfg.ambient_dim)), 0.0)
    clean = U @ V

    mean = clean.mean(axis=0)
    std = clean.std(axis=0)
    noise = mean + std * make_rng(cfg.seed, _NOISE).standard_normal(clean.shape)
    X = np.maximum(clean + cfg.noise * noise, 0.0)
    y = np.repeat(np.array([0, 1], dtype=np.int64), k)
    return SimData(X, y, FactorPair(U, V), cfg)


@dataclass(frozen=True)
class CountConfig:
    """Sparse nonnegative count data with a low-rank Poisson mean and a rare positive class."""

    n_samples: int = 7863
    n_features: int = 300
    latent_dim: int = 20
    n_positive: int = 788
    seed: int = 0

    def __post_init__(self):
        if min(self.n_samples, self.n_features, self.latent_dim) < 1:
            raise InvalidConfig("n_samples, n_features and latent_dim must be >= 1")
        if not 1 <= self.n_positive < self.n_samples:
            raise InvalidConfig("n_positive must lie in [1, n_samples)")


def gen_counts(cfg: CountConfig = CountConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Counts X ~ Poisson(W H) and labels whose positives load more on the first latent factors.

    Returns (X, y) with exactly ``n_positive`` ones in y, in shuffled order.
    """
    rng = make_rng(cfg.seed, 20)
    n, k = cfg.n_samples, cfg.latent_dim
    y = np.zeros(n, dtype=np.int64)
    y[rng.permutation(n)[: cfg.n_positive]] = 1
    W = rng.gamma(0.5, 1.0, (n, k))
    W[y == 1, : max(1, k // 4)] *= 2.0
    H = rng.gamma(0.3, 1.0, (k, cfg.n_features)) / k
    X = rng.poisson(W @ H).astype(np.float64)
    return X, y
