"""Unsupervised NMF by alternating projected gradient descent.

The line-searched step :func:`pgd_step` is the readable reference engine;
fits run on the compiled equivalent in ``_kernels``, which is also what the
supervised solver drives, so that a supervised fit with all couplings
switched off follows exactly the same floating-point path as
:func:`fit_nmf`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import (
    InvalidConfig,
    NegativeEntry,
    NonFiniteObjective,
    RankTooLarge,
    ShapeMismatch,
    ZeroMatrix,
)
from . import _kernels
from .numerics import as_matrix

ZERO_FILL_SCALE = 1e-4


def as_nonneg(a, name: str = "X") -> np.ndarray:
    arr = as_matrix(a, name)
    if np.any(arr < 0):
        i, j = np.argwhere(arr < 0)[0]
        raise NegativeEntry(f"{name} has a negative entry at ({i}, {j})")
    return arr


@dataclass
class FactorPair:
    """Coefficients ``U`` (n x r) and basis ``V`` (r x m), both nonnegative."""

    U: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        self.U = as_nonneg(self.U, "U")
        self.V = as_nonneg(self.V, "V")
        if self.U.shape[1] != self.V.shape[0]:
            raise ShapeMismatch(f"U is {self.U.shape} but V is {self.V.shape}")
        n, r = self.U.shape
        m = self.V.shape[1]
        if r > min(n, m):
            raise RankTooLarge(f"rank {r} exceeds min(n, m) = {min(n, m)}")

    @property
    def rank(self) -> int:
        return self.U.shape[1]

    def reconstruct(self) -> np.ndarray:
        return self.U @ self.V


@dataclass(frozen=True)
class PgdConfig:
    """Armijo backtracking parameters for one projected-gradient step."""

    initial_step: float = 1.0
    backtrack_ratio: float = 0.5
    armijo_coeff: float = 1e-4
    max_backtracks: int = 60
    warm_start_factor: float = 2.0
    max_step: float = 1e8

    def __post_init__(self):
        if not self.initial_step > 0:
            raise InvalidConfig("initial_step must be > 0")
        if not 0 < self.backtrack_ratio < 1:
            raise InvalidConfig("backtrack_ratio must lie in (0, 1)")
        if not 0 < self.armijo_coeff < 1:
            raise InvalidConfig("armijo_coeff must lie in (0, 1)")
        if self.max_backtracks < 0:
            raise InvalidConfig("max_backtracks must be >= 0")
        if not self.max_step >= self.initial_step:
            raise InvalidConfig("max_step must be >= initial_step")


@dataclass(frozen=True)
class ConvergenceConfig:
    max_outer_iters: int = 500
    rel_tol: float = 1e-6

    def __post_init__(self):
        if self.max_outer_iters < 1:
            raise InvalidConfig("max_outer_iters must be >= 1")
        if not self.rel_tol > 0:
            raise InvalidConfig("rel_tol must be > 0")


class PgdResult(NamedTuple):
    value: np.ndarray
    step: float
    objective: float
    stalled: bool


def pgd_step(
    current,
    gradient,
    cfg: PgdConfig,
    objective: Callable[[np.ndarray], float],
    project: bool,
    f_current: Optional[float] = None,
    step: Optional[float] = None,
) -> PgdResult:
    """One gradient step with Armijo backtracking, optionally projected onto x >= 0.

    A trial ``x' = P[x - eta * g]`` is accepted when

        f(x') <= f(x) + armijo_coeff * <g, x' - x>   and   f(x') <= f(x).

    ``eta`` starts at ``step`` (``cfg.initial_step`` when omitted) and is
    multiplied by ``backtrack_ratio`` after every rejection.  If no trial is
    accepted within ``max_backtracks`` rejections the input is returned
    unchanged with ``step=0`` and ``stalled=True``.
    """
    x = np.asarray(current, dtype=np.float64)
    g = np.asarray(gradient, dtype=np.float64)
    if x.shape != g.shape:
        raise ShapeMismatch(f"iterate {x.shape} and gradient {g.shape} differ in shape")
    f0 = float(objective(x)) if f_current is None else float(f_current)
    if not np.isfinite(f0):
        raise NonFiniteObjective(f"objective is {f0} at the current iterate")
    if not np.any(g):
        return PgdResult(x, 0.0, f0, False)

    eta = cfg.initial_step if step is None else float(step)
    for _ in range(cfg.max_backtracks + 1):
        trial = x - eta * g
        if project:
            np.maximum(trial, 0.0, out=trial)
        if np.all(np.isfinite(trial)):
            f1 = float(objective(trial))
            if f1 <= f0:
                decrease = float(np.vdot(g, trial - x))
                if f1 <= f0 + cfg.armijo_coeff * decrease:
                    return PgdResult(trial, eta, f1, False)
        eta *= cfg.backtrack_ratio
    return PgdResult(x, 0.0, f0, True)


class StepSchedule:
    """Per-block step size, warm-started from the last accepted step."""

    def __init__(self, cfg: PgdConfig):
        self.cfg = cfg
        self.step = cfg.initial_step
        self.stalls = 0

    def update(self, result: PgdResult) -> None:
        if result.stalled:
            self.stalls += 1
            self.step = self.cfg.initial_step
        elif result.step > 0:
            self.step = min(result.step * self.cfg.warm_start_factor, self.cfg.max_step)


_TINY = float(np.finfo(np.float64).tiny)


def relative_change(previous: float, current: float) -> float:
    scale = max(abs(previous), _TINY)
    return abs(previous - current) / scale


# Reconstruction term and its gradients. supervised.py builds on these.

def reconstruction_loss(X: np.ndarray, U: np.ndarray, V: np.ndarray) -> float:
    """0.5 * ||X - U V||_F^2 (no validation; inner-loop helper)."""
    R = X - U @ V
    return 0.5 * float(np.vdot(R, R))


def grad_U_reconstruction(X: np.ndarray, U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """-X V^T + U V V^T."""
    return U @ (V @ V.T) - X @ V.T


def grad_V_reconstruction(X: np.ndarray, U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """-U^T X + U^T U V."""
    return (U.T @ U) @ V - U.T @ X


def nmf_objective(X, F: FactorPair) -> float:
    """0.5 * ||X - U V||_F^2."""
    X = as_matrix(X, "X")
    if X.shape != (F.U.shape[0], F.V.shape[1]):
        raise ShapeMismatch(f"X is {X.shape} but U V is {(F.U.shape[0], F.V.shape[1])}")
    return reconstruction_loss(X, F.U, F.V)


def nndsvd_init(X, r: int, seed: int = 0) -> FactorPair:
    """Nonnegative double SVD initialization (Boutsidis & Gallopoulos).

    The construction is deterministic; ``seed`` is accepted for interface
    symmetry with randomized initializers and does not affect the result.
    Exact zeros in the output are replaced by ``1e-4`` times the mean of the
    positive entries of ``X``.
    """
    X = as_nonneg(X)
    n, m = X.shape
    r = int(r)
    if r < 1 or r > min(n, m):
        raise RankTooLarge(f"rank {r} must lie in [1, {min(n, m)}]")
    positive = X[X > 0]
    if positive.size == 0:
        raise ZeroMatrix("X has no positive entry")

    left, sing, right = np.linalg.svd(X, full_matrices=False)
    U = np.zeros((n, r))
    V = np.zeros((r, m))
    U[:, 0] = np.sqrt(sing[0]) * np.abs(left[:, 0])
    V[0, :] = np.sqrt(sing[0]) * np.abs(right[0, :])
    for j in range(1, r):
        x, y = left[:, j], right[j, :]
        xp, yp = np.maximum(x, 0.0), np.maximum(y, 0.0)
        xn, yn = np.maximum(-x, 0.0), np.maximum(-y, 0.0)
        xp_norm, yp_norm = np.linalg.norm(xp), np.linalg.norm(yp)
        xn_norm, yn_norm = np.linalg.norm(xn), np.linalg.norm(yn)
        mp, mn = xp_norm * yp_norm, xn_norm * yn_norm
        if mp >= mn:
            if mp == 0:
                continue
            u, v, sigma = xp / xp_norm, yp / yp_norm, mp
        else:
            u, v, sigma = xn / xn_norm, yn / yn_norm, mn
        scale = np.sqrt(sing[j] * sigma)
        U[:, j] = scale * u
        V[j, :] = scale * v

    fill = ZERO_FILL_SCALE * float(positive.mean())
    U[U == 0] = fill
    V[V == 0] = fill
    return FactorPair(U, V)


@dataclass
class NmfResult:
    factors: FactorPair
    trace: list = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False
    stalls: int = 0


ENGINES = ("compiled", "reference")


def _alternate(X, y, U, V, w, b, weights, n_blocks, pgd, conv, callback):
    """Drive the compiled outer iteration until convergence.

    Returns (U, V, w, b, trace of objective terms, iterations, converged, stalls).
    """
    alpha, beta, gamma = (float(v) for v in weights)
    U = np.ascontiguousarray(U, dtype=np.float64)
    V = np.ascontiguousarray(V, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64).reshape(-1, 1).copy()
    b = np.array([[float(b)]])
    steps = np.full(4, pgd.initial_step)
    stalls = np.zeros(4, dtype=np.int64)

    if callback is None:
        out = np.empty((conv.max_outer_iters + 1, 4))
        U, V, w, b, t, converged = _kernels.run(
            X, y, U, V, w, b, alpha, beta, gamma, n_blocks, out, steps, stalls, conv.rel_tol,
            pgd.initial_step, pgd.backtrack_ratio, pgd.armijo_coeff, pgd.max_backtracks,
            pgd.warm_start_factor, pgd.max_step)
        trace = [tuple(row) for row in out[: t + 1].tolist()]
        return U, V, w.ravel(), float(b[0, 0]), trace, t, bool(converged), int(stalls.sum())

    record = _kernels.terms(X, y, U, V, w, b, alpha, beta, gamma)
    trace = [record]
    converged = False
    t = 0
    for t in range(1, conv.max_outer_iters + 1):
        f_prev = record[0]
        U, V, w, b, record = _kernels.outer_iteration(
            X, y, U, V, w, b, alpha, beta, gamma, n_blocks, record, steps, stalls,
            pgd.initial_step, pgd.backtrack_ratio, pgd.armijo_coeff, pgd.max_backtracks,
            pgd.warm_start_factor, pgd.max_step)
        trace.append(record)
        callback(t, U, V, w.ravel(), b[0, 0])
        if relative_change(f_prev, record[0]) < conv.rel_tol:
            converged = True
            break
    return U, V, w.ravel(), float(b[0, 0]), trace, t, converged, int(stalls.sum())


def fit_nmf(
    X,
    r: int,
    pgd: PgdConfig = PgdConfig(),
    conv: ConvergenceConfig = ConvergenceConfig(),
    seed: int = 0,
    init: Optional[FactorPair] = None,
    callback: Optional[Callable[[int, np.ndarray, np.ndarray], None]] = None,
    engine: str = "compiled",
) -> NmfResult:
    """Minimize 0.5 * ||X - U V||^2 over U, V >= 0.

    Alternates one line-searched projected-gradient step on U and one on V
    per outer iteration.  ``trace[0]`` is the objective at the
    initialization, ``trace[t]`` the objective after outer iteration t.
    ``callback(t, U, V)`` is invoked after every outer iteration.

    ``engine="reference"`` runs the same iteration through :func:`pgd_step`
    in plain numpy; it is slower and kept for cross-checking.
    """
    if engine not in ENGINES:
        raise InvalidConfig(f"engine must be one of {ENGINES}")
    X = as_nonneg(X)
    F0 = nndsvd_init(X, r, seed) if init is None else init
    if engine == "reference":
        return _fit_nmf_reference(X, F0, pgd, conv, callback)

    cb = None if callback is None else (lambda t, U, V, w, b: callback(t, U, V))
    U, V, _, _, trace, t, converged, stalls = _alternate(
        X, np.ones(X.shape[0]), F0.U, F0.V, np.zeros(F0.rank), 0.0,
        (0.0, 0.0, 0.0), 2, pgd, conv, cb)
    return NmfResult(FactorPair(U, V), [rec[0] for rec in trace], t, converged, stalls)


def _fit_nmf_reference(X, F0, pgd, conv, callback) -> NmfResult:
    U, V = F0.U.copy(), F0.V.copy()
    sched_U, sched_V = StepSchedule(pgd), StepSchedule(pgd)

    f = reconstruction_loss(X, U, V)
    trace = [f]
    converged = False
    t = 0
    for t in range(1, conv.max_outer_iters + 1):
        f_prev = f
        Vc = V
        res = pgd_step(U, grad_U_reconstruction(X, U, Vc), pgd,
                       lambda Z: reconstruction_loss(X, Z, Vc), True, f, sched_U.step)
        sched_U.update(res)
        U, f = res.value, res.objective

        Uc = U
        res = pgd_step(V, grad_V_reconstruction(X, Uc, V), pgd,
                       lambda Z: reconstruction_loss(X, Uc, Z), True, f, sched_V.step)
        sched_V.update(res)
        V, f = res.value, res.objective

        trace.append(f)
        if callback is not None:
            callback(t, U, V)
        if relative_change(f_prev, f) < conv.rel_tol:
            converged = True
            break
    return NmfResult(FactorPair(U, V), trace, t, converged, sched_U.stalls + sched_V.stalls)


def transform_nnls(
    X_new,
    V,
    conv: ConvergenceConfig = ConvergenceConfig(max_outer_iters=5000, rel_tol=1e-10),
    U0=None,
) -> np.ndarray:
    """Coefficients U >= 0 minimizing 0.5 * ||X_new - U V||^2 for a fixed basis.

    Accelerated projected gradient with step 1/L, L the largest eigenvalue
    of V V^T, and gradient-based momentum restart.  Starts from the clamped
    least-squares solution (or ``U0``) and stops once the projected-gradient
    norm is below ``conv.rel_tol`` times ``||X_new V^T||``.  Rows are independent
    subproblems, so solving a block of rows or each row alone agrees to
    within the tolerance.
    """
    X = as_nonneg(X_new, "X_new")
    V = as_nonneg(V, "V")
    if X.shape[1] != V.shape[1]:
        raise ShapeMismatch(f"X_new has {X.shape[1]} columns but V has {V.shape[1]}")
    VVt = V @ V.T
    XVt = X @ V.T
    if U0 is None:
        U = np.maximum(XVt @ np.linalg.pinv(VVt), 0.0)
    else:
        U = as_nonneg(U0, "U0").copy()
    lipschitz = float(np.linalg.eigvalsh(VVt)[-1])
    if lipschitz <= 0:
        return np.zeros_like(U)

    def projected_norm(Z):
        G = Z @ VVt - XVt
        return float(np.linalg.norm(np.where(Z > 0, G, np.minimum(G, 0.0))))

    scale = float(np.linalg.norm(XVt))
    if scale == 0.0 or projected_norm(U) <= conv.rel_tol * scale:
        return U
    Y = U
    momentum = 1.0
    for _ in range(conv.max_outer_iters):
        G = Y @ VVt - XVt
        U_next = np.maximum(Y - G / lipschitz, 0.0)
        if np.vdot(G, U_next - U) > 0:
            # momentum pointed uphill: restart from a plain projected step
            momentum = 1.0
            G = U @ VVt - XVt
            U_next = np.maximum(U - G / lipschitz, 0.0)
        m_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * momentum * momentum))
        Y = U_next + ((momentum - 1.0) / m_next) * (U_next - U)
        U, momentum = U_next, m_next
        if projected_norm(U) <= conv.rel_tol * scale:
            break
    return U
