"""Supervised NMF: joint factorization and logistic regression on the coefficients.

Objective (all terms with the effective weights alpha, beta, gamma)::

    L_f  = 0.5 * ||X - U V||_F^2
    L_lr = alpha * sum_i ln(1 + exp(-y_i (u_i . w + b)))
    L_r  = 0.5 * beta * (w.w + b^2) + 0.5 * gamma * ||U||_F^2

minimized over U >= 0, V >= 0 and unconstrained (w, b).  Labels are read as
{0, 1} and used internally as {-1, +1}.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import InvalidConfig, LossDegenerate, NonFiniteValue, ShapeMismatch
from . import _kernels
from .factorization import (
    ENGINES,
    ConvergenceConfig,
    FactorPair,
    PgdConfig,
    StepSchedule,
    _alternate,
    as_nonneg,
    grad_U_reconstruction,
    grad_V_reconstruction,
    nndsvd_init,
    pgd_step,
    reconstruction_loss,
    relative_change,
)
from .numerics import as_matrix, sigmoid, softplus


def signed_labels(y) -> np.ndarray:
    """Map {0, 1} labels to {-1, +1}; labels already in {-1, +1} pass through."""
    y = np.asarray(y).ravel()
    values = set(np.unique(y).tolist())
    if values <= {0, 1}:
        return np.where(y == 1, 1.0, -1.0)
    if values <= {-1, 1}:
        return y.astype(np.float64)
    raise InvalidConfig(f"labels must be in {{0, 1}} or {{-1, +1}}, got {sorted(values)}")


def require_two_classes(y_signed: np.ndarray) -> None:
    if not (np.any(y_signed > 0) and np.any(y_signed < 0)):
        raise LossDegenerate("training labels contain a single class")


@dataclass
class LogRegModel:
    w: np.ndarray
    b: float = 0.0

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64).ravel()
        self.b = float(self.b)
        if not (np.all(np.isfinite(self.w)) and np.isfinite(self.b)):
            raise NonFiniteValue("logistic model parameters must be finite")

    @classmethod
    def zeros(cls, r: int) -> "LogRegModel":
        return cls(np.zeros(r), 0.0)


@dataclass(frozen=True)
class SnmfHyper:
    """Raw coupling weights and latent rank.

    With ``scale_by_shape`` the weights used in the objective are
    ``alpha / m``, ``beta / r`` and ``gamma / (n * r)`` for an n x m data matrix.
    """

    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    r: int = 2
    scale_by_shape: bool = True

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise InvalidConfig("alpha, beta and gamma must be >= 0")
        if self.r < 1:
            raise InvalidConfig("rank must be >= 1")

    def weights(self, n: int, m: int) -> tuple[float, float, float]:
        if not self.scale_by_shape:
            return float(self.alpha), float(self.beta), float(self.gamma)
        return self.alpha / m, self.beta / self.r, self.gamma / (n * self.r)

    def effective(self, n: int, m: int) -> "SnmfHyper":
        a, b, g = self.weights(n, m)
        return replace(self, alpha=a, beta=b, gamma=g, scale_by_shape=False)


class ObjectiveTerms(NamedTuple):
    total: float
    L_f: float
    L_lr: float
    L_r: float


def _margin_weights(U, y, w, b) -> np.ndarray:
    """y_i / (1 + exp(y_i (u_i . w + b))), computed through a stable sigmoid."""
    return y * sigmoid(-y * (U @ w + b))


def _lr_loss(U, y, w, b, alpha) -> float:
    return alpha * float(np.sum(softplus(-y * (U @ w + b))))


def _reg(U, w, b, beta, gamma) -> float:
    b = float(b)
    return 0.5 * beta * (float(np.dot(w, w)) + b * b) + 0.5 * gamma * float(np.vdot(U, U))


def _terms(X, y, U, V, w, b, alpha, beta, gamma) -> ObjectiveTerms:
    lf = reconstruction_loss(X, U, V)
    llr = _lr_loss(U, y, w, b, alpha)
    lr = _reg(U, w, b, beta, gamma)
    return ObjectiveTerms(lf + llr + lr, lf, llr, lr)


def _check_lr_shapes(U, y, w):
    if U.shape[0] != y.shape[0]:
        raise ShapeMismatch(f"U has {U.shape[0]} rows but y has {y.shape[0]} labels")
    if U.shape[1] != w.shape[0]:
        raise ShapeMismatch(f"U has {U.shape[1]} columns but w has length {w.shape[0]}")


def logistic_loss(U, y, m: LogRegModel, alpha: float = 1.0, beta: float = 0.0,
                  include_reg: bool = False) -> float:
    """alpha * sum_i ln(1 + exp(-y_i (u_i . w + b))), plus 0.5 * beta * (w.w + b^2) if asked."""
    U = as_matrix(U, "U")
    y = signed_labels(y)
    _check_lr_shapes(U, y, m.w)
    loss = _lr_loss(U, y, m.w, m.b, alpha)
    if include_reg:
        loss += _reg(U, m.w, m.b, beta, 0.0)
    return loss


def _prepare(X, y, F: FactorPair, m: LogRegModel):
    X = as_matrix(X, "X")
    y = signed_labels(y)
    if X.shape != (F.U.shape[0], F.V.shape[1]):
        raise ShapeMismatch(f"X is {X.shape} but U V is {(F.U.shape[0], F.V.shape[1])}")
    _check_lr_shapes(F.U, y, m.w)
    return X, y


def snmf_objective(X, y, F: FactorPair, m: LogRegModel, h: SnmfHyper) -> ObjectiveTerms:
    X, y = _prepare(X, y, F, m)
    alpha, beta, gamma = h.weights(*X.shape)
    return _terms(X, y, F.U, F.V, m.w, m.b, alpha, beta, gamma)


def grad_U_total(X, y, F: FactorPair, m: LogRegModel, h: SnmfHyper) -> np.ndarray:
    """-X V^T + U V V^T + gamma U - alpha (y w^T) / D, with D_ij = 1 + exp(y_i (u_i . w + b))."""
    X, y = _prepare(X, y, F, m)
    alpha, _, gamma = h.weights(*X.shape)
    return _grad_U(X, y, F.U, F.V, m.w, m.b, alpha, gamma)


def _grad_U(X, y, U, V, w, b, alpha, gamma):
    g = grad_U_reconstruction(X, U, V)
    g = g + gamma * U
    return g - alpha * np.outer(_margin_weights(U, y, w, b), w)


def grad_V(X, F: FactorPair) -> np.ndarray:
    X = as_matrix(X, "X")
    if X.shape != (F.U.shape[0], F.V.shape[1]):
        raise ShapeMismatch(f"X is {X.shape} but U V is {(F.U.shape[0], F.V.shape[1])}")
    return grad_V_reconstruction(X, F.U, F.V)


def grad_w(U, y, m: LogRegModel, alpha: float, beta: float) -> np.ndarray:
    """-alpha (U * Y / D)^T e_n + beta w."""
    U = as_matrix(U, "U")
    y = signed_labels(y)
    _check_lr_shapes(U, y, m.w)
    return _grad_w(U, y, m.w, m.b, alpha, beta)


def _grad_w(U, y, w, b, alpha, beta):
    return beta * w - alpha * (U.T @ _margin_weights(U, y, w, b))


def grad_b(U, y, m: LogRegModel, alpha: float, beta: float) -> float:
    """-alpha sum_i y_i / (1 + exp(y_i (u_i . w + b))) + beta b."""
    U = as_matrix(U, "U")
    y = signed_labels(y)
    _check_lr_shapes(U, y, m.w)
    return _grad_b(U, y, m.w, m.b, alpha, beta)


def _grad_b(U, y, w, b, alpha, beta):
    return beta * b - alpha * float(np.sum(_margin_weights(U, y, w, b)))


@dataclass
class SnmfModel:
    factors: FactorPair
    logreg: LogRegModel
    hyper: SnmfHyper
    effective: SnmfHyper
    trace: list = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False
    stalls: int = 0

    @property
    def totals(self) -> list[float]:
        return [t.total for t in self.trace]


def fit_snmf(
    X,
    y_raw,
    h: SnmfHyper,
    pgd: PgdConfig = PgdConfig(),
    conv: ConvergenceConfig = ConvergenceConfig(),
    seed: int = 0,
    init: Optional[FactorPair] = None,
    callback: Optional[Callable] = None,
    engine: str = "compiled",
) -> SnmfModel:
    """Alternate line-searched steps on U, V, w, b (in that order).

    U and V steps are projected onto the nonnegative orthant; w and b are
    not.  (U, V) start from NNDSVD and (w, b) from zero.  ``trace[0]`` holds
    the objective terms at the start, ``trace[t]`` after outer iteration t.
    ``callback(t, U, V, w, b)`` runs after every outer iteration.
    """
    if engine not in ENGINES:
        raise InvalidConfig(f"engine must be one of {ENGINES}")
    X = as_nonneg(X)
    y = signed_labels(y_raw)
    if y.shape[0] != X.shape[0]:
        raise ShapeMismatch(f"X has {X.shape[0]} rows but y has {y.shape[0]} labels")
    require_two_classes(y)
    n, m = X.shape
    weights = h.weights(n, m)
    F0 = nndsvd_init(X, h.r, seed) if init is None else init

    if engine == "reference":
        U, V, w, b, trace, t, converged, stalls = _fit_snmf_reference(
            X, y, F0, weights, pgd, conv, callback)
    else:
        U, V, w, b, trace, t, converged, stalls = _alternate(
            X, y, F0.U, F0.V, np.zeros(F0.rank), 0.0, weights, 4, pgd, conv, callback)
    return SnmfModel(
        factors=FactorPair(U, V),
        logreg=LogRegModel(w, b),
        hyper=h,
        effective=h.effective(n, m),
        trace=[ObjectiveTerms(*(float(v) for v in rec)) for rec in trace],
        n_iter=t,
        converged=converged,
        stalls=stalls,
    )


def _fit_snmf_reference(X, y, F0, weights, pgd, conv, callback):
    alpha, beta, gamma = weights
    U, V = F0.U.copy(), F0.V.copy()
    w = np.zeros(F0.rank)
    bb = np.zeros(1)
    sched = [StepSchedule(pgd) for _ in range(4)]

    terms = _terms(X, y, U, V, w, bb[0], alpha, beta, gamma)
    trace = [terms]
    f = terms.total
    converged = False
    t = 0
    for t in range(1, conv.max_outer_iters + 1):
        f_prev = f

        res = pgd_step(U, _grad_U(X, y, U, V, w, bb[0], alpha, gamma), pgd,
                       lambda Z: _terms(X, y, Z, V, w, bb[0], alpha, beta, gamma).total,
                       True, f, sched[0].step)
        sched[0].update(res)
        U, f = res.value, res.objective

        res = pgd_step(V, grad_V_reconstruction(X, U, V), pgd,
                       lambda Z: _terms(X, y, U, Z, w, bb[0], alpha, beta, gamma).total,
                       True, f, sched[1].step)
        sched[1].update(res)
        V, f = res.value, res.objective

        res = pgd_step(w, _grad_w(U, y, w, bb[0], alpha, beta), pgd,
                       lambda Z: _terms(X, y, U, V, Z, bb[0], alpha, beta, gamma).total,
                       False, f, sched[2].step)
        sched[2].update(res)
        w, f = res.value, res.objective

        res = pgd_step(bb, np.array([_grad_b(U, y, w, bb[0], alpha, beta)]), pgd,
                       lambda Z: _terms(X, y, U, V, w, Z[0], alpha, beta, gamma).total,
                       False, f, sched[3].step)
        sched[3].update(res)
        bb, f = res.value, res.objective

        trace.append(_terms(X, y, U, V, w, bb[0], alpha, beta, gamma))
        if callback is not None:
            callback(t, U, V, w, bb[0])
        if relative_change(f_prev, f) < conv.rel_tol:
            converged = True
            break
    return U, V, w, float(bb[0]), trace, t, converged, sum(s.stalls for s in sched)


def logreg_fit(
    U,
    y_raw,
    beta: float,
    conv: ConvergenceConfig = ConvergenceConfig(max_outer_iters=20000, rel_tol=1e-6),
    seed: int = 0,
    pgd: PgdConfig = PgdConfig(),
) -> LogRegModel:
    """L2-regularized logistic regression on the rows of ``U``.

    Gradient descent on (w, b) jointly from w = 0, b = 0, with Armijo
    backtracking from a Barzilai-Borwein trial step.  Stops once
    ||grad|| <= conv.rel_tol * (1 + loss).  Deterministic; ``seed`` is unused.
    """
    U = as_matrix(U, "U")
    y = signed_labels(y_raw)
    if U.shape[0] != y.shape[0]:
        raise ShapeMismatch(f"U has {U.shape[0]} rows but y has {y.shape[0]} labels")
    require_two_classes(y)
    if beta < 0:
        raise InvalidConfig("beta must be >= 0")
    theta, _, _, _ = _kernels.logreg_descent(
        np.ascontiguousarray(U), y, float(beta), conv.rel_tol, conv.max_outer_iters,
        pgd.initial_step, pgd.backtrack_ratio, pgd.armijo_coeff, pgd.max_backtracks,
        pgd.max_step)
    r = U.shape[1]
    return LogRegModel(theta[:r].copy(), theta[r])


def predict_scores(U, m: LogRegModel) -> tuple[np.ndarray, np.ndarray]:
    """Linear scores U w + b and the matching probabilities."""
    U = as_matrix(U, "U")
    if U.shape[1] != m.w.shape[0]:
        raise ShapeMismatch(f"U has {U.shape[1]} columns but w has length {m.w.shape[0]}")
    s = U @ m.w + m.b
    return s, sigmoid(s)
