"""AUC, stratified splitting, cross-validated grid search and the permutation test."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import EmptyClassAfterSplit, InvalidConfig, ShapeMismatch, SingleClass, TooFewSamples
from .factorization import ConvergenceConfig, PgdConfig, fit_nmf, transform_nnls
from .numerics import make_rng
from .supervised import LogRegModel, SnmfHyper, fit_snmf, logreg_fit, predict_scores


def _binary_labels(labels) -> np.ndarray:
    y = np.asarray(labels).ravel()
    if not set(np.unique(y).tolist()) <= {0, 1}:
        raise InvalidConfig("labels must be 0/1")
    return y.astype(bool)


def auc(scores, labels) -> float:
    """Area under the ROC curve as the Mann-Whitney statistic, ties counting one half."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    pos = _binary_labels(labels)
    if s.shape != pos.shape:
        raise ShapeMismatch(f"{s.size} scores but {pos.size} labels")
    n_pos = int(pos.sum())
    n_neg = pos.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC needs both classes")
    ranks = rankdata(s)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _auc_rows(S: np.ndarray, pos: np.ndarray) -> np.ndarray:
    n_pos = int(pos.sum())
    n_neg = pos.size - n_pos
    ranks = rankdata(S, axis=1)
    return (ranks[:, pos].sum(axis=1) - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def roc_points(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    """False- and true-positive rates at every distinct threshold, from (0, 0) to (1, 1)."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    pos = _binary_labels(labels)
    if pos.all() or not pos.any():
        raise SingleClass("ROC needs both classes")
    order = np.argsort(-s, kind="mergesort")
    s, pos = s[order], pos[order]
    last = np.r_[np.flatnonzero(np.diff(s)), s.size - 1]
    tp = np.cumsum(pos)[last]
    fp = (last + 1) - tp
    return np.r_[0.0, fp / fp[-1]], np.r_[0.0, tp / tp[-1]]


@dataclass(frozen=True)
class SplitPlan:
    train_indices: np.ndarray
    test_indices: np.ndarray
    ratio: float
    stratified: bool
    seed: int


def stratified_split(labels, ratio: float = 0.5, seed: int = 0) -> SplitPlan:
    """Shuffle each class and send ``ratio`` of it to the training side.

    Per-class quotas are ``floor(ratio * class_size)``; the samples left over
    to reach ``round(ratio * n)`` overall go to the classes with the largest
    fractional remainders (ties to the lower class label).
    """
    y = np.asarray(labels).ravel()
    if not 0 < ratio < 1:
        raise InvalidConfig("ratio must lie in (0, 1)")
    if y.size < 2:
        raise TooFewSamples("need at least two samples to split")
    rng = make_rng(seed, 0)
    classes = np.unique(y)
    members = [rng.permutation(np.flatnonzero(y == c)) for c in classes]
    exact = [ratio * len(m) for m in members]
    quota = [math.floor(e) for e in exact]
    extra = math.floor(ratio * y.size + 0.5) - sum(quota)
    for idx in sorted(range(len(classes)), key=lambda i: (-(exact[i] - quota[i]), i))[:max(extra, 0)]:
        quota[idx] += 1

    train, test = [], []
    for c, m, q in zip(classes, members, quota):
        if len(m) >= 2 and (q == 0 or q == len(m)):
            raise EmptyClassAfterSplit(f"class {c} ({len(m)} samples) would be absent from one side")
        train.append(m[:q])
        test.append(m[q:])
    return SplitPlan(np.sort(np.concatenate(train)), np.sort(np.concatenate(test)), ratio, True, seed)


def kfold_indices(labels, k: int = 5, seed: int = 0) -> list[np.ndarray]:
    """Stratified k-fold validation index sets.

    Each class is shuffled and dealt round-robin; the dealing position
    carries over between classes so fold sizes differ by at most one.
    """
    y = np.asarray(labels).ravel()
    if k < 2:
        raise InvalidConfig("k must be >= 2")
    rng = make_rng(seed, 1)
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for c in np.unique(y):
        m = rng.permutation(np.flatnonzero(y == c))
        if m.size < k:
            raise TooFewSamples(f"class {c} has {m.size} samples, fewer than k={k}")
        for pos, idx in enumerate(m):
            folds[(offset + pos) % k].append(int(idx))
        offset += m.size
    return [np.sort(np.array(f, dtype=np.int64)) for f in folds]


HEADS = ("auto", "joint", "refit")


@dataclass(frozen=True)
class PipelineConfig:
    """Solver and classifier settings for train-then-score runs.

    ``head="joint"`` scores with the (w, b) learned inside the supervised
    fit; ``head="refit"`` trains a separate logistic regression (weight
    ``head_beta``) on the learned training coefficients.  ``head="auto"``
    uses the joint classifier when ``alpha > 0`` and refits otherwise,
    since without the logistic term (w, b) never leaves zero.
    """

    pgd: PgdConfig = PgdConfig()
    fit_conv: ConvergenceConfig = ConvergenceConfig()
    transform_conv: ConvergenceConfig = ConvergenceConfig(max_outer_iters=5000, rel_tol=1e-10)
    head: str = "auto"
    head_beta: float = 1e-2
    head_conv: ConvergenceConfig = ConvergenceConfig(max_outer_iters=20000, rel_tol=1e-6)

    def __post_init__(self):
        if self.head not in HEADS:
            raise InvalidConfig(f"head must be one of {HEADS}")
        if not self.head_beta > 0:
            raise InvalidConfig("head_beta must be > 0")


@dataclass
class TrainedPipeline:
    V: np.ndarray
    U_train: np.ndarray
    classifier: LogRegModel
    joint: Optional[LogRegModel]
    trace: list
    n_iter: int
    config: PipelineConfig

    def coefficients(self, X_new) -> np.ndarray:
        return transform_nnls(X_new, self.V, self.config.transform_conv)

    def scores(self, X_new) -> np.ndarray:
        return predict_scores(self.coefficients(X_new), self.classifier)[0]


def attach_head(U, y, joint: Optional[LogRegModel], hyper: SnmfHyper,
                cfg: PipelineConfig, seed: int = 0) -> LogRegModel:
    """The classifier used to score coefficients, chosen by ``cfg.head``."""
    use_joint = cfg.head == "joint" or (cfg.head == "auto" and hyper.alpha > 0)
    if use_joint:
        return joint if joint is not None else LogRegModel.zeros(hyper.r)
    return logreg_fit(U, y, cfg.head_beta, cfg.head_conv, seed, cfg.pgd)


def train_pipeline(X, y, hyper: SnmfHyper, cfg: PipelineConfig = PipelineConfig(),
                   seed: int = 0) -> TrainedPipeline:
    """Fit the factorization on (X, y) and attach a classifier on the learned U.

    With all couplings zero the unsupervised solver is used (its iterates
    coincide with the supervised solver's in that case).
    """
    if hyper.alpha == hyper.beta == hyper.gamma == 0:
        res = fit_nmf(X, hyper.r, cfg.pgd, cfg.fit_conv, seed)
        U, V, joint, trace, n_iter = res.factors.U, res.factors.V, None, res.trace, res.n_iter
    else:
        model = fit_snmf(X, y, hyper, cfg.pgd, cfg.fit_conv, seed)
        U, V, joint = model.factors.U, model.factors.V, model.logreg
        trace, n_iter = model.totals, model.n_iter
    classifier = attach_head(U, y, joint, hyper, cfg, seed)
    return TrainedPipeline(V, U, classifier, joint, trace, n_iter, cfg)


@dataclass(frozen=True)
class CvGrid:
    alphas: Sequence[float]
    betas: Sequence[float]
    gammas: Sequence[float]
    ranks: Sequence[int]
    folds: int = 5

    def __post_init__(self):
        for name in ("alphas", "betas", "gammas", "ranks"):
            values = getattr(self, name)
            if len(values) == 0:
                raise InvalidConfig(f"{name} must be non-empty")
            if min(values) < 0:
                raise InvalidConfig(f"{name} must be >= 0")
        if min(self.ranks) < 1:
            raise InvalidConfig("ranks must be >= 1")
        if self.folds < 2:
            raise InvalidConfig("folds must be >= 2")

    def cells(self) -> list[tuple[float, float, float, int]]:
        """All (alpha, beta, gamma, rank) combinations, sorted ascending."""
        return sorted(itertools.product(self.alphas, self.betas, self.gammas, self.ranks))

    @property
    def size(self) -> int:
        return len(self.alphas) * len(self.betas) * len(self.gammas) * len(self.ranks)


@dataclass
class CvResult:
    best: dict
    table: list = field(default_factory=list)


def _fit_key(cell):
    # beta only acts through w, b, which stay at zero when alpha is zero
    alpha, beta, gamma, r = cell
    return (alpha, beta if alpha > 0 else 0.0, gamma, r)


def _cv_cell(args):
    X, y, folds, cell, scale, cfg, seed = args
    alpha, beta, gamma, r = cell
    hyper = SnmfHyper(alpha, beta, gamma, int(r), scale)
    fold_aucs = []
    for val in folds:
        train = np.setdiff1d(np.arange(y.size), val, assume_unique=True)
        pipe = train_pipeline(X[train], y[train], hyper, cfg, seed)
        fold_aucs.append(auc(pipe.scores(X[val]), y[val]))
    return fold_aucs


def grid_search_cv(X, y, grid: CvGrid, cfg: PipelineConfig = PipelineConfig(),
                   seed: int = 0, jobs: int = 1, scale_by_shape: bool = True) -> CvResult:
    """Mean validation AUC of every grid cell over stratified folds.

    The best cell has the highest mean AUC; exact ties go to the
    lexicographically smallest (alpha, beta, gamma, rank).  Results do not
    depend on ``jobs``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).ravel()
    folds = kfold_indices(y, grid.folds, seed)
    cells = grid.cells()
    unique = sorted({_fit_key(c) for c in cells})
    work = [(X, y, folds, key, scale_by_shape, cfg, seed) for key in unique]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_cv_cell, work))
    else:
        results = [_cv_cell(w) for w in work]
    by_key = dict(zip(unique, results))

    table = []
    for cell in cells:
        aucs = by_key[_fit_key(cell)]
        alpha, beta, gamma, r = cell
        table.append({"alpha": alpha, "beta": beta, "gamma": gamma, "rank": int(r),
                      "mean_auc": float(np.mean(aucs)), "fold_aucs": [float(a) for a in aucs]})
    best = table[0]
    for row in table[1:]:
        if row["mean_auc"] > best["mean_auc"]:
            best = row
    return CvResult(best=best, table=table)


def permutation_test(scores_a, scores_b, labels, n_perm: int = 999, seed: int = 0,
                     return_details: bool = False):
    """Two-sided paired permutation test for a difference in AUC.

    Under the null the two scorers are exchangeable per sample, so each
    permutation swaps the a/b scores of every sample independently with
    probability one half.  The statistic is AUC(a) - AUC(b) and
    p = (1 + #{|T_perm| >= |T_obs|}) / (1 + n_perm).
    """
    a = np.asarray(scores_a, dtype=np.float64).ravel()
    b = np.asarray(scores_b, dtype=np.float64).ravel()
    pos = _binary_labels(labels)
    if a.shape != b.shape or a.shape != pos.shape:
        raise ShapeMismatch(f"lengths differ: {a.size}, {b.size}, {pos.size}")
    if pos.all() or not pos.any():
        raise SingleClass("permutation test needs both classes")
    if n_perm < 1:
        raise InvalidConfig("n_perm must be >= 1")

    observed = auc(a, pos) - auc(b, pos)
    rng = make_rng(seed, 2)
    hits = 0
    batch = max(1, min(n_perm, 2_000_000 // max(a.size, 1)))
    done = 0
    while done < n_perm:
        size = min(batch, n_perm - done)
        swap = rng.random((size, a.size)) < 0.5
        perm_a = np.where(swap, b, a)
        perm_b = np.where(swap, a, b)
        stat = _auc_rows(perm_a, pos) - _auc_rows(perm_b, pos)
        hits += int(np.sum(np.abs(stat) >= abs(observed) - 1e-12))
        done += size
    p = (1 + hits) / (1 + n_perm)
    if return_details:
        return {"p_value": p, "observed": observed, "n_perm": n_perm, "seed": seed,
                "scheme": "paired per-sample swap, two-sided, add-one"}
    return p


def config_dict(cfg: PipelineConfig) -> dict:
    return asdict(cfg)
