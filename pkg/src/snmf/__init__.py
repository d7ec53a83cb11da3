"""Supervised nonnegative matrix factorization.

Factorizes a nonnegative data matrix ``X ~ U V`` while a logistic-regression
loss on the rows of ``U`` pulls the representation towards the class labels.
"""

__version__ = "0.1.0"

from .errors import SnmfError
from .evaluation import (
    CvGrid,
    PipelineConfig,
    auc,
    grid_search_cv,
    kfold_indices,
    permutation_test,
    stratified_split,
    train_pipeline,
)
from .factorization import ConvergenceConfig, FactorPair, PgdConfig, fit_nmf, nndsvd_init, transform_nnls
from .simulation import SimConfig, gen_simulation
from .supervised import LogRegModel, SnmfHyper, fit_snmf, logreg_fit, predict_scores, snmf_objective

__all__ = [
    "ConvergenceConfig", "CvGrid", "FactorPair", "LogRegModel", "PgdConfig", "PipelineConfig",
    "SimConfig", "SnmfError", "SnmfHyper", "auc", "fit_nmf", "fit_snmf", "gen_simulation",
    "grid_search_cv", "kfold_indices", "logreg_fit", "nndsvd_init", "permutation_test",
    "predict_scores", "snmf_objective", "stratified_split", "train_pipeline", "transform_nnls",
]
