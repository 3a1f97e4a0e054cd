"""Supervised DDR prediction and the cross-validated experiment sweeps."""

from .evaluate import EvalResult, ModelSpec, cross_validate
from .features import FeatureMatrix, Standardizer, build_features
from .lasso import LassoModel, fit_lasso_cv, lambda_max, train_lasso
from .svr import SvrModel, train_svr
from .sweeps import (SweepRow, evaluate_baseline, evaluate_embedding, subsample_users,
                     sweep_datasize, sweep_featuresize, write_plot_csv, write_results)

__all__ = [
    "EvalResult", "ModelSpec", "cross_validate", "FeatureMatrix", "Standardizer",
    "build_features", "LassoModel", "fit_lasso_cv", "lambda_max", "train_lasso",
    "SvrModel", "train_svr", "SweepRow", "evaluate_baseline", "evaluate_embedding",
    "subsample_users", "sweep_datasize", "sweep_featuresize", "write_plot_csv", "write_results",
]
