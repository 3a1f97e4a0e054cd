"""k-fold cross-validated Pearson evaluation."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from ..analysis import pearson
from ..errors import ConfigError, InputError, UndefinedCorrelationError
from .features import Standardizer
from .lasso import contiguous_folds, fit_lasso_cv, train_lasso
from .svr import train_svr

log = logging.getLogger(__name__)


@dataclass
class ModelSpec:
    kind: str = "svr"              # "svr" or "lasso"
    C: float = 1.0
    epsilon: float = 0.2
    gamma: Optional[float] = None  # None -> 1 / num_columns
    lam: Optional[float] = None    # None -> inner CV over the log grid
    inner_folds: int = 5
    n_lambdas: int = 20
    lambda_ratio: float = 1e-3

    def __post_init__(self):
        self.kind = self.kind.lower()
        if self.kind not in ("svr", "lasso"):
            raise ConfigError(f"unknown model {self.kind!r}; use svr or lasso")

    def fit(self, X, y, seed=0):
        if self.kind == "svr":
            return train_svr(X, y, self.C, self.epsilon, self.gamma)
        if sp.issparse(X):
            X = X.toarray()
        if self.lam is not None:
            return train_lasso(X, y, self.lam)
        return fit_lasso_cv(X, y, self.inner_folds, self.n_lambdas, self.lambda_ratio, seed)


@dataclass
class EvalResult:
    fold_r: list                   # per fold; None where r is undefined
    mean_r: float
    pooled_r: float
    seed: int
    folds: list = field(repr=False, default_factory=list)
    predictions: np.ndarray = field(repr=False, default=None)
    config: dict = field(default_factory=dict)

    @property
    def skipped(self):
        return [i for i, r in enumerate(self.fold_r) if r is None]


def cross_validate(X, y, spec: ModelSpec = None, folds=10, seed=0, model_fn=None) -> EvalResult:
    """Standardize on each training split, fit, and score the held-out fold.

    ``model_fn(X_train, y_train, X_test) -> predictions`` replaces the
    model spec when given (used for oracle/null checks).
    """
    spec = spec or ModelSpec()
    X = sp.csr_matrix(X, dtype=float) if sp.issparse(X) else np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if X.shape[0] != n:
        raise InputError("feature rows must match labels")
    if folds < 2 or n < folds:
        raise ConfigError(f"need at least {folds} labeled users for {folds}-fold CV (have {n})")
    parts = contiguous_folds(n, folds, seed)
    pred = np.empty(n)
    fold_r = []
    for f, test in enumerate(parts):
        train = np.setdiff1d(np.arange(n), test)
        scaler = Standardizer().fit(X[train])
        Xtr, Xte = scaler.transform(X[train]), scaler.transform(X[test])
        if model_fn is not None:
            p = np.asarray(model_fn(Xtr, y[train], Xte), dtype=float)
        else:
            p = spec.fit(Xtr, y[train], seed=seed + 1 + f).predict(Xte)
        pred[test] = p
        try:
            fold_r.append(pearson(p, y[test]))
        except UndefinedCorrelationError:
            log.warning("fold %d: correlation undefined, skipped", f)
            fold_r.append(None)
    defined = [r for r in fold_r if r is not None]
    mean_r = float(np.mean(defined)) if defined else float("nan")
    try:
        pooled = pearson(pred, y)
    except UndefinedCorrelationError:
        pooled = float("nan")
    return EvalResult(fold_r, mean_r, pooled, seed, parts, pred, asdict(spec))
