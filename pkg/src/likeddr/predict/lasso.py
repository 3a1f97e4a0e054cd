"""Lasso by cyclic coordinate descent, with λ picked by inner cross-validation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ..errors import ConvergenceError, InputError

TOL = 1e-7
MAX_SWEEPS = 100_000


@dataclass
class LassoModel:
    weights: np.ndarray
    intercept: float
    lam: float
    sweeps: int = 0

    def predict(self, X):
        if hasattr(X, "toarray"):
            return np.asarray(X @ self.weights, dtype=float).ravel() + self.intercept
        return np.asarray(X, dtype=float) @ self.weights + self.intercept


def soft_threshold(rho, lam):
    return np.sign(rho) * max(abs(rho) - lam, 0.0)


@njit(cache=True)
def _cd(Xc, yc, w, lam, tol, max_sweeps):
    n, p = Xc.shape
    r = yc - Xc @ w
    sq = np.empty(p)
    for j in range(p):
        acc = 0.0
        for i in range(n):
            acc += Xc[i, j] * Xc[i, j]
        sq[j] = acc / n
    for sweep in range(1, max_sweeps + 1):
        max_delta = 0.0
        for j in range(p):
            if sq[j] == 0.0:
                continue
            col = Xc[:, j]
            acc = 0.0
            for i in range(n):
                acc += col[i] * r[i]
            rho = acc / n + sq[j] * w[j]
            a = abs(rho) - lam
            new = 0.0
            if a > 0:
                new = (a if rho > 0 else -a) / sq[j]
            d = new - w[j]
            if d != 0.0:
                r -= d * col
                w[j] = new
                if abs(d) > max_delta:
                    max_delta = abs(d)
        if max_delta < tol:
            return sweep, max_delta
    return -1, max_delta


def lasso_objective(X, y, model):
    res = y - model.predict(X)
    return 0.5 * (res @ res) / len(y) + model.lam * np.abs(model.weights).sum()


def lambda_max(X, y):
    X = np.asarray(X, dtype=float)
    xc = X - X.mean(axis=0)
    return float(np.max(np.abs(xc.T @ (y - y.mean())))) / len(y) if X.shape[1] else 0.0


def train_lasso(X, y, lam, warm_start=None, tol=TOL, max_sweeps=MAX_SWEEPS) -> LassoModel:
    """Minimize (1/2n)||y - Xw - b||^2 + lam ||w||_1.

    The intercept is left unpenalized (handled by centering).
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != len(y) or len(y) < 2:
        raise InputError("lasso needs X with len(y) >= 2 rows")
    if lam < 0:
        raise InputError("lambda must be >= 0")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise InputError("lasso inputs must be finite")
    mx, my = X.mean(axis=0), y.mean()
    Xc = np.asfortranarray(X - mx)
    w = np.zeros(X.shape[1]) if warm_start is None else np.array(warm_start, dtype=float)
    sweeps, delta = _cd(Xc, y - my, w, float(lam), tol, max_sweeps)
    if sweeps < 0:
        res = (y - my) - Xc @ w
        raise ConvergenceError(
            f"lasso did not converge in {max_sweeps} sweeps (last change {delta:.3g}, "
            f"residual norm {np.linalg.norm(res):.6g})")
    return LassoModel(w, float(my - mx @ w), float(lam), sweeps)


def contiguous_folds(n, k, seed):
    """Seeded shuffle, then k contiguous blocks whose sizes differ by at most 1."""
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, k)]


def lambda_grid(X, y, n_lambdas=20, ratio=1e-3):
    top = lambda_max(X, y)
    if top == 0.0:
        return np.zeros(1)
    return np.geomspace(top, top * ratio, n_lambdas)


def fit_lasso_cv(X, y, inner_folds=5, n_lambdas=20, ratio=1e-3, seed=0) -> LassoModel:
    """Pick λ from the log grid by inner k-fold MSE, then refit on all rows."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    grid = lambda_grid(X, y, n_lambdas, ratio)
    k = min(inner_folds, len(y))
    mse = np.zeros(len(grid))
    if k >= 2 and len(grid) > 1:
        for test in contiguous_folds(len(y), k, seed):
            train = np.setdiff1d(np.arange(len(y)), test)
            w = None
            for g, lam in enumerate(grid):
                m = train_lasso(X[train], y[train], lam, warm_start=w)
                w = m.weights
                res = y[test] - m.predict(X[test])
                mse[g] += res @ res
    best = grid[int(np.argmin(mse))]
    return train_lasso(X, y, best)
