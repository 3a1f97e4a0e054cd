"""epsilon-SVR with an RBF kernel, solved by SMO.

The dual is written over 2n variables beta = (alpha, alpha*) with signs
s = (+1..., -1...), as in LIBSVM:

    min 1/2 beta' Q beta + p' beta,  s' beta = 0,  0 <= beta <= C
    Q_ij = s_i s_j K(x_i, x_j),  p = (eps - y, eps + y)

Working pairs come from second-order selection; iteration stops when the
maximal KKT violation drops below ``tol``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numba import njit

from ..errors import ConvergenceError, InputError

TAU = 1e-12
KKT_TOL = 1e-3


def _rows(X):
    return sp.csr_matrix(X, dtype=float) if sp.issparse(X) else np.asarray(X, dtype=float)


def _sqnorms(A):
    if sp.issparse(A):
        return np.asarray(A.multiply(A).sum(axis=1)).ravel()
    return (A * A).sum(axis=1)


def rbf_kernel(A, B, gamma):
    """exp(-gamma |a - b|^2) for dense or sparse rows."""
    A, B = _rows(A), _rows(B)
    cross = A @ B.T
    if sp.issparse(cross):
        cross = cross.toarray()
    sq = _sqnorms(A)[:, None] + _sqnorms(B)[None, :] - 2.0 * np.asarray(cross)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


@njit(cache=True)
def _smo(K, y, C, eps, tol, max_iter):
    n = len(y)
    m = 2 * n
    s = np.empty(m)
    p = np.empty(m)
    for i in range(n):
        s[i], s[i + n] = 1.0, -1.0
        p[i], p[i + n] = eps - y[i], eps + y[i]
    beta = np.zeros(m)
    G = p.copy()
    it = 0
    gap = np.inf
    while it < max_iter:
        # select i: maximal violating index from the "up" set
        Gmax = -np.inf
        i = -1
        for t in range(m):
            if s[t] > 0:
                if beta[t] < C and -G[t] >= Gmax:
                    Gmax = -G[t]
                    i = t
            else:
                if beta[t] > 0 and G[t] >= Gmax:
                    Gmax = G[t]
                    i = t
        Gmax2 = -np.inf
        j = -1
        obj_min = np.inf
        ki = i % n if i >= 0 else 0
        for t in range(m):
            kt = t % n
            qit = s[i] * s[t] * K[ki, kt] if i >= 0 else 0.0
            if s[t] > 0:
                if beta[t] > 0:
                    diff = Gmax + G[t]
                    if G[t] >= Gmax2:
                        Gmax2 = G[t]
                    if diff > 0 and i >= 0:
                        quad = K[ki, ki] + K[kt, kt] - 2.0 * s[i] * qit
                        if quad <= 0:
                            quad = TAU
                        obj = -diff * diff / quad
                        if obj <= obj_min:
                            obj_min = obj
                            j = t
            else:
                if beta[t] < C:
                    diff = Gmax - G[t]
                    if -G[t] >= Gmax2:
                        Gmax2 = -G[t]
                    if diff > 0 and i >= 0:
                        quad = K[ki, ki] + K[kt, kt] + 2.0 * s[i] * qit
                        if quad <= 0:
                            quad = TAU
                        obj = -diff * diff / quad
                        if obj <= obj_min:
                            obj_min = obj
                            j = t
        gap = Gmax + Gmax2
        if gap < tol or j == -1:
            return beta, G, s, it, gap
        it += 1
        kj = j % n
        qij = s[i] * s[j] * K[ki, kj]
        old_i, old_j = beta[i], beta[j]
        if s[i] != s[j]:
            quad = K[ki, ki] + K[kj, kj] + 2.0 * qij
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            d = beta[i] - beta[j]
            beta[i] += delta
            beta[j] += delta
            if d > 0:
                if beta[j] < 0:
                    beta[j] = 0.0
                    beta[i] = d
            else:
                if beta[i] < 0:
                    beta[i] = 0.0
                    beta[j] = -d
            if d > 0:
                if beta[i] > C:
                    beta[i] = C
                    beta[j] = C - d
            else:
                if beta[j] > C:
                    beta[j] = C
                    beta[i] = C + d
        else:
            quad = K[ki, ki] + K[kj, kj] - 2.0 * qij
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            tot = beta[i] + beta[j]
            beta[i] -= delta
            beta[j] += delta
            if tot > C:
                if beta[i] > C:
                    beta[i] = C
                    beta[j] = tot - C
            else:
                if beta[j] < 0:
                    beta[j] = 0.0
                    beta[i] = tot
            if tot > C:
                if beta[j] > C:
                    beta[j] = C
                    beta[i] = tot - C
            else:
                if beta[i] < 0:
                    beta[i] = 0.0
                    beta[j] = tot
        di = beta[i] - old_i
        dj = beta[j] - old_j
        for t in range(m):
            kt = t % n
            G[t] += s[t] * (s[i] * K[ki, kt] * di + s[j] * K[kj, kt] * dj)
    return beta, G, s, -1, gap


def _rho(beta, G, s, C):
    sG = s * G
    at_upper = beta >= C
    at_lower = beta <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        return float(sG[free].mean())
    ub_mask = (at_upper & (s < 0)) | (at_lower & (s > 0))
    lb_mask = (at_upper & (s > 0)) | (at_lower & (s < 0))
    ub = sG[ub_mask].min() if ub_mask.any() else np.inf
    lb = sG[lb_mask].max() if lb_mask.any() else -np.inf
    return float((ub + lb) / 2.0)


@dataclass
class SvrModel:
    dual_coef: np.ndarray     # alpha - alpha*, one per support row
    support: np.ndarray       # stored support rows
    bias: float
    C: float
    epsilon: float
    gamma: float
    iterations: int = 0
    kkt_gap: float = 0.0

    def predict(self, X):
        X = _rows(X)
        if len(self.dual_coef) == 0:
            return np.full(X.shape[0], self.bias)
        return rbf_kernel(X, self.support, self.gamma) @ self.dual_coef + self.bias


def train_svr(X, y, C=1.0, epsilon=0.2, gamma=None, tol=KKT_TOL, max_iter=None,
              kernel=None) -> SvrModel:
    """Fit epsilon-SVR; ``gamma`` defaults to 1 / number of columns."""
    X = _rows(X)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != len(y) or len(y) < 1:
        raise InputError("svr needs X with len(y) >= 1 rows")
    if not (C > 0 and epsilon >= 0):
        raise InputError("svr needs C > 0 and epsilon >= 0")
    if gamma is None:
        gamma = 1.0 / max(1, X.shape[1])
    if not gamma > 0:
        raise InputError("gamma must be positive")
    if not (np.all(np.isfinite(X.data if sp.issparse(X) else X)) and np.all(np.isfinite(y))):
        raise InputError("svr inputs must be finite")
    K = rbf_kernel(X, X, gamma) if kernel is None else kernel
    if max_iter is None:
        max_iter = max(10_000_000, 100 * len(y))
    beta, G, s, it, gap = _smo(K, y, float(C), float(epsilon), float(tol), int(max_iter))
    if it < 0:
        raise ConvergenceError(f"SMO hit {max_iter} iterations with KKT gap {gap:.3g}")
    n = len(y)
    coef = beta[:n] - beta[n:]
    rho = _rho(beta, G, s, C)
    sv = np.flatnonzero(coef != 0)
    return SvrModel(coef[sv], X[sv].copy(), -rho, float(C), float(epsilon), float(gamma), it, float(gap))
