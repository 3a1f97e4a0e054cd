"""Truncated SVD of the binary user-entity incidence."""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from ..errors import ConfigError

# below this size a full LAPACK decomposition is cheaper and exact
DENSE_LIMIT = 600


def truncated_svd(X, k, seed=0):
    """Top-k singular triplets (U, s, Vt), s nonincreasing.

    Signs are normalized so the largest-magnitude entry of each right
    singular vector is positive, which makes the result reproducible.
    """
    m, n = X.shape
    if not 1 <= k < min(m, n):
        raise ConfigError(f"SVD dim must lie in [1, {min(m, n)}) for a {m}x{n} incidence, got {k}")
    if min(m, n) <= DENSE_LIMIT:
        dense = X.toarray() if hasattr(X, "toarray") else np.asarray(X, dtype=float)
        U, s, Vt = scipy.linalg.svd(dense, full_matrices=False)
        U, s, Vt = U[:, :k], s[:k], Vt[:k]
    else:
        v0 = np.random.default_rng(seed).uniform(-1, 1, size=min(m, n))
        U, s, Vt = scipy.sparse.linalg.svds(X.astype(np.float64), k=k, v0=v0, solver="arpack")
        order = np.argsort(-s, kind="stable")
        U, s, Vt = U[:, order], s[order], Vt[order]
    pivot = np.argmax(np.abs(Vt), axis=1)
    flip = np.sign(Vt[np.arange(k), pivot])
    flip[flip == 0] = 1.0
    return U * flip, s, Vt * flip[:, None]


def train_svd(corpus, config):
    """Return (user matrix, entity basis, history, singular values).

    User rows are the incidence projected onto the rank-dim basis (U * s).
    History holds the squared Frobenius reconstruction error before
    (zero model) and after the fit. Columns beyond the numerical rank are
    set to exactly zero.
    """
    X = corpus.matrix.astype(np.float64)
    U, s, Vt = truncated_svd(X, config.dim, config.rng_seed)
    total = float(X.multiply(X).sum())
    history = [total, max(0.0, total - float(s @ s))]
    users = U * s
    # directions past the numerical rank carry only rounding noise
    null = s <= s[0] * max(X.shape) * np.finfo(float).eps
    users[:, null] = 0.0
    return users, Vt.T.copy(), history, s
