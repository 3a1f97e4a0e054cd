"""GloVe over per-user like sequences.

Co-occurrences are counted within a window over each user's likes (one
seeded shuffle per user), weighted 1/d by distance and stored
symmetrically. The factorization is weighted least squares with AdaGrad,
as in the reference C implementation: the co-occurrence list is shuffled
once and every pass walks it in that order. Parameters are single
precision; the objective is accumulated in double.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from numba import njit

from ..errors import DivergenceError
from .negsampling import next_float, shuffle_inplace

CHUNK_USERS = 4096


@njit(cache=True, error_model="numpy")
def _window_triplets(indptr, indices, u_lo, u_hi, window, state):
    n = 0
    for u in range(u_lo, u_hi):
        m = indptr[u + 1] - indptr[u]
        for p in range(m):
            n += 2 * min(window, m - 1 - p)
    rows = np.empty(n, dtype=np.int32)
    cols = np.empty(n, dtype=np.int32)
    vals = np.empty(n)
    k = 0
    for u in range(u_lo, u_hi):
        seq = indices[indptr[u]:indptr[u + 1]].copy()
        shuffle_inplace(seq, state)
        m = len(seq)
        for p in range(m):
            for d in range(1, min(window, m - 1 - p) + 1):
                a, b = seq[p], seq[p + d]
                w = 1.0 / d
                rows[k], cols[k], vals[k] = a, b, w
                rows[k + 1], cols[k + 1], vals[k + 1] = b, a, w
                k += 2
    return rows, cols, vals


def cooccurrence(corpus, window, seed=0):
    """Symmetric 1/d-weighted co-occurrence counts as a CSR matrix."""
    E = corpus.num_entities
    state = np.array([np.uint64(seed) + np.uint64(0x5EED)], dtype=np.uint64)
    total = sp.csr_matrix((E, E))
    for lo in range(0, corpus.num_users, CHUNK_USERS):
        hi = min(corpus.num_users, lo + CHUNK_USERS)
        r, c, v = _window_triplets(corpus.indptr, corpus.indices, lo, hi, window, state)
        total = total + sp.csr_matrix((v, (r, c)), shape=(E, E))
    total.sum_duplicates()
    total.eliminate_zeros()
    return total


@njit(cache=True, error_model="numpy")
def _weight(x, xmax, alpha):
    return 1.0 if x >= xmax else (x / xmax) ** alpha


@njit(cache=True, error_model="numpy")
def glove_objective(rows, cols, vals, W, Wt, b, bt, xmax, alpha):
    J = 0.0
    for e in range(len(vals)):
        i, j = rows[e], cols[e]
        diff = float(b[i]) + float(bt[j]) - np.log(vals[e])
        for t in range(W.shape[1]):
            diff += float(W[i, t]) * float(Wt[j, t])
        J += _weight(vals[e], xmax, alpha) * diff * diff
    return J


@njit(cache=True, fastmath=True, error_model="numpy")
def _glove_pass(rows, cols, logv, fw, W, Wt, b, bt, gW, gWt, gb, gbt, lr):
    """One AdaGrad pass over the (pre-shuffled) co-occurrence list."""
    dim = W.shape[1]
    for e in range(len(rows)):
        i, j = rows[e], cols[e]
        diff = b[i] + bt[j] - logv[e]
        for t in range(dim):
            diff += W[i, t] * Wt[j, t]
        fdiff = fw[e] * diff
        for t in range(dim):
            g1 = fdiff * Wt[j, t]
            g2 = fdiff * W[i, t]
            W[i, t] -= lr * g1 / np.sqrt(gW[i, t])
            Wt[j, t] -= lr * g2 / np.sqrt(gWt[j, t])
            gW[i, t] += g1 * g1
            gWt[j, t] += g2 * g2
        b[i] -= lr * fdiff / np.sqrt(gb[i])
        bt[j] -= lr * fdiff / np.sqrt(gbt[j])
        gb[i] += fdiff * fdiff
        gbt[j] += fdiff * fdiff


@njit(cache=True, error_model="numpy")
def _init(E, dim, state):
    W = np.empty((E, dim), dtype=np.float32)
    for i in range(E):
        for t in range(dim):
            W[i, t] = (next_float(state) - 0.5) / dim
    return W


def train_glove(corpus, config):
    """Return (entity vectors W + W~, history of the full objective)."""
    X = cooccurrence(corpus, config.window, config.rng_seed).tocoo()
    state = np.array([np.uint64(config.rng_seed) + np.uint64(0x61E5E)], dtype=np.uint64)
    order = np.arange(X.nnz, dtype=np.int64)
    shuffle_inplace(order, state)
    rows = X.row[order].astype(np.int64)
    cols = X.col[order].astype(np.int64)
    vals = X.data[order].astype(np.float64)
    xmax, alpha = config.glove_xmax, config.glove_weight_alpha
    logv = np.log(vals).astype(np.float32)
    fw = np.minimum(1.0, (vals / xmax) ** alpha).astype(np.float32)
    E, dim = corpus.num_entities, config.dim
    W = _init(E, dim, state)
    Wt = _init(E, dim, state)
    b = np.zeros(E, dtype=np.float32)
    bt = np.zeros(E, dtype=np.float32)
    gW, gWt = np.ones((E, dim), dtype=np.float32), np.ones((E, dim), dtype=np.float32)
    gb, gbt = np.ones(E, dtype=np.float32), np.ones(E, dtype=np.float32)
    with np.errstate(over="ignore"):
        # an absurd rate becomes inf here and surfaces as divergence below
        lr = np.float32(config.learning_rate)
    history = [glove_objective(rows, cols, vals, W, Wt, b, bt, xmax, alpha)]
    for _ in range(config.epochs):
        _glove_pass(rows, cols, logv, fw, W, Wt, b, bt, gW, gWt, gb, gbt, lr)
        J = glove_objective(rows, cols, vals, W, Wt, b, bt, xmax, alpha)
        if not np.isfinite(J):
            raise DivergenceError(f"GloVe objective became non-finite at learning rate {config.learning_rate}")
        history.append(J)
    return (W + Wt).astype(np.float64), history
