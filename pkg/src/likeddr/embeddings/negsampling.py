"""Negative-sampling SGD for U-SG, U-CBOW, P-DM and P-DBOW.

All four share one kernel, ``_train_users``, parameterized by ``mode``:

    SG    predict the target from one context entity
    CBOW  predict the target from the mean of the window's entities
    DM    predict the target from user vector + sum of window entities
    DBOW  predict every entity of a user from the user vector alone

Each user's likes are an unordered set, so the kernel reshuffles them on
every epoch with the per-run RNG and slides the (randomly shrunk) window
over that order.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

SG, CBOW, DM, DBOW = 0, 1, 2, 3
MODES = {"U-SG": SG, "U-CBOW": CBOW, "P-DM": DM, "P-DBOW": DBOW}

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True, inline="always", error_model="numpy")
def next_u64(state):
    # splitmix64
    state[0] += _GOLDEN
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always", error_model="numpy")
def next_float(state):
    return (next_u64(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True, inline="always", error_model="numpy")
def next_int(state, n):
    return np.int64(next_u64(state) % np.uint64(n))


@njit(cache=True, error_model="numpy")
def shuffle_inplace(a, state):
    for i in range(len(a) - 1, 0, -1):
        j = next_int(state, i + 1)
        a[i], a[j] = a[j], a[i]


@njit(cache=True, inline="always", error_model="numpy")
def sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


@njit(cache=True, inline="always", error_model="numpy")
def log_sigmoid(x):
    if x >= 0:
        return -np.log1p(np.exp(-x))
    return x - np.log1p(np.exp(x))


@njit(cache=True, error_model="numpy")
def draw_negatives(table, target, out, state):
    """Fill ``out`` with draws from the noise table, never the target itself."""
    size = len(table)
    for k in range(len(out)):
        while True:
            n = table[next_int(state, size)]
            if n != target:
                break
        out[k] = n


@njit(cache=True, fastmath=True, error_model="numpy")
def ns_update(h, syn1, target, negs, lr, work):
    """One SGD step on -log s(h.v_t) - sum log s(-h.v_n).

    Output rows are updated in place; ``work`` accumulates -lr * dL/dh,
    which the caller distributes onto whatever produced ``h``.
    """
    dim = len(h)
    for k in range(len(negs) + 1):
        if k == 0:
            row = target
            label = 1.0
        else:
            row = negs[k - 1]
            label = 0.0
        f = 0.0
        for d in range(dim):
            f += h[d] * syn1[row, d]
        g = (label - sigmoid(f)) * lr
        for d in range(dim):
            work[d] += g * syn1[row, d]
            syn1[row, d] += g * h[d]


@njit(cache=True, fastmath=True, error_model="numpy")
def ns_loss(h, syn1, target, negs):
    dim = len(h)
    f = 0.0
    for d in range(dim):
        f += h[d] * syn1[target, d]
    loss = -log_sigmoid(f)
    for k in range(len(negs)):
        f = 0.0
        for d in range(dim):
            f += h[d] * syn1[negs[k], d]
        loss -= log_sigmoid(-f)
    return loss


@njit(cache=True, error_model="numpy")
def sg_event(syn0, syn1, ctx, target, negs, lr, work):
    work[:] = 0.0
    ns_update(syn0[ctx], syn1, target, negs, lr, work)
    for d in range(syn0.shape[1]):
        syn0[ctx, d] += work[d]


@njit(cache=True, error_model="numpy")
def cbow_event(syn0, syn1, ctx, target, negs, lr, neu1, work):
    """Mean of the context vectors; each context row gets dL/dh / count."""
    dim = syn0.shape[1]
    neu1[:] = 0.0
    for c in ctx:
        for d in range(dim):
            neu1[d] += syn0[c, d]
    inv = 1.0 / len(ctx)
    for d in range(dim):
        neu1[d] *= inv
    work[:] = 0.0
    ns_update(neu1, syn1, target, negs, lr, work)
    for c in ctx:
        for d in range(dim):
            syn0[c, d] += work[d] * inv


@njit(cache=True, error_model="numpy")
def dm_event(docvecs, syn0, syn1, doc, ctx, target, negs, lr, neu1, work):
    """User vector plus the sum of the context vectors."""
    dim = syn0.shape[1]
    for d in range(dim):
        neu1[d] = docvecs[doc, d]
    for c in ctx:
        for d in range(dim):
            neu1[d] += syn0[c, d]
    work[:] = 0.0
    ns_update(neu1, syn1, target, negs, lr, work)
    for d in range(dim):
        docvecs[doc, d] += work[d]
    for c in ctx:
        for d in range(dim):
            syn0[c, d] += work[d]


@njit(cache=True, error_model="numpy")
def dbow_event(docvecs, syn1, doc, target, negs, lr, work):
    work[:] = 0.0
    ns_update(docvecs[doc], syn1, target, negs, lr, work)
    for d in range(docvecs.shape[1]):
        docvecs[doc, d] += work[d]


@njit(cache=True, error_model="numpy")
def _train_users(mode, indptr, indices, u_lo, u_hi, syn0, syn1, docvecs, table,
                 window, negative, lr0, lr_floor, done0, total, state):
    """Train on users [u_lo, u_hi); returns the number of tokens processed."""
    dim = syn1.shape[1]
    maxlen = 0
    for u in range(u_lo, u_hi):
        maxlen = max(maxlen, indptr[u + 1] - indptr[u])
    seq = np.empty(maxlen, dtype=np.int64)
    ctx = np.empty(2 * window + 1, dtype=np.int64)
    negs = np.empty(negative, dtype=np.int64)
    neu1 = np.empty(dim)
    work = np.empty(dim)
    done = 0
    for u in range(u_lo, u_hi):
        n = indptr[u + 1] - indptr[u]
        for i in range(n):
            seq[i] = indices[indptr[u] + i]
        shuffle_inplace(seq[:n], state)
        for i in range(n):
            lr = lr0 * (1.0 - (done0 + done) / total)
            if lr < lr_floor:
                lr = lr_floor
            target = seq[i]
            if mode == DBOW:
                draw_negatives(table, target, negs, state)
                dbow_event(docvecs, syn1, u, target, negs, lr, work)
                done += 1
                continue
            b = next_int(state, window)
            lo = max(0, i - window + b)
            hi = min(n, i + window + 1 - b)
            nc = 0
            for j in range(lo, hi):
                if j != i:
                    ctx[nc] = seq[j]
                    nc += 1
            if mode == SG:
                for c in range(nc):
                    draw_negatives(table, target, negs, state)
                    sg_event(syn0, syn1, ctx[c], target, negs, lr, work)
            elif mode == CBOW:
                if nc > 0:
                    draw_negatives(table, target, negs, state)
                    cbow_event(syn0, syn1, ctx[:nc], target, negs, lr, neu1, work)
            else:
                draw_negatives(table, target, negs, state)
                dm_event(docvecs, syn0, syn1, u, ctx[:nc], target, negs, lr, neu1, work)
            done += 1
    return done


@njit(cache=True, parallel=True, error_model="numpy")
def _train_users_parallel(mode, indptr, indices, bounds, syn0, syn1, docvecs, table,
                          window, negative, lr0, lr_floor, epoch_done0, total, states,
                          shard_tokens):
    """Lock-free (Hogwild) variant: one shard of users per worker."""
    n_shards = len(bounds) - 1
    out = np.zeros(n_shards, dtype=np.int64)
    for s in prange(n_shards):
        # each shard decays its rate over its own share of the work
        frac_total = total * shard_tokens[s] / shard_tokens.sum()
        out[s] = _train_users(mode, indptr, indices, bounds[s], bounds[s + 1], syn0, syn1,
                              docvecs, table, window, negative, lr0, lr_floor,
                              epoch_done0 * shard_tokens[s] / shard_tokens.sum(),
                              frac_total, states[s:s + 1])
    return out.sum()


@njit(cache=True, error_model="numpy")
def probe_loss(mode, syn0, syn1, docvecs, ev_doc, ev_target, ev_ptr, ev_ctx, ev_negs):
    """Mean NS loss over a fixed set of prediction events."""
    dim = syn1.shape[1]
    h = np.empty(dim)
    total = 0.0
    for e in range(len(ev_target)):
        h[:] = 0.0
        if mode == DM or mode == DBOW:
            for d in range(dim):
                h[d] = docvecs[ev_doc[e], d]
        c0, c1 = ev_ptr[e], ev_ptr[e + 1]
        for c in range(c0, c1):
            for d in range(dim):
                h[d] += syn0[ev_ctx[c], d]
        if mode == CBOW and c1 > c0:
            for d in range(dim):
                h[d] /= c1 - c0
        total += ns_loss(h, syn1, ev_target[e], ev_negs[e])
    return total / max(1, len(ev_target))


def unigram_table(counts, power=0.75, size=1_000_000):
    """Noise table: entity e fills a share of slots proportional to count**power."""
    w = np.asarray(counts, dtype=np.float64) ** power
    cum = np.cumsum(w) / w.sum()
    slots = (np.arange(size) + 0.5) / size
    return np.minimum(np.searchsorted(cum, slots, side="right"), len(w) - 1).astype(np.int64)


def make_probe_events(mode, indptr, indices, table, window, negative, n_events, seed):
    """Sample a fixed set of (user, context, target, negatives) events from the data."""
    rng = np.random.default_rng(seed)
    degrees = np.diff(indptr)
    eligible = np.flatnonzero(degrees >= (1 if mode == DBOW else 2))
    if len(eligible) == 0:
        eligible = np.flatnonzero(degrees >= 1)
    docs = rng.choice(eligible, size=n_events)
    ev_target = np.empty(n_events, dtype=np.int64)
    ctx_lists = []
    for e, u in enumerate(docs):
        likes = indices[indptr[u]:indptr[u + 1]]
        order = rng.permutation(len(likes))
        ev_target[e] = likes[order[0]]
        if mode == DBOW:
            ctx_lists.append([])
        elif mode == SG:
            ctx_lists.append([likes[order[1 % len(likes)]]])
        else:
            width = min(len(likes) - 1, 2 * window)
            ctx_lists.append(list(likes[order[1:1 + width]]))
    ev_ptr = np.concatenate([[0], np.cumsum([len(c) for c in ctx_lists])]).astype(np.int64)
    ev_ctx = np.array([c for cl in ctx_lists for c in cl], dtype=np.int64)
    ev_negs = np.empty((n_events, negative), dtype=np.int64)
    state = np.array([np.uint64(seed) ^ np.uint64(0xA5A5A5A5)], dtype=np.uint64)
    for e in range(n_events):
        draw_negatives(table, ev_target[e], ev_negs[e], state)
    return docs.astype(np.int64), ev_target, ev_ptr, ev_ctx, ev_negs


def _shard_bounds(indptr, n_shards):
    """Contiguous user ranges with roughly equal token counts."""
    tokens = indptr[-1]
    cuts = np.searchsorted(indptr, np.linspace(0, tokens, n_shards + 1)[1:-1])
    bounds = np.unique(np.concatenate([[0], cuts, [len(indptr) - 1]])).astype(np.int64)
    return bounds


def train_ns(corpus, config):
    """Train one of the NS methods.

    Returns (user_matrix or None, entity_matrix or None, loss_history) where
    loss_history[0] is the probe loss before the first epoch.
    """
    from ..errors import DivergenceError

    mode = MODES[config.method]
    dim = config.dim
    rng = np.random.default_rng(config.rng_seed)
    n_users, n_ent = corpus.num_users, corpus.num_entities
    syn0 = (rng.random((n_ent, dim)) - 0.5) / dim
    syn1 = np.zeros((n_ent, dim))
    docvecs = (rng.random((n_users, dim)) - 0.5) / dim
    if mode in (SG, CBOW):
        docvecs = np.zeros((1, dim))
    table = unigram_table(corpus.entity_counts)
    indptr, indices = corpus.indptr, corpus.indices.astype(np.int64)
    window, negative = config.window, config.negative_samples

    probes = make_probe_events(mode, indptr, indices, table, window, negative,
                               config.probe_events, config.rng_seed + 1)
    history = [probe_loss(mode, syn0, syn1, docvecs, *probes)]

    total = float(config.epochs * max(1, corpus.num_pairs))
    lr0 = config.learning_rate
    lr_floor = lr0 * 1e-4
    parallel = (not config.deterministic) and config.threads > 1
    if parallel:
        bounds = _shard_bounds(indptr, config.threads)
        shard_tokens = np.diff(indptr[bounds]).astype(np.float64)
        states = np.array([np.uint64(config.rng_seed * 7919 + s + 1) for s in range(len(bounds) - 1)],
                          dtype=np.uint64)
    else:
        state = np.array([np.uint64(config.rng_seed) + np.uint64(12345)], dtype=np.uint64)
    done = 0
    for _ in range(config.epochs):
        if parallel:
            done += _train_users_parallel(mode, indptr, indices, bounds, syn0, syn1, docvecs, table,
                                          window, negative, lr0, lr_floor, float(done), total,
                                          states, shard_tokens)
        else:
            done += _train_users(mode, indptr, indices, 0, n_users, syn0, syn1, docvecs, table,
                                 window, negative, lr0, lr_floor, float(done), total, state)
        loss = probe_loss(mode, syn0, syn1, docvecs, *probes)
        if not np.isfinite(loss) or not np.all(np.isfinite(syn1)):
            raise DivergenceError(
                f"{config.method} diverged (non-finite loss); lower the learning rate "
                f"(currently {lr0})")
        history.append(loss)
    users = docvecs if mode in (DM, DBOW) else None
    entities = syn0 if mode != DBOW else None
    return users, entities, history
