"""Collapsed Gibbs sampling LDA over like "documents" (one per user)."""

from __future__ import annotations

import numpy as np
from numba import njit

from .negsampling import next_float, next_int


@njit(cache=True, error_model="numpy")
def _init_state(indptr, tokens, K, n_words, state):
    n_docs = len(indptr) - 1
    z = np.empty(len(tokens), dtype=np.int32)
    ndk = np.zeros((n_docs, K), dtype=np.int32)
    nwk = np.zeros((n_words, K), dtype=np.int32)
    nk = np.zeros(K, dtype=np.int64)
    for d in range(n_docs):
        for i in range(indptr[d], indptr[d + 1]):
            k = next_int(state, K)
            z[i] = k
            ndk[d, k] += 1
            nwk[tokens[i], k] += 1
            nk[k] += 1
    return z, ndk, nwk, nk


@njit(cache=True, fastmath=True, error_model="numpy")
def _sweep(indptr, tokens, z, ndk, nwk, nk, alpha, beta, vbeta, state):
    K = nk.shape[0]
    p = np.empty(K)
    for d in range(len(indptr) - 1):
        for i in range(indptr[d], indptr[d + 1]):
            w = tokens[i]
            k = z[i]
            ndk[d, k] -= 1
            nwk[w, k] -= 1
            nk[k] -= 1
            total = 0.0
            for t in range(K):
                total += (ndk[d, t] + alpha) * (nwk[w, t] + beta) / (nk[t] + vbeta)
                p[t] = total
            u = next_float(state) * total
            k = 0
            while k < K - 1 and p[k] <= u:
                k += 1
            z[i] = k
            ndk[d, k] += 1
            nwk[w, k] += 1
            nk[k] += 1


@njit(cache=True, error_model="numpy")
def _probe_nll(docs, words, ndk, nwk, nk, alpha, beta, vbeta):
    K = nk.shape[0]
    out = 0.0
    for e in range(len(docs)):
        d, w = docs[e], words[e]
        nd = 0
        for t in range(K):
            nd += ndk[d, t]
        s = 0.0
        for t in range(K):
            s += (ndk[d, t] + alpha) / (nd + K * alpha) * (nwk[w, t] + beta) / (nk[t] + vbeta)
        out -= np.log(s)
    return out / max(1, len(docs))


class LdaModel:
    """Gibbs sampler state; ``sweep()`` runs one pass over every token."""

    def __init__(self, corpus, num_topics, alpha=None, beta=None, seed=0, probe_events=2000):
        self.K = int(num_topics)
        self.alpha = 1.0 / self.K if alpha is None else float(alpha)
        self.beta = 1.0 / self.K if beta is None else float(beta)
        self.n_words = corpus.num_entities
        self.vbeta = self.n_words * self.beta
        self.indptr = corpus.indptr
        self.tokens = corpus.indices.astype(np.int64)
        self._state = np.array([np.uint64(seed) + np.uint64(987654321)], dtype=np.uint64)
        self.z, self.ndk, self.nwk, self.nk = _init_state(
            self.indptr, self.tokens, self.K, self.n_words, self._state)
        rng = np.random.default_rng(seed + 1)
        n = min(probe_events, len(self.tokens))
        pick = np.sort(rng.choice(len(self.tokens), size=n, replace=False)) if n else np.zeros(0, np.int64)
        self._probe_docs = (np.searchsorted(self.indptr, pick, side="right") - 1).astype(np.int64)
        self._probe_words = self.tokens[pick]

    def sweep(self):
        _sweep(self.indptr, self.tokens, self.z, self.ndk, self.nwk, self.nk,
               self.alpha, self.beta, self.vbeta, self._state)

    def probe_loss(self):
        """Mean -log p(word | doc) over a fixed sample of tokens."""
        return _probe_nll(self._probe_docs, self._probe_words, self.ndk, self.nwk, self.nk,
                          self.alpha, self.beta, self.vbeta)

    def doc_topic(self):
        nd = self.ndk.sum(axis=1, keepdims=True)
        return (self.ndk + self.alpha) / (nd + self.K * self.alpha)

    def topic_word(self):
        return ((self.nwk + self.beta) / (self.nk + self.vbeta)).T


def train_lda(corpus, config):
    model = LdaModel(corpus, config.dim, config.lda_alpha, config.lda_beta,
                     config.rng_seed, config.probe_events)
    history = [model.probe_loss()]
    for _ in range(config.epochs):
        model.sweep()
        history.append(model.probe_loss())
    return model, history


def topic_top_entities(model: LdaModel, topic, n):
    """Entity indices ranked by probability under ``topic``; ties by index."""
    if not 0 <= topic < model.K:
        raise IndexError(f"topic {topic} out of range [0, {model.K})")
    if n <= 0:
        return []
    row = model.topic_word()[topic]
    order = np.lexsort((np.arange(len(row)), -row))
    return order[:n].tolist()
