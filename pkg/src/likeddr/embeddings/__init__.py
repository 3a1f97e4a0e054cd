"""Eight unsupervised user-representation methods behind one entry point."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, DivergenceError, EmptyCorpusError
from .base import (METHODS, EmbeddingConfig, LikeVectors, UserEmbedding, aggregate_average,
                   canonical_method, load_user_embedding, read_embedding, write_embedding)
from .lda import LdaModel, topic_top_entities

__all__ = [
    "METHODS", "EmbeddingConfig", "LikeVectors", "UserEmbedding", "LdaModel",
    "aggregate_average", "canonical_method", "read_embedding", "write_embedding",
    "load_user_embedding", "topic_top_entities", "train_embedding",
]


def train_embedding(corpus, config: EmbeddingConfig):
    """Train ``config.method`` on ``corpus``; return (UserEmbedding, LikeVectors or None)."""
    if corpus.num_users == 0 or corpus.num_pairs == 0:
        raise EmptyCorpusError("cannot embed an empty corpus")
    config.validate()
    method = config.method
    model = None
    like_vectors = None
    if method == "SVD":
        from .svd import train_svd
        if config.dim >= min(corpus.num_users, corpus.num_entities):
            raise ConfigError(
                f"SVD dim {config.dim} must be below min(users, entities) = "
                f"{min(corpus.num_users, corpus.num_entities)}")
        users, basis, history, s = train_svd(corpus, config)
        like_vectors = LikeVectors(basis, list(corpus.entity_ids))
        model = {"singular_values": s}
    elif method == "LDA":
        from .lda import train_lda
        model, history = train_lda(corpus, config)
        users = model.doc_topic()
    elif method == "AE":
        from .autoencoder import train_autoencoder
        users, model, history = train_autoencoder(corpus, config)
    elif method == "U-GLOVE":
        from .glove import train_glove
        vectors, history = train_glove(corpus, config)
        like_vectors = LikeVectors(vectors, list(corpus.entity_ids))
        users = aggregate_average(like_vectors, corpus).matrix
    else:
        from .negsampling import train_ns
        users, entities, history = train_ns(corpus, config)
        if entities is not None:
            like_vectors = LikeVectors(entities, list(corpus.entity_ids))
        if users is None:
            users = aggregate_average(like_vectors, corpus).matrix
    if not np.all(np.isfinite(users)):
        raise DivergenceError(f"{method} produced non-finite values; learning rate {config.learning_rate}")
    emb = UserEmbedding(np.ascontiguousarray(users), list(corpus.user_ids), method,
                        config.snapshot(), [float(h) for h in history], model)
    return emb, like_vectors
