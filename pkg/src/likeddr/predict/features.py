"""Feature matrices for the supervised stage and fold-local standardization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..corpus import LikeCorpus, align_labels, stat_feature_matrix
from ..errors import AlignmentError, InputError

STAT_COLUMNS = ("num_likes", "avg_entity_popularity")


@dataclass
class FeatureMatrix:
    X: "np.ndarray | sp.csr_matrix"
    y: np.ndarray
    user_ids: list
    columns: list

    @property
    def shape(self):
        return self.X.shape


def build_features(source, corpus: LikeCorpus, labels, include_stat_features=True) -> FeatureMatrix:
    """Rows for the labeled users of ``corpus``.

    ``source`` is "baseline" (raw binary like indicators, kept sparse) or a
    UserEmbedding (dense).
    """
    idx = align_labels(corpus, labels)
    user_ids = [corpus.user_ids[u] for u in idx]
    y = np.array([labels[u] for u in user_ids], dtype=float)
    if isinstance(source, str):
        if source != "baseline":
            raise InputError(f"unknown feature source {source!r}")
        X = sp.csr_matrix(corpus.matrix[idx], dtype=np.float64)
        columns = list(corpus.entity_ids)
    else:
        if source.matrix.shape[0] != len(source.ids):
            raise AlignmentError("embedding rows do not match its ids")
        X = np.asarray(source.rows_for(user_ids), dtype=np.float64)
        columns = [f"dim{i}" for i in range(X.shape[1])]
    if include_stat_features:
        stats = stat_feature_matrix(corpus, idx)
        X = sp.hstack([X, stats], format="csr") if sp.issparse(X) else np.hstack([X, stats])
        columns = columns + list(STAT_COLUMNS)
    if not np.all(np.isfinite(X.data if sp.issparse(X) else X)):
        raise InputError("feature matrix has non-finite entries")
    return FeatureMatrix(X, y, user_ids, columns)


class Standardizer:
    """Column z-scoring fitted on training rows; constant columns get scale 1.

    Sparse input is only scaled, not centered. Pairwise distances (and so
    the RBF kernel) are the same either way, and the matrix stays sparse.
    """

    def fit(self, X):
        if sp.issparse(X):
            X = sp.csr_matrix(X, dtype=float)
            self.mean_ = np.asarray(X.mean(axis=0)).ravel()
            sq = np.asarray(X.multiply(X).mean(axis=0)).ravel()
            sd = np.sqrt(np.maximum(sq - self.mean_ ** 2, 0.0))
        else:
            X = np.asarray(X, dtype=float)
            self.mean_ = X.mean(axis=0)
            sd = X.std(axis=0)
        sd[sd == 0] = 1.0
        self.scale_ = sd
        return self

    def transform(self, X):
        if sp.issparse(X):
            return sp.csr_matrix(X, dtype=float) @ sp.diags(1.0 / self.scale_, format="csr")
        return (np.asarray(X, dtype=float) - self.mean_) / self.scale_

    def fit_transform(self, X):
        return self.fit(X).transform(X)
