"""Configuration, result types, averaging and the embedding file format."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ..errors import AlignmentError, ConfigError, FormatError, InputError

METHODS = ("SVD", "LDA", "AE", "U-CBOW", "U-SG", "U-GLOVE", "P-DM", "P-DBOW")
NS_METHODS = ("U-CBOW", "U-SG", "P-DM", "P-DBOW")
WINDOWED = ("U-CBOW", "U-SG", "U-GLOVE", "P-DM")

# method -> (epochs, learning rate)
_DEFAULTS = {
    "SVD": (None, None),
    "LDA": (200, None),
    "AE": (50, 0.5),
    "U-CBOW": (5, 0.025),
    "U-SG": (5, 0.025),
    "P-DM": (5, 0.025),
    "P-DBOW": (5, 0.025),
    "U-GLOVE": (50, 0.05),
}


def canonical_method(name):
    key = str(name).strip().upper().replace("_", "-")
    aliases = {"UCBOW": "U-CBOW", "USG": "U-SG", "UGLOVE": "U-GLOVE", "GLOVE": "U-GLOVE",
               "PDM": "P-DM", "PDBOW": "P-DBOW", "CBOW": "U-CBOW", "SG": "U-SG",
               "AUTOENCODER": "AE"}
    key = aliases.get(key, key)
    if key not in METHODS:
        raise ConfigError(f"unknown method {name!r}; valid methods: {', '.join(METHODS)}")
    return key


@dataclass
class EmbeddingConfig:
    method: str
    dim: int = 100
    window: int = 20
    negative_samples: int = 10
    epochs: Optional[int] = None
    batch_size: int = 50
    learning_rate: Optional[float] = None
    lda_alpha: Optional[float] = None
    lda_beta: Optional[float] = None
    glove_xmax: float = 100.0
    glove_weight_alpha: float = 0.75
    rng_seed: int = 0
    deterministic: bool = True
    threads: int = 1
    probe_events: int = 2000

    def __post_init__(self):
        self.method = canonical_method(self.method)
        epochs, lr = _DEFAULTS[self.method]
        if self.epochs is None:
            self.epochs = epochs
        if self.learning_rate is None:
            self.learning_rate = lr
        if self.lda_alpha is None:
            self.lda_alpha = 1.0 / self.dim if self.dim > 0 else None
        if self.lda_beta is None:
            self.lda_beta = 1.0 / self.dim if self.dim > 0 else None
        self.validate()

    def validate(self):
        if self.dim < 1:
            raise ConfigError("dim must be >= 1")
        if self.method in NS_METHODS and self.negative_samples < 1:
            raise ConfigError("negative_samples must be >= 1")
        if self.method in WINDOWED and self.window < 1:
            raise ConfigError("window must be >= 1")
        if self.epochs is not None and self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.learning_rate is not None and not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")

    def snapshot(self):
        return asdict(self)


@dataclass
class LikeVectors:
    matrix: np.ndarray
    ids: list


@dataclass
class UserEmbedding:
    matrix: np.ndarray
    ids: list
    method: str = ""
    config: dict = field(default_factory=dict)
    loss_history: list = field(default_factory=list)
    model: object = None

    @property
    def dim(self):
        return self.matrix.shape[1]

    def rows_for(self, user_ids):
        """Rows in the order of ``user_ids``; every id must be present."""
        index = {u: i for i, u in enumerate(self.ids)}
        missing = [u for u in user_ids if u not in index]
        if missing:
            raise AlignmentError(f"{len(missing)} users missing from the embedding, e.g. {missing[0]!r}")
        return self.matrix[[index[u] for u in user_ids]]


def aggregate_average(like_vectors, corpus) -> UserEmbedding:
    """Each user row is the mean of the vectors of the entities the user likes."""
    V = like_vectors.matrix if isinstance(like_vectors, LikeVectors) else np.asarray(like_vectors)
    if V.shape[0] != corpus.num_entities:
        raise AlignmentError(
            f"{V.shape[0]} like vectors for {corpus.num_entities} entities")
    deg = corpus.user_degrees
    if np.any(deg == 0):
        raise InputError("cannot average the likes of a user with no likes")
    sums = corpus.matrix @ V
    return UserEmbedding(sums / deg[:, None], list(corpus.user_ids))


# -- file format -----------------------------------------------------------
#
#   <rows> <dim>
#   <id> <v1> ... <vdim>      (float repr, round-trips exactly)

def write_embedding(path, matrix, ids):
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != len(ids):
        raise InputError("matrix rows must match ids")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{matrix.shape[0]} {matrix.shape[1]}\n")
        for uid, row in zip(ids, matrix):
            if any(c.isspace() for c in uid):
                raise InputError(f"identifier {uid!r} contains whitespace")
            fh.write(uid + " " + " ".join(repr(float(v)) for v in row) + "\n")


def read_embedding(path):
    """Return (matrix, ids)."""
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().split()
        if len(head) != 2:
            raise FormatError(f"{path}: header must be '<rows> <dim>'")
        try:
            rows, dim = int(head[0]), int(head[1])
        except ValueError:
            raise FormatError(f"{path}: non-integer header") from None
        ids = []
        matrix = np.empty((rows, dim))
        for i in range(rows):
            parts = fh.readline().split()
            if len(parts) != dim + 1:
                raise FormatError(f"{path}: row {i + 1} has {max(0, len(parts) - 1)} values, expected {dim}")
            ids.append(parts[0])
            try:
                matrix[i] = [float(v) for v in parts[1:]]
            except ValueError:
                raise FormatError(f"{path}: row {i + 1} has a non-numeric value") from None
        if fh.readline().strip():
            raise FormatError(f"{path}: more rows than the header's {rows}")
    return matrix, ids


def load_user_embedding(path) -> UserEmbedding:
    matrix, ids = read_embedding(path)
    return UserEmbedding(matrix, ids)
