"""Sparse user x entity like corpus: ingest, filter, summarize."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import EmptyCorpusError, FormatError, InputError

SNAPSHOT_MAGIC = "likeddr-corpus"
SNAPSHOT_VERSION = 1


class LikeCorpus:
    """Binary user x entity incidence in CSR layout.

    ``indices[indptr[u]:indptr[u+1]]`` holds the sorted entity indices user
    ``u`` likes. Instances are treated as immutable.
    """

    def __init__(self, user_ids, entity_ids, indptr, indices):
        self.user_ids = list(user_ids)
        self.entity_ids = list(entity_ids)
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int32)
        if len(self.indptr) != len(self.user_ids) + 1:
            raise InputError("indptr length must be num_users + 1")
        if len(self.indices) and (self.indices.min() < 0 or self.indices.max() >= len(self.entity_ids)):
            raise InputError("entity index out of range")
        self.user_index = {u: i for i, u in enumerate(self.user_ids)}
        self.entity_index = {e: i for i, e in enumerate(self.entity_ids)}
        if len(self.user_index) != len(self.user_ids) or len(self.entity_index) != len(self.entity_ids):
            raise InputError("duplicate identifiers in vocabulary")
        self.entity_counts = np.bincount(self.indices, minlength=self.num_entities).astype(np.int64)
        self.user_degrees = np.diff(self.indptr)

    @property
    def num_users(self):
        return len(self.user_ids)

    @property
    def num_entities(self):
        return len(self.entity_ids)

    @property
    def num_pairs(self):
        return int(len(self.indices))

    def likes_of(self, u):
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    @cached_property
    def matrix(self):
        """scipy CSR matrix of float64 ones."""
        data = np.ones(self.num_pairs, dtype=np.float64)
        return sp.csr_matrix((data, self.indices, self.indptr),
                             shape=(self.num_users, self.num_entities))

    def pairs(self):
        for u, uid in enumerate(self.user_ids):
            for e in self.likes_of(u):
                yield uid, self.entity_ids[e]

    def subset_users(self, user_indices):
        """Corpus restricted to the given users (ascending order), same entity vocabulary."""
        idx = np.unique(np.asarray(user_indices, dtype=np.int64))
        rows = [self.likes_of(u) for u in idx]
        lengths = np.array([len(r) for r in rows], dtype=np.int64)
        indptr = np.concatenate([[0], np.cumsum(lengths)])
        indices = np.concatenate(rows) if rows else np.zeros(0, np.int32)
        return LikeCorpus([self.user_ids[u] for u in idx], self.entity_ids, indptr, indices)

    def __repr__(self):
        return (f"LikeCorpus(users={self.num_users}, entities={self.num_entities}, "
                f"pairs={self.num_pairs})")


def ingest_pairs(pair_stream) -> LikeCorpus:
    """Build a corpus from (user_id, entity_id) pairs; duplicates collapse.

    Vocabularies are numbered by first appearance.
    """
    user_index, entity_index = {}, {}
    us, es = [], []
    for n, item in enumerate(pair_stream, 1):
        try:
            uid, eid = item
        except (TypeError, ValueError):
            raise FormatError(f"pair {n}: expected (user_id, entity_id), got {item!r}") from None
        u = user_index.setdefault(uid, len(user_index))
        e = entity_index.setdefault(eid, len(entity_index))
        us.append(u)
        es.append(e)
    if not us:
        raise EmptyCorpusError("no pairs to ingest")
    n_e = len(entity_index)
    keys = np.unique(np.asarray(us, dtype=np.int64) * n_e + np.asarray(es, dtype=np.int64))
    rows, cols = np.divmod(keys, n_e)
    indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=len(user_index)))])
    return LikeCorpus(list(user_index), list(entity_index), indptr, cols)


def read_pairs(path):
    """Yield (user_id, entity_id) from a TSV pairs file; '#' lines are comments."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise FormatError(f"{path}:{lineno}: expected user_id<TAB>entity_id")
            yield parts[0], parts[1]


def write_pairs(path, corpus: LikeCorpus):
    with open(path, "w", encoding="utf-8") as fh:
        for uid, eid in corpus.pairs():
            fh.write(f"{uid}\t{eid}\n")


def filter_corpus(corpus: LikeCorpus, min_user_likes=50, min_entity_likes=800,
                  iterative=False) -> LikeCorpus:
    """Drop rare entities, then users left with too few likes.

    One pass by default: entity counts are taken over the input corpus.
    With ``iterative=True`` the two steps repeat until nothing changes.
    Entities left without any like are dropped; surviving users and
    entities keep their relative order.
    """
    if min_user_likes < 0 or min_entity_likes < 0:
        raise InputError("thresholds must be >= 0")
    cur = corpus
    while True:
        keep_e = cur.entity_counts >= min_entity_likes
        row_of = np.repeat(np.arange(cur.num_users), cur.user_degrees)
        pair_ok = keep_e[cur.indices]
        deg = np.bincount(row_of[pair_ok], minlength=cur.num_users)
        keep_u = deg >= min_user_likes
        if not keep_u.any():
            raise EmptyCorpusError("filtering removed every user")
        pair_ok &= keep_u[row_of]
        indices = cur.indices[pair_ok]
        if len(indices) == 0:
            raise EmptyCorpusError("filtering removed every pair")
        used = np.zeros(cur.num_entities, dtype=bool)
        used[indices] = True
        remap = np.cumsum(used) - 1
        lengths = np.bincount(row_of[pair_ok], minlength=cur.num_users)[keep_u]
        new = LikeCorpus(
            [cur.user_ids[u] for u in np.flatnonzero(keep_u)],
            [cur.entity_ids[e] for e in np.flatnonzero(used)],
            np.concatenate([[0], np.cumsum(lengths)]),
            remap[indices],
        )
        changed = new.num_users != cur.num_users or new.num_entities != cur.num_entities
        cur = new
        if not iterative or not changed:
            return cur


@dataclass
class DegreeHistogram:
    """Log2-binned degree counts: bucket i covers [edges[i], edges[i+1])."""
    edges: np.ndarray
    counts: np.ndarray

    @property
    def total(self):
        return int(self.counts.sum())

    def rows(self):
        return [(int(lo), int(hi), int(c)) for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts)]


def _log_histogram(degrees):
    degrees = np.asarray(degrees)
    top = max(int(degrees.max()), 1)
    edges = 2 ** np.arange(0, int(math.floor(math.log2(top))) + 2)
    counts, _ = np.histogram(degrees, bins=edges)
    # zero-degree items have no log bin; fold them into the first bucket
    counts[0] += int((degrees < 1).sum())
    return DegreeHistogram(edges, counts)


def degree_distribution(corpus: LikeCorpus):
    """(user histogram, entity histogram) in powers-of-two buckets."""
    if corpus.num_users == 0:
        raise EmptyCorpusError("empty corpus")
    return _log_histogram(corpus.user_degrees), _log_histogram(corpus.entity_counts)


def rank_frequency_slope(degrees, lo_rank=10, hi_fraction=0.5):
    """Least-squares slope of log degree against log rank.

    For Zipf-distributed popularity with exponent s the slope is about -s.
    The head (saturated) and the sparse tail are excluded from the fit.
    """
    d = np.sort(np.asarray(degrees, dtype=float))[::-1]
    d = d[d > 0]
    ranks = np.arange(1, len(d) + 1)
    hi = max(lo_rank + 2, int(len(d) * hi_fraction))
    sel = slice(lo_rank, hi)
    slope, _ = np.polyfit(np.log(ranks[sel]), np.log(d[sel]), 1)
    return slope


@dataclass
class UserStatFeatures:
    num_likes: int
    avg_entity_popularity: float


def user_stat_features(corpus: LikeCorpus, user) -> UserStatFeatures:
    if isinstance(user, str):
        if user not in corpus.user_index:
            raise KeyError(f"unknown user {user!r}")
        u = corpus.user_index[user]
    else:
        u = int(user)
        if not 0 <= u < corpus.num_users:
            raise KeyError(f"user index {u} out of range")
    likes = corpus.likes_of(u)
    if len(likes) == 0:
        return UserStatFeatures(0, 0.0)
    return UserStatFeatures(len(likes), float(corpus.entity_counts[likes].mean()))


def stat_feature_matrix(corpus: LikeCorpus, user_indices) -> np.ndarray:
    """Rows of (num_likes, avg_entity_popularity) for the given users."""
    out = np.zeros((len(user_indices), 2))
    for row, u in enumerate(user_indices):
        likes = corpus.likes_of(u)
        out[row, 0] = len(likes)
        if len(likes):
            out[row, 1] = corpus.entity_counts[likes].mean()
    return out


def align_labels(corpus: LikeCorpus, ddr_table) -> list:
    """Indices of corpus users that carry a label, ascending."""
    idx = sorted(corpus.user_index[u] for u in ddr_table if u in corpus.user_index)
    if not idx:
        raise InputError("no labeled user is present in the corpus")
    return idx


# -- snapshot --------------------------------------------------------------
#
# Text layout:
#   likeddr-corpus 1 <num_users> <num_entities> <num_pairs>
#   <entity_id>                      x num_entities
#   <user_id><TAB><idx> <idx> ...    x num_users   (entity indices, ascending)

def write_snapshot(path, corpus: LikeCorpus):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{SNAPSHOT_MAGIC} {SNAPSHOT_VERSION} {corpus.num_users} "
                 f"{corpus.num_entities} {corpus.num_pairs}\n")
        for eid in corpus.entity_ids:
            fh.write(f"{eid}\n")
        for u, uid in enumerate(corpus.user_ids):
            fh.write(uid + "\t" + " ".join(map(str, corpus.likes_of(u).tolist())) + "\n")


def is_snapshot(path):
    with open(path, encoding="utf-8") as fh:
        return fh.readline().startswith(SNAPSHOT_MAGIC + " ")


def read_snapshot(path) -> LikeCorpus:
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().split()
        if len(head) != 5 or head[0] != SNAPSHOT_MAGIC:
            raise FormatError(f"{path}: not a corpus snapshot")
        if int(head[1]) != SNAPSHOT_VERSION:
            raise FormatError(f"{path}: unsupported snapshot version {head[1]}")
        n_u, n_e, n_p = map(int, head[2:])
        entity_ids = [fh.readline().rstrip("\n") for _ in range(n_e)]
        user_ids, rows = [], []
        for i in range(n_u):
            line = fh.readline()
            if not line:
                raise FormatError(f"{path}: truncated after {i} of {n_u} users")
            uid, _, rest = line.rstrip("\n").partition("\t")
            user_ids.append(uid)
            rows.append(np.array(rest.split(), dtype=np.int64))
        if fh.readline():
            raise FormatError(f"{path}: trailing data after {n_u} users")
    if any("" == e for e in entity_ids) and n_e:
        raise FormatError(f"{path}: truncated entity list")
    lengths = np.array([len(r) for r in rows], dtype=np.int64)
    if lengths.sum() != n_p:
        raise FormatError(f"{path}: header says {n_p} pairs, found {lengths.sum()}")
    for r in rows:
        if len(r) > 1 and np.any(np.diff(r) <= 0):
            raise FormatError(f"{path}: entity lists must be strictly ascending")
    indices = np.concatenate(rows) if rows else np.zeros(0, np.int64)
    return LikeCorpus(user_ids, entity_ids, np.concatenate([[0], np.cumsum(lengths)]), indices)


def load_corpus(path, min_user_likes=0, min_entity_likes=0, iterative=False):
    """Read a snapshot as-is, or a pairs file followed by filtering."""
    if is_snapshot(path):
        return read_snapshot(path)
    corpus = ingest_pairs(read_pairs(path))
    return filter_corpus(corpus, min_user_likes, min_entity_likes, iterative)
