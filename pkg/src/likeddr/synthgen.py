"""Synthetic like corpora with planted DDR-correlated topics.

Generative story, per user:

1. ddr ~ Normal(-2, 0.7) on the log10 k scale; z is its standardized value.
2. topic mixture = softmax(base + signal_strength * z * sign_t) where base
   is Gaussian and sign_t is +1/-1 on the signal topics, 0 elsewhere.
3. number of likes ~ round(LogNormal(mu, sigma)), clamped to
   [min_likes, num_entities].
4. likes are drawn without replacement from sum_t mixture_t * topic_t, where
   each topic puts almost all of its mass on a disjoint "home" block of
   entities, weighted by a global Zipf popularity.

Users are processed in fixed-size blocks, each with its own RNG stream
derived from (seed, block index), so output does not depend on how the
blocks are scheduled.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .corpus import LikeCorpus
from .discounting import write_ddr_table
from .errors import ConfigError

DDR_MEAN = -2.0
DDR_SD = 0.7
BLOCK_USERS = 1024


@dataclass
class SynthConfig:
    num_users: int = 50_000
    num_entities: int = 2_000
    num_topics: int = 20
    num_signal_topics: int = 4
    likes_log_mean: float = math.log(30.0)
    likes_log_sd: float = 0.6
    min_likes: int = 10
    popularity_exponent: float = 1.0
    signal_strength: float = 2.0
    base_scale: float = 1.5
    topic_leak: float = 0.02
    labeled_fraction: float = 0.1
    seed: int = 0

    def validate(self):
        for name in ("num_users", "num_entities", "num_topics", "min_likes"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if not 0 <= self.num_signal_topics <= self.num_topics:
            raise ConfigError("num_signal_topics must lie in [0, num_topics]")
        if self.signal_strength < 0:
            raise ConfigError("signal_strength must be >= 0")
        if not 0 < self.labeled_fraction <= 1:
            raise ConfigError("labeled_fraction must lie in (0, 1]")
        if self.min_likes > self.num_entities:
            raise ConfigError("min_likes exceeds num_entities: cannot draw that many distinct likes")
        if self.likes_log_sd < 0 or self.topic_leak < 0 or self.base_scale < 0:
            raise ConfigError("scale parameters must be >= 0")
        if self.num_entities < self.num_topics:
            raise ConfigError("need at least one entity per topic")


@dataclass
class SynthTruth:
    user_ddr: np.ndarray          # (users,)
    user_num_likes: np.ndarray    # (users,)
    mixtures: np.ndarray          # (users, topics)
    topic_entity: np.ndarray      # (topics, entities), rows sum to 1
    home_topic: np.ndarray        # (entities,)
    signal_topics: np.ndarray     # indices
    signal_signs: np.ndarray      # +1 / -1 per signal topic
    labeled: np.ndarray           # user indices carrying labels

    def top_entities(self, topic, n=10):
        row = self.topic_entity[topic]
        return list(np.lexsort((np.arange(len(row)), -row))[:n])

    def to_json(self, config: SynthConfig, user_ids, entity_ids, include_mixtures=False):
        doc = {
            "config": asdict(config),
            "signal_topics": self.signal_topics.tolist(),
            "signal_signs": self.signal_signs.tolist(),
            "topic_top_entities": [[entity_ids[e] for e in self.top_entities(t, 10)]
                                   for t in range(self.topic_entity.shape[0])],
            "topic_entity": self.topic_entity.tolist(),
            "entity_home_topic": {entity_ids[e]: int(t) for e, t in enumerate(self.home_topic)},
            "user_ddr": {u: float(d) for u, d in zip(user_ids, self.user_ddr)},
            "user_num_likes": {u: int(n) for u, n in zip(user_ids, self.user_num_likes)},
        }
        if include_mixtures:
            doc["mixtures"] = self.mixtures.tolist()
        return doc


def _softmax_rows(a):
    a = a - a.max(axis=1, keepdims=True)
    e = np.exp(a)
    return e / e.sum(axis=1, keepdims=True)


def topic_structure(config: SynthConfig, rng):
    """Zipf popularity, home-topic assignment and topic-entity distributions."""
    E, T = config.num_entities, config.num_topics
    ranks = rng.permutation(E) + 1
    popularity = ranks.astype(float) ** -config.popularity_exponent
    home = rng.permutation(E) % T
    weight = np.full((T, E), config.topic_leak)
    weight[home, np.arange(E)] = 1.0
    topic_entity = weight * popularity
    topic_entity /= topic_entity.sum(axis=1, keepdims=True)
    return popularity, home, topic_entity


def generate(config: SynthConfig):
    """Return (corpus, labels dict, SynthTruth)."""
    config.validate()
    U, E, T = config.num_users, config.num_entities, config.num_topics
    root = np.random.SeedSequence(config.seed)
    global_rng = np.random.Generator(np.random.PCG64(root.spawn(1)[0]))

    _, home, topic_entity = topic_structure(config, global_rng)
    signal_topics = np.sort(global_rng.choice(T, size=config.num_signal_topics, replace=False))
    signal_signs = np.where(np.arange(config.num_signal_topics) % 2 == 0, 1.0, -1.0)
    loading = np.zeros(T)
    loading[signal_topics] = signal_signs

    ddr = np.empty(U)
    n_likes = np.empty(U, dtype=np.int64)
    mixtures = np.empty((U, T))
    rows = []
    n_blocks = (U + BLOCK_USERS - 1) // BLOCK_USERS
    for b in range(n_blocks):
        lo, hi = b * BLOCK_USERS, min(U, (b + 1) * BLOCK_USERS)
        m = hi - lo
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([config.seed, 1, b])))
        z = rng.standard_normal(m)
        ddr[lo:hi] = DDR_MEAN + DDR_SD * z
        base = config.base_scale * rng.standard_normal((m, T))
        theta = _softmax_rows(base + config.signal_strength * np.outer(z, loading))
        mixtures[lo:hi] = theta
        raw = rng.lognormal(config.likes_log_mean, config.likes_log_sd, size=m)
        counts = np.clip(np.rint(raw), config.min_likes, E).astype(np.int64)
        n_likes[lo:hi] = counts
        # Gumbel top-k == sequential weighted sampling without replacement
        logp = np.log(theta @ topic_entity)
        keys = logp + rng.gumbel(size=(m, E))
        for i in range(m):
            k = counts[i]
            top = np.argpartition(-keys[i], k - 1)[:k] if k < E else np.arange(E)
            rows.append(np.sort(top))

    lengths = np.array([len(r) for r in rows], dtype=np.int64)
    corpus = LikeCorpus(
        [f"u{u:06d}" for u in range(U)],
        [f"e{e:05d}" for e in range(E)],
        np.concatenate([[0], np.cumsum(lengths)]),
        np.concatenate(rows),
    )
    n_labeled = max(1, int(round(config.labeled_fraction * U)))
    labeled = np.sort(global_rng.permutation(U)[:n_labeled])
    labels = {corpus.user_ids[u]: float(ddr[u]) for u in labeled}
    truth = SynthTruth(ddr, n_likes, mixtures, topic_entity, home,
                       signal_topics, signal_signs, labeled)
    return corpus, labels, truth


def write_outputs(out_dir, config, corpus, labels, truth, include_mixtures=False):
    """Write pairs.tsv, labels.tsv and truth.json into out_dir; return their paths."""
    from pathlib import Path

    from .corpus import write_pairs

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"pairs": out / "pairs.tsv", "labels": out / "labels.tsv", "truth": out / "truth.json"}
    write_pairs(paths["pairs"], corpus)
    write_ddr_table(paths["labels"], labels)
    with open(paths["truth"], "w", encoding="utf-8") as fh:
        json.dump(truth.to_json(config, corpus.user_ids, corpus.entity_ids, include_mixtures),
                  fh, sort_keys=True)
    return paths
