"""Data-size and feature-size experiment sweeps plus their output tables."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from ..corpus import LikeCorpus, align_labels
from ..embeddings import EmbeddingConfig, canonical_method, train_embedding
from ..errors import ConfigError
from .evaluate import EvalResult, ModelSpec, cross_validate
from .features import build_features

log = logging.getLogger(__name__)

BASELINE = "baseline"


@dataclass
class SweepRow:
    method: str
    dim: int
    users: int
    result: EvalResult


def subsample_users(corpus: LikeCorpus, labels, count, seed=0) -> LikeCorpus:
    """Keep every labeled user plus a seeded sample of unlabeled ones.

    Samples for different counts are nested: a smaller count keeps a
    prefix of the same unlabeled permutation.
    """
    labeled = np.asarray(align_labels(corpus, labels), dtype=np.int64)
    if count < len(labeled):
        raise ConfigError(f"user count {count} is below the {len(labeled)} labeled users")
    if count > corpus.num_users:
        raise ConfigError(f"user count {count} exceeds the corpus size {corpus.num_users}")
    if count == corpus.num_users:
        return corpus
    mask = np.ones(corpus.num_users, dtype=bool)
    mask[labeled] = False
    unlabeled = np.flatnonzero(mask)
    pick = np.random.default_rng(seed).permutation(unlabeled)[:count - len(labeled)]
    return corpus.subset_users(np.sort(np.concatenate([labeled, pick])))


def evaluate_baseline(corpus, labels, spec=None, folds=10, seed=0) -> EvalResult:
    fm = build_features(BASELINE, corpus, labels)
    return cross_validate(fm.X, fm.y, spec, folds, seed)


def evaluate_embedding(emb, corpus, labels, spec=None, folds=10, seed=0) -> EvalResult:
    fm = build_features(emb, corpus, labels)
    return cross_validate(fm.X, fm.y, spec, folds, seed)


def _embed_config(method, dim, options, seed, method_options=None):
    opts = dict(options or {})
    opts.setdefault("rng_seed", seed)
    # per-method overrides, keyed by canonical method name
    opts.update((method_options or {}).get(canonical_method(method), {}))
    return EmbeddingConfig(method, dim=dim, **opts)


def sweep_datasize(corpus, labels, methods, user_counts, spec: ModelSpec = None, dim=100,
                   folds=10, seed=0, embed_options=None, on_row=None, method_options=None):
    """Retrain each method on nested user subsamples; baseline is computed once.

    ``method_options`` maps a method name to options that override
    ``embed_options`` for that method only (e.g. its epoch count).
    """
    counts = sorted(int(c) for c in user_counts)
    subsets = {c: subsample_users(corpus, labels, c, seed) for c in counts}
    rows = []
    base = evaluate_baseline(corpus, labels, spec, folds, seed)
    n_raw = corpus.num_entities
    for c in counts:
        rows.append(SweepRow(BASELINE, n_raw, c, base))
        if on_row:
            on_row(rows[-1])
    for method in methods:
        for c in counts:
            emb, _ = train_embedding(subsets[c], _embed_config(method, dim, embed_options, seed,
                                                               method_options))
            res = evaluate_embedding(emb, corpus, labels, spec, folds, seed)
            rows.append(SweepRow(emb.method, dim, c, res))
            log.info("%s users=%d mean r=%.4f", emb.method, c, res.mean_r)
            if on_row:
                on_row(rows[-1])
    return rows


def sweep_featuresize(corpus, labels, methods, dims, spec: ModelSpec = None, folds=10, seed=0,
                      embed_options=None, on_row=None, method_options=None):
    """One row per (method, dim) on the full corpus, plus the baseline."""
    rows = []
    base = evaluate_baseline(corpus, labels, spec, folds, seed)
    for d in dims:
        rows.append(SweepRow(BASELINE, int(d), corpus.num_users, base))
        if on_row:
            on_row(rows[-1])
    for method in methods:
        for d in dims:
            emb, _ = train_embedding(corpus, _embed_config(method, int(d), embed_options, seed,
                                                           method_options))
            res = evaluate_embedding(emb, corpus, labels, spec, folds, seed)
            rows.append(SweepRow(emb.method, int(d), corpus.num_users, res))
            log.info("%s dim=%d mean r=%.4f", emb.method, d, res.mean_r)
            if on_row:
                on_row(rows[-1])
    return rows


def write_results(path, rows):
    """TSV ``method dim users fold r``: one line per fold, then mean and pooled."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("method\tdim\tusers\tfold\tr\n")
        for row in rows:
            head = f"{row.method}\t{row.dim}\t{row.users}"
            for f, r in enumerate(row.result.fold_r):
                fh.write(f"{head}\t{f}\t{'skipped' if r is None else repr(r)}\n")
            fh.write(f"{head}\tmean\t{row.result.mean_r!r}\n")
            fh.write(f"{head}\tpooled\t{row.result.pooled_r!r}\n")


def plot_series(rows, x="users"):
    """{series: [(x, mean r), ...]} sorted by x."""
    series = {}
    for row in rows:
        series.setdefault(row.method, []).append((getattr(row, x), row.result.mean_r))
    return {k: sorted(v) for k, v in series.items()}


def write_plot_csv(path, rows, x="users"):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "series", "y"])
        for name, pts in plot_series(rows, x).items():
            for xv, yv in pts:
                w.writerow([xv, name, repr(yv)])
