import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from likeddr.corpus import (
    LikeCorpus, align_labels, degree_distribution, filter_corpus, ingest_pairs,
    load_corpus, rank_frequency_slope, read_pairs, read_snapshot,
    stat_feature_matrix, user_stat_features, write_pairs, write_snapshot,
)
from likeddr.errors import EmptyCorpusError, FormatError, InputError


def relation(corpus):
    return set(corpus.pairs())


def check_invariants(corpus):
    for u in range(corpus.num_users):
        lk = corpus.likes_of(u)
        assert np.all(np.diff(lk) > 0)
    assert np.array_equal(corpus.entity_counts, np.asarray(corpus.matrix.sum(axis=0)).ravel())
    assert corpus.user_degrees.sum() == corpus.entity_counts.sum() == corpus.num_pairs


def random_pairs(n_users=40, n_entities=30, n_pairs=400, seed=0):
    rng = random.Random(seed)
    return [(f"u{rng.randrange(n_users)}", f"e{rng.randrange(n_entities)}") for _ in range(n_pairs)]


def test_ingest_dedupes():
    c = ingest_pairs([("u1", "e1"), ("u1", "e1")])
    assert (c.num_users, c.num_entities, c.num_pairs) == (1, 1, 1)


def test_ingest_complete_bipartite():
    c = ingest_pairs([(u, e) for u in "abc" for e in "xy"])
    assert c.num_pairs == 6
    assert list(c.entity_counts) == [3, 3]
    check_invariants(c)


def test_ingest_first_appearance_order():
    c = ingest_pairs([("b", "y"), ("a", "x"), ("b", "x")])
    assert c.user_ids == ["b", "a"]
    assert c.entity_ids == ["y", "x"]


@settings(max_examples=30, deadline=None)
@given(st.randoms(use_true_random=False))
def test_ingest_order_insensitive(rnd):
    pairs = random_pairs(seed=1)
    shuffled = list(pairs)
    rnd.shuffle(shuffled)
    a, b = ingest_pairs(pairs), ingest_pairs(sorted(pairs))
    c = ingest_pairs(shuffled)
    assert relation(a) == relation(b) == relation(c) == set(pairs)
    check_invariants(c)


def test_ingest_errors():
    with pytest.raises(EmptyCorpusError):
        ingest_pairs([])
    with pytest.raises(FormatError, match="pair 2"):
        ingest_pairs([("a", "b"), ("a",)])


def brute_filter(pairs, min_user, min_entity):
    pairs = set(pairs)
    ecount = {}
    for _, e in pairs:
        ecount[e] = ecount.get(e, 0) + 1
    kept = {(u, e) for u, e in pairs if ecount[e] >= min_entity}
    ucount = {}
    for u, _ in kept:
        ucount[u] = ucount.get(u, 0) + 1
    return {(u, e) for u, e in kept if ucount[u] >= min_user}


def test_filter_identity():
    c = ingest_pairs(random_pairs())
    f = filter_corpus(c, 0, 0)
    assert relation(f) == relation(c)


def test_filter_single_rare_entity():
    c = ingest_pairs([("a", "x"), ("b", "x"), ("a", "y")])
    f = filter_corpus(c, 0, 2)
    assert f.entity_ids == ["x"]
    assert relation(f) == {("a", "x"), ("b", "x")}


@pytest.mark.parametrize("mu,me", [(1, 5), (5, 10), (8, 14), (3, 0)])
def test_filter_matches_brute_force(mu, me):
    pairs = random_pairs(n_users=60, n_entities=40, n_pairs=900, seed=mu * 10 + me)
    f = filter_corpus(ingest_pairs(pairs), mu, me)
    assert relation(f) == brute_filter(pairs, mu, me)
    check_invariants(f)
    # original relative order of surviving ids
    c = ingest_pairs(pairs)
    assert f.user_ids == [u for u in c.user_ids if u in f.user_index]
    assert f.entity_ids == [e for e in c.entity_ids if e in f.entity_index]


def test_filter_iterative_fixed_point():
    pairs = random_pairs(n_users=60, n_entities=40, n_pairs=700, seed=7)
    f = filter_corpus(ingest_pairs(pairs), 6, 12, iterative=True)
    assert f.user_degrees.min() >= 6
    assert f.entity_counts.min() >= 12


def test_filter_postconditions():
    pairs = random_pairs(n_users=60, n_entities=40, n_pairs=900, seed=3)
    c = ingest_pairs(pairs)
    f = filter_corpus(c, 6, 20)
    assert f.user_degrees.min() >= 6
    for e in f.entity_ids:
        assert c.entity_counts[c.entity_index[e]] >= 20


def test_filter_everything_removed():
    c = ingest_pairs(random_pairs())
    with pytest.raises(EmptyCorpusError):
        filter_corpus(c, 1000, 0)
    with pytest.raises(InputError):
        filter_corpus(c, -1, 0)


def test_degree_distribution():
    pairs = [(f"u{i}", f"e{j}") for i in range(7) for j in range(5)]
    uh, eh = degree_distribution(ingest_pairs(pairs))
    assert np.count_nonzero(uh.counts) == 1 and uh.total == 7
    (bucket,) = [r for r in uh.rows() if r[2]]
    assert bucket == (4, 8, 7)
    assert eh.total == 5

    c = ingest_pairs(random_pairs())
    uh, eh = degree_distribution(c)
    assert uh.total == c.num_users and eh.total == c.num_entities


def test_rank_frequency_slope_recovers_zipf():
    # oracle: draw likes from a known Zipf popularity and fit the rank plot
    rng = np.random.default_rng(11)
    n_ent, s = 3000, 1.1
    p = np.arange(1, n_ent + 1, dtype=float) ** -s
    p /= p.sum()
    pairs = []
    for u in range(4000):
        for e in rng.choice(n_ent, size=40, p=p):
            pairs.append((f"u{u}", f"e{e}"))
    c = ingest_pairs(pairs)
    slope = rank_frequency_slope(c.entity_counts, lo_rank=20, hi_fraction=0.3)
    assert abs(-slope - s) <= 0.3


def test_user_stat_features():
    c = ingest_pairs([("a", "x")] + [(f"o{i}", "x") for i in range(9)])
    assert user_stat_features(c, "a").num_likes == 1
    assert user_stat_features(c, "a").avg_entity_popularity == 10

    c = ingest_pairs([("a", "x"), ("a", "y"), ("b", "x"), ("b", "y"), ("c", "y"), ("d", "y")])
    f = user_stat_features(c, "a")
    assert (f.num_likes, f.avg_entity_popularity) == (2, 3.0)
    with pytest.raises(KeyError):
        user_stat_features(c, "zzz")

    # recomputed on the filtered corpus
    g = filter_corpus(c, 0, 3)
    f = user_stat_features(g, "a")
    assert (f.num_likes, f.avg_entity_popularity) == (1, 4.0)
    m = stat_feature_matrix(g, [g.user_index["a"], g.user_index["d"]])
    assert m.tolist() == [[1, 4.0], [1, 4.0]]


def test_align_labels():
    c = ingest_pairs([("a", "x"), ("b", "x"), ("c", "y")])
    with pytest.raises(InputError):
        align_labels(c, {"q": 1.0})
    assert align_labels(c, {"a": 1, "b": 2, "c": 3}) == [0, 1, 2]
    table = {"c": 0.0, "zz": 1.0, "a": 2.0}
    got = align_labels(c, table)
    assert {c.user_ids[i] for i in got} == set(table) & set(c.user_ids)
    assert got == sorted(got)


def test_snapshot_round_trip(tmp_path):
    c = filter_corpus(ingest_pairs(random_pairs()), 2, 3)
    path = tmp_path / "c.snap"
    write_snapshot(path, c)
    d = read_snapshot(path)
    assert d.user_ids == c.user_ids and d.entity_ids == c.entity_ids
    assert np.array_equal(d.indptr, c.indptr) and np.array_equal(d.indices, c.indices)
    assert load_corpus(path).num_pairs == c.num_pairs


def test_snapshot_truncated(tmp_path):
    c = ingest_pairs(random_pairs())
    path = tmp_path / "c.snap"
    write_snapshot(path, c)
    lines = path.read_text().splitlines(keepends=True)
    path.write_text("".join(lines[:-3]))
    with pytest.raises(FormatError):
        read_snapshot(path)


def test_pairs_file(tmp_path):
    path = tmp_path / "p.tsv"
    path.write_text("# header\nu1\te1\n\nu2\te1\nu1\te1\n")
    c = load_corpus(path)
    assert c.num_pairs == 2
    out = tmp_path / "o.tsv"
    write_pairs(out, c)
    assert set(read_pairs(out)) == {("u1", "e1"), ("u2", "e1")}
    path.write_text("u1\te1\nbroken line\n")
    with pytest.raises(FormatError, match=":2:"):
        list(read_pairs(path))


def test_subset_users():
    c = ingest_pairs(random_pairs())
    s = c.subset_users([3, 1])
    assert s.user_ids == [c.user_ids[1], c.user_ids[3]]
    assert s.entity_ids == c.entity_ids
    check_invariants(s)
