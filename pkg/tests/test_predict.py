import numpy as np
import pytest
import scipy.sparse
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from likeddr.analysis import pearson
from likeddr.corpus import stat_feature_matrix, align_labels, user_stat_features
from likeddr.embeddings import EmbeddingConfig, UserEmbedding, train_embedding
from likeddr.errors import AlignmentError, ConfigError, ConvergenceError, InputError
from likeddr.predict import (
    ModelSpec,
    Standardizer,
    build_features,
    cross_validate,
    lambda_max,
    subsample_users,
    sweep_datasize,
    sweep_featuresize,
    train_lasso,
    train_svr,
    write_plot_csv,
    write_results,
)
from likeddr.predict.lasso import contiguous_folds, fit_lasso_cv, lasso_objective, soft_threshold
from likeddr.predict.svr import rbf_kernel
from likeddr.synthgen import SynthConfig, generate


@pytest.fixture(scope="module")
def synth():
    return generate(SynthConfig(num_users=800, num_entities=100, num_topics=5, num_signal_topics=2,
                                labeled_fraction=0.25, seed=21))


# -- lasso -----------------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 1.5))
def test_lasso_single_column_soft_threshold(seed, lam):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(40)
    x = (x - x.mean()) / x.std()
    y = 0.7 * x + rng.standard_normal(40)
    y = y - y.mean()
    rho = x @ y / len(y)
    m = train_lasso(x[:, None], y, lam)
    assert m.weights[0] == pytest.approx(soft_threshold(rho, lam), abs=1e-8)


def test_lasso_kills_above_lambda_max():
    rng = np.random.default_rng(1)
    X, y = rng.standard_normal((30, 6)), rng.standard_normal(30)
    lm = lambda_max(X, y)
    m = train_lasso(X, y, lm * 1.0000001)
    assert np.all(m.weights == 0)
    assert m.intercept == pytest.approx(y.mean(), abs=1e-14)
    assert np.any(train_lasso(X, y, lm * 0.9).weights != 0)


def test_lasso_zero_lambda_is_least_squares():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((10, 3))
    y = X @ [1.0, -2.0, 0.5] + 0.1 * rng.standard_normal(10) + 3
    A = np.hstack([X, np.ones((10, 1))])
    ref = np.linalg.solve(A.T @ A, A.T @ y)
    m = train_lasso(X, y, 0.0)
    assert np.allclose(m.weights, ref[:3], atol=1e-6)
    assert m.intercept == pytest.approx(ref[3], abs=1e-6)


def test_lasso_subgradient_optimality():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((60, 12))
    y = X[:, 0] - X[:, 3] + rng.standard_normal(60)
    lam = 0.1
    m = train_lasso(X, y, lam)
    Xc, yc = X - X.mean(axis=0), y - y.mean()
    grad = Xc.T @ (yc - Xc @ m.weights) / len(y)
    for j, w in enumerate(m.weights):
        if w != 0:
            assert grad[j] == pytest.approx(lam * np.sign(w), abs=1e-6)
        else:
            assert abs(grad[j]) <= lam + 1e-6


def test_lasso_objective_non_increasing_across_sweeps():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((50, 8))
    y = X @ rng.standard_normal(8) + rng.standard_normal(50)
    prev = np.inf
    w = None
    for sweeps in range(1, 15):
        try:
            m = train_lasso(X, y, 0.05, max_sweeps=sweeps, tol=0.0)
        except ConvergenceError:
            continue
    # run sweep-by-sweep via warm starts: each single sweep must not raise the objective
    w = np.zeros(8)
    for _ in range(20):
        try:
            m = train_lasso(X, y, 0.05, warm_start=w, max_sweeps=1, tol=np.inf)
        except ConvergenceError:
            break
        obj = lasso_objective(X, y, m)
        assert obj <= prev + 1e-15
        prev, w = obj, m.weights


def test_lasso_errors():
    with pytest.raises(InputError):
        train_lasso(np.ones((1, 2)), np.ones(1), 0.1)
    with pytest.raises(InputError):
        train_lasso(np.ones((3, 2)), np.ones(3), -1)
    with pytest.raises(InputError):
        train_lasso(np.array([[np.nan], [1.0], [2.0]]), np.ones(3), 0.1)
    rng = np.random.default_rng(5)
    X = rng.standard_normal((20, 30))
    with pytest.raises(ConvergenceError, match="residual"):
        train_lasso(X, rng.standard_normal(20), 1e-6, max_sweeps=2)


def test_lasso_cv_picks_from_grid():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((80, 10))
    y = 2 * X[:, 0] + rng.standard_normal(80)
    m = fit_lasso_cv(X, y)
    top = lambda_max(X, y)
    grid = np.geomspace(top, top * 1e-3, 20)
    assert np.min(np.abs(grid - m.lam)) <= 1e-12 * top
    assert abs(m.weights[0]) > 1.0


# -- SVR -------------------------------------------------------------------------

def test_svr_constant_target():
    X = np.random.default_rng(0).standard_normal((20, 3))
    m = train_svr(X, np.full(20, 1.7))
    assert np.allclose(m.predict(X), 1.7)
    assert np.allclose(m.predict(X + 5), 1.7)


def test_svr_single_point():
    m = train_svr(np.array([[0.3, -1.0]]), np.array([2.5]))
    assert m.predict(np.array([[0.3, -1.0]]))[0] == pytest.approx(2.5)


def test_svr_fits_identity():
    rng = np.random.default_rng(1)
    X = rng.uniform(-1, 1, (50, 2))
    X = (X - X.mean(0)) / X.std(0)
    m = train_svr(X, X[:, 0], C=1.0, epsilon=0.01)
    assert pearson(m.predict(X), X[:, 0]) >= 0.99


def test_svr_box_and_equality_constraints():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((60, 4))
    y = X[:, 0] + 0.3 * rng.standard_normal(60)
    m = train_svr(X, y, C=0.5)
    assert np.all(np.abs(m.dual_coef) <= 0.5 + 1e-12)
    assert abs(m.dual_coef.sum()) <= 1e-9
    assert m.kkt_gap < 1e-3


def test_svr_matches_independent_qp_oracle():
    cvxpy = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(3)
    X = rng.standard_normal((5, 2))
    y = rng.standard_normal(5)
    C, eps, gamma = 1.0, 0.2, 0.5
    K = rbf_kernel(X, X, gamma)
    a, b = cvxpy.Variable(5), cvxpy.Variable(5)
    L = np.linalg.cholesky(K + 1e-12 * np.eye(5))
    obj = 0.5 * cvxpy.sum_squares(L.T @ (a - b)) + eps * cvxpy.sum(a + b) - y @ (a - b)
    prob = cvxpy.Problem(cvxpy.Minimize(obj), [a >= 0, b >= 0, a <= C, b <= C, cvxpy.sum(a - b) == 0])
    prob.solve()
    coef = a.value - b.value
    m = train_svr(X, y, C, eps, gamma, tol=1e-8)
    full = np.zeros(5)
    support = [int(np.flatnonzero(np.all(X == s, axis=1))[0]) for s in m.support]
    full[support] = m.dual_coef
    assert np.allclose(full, coef, atol=1e-4)
    # decision values agree through the dual coefficients
    Xt = rng.standard_normal((10, 2))
    f_oracle = rbf_kernel(Xt, X, gamma) @ coef
    f_ours = m.predict(Xt) - m.bias
    assert np.allclose(f_ours, f_oracle, atol=1e-4)


def test_svr_errors():
    with pytest.raises(InputError):
        train_svr(np.ones((3, 1)), np.ones(3), C=0)
    with pytest.raises(InputError):
        train_svr(np.ones((3, 1)), np.ones(3), gamma=-1)
    rng = np.random.default_rng(4)
    with pytest.raises(ConvergenceError):
        train_svr(rng.standard_normal((40, 2)), rng.standard_normal(40), max_iter=3)


# -- cross-validation ----------------------------------------------------------

def test_folds_partition():
    for n, k in ((10, 10), (23, 10), (101, 7)):
        parts = contiguous_folds(n, k, seed=1)
        sizes = [len(p) for p in parts]
        assert max(sizes) - min(sizes) <= 1
        assert np.array_equal(np.sort(np.concatenate(parts)), np.arange(n))


def test_oracle_model_gives_r_one():
    rng = np.random.default_rng(5)
    y = rng.standard_normal(50)
    X = np.column_stack([y, rng.standard_normal(50)])
    res = cross_validate(X, y, folds=10, seed=0,
                         model_fn=lambda Xtr, ytr, Xte: Xte[:, 0])
    assert all(r == pytest.approx(1.0) for r in res.fold_r)


def test_shuffled_labels_null():
    rng = np.random.default_rng(6)
    n = 400
    X = rng.standard_normal((n, 5))
    y = rng.permutation(X[:, 0] + rng.standard_normal(n))
    res = cross_validate(X, y, ModelSpec("lasso"), folds=10, seed=1)
    assert abs(res.pooled_r) <= 2 / np.sqrt(n) + 0.05


def test_cv_determinism_and_metric():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((60, 3))
    y = X[:, 0] + 0.5 * rng.standard_normal(60)
    a = cross_validate(X, y, folds=5, seed=3)
    b = cross_validate(X, y, folds=5, seed=3)
    assert a.fold_r == b.fold_r and np.array_equal(a.predictions, b.predictions)
    for test, r in zip(a.folds, a.fold_r):
        assert r == pytest.approx(pearson(a.predictions[test], y[test]), abs=1e-12)
    assert a.mean_r == pytest.approx(np.mean(a.fold_r))


def test_cv_skips_undefined_folds():
    y = np.arange(20.0)
    X = np.arange(20.0)[:, None]
    res = cross_validate(X, y, folds=4, seed=0, model_fn=lambda Xtr, ytr, Xte: np.zeros(len(Xte)))
    assert res.skipped == [0, 1, 2, 3]
    assert np.isnan(res.mean_r)


def test_cv_errors():
    with pytest.raises(ConfigError):
        cross_validate(np.ones((5, 1)), np.arange(5.0), folds=10)
    with pytest.raises(ConfigError):
        ModelSpec("forest")


def test_standardization_has_no_leakage():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((40, 3))
    y = X[:, 1] + rng.standard_normal(40)
    seen = []

    def spy(Xtr, ytr, Xte):
        seen.append(Xtr.copy())
        return train_svr(Xtr, ytr).predict(Xte)

    cross_validate(X, y, folds=4, seed=2, model_fn=spy)
    first = seen[:]
    parts = contiguous_folds(40, 4, 2)
    X2 = X.copy()
    X2[parts[0]] = X2[parts[0]] * 100 + 7
    seen.clear()
    cross_validate(X2, y, folds=4, seed=2, model_fn=spy)
    # the fold-0 training matrix never sees test rows of fold 0
    assert np.array_equal(first[0], seen[0])


def test_sparse_path_matches_dense():
    rng = np.random.default_rng(9)
    D = (rng.random((40, 25)) < 0.2).astype(float)
    D[:, 3] = 0.0
    S = scipy.sparse.csr_matrix(D)
    zd, zs = Standardizer().fit(D[:30]), Standardizer().fit(S[:30])
    assert np.allclose(zd.scale_, zs.scale_)
    # centering drops out of pairwise distances
    Kd = rbf_kernel(zd.transform(D[30:]), zd.transform(D[:30]), 0.04)
    Ks = rbf_kernel(zs.transform(S[30:]), zs.transform(S[:30]), 0.04)
    assert np.allclose(Kd, Ks, atol=1e-12)
    y = D[:, 0] - D[:, 1] + 0.1 * rng.standard_normal(40)
    rd = cross_validate(D, y, ModelSpec(), folds=5, seed=2)
    rs = cross_validate(S, y, ModelSpec(), folds=5, seed=2)
    assert np.allclose(rd.predictions, rs.predictions, atol=1e-8)
    ld = cross_validate(D, y, ModelSpec("lasso", lam=0.01), folds=5, seed=2)
    ls = cross_validate(S, y, ModelSpec("lasso", lam=0.01), folds=5, seed=2)
    assert np.allclose(ld.predictions, ls.predictions, atol=1e-6)


def test_standardizer_constant_column():
    X = np.array([[1.0, 5.0], [3.0, 5.0]])
    Z = Standardizer().fit_transform(X)
    assert np.array_equal(Z[:, 1], [0.0, 0.0])
    assert np.allclose(Z[:, 0], [-1.0, 1.0])


# -- features and sweeps ---------------------------------------------------------

def test_build_features(synth):
    c, labels, _ = synth
    base = build_features("baseline", c, labels)
    assert base.X.shape == (len(labels), c.num_entities + 2)
    idx = align_labels(c, labels)
    assert scipy.sparse.issparse(base.X)
    assert np.array_equal(base.X[:, -2:].toarray(), stat_feature_matrix(c, idx))
    assert np.array_equal(base.X[:, :-2].toarray(), c.matrix[idx].toarray())
    u = idx[0]
    st_ = user_stat_features(c, c.user_ids[u])
    assert base.X[0, -2] == st_.num_likes and base.X[0, -1] == st_.avg_entity_popularity
    emb = UserEmbedding(np.random.default_rng(0).standard_normal((c.num_users, 7)), list(c.user_ids))
    fm = build_features(emb, c, labels)
    assert fm.X.shape[1] == 9
    assert build_features(emb, c, labels, include_stat_features=False).X.shape[1] == 7
    short = UserEmbedding(emb.matrix[:10], emb.ids[:10])
    with pytest.raises(AlignmentError):
        build_features(short, c, labels)


def test_subsample_keeps_labeled(synth):
    c, labels, _ = synth
    small = subsample_users(c, labels, 400, seed=1)
    assert small.num_users == 400
    assert set(labels) <= set(small.user_ids)
    bigger = subsample_users(c, labels, 600, seed=1)
    assert set(small.user_ids) <= set(bigger.user_ids)
    with pytest.raises(ConfigError):
        subsample_users(c, labels, len(labels) - 1)
    with pytest.raises(ConfigError):
        subsample_users(c, labels, c.num_users + 1)


def test_sweep_datasize_contract(synth, tmp_path):
    c, labels, _ = synth
    rows = sweep_datasize(c, labels, ["SVD"], [400, 800], dim=5, folds=5)
    base = [r for r in rows if r.method == "baseline"]
    assert len(base) == 2 and base[0].result.mean_r == base[1].result.mean_r
    full = [r for r in rows if r.method == "SVD" and r.users == 800][0]
    emb, _ = train_embedding(c, EmbeddingConfig("SVD", dim=5, rng_seed=0))
    fm = build_features(emb, c, labels)
    direct = cross_validate(fm.X, fm.y, folds=5, seed=0)
    assert full.result.fold_r == direct.fold_r
    write_results(tmp_path / "r.tsv", rows)
    lines = (tmp_path / "r.tsv").read_text().splitlines()
    assert lines[0] == "method\tdim\tusers\tfold\tr"
    assert len(lines) == 1 + len(rows) * (5 + 2)
    write_plot_csv(tmp_path / "p.csv", rows)
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "x,series,y"


def test_sweep_featuresize_rows(synth):
    c, labels, _ = synth
    rows = sweep_featuresize(c, labels, ["SVD", "P-DBOW"], [3, 6], folds=4)
    cells = [(r.method, r.dim) for r in rows if r.method != "baseline"]
    assert cells == [("SVD", 3), ("SVD", 6), ("P-DBOW", 3), ("P-DBOW", 6)]
    again = sweep_featuresize(c, labels, ["SVD", "P-DBOW"], [3, 6], folds=4)
    assert [r.result.fold_r for r in rows] == [r.result.fold_r for r in again]


def test_svd_full_rank_projection():
    # exact-rank incidence: any dim >= rank gives the same predictions
    rng = np.random.default_rng(9)
    from likeddr.corpus import LikeCorpus
    blocks = np.kron(np.eye(4, dtype=int), np.ones((1, 5), dtype=int))
    X = blocks[rng.integers(0, 4, size=120)]
    rows = [np.flatnonzero(r) for r in X]
    c = LikeCorpus([f"u{i}" for i in range(120)], [f"e{j}" for j in range(20)],
                   np.concatenate([[0], np.cumsum([len(r) for r in rows])]), np.concatenate(rows))
    labels = {f"u{i}": float(np.flatnonzero(X[i])[0] // 5 + rng.normal()) for i in range(120)}
    out = []
    for d in (4, 6):
        emb, _ = train_embedding(c, EmbeddingConfig("SVD", dim=d))
        fm = build_features(emb, c, labels, include_stat_features=False)
        out.append(cross_validate(fm.X, fm.y, ModelSpec("lasso", lam=0.01), folds=5).mean_r)
    assert out[0] == pytest.approx(out[1], abs=1e-6)
