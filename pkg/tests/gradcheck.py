"""Central finite-difference checks shared by the unit and acceptance tests."""

import numpy as np
import scipy.sparse as sp

from likeddr.embeddings.autoencoder import AutoEncoder
from likeddr.embeddings.negsampling import cbow_event, dbow_event, dm_event, sg_event

MODES = ("SG", "CBOW", "DM", "DBOW")


def _log_sig(x):
    return -np.logaddexp(0.0, -x)


def ns_loss_ref(h, syn1, target, negs):
    return -_log_sig(h @ syn1[target]) - sum(_log_sig(-(h @ syn1[n])) for n in negs)


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-30)


def finite_differences(f, params, eps=1e-6):
    grads = []
    for p in params:
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = p[i]
            p[i] = old + eps
            up = f()
            p[i] = old - eps
            down = f()
            p[i] = old
            g[i] = (up - down) / (2 * eps)
        grads.append(g)
    return grads


def ns_gradient_errors(mode, configs=20, seed=0):
    """Relative error of one SGD event's update vs. the numerical gradient, per config."""
    rng = np.random.default_rng(seed)
    errors = []
    for _ in range(configs):
        dim, n_ent, n_doc = int(rng.integers(2, 8)), 12, 3
        syn0 = rng.normal(0, 0.5, (n_ent, dim))
        syn1 = rng.normal(0, 0.5, (n_ent, dim))
        docs = rng.normal(0, 0.5, (n_doc, dim))
        perm = rng.permutation(n_ent)
        target = perm[0]
        negs = perm[1:1 + int(rng.integers(1, 5))].astype(np.int64)
        ctx = perm[6:6 + int(rng.integers(1, 5))].astype(np.int64)
        doc = int(rng.integers(n_doc))

        def h_of():
            if mode == "SG":
                return syn0[ctx[0]]
            if mode == "CBOW":
                return syn0[ctx].mean(axis=0)
            if mode == "DM":
                return docs[doc] + syn0[ctx].sum(axis=0)
            return docs[doc]

        loss = lambda: ns_loss_ref(h_of(), syn1, target, negs)  # noqa: E731
        fd0, fd1, fdd = finite_differences(loss, [syn0, syn1, docs])
        s0, s1, sd = syn0.copy(), syn1.copy(), docs.copy()
        work, neu1 = np.zeros(dim), np.zeros(dim)
        lr = 1.0
        if mode == "SG":
            sg_event(s0, s1, ctx[0], target, negs, lr, work)
        elif mode == "CBOW":
            cbow_event(s0, s1, ctx, target, negs, lr, neu1, work)
        elif mode == "DM":
            dm_event(sd, s0, s1, doc, ctx, target, negs, lr, neu1, work)
        else:
            dbow_event(sd, s1, doc, target, negs, lr, work)
        # every update uses pre-update values, so (before - after) / lr is the gradient
        an = np.concatenate([(syn0 - s0).ravel(), (syn1 - s1).ravel(), (docs - sd).ravel()]) / lr
        fd = np.concatenate([fd0.ravel(), fd1.ravel(), fdd.ravel()])
        errors.append(rel_err(an, fd))
    return errors


def ae_gradient_errors(configs=20, seed=7):
    rng = np.random.default_rng(seed)
    errors = []
    for _ in range(configs):
        X = sp.csr_matrix((rng.random((10, 20)) < 0.3).astype(float))
        ae = AutoEncoder(20, int(rng.integers(2, 6)), rng)
        for p in ae.params():
            p += rng.normal(0, 0.3, p.shape)
        _, grads = ae.loss_grad(X)
        fd = finite_differences(lambda: ae.loss_grad(X, with_grad=False)[0], ae.params())
        errors.append(rel_err(np.concatenate([g.ravel() for g in grads]),
                              np.concatenate([g.ravel() for g in fd])))
    return errors
