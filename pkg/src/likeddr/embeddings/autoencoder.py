"""One-hidden-layer autoencoder on binary like vectors.

Logistic hidden and output units, binary cross-entropy summed over
entities and averaged over the batch, plain mini-batch SGD. Training runs
in single precision; the reported loss is accumulated in double.
"""

from __future__ import annotations

import numpy as np

from ..errors import DivergenceError

PROBE_USERS = 500


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


class AutoEncoder:
    def __init__(self, n_in, n_hidden, rng, dtype=np.float64):
        bound = np.sqrt(6.0 / (n_in + n_hidden))
        self.W1 = rng.uniform(-bound, bound, size=(n_in, n_hidden)).astype(dtype)
        self.b1 = np.zeros(n_hidden, dtype=dtype)
        self.W2 = rng.uniform(-bound, bound, size=(n_hidden, n_in)).astype(dtype)
        self.b2 = np.zeros(n_in, dtype=dtype)

    def params(self):
        return [self.W1, self.b1, self.W2, self.b2]

    def encode(self, X):
        return _sigmoid(X @ self.W1 + self.b1)

    def loss_grad(self, X, with_grad=True):
        """Mean-over-rows BCE and its gradients wrt (W1, b1, W2, b2)."""
        B = X.shape[0]
        Xd = X.toarray() if hasattr(X, "toarray") else np.asarray(X, dtype=float)
        h = self.encode(X)
        a = h @ self.W2 + self.b2
        a64 = a.astype(np.float64)
        # BCE with logits: log(1 + e^a) - x a
        loss = float((np.logaddexp(0.0, a64) - Xd * a64).sum() / B)
        if not with_grad:
            return loss, None
        d_a = (_sigmoid(a) - Xd) / B
        gW2 = h.T @ d_a
        gb2 = d_a.sum(axis=0)
        d_z = (d_a @ self.W2.T) * h * (1.0 - h)
        gW1 = np.asarray(X.T @ d_z)
        gb1 = d_z.sum(axis=0)
        return loss, [gW1, gb1, gW2, gb2]

    def sgd_step(self, X, lr):
        """One SGD update on a sparse batch, same gradients as ``loss_grad``.

        Input rows of W1 outside the batch's entities have zero gradient and
        are left alone; the loss itself is not computed.
        """
        B = X.shape[0]
        h = self.encode(X)
        d_a = h @ self.W2 + self.b2
        d_a = _sigmoid(d_a)
        d_a -= X.toarray()
        d_a /= B
        d_z = (d_a @ self.W2.T) * h * (1.0 - h)
        cols = np.unique(X.indices)
        gW1 = np.asarray(X[:, cols].T @ d_z)
        self.W2 -= lr * (h.T @ d_a)
        self.b2 -= lr * d_a.sum(axis=0)
        self.W1[cols] -= lr * gW1
        self.b1 -= lr * d_z.sum(axis=0)


def train_autoencoder(corpus, config):
    """Return (hidden activations, model, history)."""
    rng = np.random.default_rng(config.rng_seed)
    X = corpus.matrix.astype(np.float32).tocsr()
    U = X.shape[0]
    model = AutoEncoder(X.shape[1], config.dim, rng, dtype=np.float32)
    probe = X[np.sort(rng.choice(U, size=min(PROBE_USERS, U), replace=False))]
    history = [model.loss_grad(probe, with_grad=False)[0]]
    lr = config.learning_rate
    for _ in range(config.epochs):
        order = rng.permutation(U)
        for lo in range(0, U, config.batch_size):
            model.sgd_step(X[np.sort(order[lo:lo + config.batch_size])], np.float32(lr))
        loss = model.loss_grad(probe, with_grad=False)[0]
        if not np.isfinite(loss):
            raise DivergenceError(f"autoencoder loss became non-finite at learning rate {lr}")
        history.append(loss)
    H = np.vstack([model.encode(X[lo:lo + 4096]) for lo in range(0, U, 4096)]).astype(np.float64)
    return H, model, history
