"""Pearson correlation screens between like indicators / topic weights and DDR."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import LikeCorpus, align_labels
from .errors import DomainError, InputError, UndefinedCorrelationError

log = logging.getLogger(__name__)

CF_TOL = 1e-12
CF_MAX_ITER = 10000
_TINY = 1e-300


def pearson(x, y):
    """Sample Pearson correlation of two equal-length vectors."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InputError("pearson needs two 1-d vectors of equal length")
    if len(x) < 2:
        raise InputError("pearson needs at least 2 observations")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = xc @ xc
    syy = yc @ yc
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelationError("correlation undefined for a constant vector")
    r = (xc @ yc) / math.sqrt(sxx * syy)
    return float(min(1.0, max(-1.0, r)))


def _betacf(a, b, x):
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < CF_TOL:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a, b, x):
    """Regularized incomplete beta I_x(a, b)."""
    if not (a > 0 and b > 0):
        raise DomainError("betainc needs a, b > 0")
    if not 0.0 <= x <= 1.0:
        raise DomainError("betainc needs 0 <= x <= 1")
    if x == 0.0 or x == 1.0:
        return x
    lbeta = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
    front = math.exp(lbeta + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def p_value(r, n):
    """Two-sided p for H0: rho = 0, via the t statistic with n - 2 df."""
    if n < 3:
        raise DomainError("p_value needs n >= 3")
    if not abs(r) <= 1.0:
        raise DomainError("|r| must be <= 1")
    if abs(r) == 1.0:
        return 0.0
    df = n - 2.0
    t2 = r * r * df / (1.0 - r * r)
    # P(|T| > t) = I_{df/(df+t^2)}(df/2, 1/2)
    return min(1.0, max(0.0, betainc(df / 2.0, 0.5, df / (df + t2))))


@dataclass
class CorrelationRecord:
    feature_id: str
    r: float
    p: float
    n: int
    q: float = float("nan")

    @property
    def sign(self):
        return "+" if self.r > 0 else ("-" if self.r < 0 else "0")


@dataclass
class CorrelationReport:
    records: list
    threshold: float = 0.05
    use_fdr: bool = False
    skipped: list = field(default_factory=list)

    def __post_init__(self):
        self.records.sort(key=lambda rec: (rec.p, rec.feature_id))

    def is_significant(self, rec):
        return (rec.q if self.use_fdr else rec.p) < self.threshold

    def significant(self):
        return [rec for rec in self.records if self.is_significant(rec)]

    @property
    def num_significant_positive(self):
        return sum(1 for rec in self.significant() if rec.r > 0)

    @property
    def num_significant_negative(self):
        return sum(1 for rec in self.significant() if rec.r < 0)

    def top(self, k):
        """k most significant positive records, then k most significant negative."""
        pos = [rec for rec in self.records if rec.r > 0][:k]
        neg = [rec for rec in self.records if rec.r < 0][:k]
        return pos, neg


def benjamini_hochberg(pvals):
    p = np.asarray(pvals, dtype=float)
    m = len(p)
    if m == 0:
        return p
    order = np.argsort(p, kind="stable")
    scaled = p[order] * m / np.arange(1, m + 1)
    q = np.minimum.accumulate(scaled[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(q, 1.0)
    return out


def _columns_report(feature_ids, r_values, valid, n, threshold, fdr):
    records = []
    skipped = []
    for fid, r, ok in zip(feature_ids, r_values, valid):
        if not ok:
            skipped.append(fid)
            continue
        r = float(min(1.0, max(-1.0, r)))
        records.append(CorrelationRecord(fid, r, p_value(r, n), n))
    if skipped:
        log.warning("skipped %d constant features", len(skipped))
    if fdr:
        for rec, q in zip(records, benjamini_hochberg([rec.p for rec in records])):
            rec.q = float(q)
    return CorrelationReport(records, threshold, fdr, skipped)


def column_correlations(X, y):
    """Pearson r of every column of X (dense or scipy sparse) against y.

    Returns (r, valid) where valid is False for constant columns.
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    yc = y - y.mean()
    syy = yc @ yc
    if syy == 0:
        raise UndefinedCorrelationError("labels are constant")
    if hasattr(X, "tocsc"):
        col_sum = np.asarray(X.sum(axis=0)).ravel()
        col_sq = np.asarray(X.multiply(X).sum(axis=0)).ravel()
        sxx = col_sq - col_sum * col_sum / n
        sxy = np.asarray(X.T @ yc).ravel()
    else:
        X = np.asarray(X, dtype=float)
        Xc = X - X.mean(axis=0)
        col_sq = (X * X).sum(axis=0)
        sxx = (Xc * Xc).sum(axis=0)
        sxy = Xc.T @ yc
    valid = sxx > 1e-12 * np.maximum(col_sq, 1.0)
    r = np.zeros(X.shape[1])
    r[valid] = sxy[valid] / np.sqrt(sxx[valid] * syy)
    return r, valid


def correlate_entities(corpus: LikeCorpus, labels, threshold=0.05, fdr=False) -> CorrelationReport:
    """Screen every entity's binary like indicator against DDR over labeled users."""
    idx = align_labels(corpus, labels)
    if len(idx) < 3:
        raise InputError("need at least 3 labeled users")
    y = np.array([labels[corpus.user_ids[u]] for u in idx])
    X = corpus.matrix[idx]
    r, valid = column_correlations(X, y)
    return _columns_report(corpus.entity_ids, r, valid, len(idx), threshold, fdr)


def correlate_topics(proportions, labels_vector, feature_ids=None, threshold=0.05,
                     fdr=False) -> CorrelationReport:
    """Screen real-valued columns (e.g. per-user topic weights) against DDR.

    ``proportions`` rows must already be aligned with ``labels_vector``.
    """
    P = np.asarray(proportions, dtype=float)
    y = np.asarray(labels_vector, dtype=float)
    if P.ndim != 2 or P.shape[0] != len(y):
        raise InputError("proportions rows must match the label vector")
    if len(y) < 3:
        raise InputError("need at least 3 labeled users")
    if feature_ids is None:
        feature_ids = [str(i) for i in range(P.shape[1])]
    r, valid = column_correlations(P, y)
    return _columns_report(list(feature_ids), r, valid, len(y), threshold, fdr)


def write_report(path, report: CorrelationReport, top=None):
    """TSV with header ``feature_id r p n sign`` sorted by p.

    With ``top=K`` only the K strongest positive then K strongest negative rows.
    """
    if top is None:
        rows = report.records
    else:
        pos, neg = report.top(top)
        rows = pos + neg
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("feature_id\tr\tp\tn\tsign\n")
        for rec in rows:
            fh.write(f"{rec.feature_id}\t{rec.r!r}\t{rec.p!r}\t{rec.n}\t{rec.sign}\n")
