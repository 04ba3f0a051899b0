"""Predictive independence tests, two-sample testing, and the MMD identity."""

from __future__ import annotations

import math

import numpy as np

from . import _kernels
from .distributions import Categorical
from .errors import DomainError, StratificationError
from .learners import PredictedBatch, ProbEstimator
from .losses import LogLoss
from .validation import paired_t_test, wilcoxon_signed_rank


def predictive_independence_test(d_train, d_test, informed, uninformed,
                                 loss=None, test="wilcoxon"):
    """One-sided paired test of feature-label dependence via model comparison.

    Both predictors are fitted on the training split and evaluated on the
    disjoint test split.  The null is "the informed losses are located at or
    above the uninformed ones"; rejection certifies statistical dependence.
    """
    loss = loss if loss is not None else LogLoss()
    informed.fit(d_train.features, d_train.targets)
    uninformed.fit(d_train.features, d_train.targets)
    if hasattr(loss, "calibrate"):
        loss.calibrate(d_train.targets)
    bi = informed.predict(d_test.features)
    bu = uninformed.predict(d_test.features)
    y = d_test.targets
    li = np.array([loss(p, v) for p, v in zip(bi, y)])
    lu = np.array([loss(p, v) for p, v in zip(bu, y)])
    diffs = li - lu
    runner = wilcoxon_signed_rank if test == "wilcoxon" else paired_t_test
    return runner(diffs, alternative="less")


# ---------------------------------------------------------------------------
# probabilistic class-frequency kNN, for the two-sample test

class KnnClassFrequency(ProbEstimator):
    """Predicts smoothed class frequencies among the k nearest neighbours.

    k is tuned over ``k_grid`` by inner CV log-loss; probabilities are
    Laplace-smoothed: (count + 1) / (k + n_classes).
    """

    def __init__(self, k=None, k_grid=(5, 15, 31), folds=5, seed=0):
        self.k = k
        self.k_grid = tuple(k_grid)
        self.folds = folds
        self.seed = seed

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        self.X_ = np.ascontiguousarray(X)
        self.y_ = y
        self.k_ = self.k if self.k is not None else self._tune(X, y)
        self.k_ = min(self.k_, X.shape[0])
        self.fitted_ = True
        return self

    def _tune(self, X, y):
        rng = np.random.default_rng(np.random.SeedSequence(self.seed))
        order = rng.permutation(X.shape[0])
        folds = np.array_split(order, self.folds)
        best = None
        for k in self.k_grid:
            total = 0.0
            for fi in range(len(folds)):
                test_idx = folds[fi]
                train_idx = np.concatenate([folds[j] for j in range(len(folds)) if j != fi])
                if test_idx.size == 0 or train_idx.size == 0:
                    continue
                sub = KnnClassFrequency(k=k)
                sub.fit(X[train_idx], y[train_idx])
                batch = sub.predict(X[test_idx])
                for p, v in zip(batch, y[test_idx]):
                    m = p.pdf(v if not isinstance(v, np.generic) else v.item())
                    total += -math.log(m) if m > 0 else math.inf
            if best is None or total < best[1]:
                best = (k, total)
        return best[0]

    def predict(self, X):
        self._check_fitted()
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        d = _kernels.pairwise_sq_dists(np.ascontiguousarray(X), self.X_)
        idx = np.argsort(d, axis=1, kind="stable")[:, :self.k_]
        n_cls = self.classes_.size
        dists = []
        for row in idx:
            labs = self.y_[row]
            probs = np.array([(np.sum(labs == c) + 1.0) / (self.k_ + n_cls)
                              for c in self.classes_])
            dists.append(Categorical([c.item() if isinstance(c, np.generic) else c
                                      for c in self.classes_], probs / probs.sum()))
        return PredictedBatch(dists, estimator_id=repr(self))

    def __repr__(self):
        return f"KnnClassFrequency(k={self.k if self.k is not None else self.k_grid})"


def two_sample_test(sample1, sample2, classifier=None, split=0.5, seed=0,
                    test="wilcoxon"):
    """Two-sample test by probabilistic classification of the source index.

    Merges the samples with labels +1/-1, splits stratified, trains the
    classifier, and runs a one-sample one-sided test of the informed test
    log-losses against the training-frequency entropy baseline.
    """
    s1 = np.asarray(sample1, dtype=float)
    s2 = np.asarray(sample2, dtype=float)
    if s1.ndim == 1:
        s1 = s1[:, None]
    if s2.ndim == 1:
        s2 = s2[:, None]
    if s1.shape[0] == 0 or s2.shape[0] == 0:
        raise DomainError("both samples must be nonempty")
    X = np.vstack([s1, s2])
    y = np.concatenate([np.ones(s1.shape[0]), -np.ones(s2.shape[0])])

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    train_idx, test_idx = [], []
    for cls in (1.0, -1.0):
        rows = np.where(y == cls)[0]
        rows = rng.permutation(rows)
        cut = int(round(split * rows.size))
        train_idx.append(rows[:cut])
        test_idx.append(rows[cut:])
    train_idx = np.concatenate(train_idx)
    test_idx = np.concatenate(test_idx)
    if np.unique(y[train_idx]).size < 2 or test_idx.size == 0:
        raise StratificationError("a class is absent from the stratified split")

    clf = classifier if classifier is not None else KnnClassFrequency(seed=seed)
    clf.fit(X[train_idx], y[train_idx])
    batch = clf.predict(X[test_idx])
    informed = np.array([-math.log(p.pdf(v)) if p.pdf(v) > 0 else math.inf
                         for p, v in zip(batch, y[test_idx])])

    p1 = np.mean(y[train_idx] == 1.0)
    pm1 = 1.0 - p1
    base_entropy = -(p1 * math.log(p1) + pm1 * math.log(pm1))

    diffs = informed - base_entropy
    runner = wilcoxon_signed_rank if test == "wilcoxon" else paired_t_test
    return runner(diffs, alternative="less")


# ---------------------------------------------------------------------------
# kernel maximum mean discrepancy

def mmd_statistic(sample1, sample2, kernel):
    """Biased (V-statistic) squared MMD between two real samples."""
    a = np.ascontiguousarray(sample1, dtype=float)
    b = np.ascontiguousarray(sample2, dtype=float)
    wa = np.full(a.size, 1.0 / a.size)
    wb = np.full(b.size, 1.0 / b.size)
    return (kernel.cross_mean(a, wa, a, wa)
            + kernel.cross_mean(b, wb, b, wb)
            - 2.0 * kernel.cross_mean(a, wa, b, wb))


def mmd_identity_check(sample1, sample2, kernel):
    """Both sides of the predictive-MMD identity, evaluated in-sample.

    The informed predictor emits the per-group empirical distribution, the
    uninformed one the pooled empirical distribution, both scored in-sample
    with the kernel discrepancy loss.  The mean loss difference, rescaled by
    -N^2/(N1*N2), equals the closed-form MMD statistic.  Returns
    (rescaled predictive difference, direct statistic).
    """
    from .distributions import Empirical
    from .losses import kernel_loss

    a = np.asarray(sample1, dtype=float)
    b = np.asarray(sample2, dtype=float)
    n1, n2 = a.size, b.size
    n = n1 + n2
    informed = {1.0: Empirical(a), -1.0: Empirical(b)}
    pooled = Empirical(np.concatenate([a, b]))
    xs = np.concatenate([np.ones(n1), -np.ones(n2)])
    ys = np.concatenate([a, b])
    li = np.mean([kernel_loss(informed[x], y, kernel) for x, y in zip(xs, ys)])
    lu = np.mean([kernel_loss(pooled, y, kernel) for x, y in zip(xs, ys)])
    predictive = -(n * n) / (n1 * n2) * (li - lu)
    return float(predictive), float(mmd_statistic(a, b, kernel))
