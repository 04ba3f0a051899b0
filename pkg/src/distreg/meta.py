"""Ensemble and boosting meta-strategies, plus residual/diagnostic extraction."""

from __future__ import annotations

import math

import numpy as np

from .composite import ParametricEstimator
from .distributions import (Mixture, Normal, Uniform, cdf_map, mixture,
                            pullback, pushforward, sigmoid_map, sigmoid_reference)
from .errors import DomainError, ShapeError, WeightCollapse
from .learners import Constant, Estimator, Ols, PredictedBatch, ProbEstimator
from .losses import CappedLogLoss


class BaggingEstimator(ProbEstimator):
    """Fits clones of the base estimator on resamples and mixes their predictions."""

    def __init__(self, base, n_estimators=10, max_samples=1.0, bootstrap=True, seed=0):
        if n_estimators < 1:
            raise DomainError("need at least one member")
        self.base = base
        self.n_estimators = int(n_estimators)
        self.max_samples = float(max_samples)
        self.bootstrap = bool(bootstrap)
        self.seed = seed

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(y, dtype=float)
        n = X.shape[0]
        size = max(1, int(round(self.max_samples * n)))
        seqs = np.random.SeedSequence(self.seed).spawn(self.n_estimators)
        self.members_ = []
        for seq in seqs:
            rng = np.random.default_rng(seq)
            if self.bootstrap:
                idx = rng.integers(0, n, size=size)
                for _ in range(10):
                    if idx.size:
                        break
                    idx = rng.integers(0, n, size=size)  # pragma: no cover
            elif size >= n:
                idx = np.arange(n)
            else:
                idx = rng.permutation(n)[:size]
            member = self.base.clone()
            member.fit(X[idx], y[idx])
            self.members_.append(member)
        self.fitted_ = True
        return self

    def predict(self, X):
        self._check_fitted()
        batches = [m.predict(X) for m in self.members_]
        w = np.full(len(self.members_), 1.0 / len(self.members_))
        dists = [mixture([b[i] for b in batches], w) if len(batches) > 1 else batches[0][i]
                 for i in range(len(batches[0]))]
        return PredictedBatch(dists, estimator_id=repr(self))

    def __repr__(self):
        return (f"Bag({self.base!r}, n={self.n_estimators}, "
                f"frac={self.max_samples:g}, boot={self.bootstrap})")


def bagging(base, n_estimators, max_samples=1.0, bootstrap=True, seed=0):
    return BaggingEstimator(base, n_estimators, max_samples, bootstrap, seed)


# ---------------------------------------------------------------------------
# greedy probabilistic residual boosting

class UnitIntervalLearner(Estimator):
    """Weak probabilistic learner for (0,1)-valued targets.

    Fits a location/dispersion normal on logit-transformed targets and pushes
    the prediction through the sigmoid, so every predicted density lives on
    (0,1) with strictly positive pdf.
    """

    def __init__(self, point=None, clip=1e-6):
        self.point = point if point is not None else Ols()
        self.clip = float(clip)

    def fit(self, X, u):
        u = np.clip(np.asarray(u, dtype=float), self.clip, 1.0 - self.clip)
        z = np.log(u) - np.log1p(-u)
        self.point.fit(X, z)
        resid = z - self.point.predict(X)
        self.sigma_ = max(float(resid.std()), 1e-6)
        self.fitted_ = True
        return self

    def predict(self, X):
        self._check_fitted()
        locs = self.point.predict(X)
        s = sigmoid_map()
        dists = [pushforward(Normal(float(m), self.sigma_), s) for m in locs]
        return PredictedBatch(dists, estimator_id="UnitLearner")


class GreedyBoosting(ProbEstimator):
    """Pull-back chain boosting on iterated probability residuals.

    Stage 0 is a fixed reference density on the reals (the sigmoid pull-back
    of the unit uniform); each weak stage predicts the previous stage's
    residuals in (0,1), is mixed with alpha * uniform, and the final
    prediction is the pull-back chain through the stage cdfs.
    """

    def __init__(self, k=1, alpha=0.1, weak_factory=None, seed=0):
        if not 0.0 <= alpha <= 1.0:
            raise DomainError("alpha must lie in [0, 1]")
        self.k = int(k)
        self.alpha = float(alpha)
        self.weak_factory = weak_factory
        self.seed = seed

    def _make_weak(self):
        if self.weak_factory is None:
            return UnitIntervalLearner()
        return self.weak_factory()

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(y, dtype=float)
        self.start_ = sigmoid_reference()
        rho = np.asarray(self.start_.cdf(y), dtype=float)
        self.stages_ = []
        for _ in range(self.k):
            weak = self._make_weak()
            weak.fit(X, rho)
            self.stages_.append(weak)
            batch = self._stage_batch(weak, X)
            rho = np.array([float(d.cdf(r)) for d, r in zip(batch, rho)])
        self.fitted_ = True
        return self

    def _stage_batch(self, weak, X):
        raw = weak.predict(X)
        if self.alpha == 0.0:
            return raw
        u = Uniform(0.0, 1.0)
        return PredictedBatch([mixture([u, d], [self.alpha, 1.0 - self.alpha])
                               for d in raw])

    def predict(self, X):
        self._check_fitted()
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        stage_batches = [self._stage_batch(w, X) for w in self.stages_]
        n = X.shape[0]
        dists = []
        for i in range(n):
            if not stage_batches:
                dists.append(self.start_)
                continue
            p = stage_batches[-1][i]
            for j in range(len(stage_batches) - 2, -1, -1):
                p = pullback(p, cdf_map(stage_batches[j][i]))
            p = pullback(p, cdf_map(self.start_))
            dists.append(p)
        return PredictedBatch(dists, estimator_id=repr(self))

    def __repr__(self):
        return f"BoostGreedy(k={self.k}, alpha={self.alpha:g})"


def greedy_boosting(k, alpha, weak_factory=None, seed=0):
    return GreedyBoosting(k, alpha, weak_factory, seed)


# ---------------------------------------------------------------------------
# gentle probabilistic boosting

class GentleBoosting(ProbEstimator):
    """Weighted-resample boosting; the model is a running mixture of weak fits.

    Each round line-searches the mixing step on the training loss over a
    101-point grid, then reweights points by alpha * weight * loss (infinite
    losses clipped at the capped-log-loss bound, negatives clamped to zero).
    """

    def __init__(self, rounds=5, alpha=0.5, gamma=1.0, loss=None,
                 weak_factory=None, seed=0):
        self.rounds = int(rounds)
        self.alpha = float(alpha)
        self.gamma = float(gamma)
        self.loss = loss if loss is not None else CappedLogLoss(1e-10)
        self.weak_factory = weak_factory
        self.seed = seed

    def _make_weak(self):
        if self.weak_factory is None:
            return ParametricEstimator("normal", Ols(), Constant("std(y)"))
        return self.weak_factory()

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(y, dtype=float)
        n = X.shape[0]
        w = np.full(n, 1.0 / n)
        rng = np.random.default_rng(np.random.SeedSequence(self.seed))
        cap = -math.log(1e-10)

        base = ParametricEstimator("normal", Constant("mean(y)"), Constant("std(y)"))
        base.fit(X, y)
        self.components_ = [base]
        self.weights_ = [1.0]
        train_preds = [base.predict(X)]
        self.train_curve_ = [float(self._point_losses(train_preds, self.weights_, y).mean())]
        self.weight_history_ = [w.copy()]

        betas = np.linspace(0.0, 1.0, 101)
        for _ in range(self.rounds):
            idx = rng.choice(n, size=n, p=w)
            weak = self._make_weak()
            weak.fit(X[idx], y[idx])
            weak_pred = weak.predict(X)

            # losses of the running mixture and candidate member, per point
            cur = self._mixture_losses(train_preds, self.weights_, weak_pred, y, betas)
            best_b = float(betas[int(np.argmin(cur))])
            step = self.gamma * best_b
            if step > 0.0:
                self.weights_ = [wt * (1.0 - step) for wt in self.weights_] + [step]
                self.components_.append(weak)
                train_preds.append(weak_pred)

            pt_losses = self._point_losses(train_preds, self.weights_, y)
            self.train_curve_.append(float(pt_losses.mean()))
            pt_losses = np.clip(pt_losses, -cap, cap)
            w = w + self.alpha * w * pt_losses
            w = np.clip(w, 0.0, None)
            total = w.sum()
            if total <= 0.0:
                raise WeightCollapse("all boosting weights vanished")
            w = w / total
            self.weight_history_.append(w.copy())
        self.fitted_ = True
        return self

    def _point_losses(self, preds, weights, y):
        out = np.empty(y.size)
        for i in range(y.size):
            d = self._mix_at(preds, weights, i)
            out[i] = self.loss(d, y[i])
        return out

    def _mix_at(self, preds, weights, i):
        if len(preds) == 1:
            return preds[0][i]
        return mixture([b[i] for b in preds], np.asarray(weights))

    def _mixture_losses(self, preds, weights, cand, y, betas):
        totals = np.zeros(betas.size)
        for bi, beta in enumerate(betas):
            step = self.gamma * beta
            acc = 0.0
            for i in range(y.size):
                if step == 0.0:
                    d = self._mix_at(preds, weights, i)
                else:
                    comps = [b[i] for b in preds] + [cand[i]]
                    ws = [wt * (1.0 - step) for wt in weights] + [step]
                    d = mixture(comps, np.asarray(ws))
                acc += self.loss(d, y[i])
            totals[bi] = acc
        return totals

    def predict(self, X):
        self._check_fitted()
        batches = [c.predict(X) for c in self.components_]
        n = len(batches[0])
        ws = np.asarray(self.weights_)
        dists = [mixture([b[i] for b in batches], ws) if len(batches) > 1 else batches[0][i]
                 for i in range(n)]
        return PredictedBatch(dists, estimator_id=repr(self))

    def __repr__(self):
        return f"BoostGentle(M={self.rounds}, alpha={self.alpha:g}, gamma={self.gamma:g})"


def gentle_boosting(rounds, alpha, gamma, loss=None, weak_factory=None, seed=0):
    return GentleBoosting(rounds, alpha, gamma, loss, weak_factory, seed)


# ---------------------------------------------------------------------------
# residual extraction and diagnostics

def probability_residuals(batch, y):
    """cdf of each prediction at its observation; uniform under perfect prediction."""
    y = np.asarray(y, dtype=float)
    if len(batch) != y.size:
        raise ShapeError("batch and observations disagree on length")
    return np.array([float(d.cdf(v)) for d, v in zip(batch, y)])


def loss_residuals(batch, y, loss):
    y = np.asarray(y, dtype=float)
    if len(batch) != y.size:
        raise ShapeError("batch and observations disagree on length")
    return np.array([loss(d, v) for d, v in zip(batch, y)])


_DIAG_QS = (0.05, 0.25, 0.5, 0.75, 0.95)


def diagnostics_export(batch, y, loss, baseline_batch=None):
    """Plot-ready rows: point estimate, residuals, predictive quantiles per test row.

    When a paired uninformed baseline batch is supplied, a zeroed loss column
    (loss minus baseline loss) is added.
    """
    y = np.asarray(y, dtype=float)
    lres = loss_residuals(batch, y, loss)
    pres = probability_residuals(batch, y)
    base = loss_residuals(baseline_batch, y, loss) if baseline_batch is not None else None
    rows = []
    for i, d in enumerate(batch):
        row = {
            "point": d.mean(),
            "observed": float(y[i]),
            "loss_residual": float(lres[i]),
            "prob_residual": float(pres[i]),
        }
        for q in _DIAG_QS:
            row[f"q{int(q * 100):02d}"] = float(d.quantile(q))
        if base is not None:
            row["loss_zeroed"] = float(lres[i] - base[i])
        rows.append(row)
    return rows
