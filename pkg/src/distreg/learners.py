"""Point-prediction primitives and the fit/predict estimator contracts."""

from __future__ import annotations

import inspect
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .distributions import Histogram, KernelDensity, Normal
from .errors import (ClampedKWarning, DomainError, NotFittedError,
                     RidgeFallbackWarning, ShapeError, TuningFailed)


@dataclass
class Dataset:
    """Feature matrix plus target vector; no missing values after ingestion."""

    features: np.ndarray
    targets: np.ndarray
    columns: list = field(default_factory=list)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim == 1:
            self.features = self.features[:, None]
        self.targets = np.asarray(self.targets, dtype=float)
        if self.features.shape[0] != self.targets.shape[0]:
            raise ShapeError("features and targets disagree on row count")
        if self.features.shape[0] < 1:
            raise ShapeError("dataset must contain at least one row")
        if not self.columns:
            self.columns = [f"x{i}" for i in range(self.features.shape[1])]

    @property
    def n_rows(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    def subset(self, idx):
        return Dataset(self.features[idx], self.targets[idx], list(self.columns))


@dataclass
class PredictedBatch:
    """Ordered distribution predictions aligned to the query rows."""

    dists: list
    estimator_id: str = ""
    seed: int | None = None

    def __len__(self):
        return len(self.dists)

    def __getitem__(self, i):
        return self.dists[i]

    def __iter__(self):
        return iter(self.dists)


class Estimator:
    """Parameter inspection/round-trip and unfitted cloning, sklearn style."""

    def _param_names(self):
        sig = inspect.signature(type(self).__init__)
        return [p for p in sig.parameters if p != "self"]

    def get_params(self, deep=False):
        out = {}
        for name in self._param_names():
            val = getattr(self, name)
            out[name] = val
            if deep and isinstance(val, Estimator):
                for k, v in val.get_params(deep=True).items():
                    out[f"{name}__{k}"] = v
        return out

    def set_params(self, **params):
        for key, val in params.items():
            head, _, rest = key.partition("__")
            if rest:
                getattr(self, head).set_params(**{rest: val})
            else:
                if head not in self._param_names():
                    raise DomainError(f"{type(self).__name__} has no parameter {head!r}")
                setattr(self, head, val)
        return self

    def clone(self):
        args = {}
        for name in self._param_names():
            val = getattr(self, name)
            args[name] = val.clone() if isinstance(val, Estimator) else val
        return type(self)(**args)

    @property
    def tuned(self):
        """True when the estimator (or any nested one) self-tunes during fit."""
        return any(v.tuned for v in self.get_params().values() if isinstance(v, Estimator))

    def _check_fitted(self):
        if not getattr(self, "fitted_", False):
            raise NotFittedError(f"{type(self).__name__} must be fitted before predicting")


class PointLearner(Estimator):
    def fit(self, X, y):
        raise NotImplementedError

    def predict(self, X):
        raise NotImplementedError

    def _check_X(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[1] != self.n_features_:
            raise ShapeError(f"expected {self.n_features_} features, got {X.shape[1]}")
        return X


class ProbEstimator(Estimator):
    def fit(self, X, y):
        raise NotImplementedError

    def predict(self, X):
        raise NotImplementedError


# ---------------------------------------------------------------------------
# point learners

def _pop_std(y, denominator="n"):
    y = np.asarray(y, dtype=float)
    ddof = 0 if denominator == "n" else 1
    return float(y.std(ddof=ddof)) if y.size > ddof else 0.0


class Constant(PointLearner):
    """Predicts a literal constant, or mean(y)/std(y) of the training targets."""

    def __init__(self, spec=0.0, std_denominator="n"):
        self.spec = spec
        self.std_denominator = std_denominator

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        self.n_features_ = 1 if X.ndim == 1 else X.shape[1]
        if self.spec == "mean(y)":
            self.value_ = float(np.mean(y))
        elif self.spec == "std(y)":
            self.value_ = _pop_std(y, self.std_denominator)
        else:
            self.value_ = float(self.spec)
        self.fitted_ = True
        return self

    def predict(self, X):
        self._check_fitted()
        X = self._check_X(X)
        return np.full(X.shape[0], self.value_)

    def __repr__(self):
        return f"C({self.spec})"


class ConstantQuantile(PointLearner):
    """Predicts the empirical alpha-quantile of the training targets."""

    def __init__(self, alpha):
        if not 0.0 < alpha < 1.0:
            raise DomainError("alpha must lie in (0, 1)")
        self.alpha = alpha

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        self.n_features_ = 1 if X.ndim == 1 else X.shape[1]
        ys = np.sort(np.asarray(y, dtype=float))
        # lower generalized inverse of the ecdf
        idx = int(np.searchsorted(np.arange(1, ys.size + 1) / ys.size, self.alpha - 1e-15))
        self.value_ = float(ys[min(idx, ys.size - 1)])
        self.fitted_ = True
        return self

    def predict(self, X):
        self._check_fitted()
        X = self._check_X(X)
        return np.full(X.shape[0], self.value_)

    def __repr__(self):
        return f"Q({self.alpha:g})"


class Ols(PointLearner):
    """Ordinary least squares with intercept; tiny-ridge fallback when singular."""

    def __init__(self):
        pass

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(y, dtype=float)
        self.n_features_ = X.shape[1]
        A = np.hstack([np.ones((X.shape[0], 1)), X])
        gram = A.T @ A
        rhs = A.T @ y
        try:
            if np.linalg.cond(gram) > 1e12:
                raise np.linalg.LinAlgError("ill-conditioned")
            coef = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError:
            warnings.warn("singular design matrix; ridge 1e-8 fallback",
                          RidgeFallbackWarning)
            coef = np.linalg.solve(gram + 1e-8 * np.eye(gram.shape[0]), rhs)
        self.intercept_ = float(coef[0])
        self.coef_ = coef[1:]
        self.fitted_ = True
        return self

    def predict(self, X):
        self._check_fitted()
        X = self._check_X(X)
        return self.intercept_ + X @ self.coef_

    def __repr__(self):
        return "LR"


class Knn(PointLearner):
    """k-nearest-neighbour mean on raw euclidean distances.

    Neighbour-distance ties break by row index (stable sort).
    """

    def __init__(self, k=5):
        self.k = int(k)

    def fit(self, X, y):
        if self.k < 1:
            raise DomainError("k must be at least 1")
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        self.X_ = np.ascontiguousarray(X)
        self.y_ = np.asarray(y, dtype=float)
        self.n_features_ = X.shape[1]
        self.k_ = self.k
        if self.k_ > self.X_.shape[0]:
            warnings.warn(f"k={self.k_} exceeds training size; clamped", ClampedKWarning)
            self.k_ = self.X_.shape[0]
        self.fitted_ = True
        return self

    def _neighbours(self, X):
        d = _kernels.pairwise_sq_dists(np.ascontiguousarray(X), self.X_)
        return np.argsort(d, axis=1, kind="stable")[:, :self.k_]

    def predict(self, X):
        self._check_fitted()
        X = self._check_X(X)
        return self.y_[self._neighbours(X)].mean(axis=1)

    def __repr__(self):
        return f"KNN(k={self.k})"


class KernelRidge(PointLearner):
    """RBF kernel ridge regression; optional feature standardization."""

    def __init__(self, lam=0.1, gamma=1.0, scale=False):
        self.lam = float(lam)
        self.gamma = float(gamma)
        self.scale = bool(scale)

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(y, dtype=float)
        self.n_features_ = X.shape[1]
        if self.scale:
            self.mu_ = X.mean(axis=0)
            sd = X.std(axis=0)
            self.sd_ = np.where(sd > 0, sd, 1.0)
            X = (X - self.mu_) / self.sd_
        self.X_ = np.ascontiguousarray(X)
        K = np.exp(-self.gamma * _kernels.pairwise_sq_dists(self.X_, self.X_))
        self.alpha_ = np.linalg.solve(K + self.lam * np.eye(K.shape[0]), y)
        self.fitted_ = True
        return self

    def predict(self, X):
        self._check_fitted()
        X = self._check_X(X)
        if self.scale:
            X = (X - self.mu_) / self.sd_
        K = np.exp(-self.gamma * _kernels.pairwise_sq_dists(np.ascontiguousarray(X), self.X_))
        return K @ self.alpha_

    def __repr__(self):
        return f"KRR(lambda={self.lam:g},gamma={self.gamma:g},scale={self.scale})"


# ---------------------------------------------------------------------------
# uninformed density baseline

class DensityBaseline(ProbEstimator):
    """Estimates one distribution from the training labels and predicts it everywhere."""

    def __init__(self, adaptor="normal", bins=10, bandwidth=None,
                 std_denominator="n", seed=0):
        if adaptor not in ("normal", "kernel", "hist"):
            raise DomainError(f"unknown density adaptor {adaptor!r}")
        self.adaptor = adaptor
        self.bins = int(bins)
        self.bandwidth = bandwidth
        self.std_denominator = std_denominator
        self.seed = seed

    def fit(self, X, y):
        y = np.asarray(y, dtype=float)
        if self.adaptor == "normal":
            mu = float(y.mean())
            sd = max(_pop_std(y, self.std_denominator), 1e-12)
            self.dist_ = Normal(mu, sd)
        elif self.adaptor == "kernel":
            bw = self.bandwidth
            if bw is None:
                # Silverman's rule; fallback when a single point or zero spread
                sd = _pop_std(y)
                bw = 1.06 * sd * y.size ** (-0.2) if sd > 0 and y.size > 1 else 1.0
            self.dist_ = KernelDensity(y, bw)
        else:
            lo, hi = float(y.min()), float(y.max())
            if hi <= lo:
                lo, hi = lo - 0.5, hi + 0.5
            edges = np.linspace(lo, hi, self.bins + 1)
            counts, _ = np.histogram(y, bins=edges)
            self.dist_ = Histogram(edges, counts / counts.sum())
        self.fitted_ = True
        return self

    def predict(self, X):
        self._check_fitted()
        X = np.asarray(X, dtype=float)
        n = X.shape[0] if X.ndim > 0 else 1
        return PredictedBatch([self.dist_] * n, estimator_id=repr(self))

    def __repr__(self):
        return f"Baseline({self.adaptor})"


def density_baseline(adaptor="normal", **kw):
    return DensityBaseline(adaptor=adaptor, **kw)


# ---------------------------------------------------------------------------
# exhaustive grid search with inner CV

def _squared_point_loss(pred, y):
    return float(np.mean((np.asarray(pred) - np.asarray(y)) ** 2))


def grid_search(estimator, grid, folds=5, loss=None, seed=0, data=None, X=None, y=None):
    """Exhaustive parameter search by inner k-fold CV mean loss.

    Ties break in favour of the earliest grid entry; the winner is refit on
    the full data.  Returns (fitted estimator, best params, best loss).
    """
    if data is not None:
        X, y = data.features, data.targets
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if not grid:
        raise DomainError("grid must be nonempty")
    if folds < 2:
        raise DomainError("need at least 2 inner folds")
    names = list(grid.keys())
    combos = [()]
    for name in names:
        combos = [c + (v,) for c in combos for v in grid[name]]

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    order = rng.permutation(X.shape[0])
    fold_ids = np.array_split(order, folds)

    best = None
    for combo in combos:
        params = dict(zip(names, combo))
        total, count = 0.0, 0
        for fi in range(folds):
            test_idx = fold_ids[fi]
            train_idx = np.concatenate([fold_ids[j] for j in range(folds) if j != fi])
            if test_idx.size == 0 or train_idx.size == 0:
                continue
            cand = estimator.clone().set_params(**params)
            cand.fit(X[train_idx], y[train_idx])
            if isinstance(cand, PointLearner):
                fold_loss = (_squared_point_loss if loss is None else loss)(
                    cand.predict(X[test_idx]), y[test_idx])
            else:
                batch = cand.predict(X[test_idx])
                if loss is None:
                    raise DomainError("probabilistic grid search needs a loss")
                if hasattr(loss, "calibrate"):
                    loss.calibrate(y[train_idx])
                fold_loss = float(np.mean([loss(p, t) for p, t in zip(batch, y[test_idx])]))
            total += fold_loss
            count += 1
        mean_loss = total / count if count else math.inf
        if best is None or mean_loss < best[1]:
            best = (params, mean_loss)
    if best is None or not math.isfinite(best[1]):
        raise TuningFailed("all grid candidates produced infinite loss")
    winner = estimator.clone().set_params(**best[0])
    winner.fit(X, y)
    return winner, best[0], best[1]
