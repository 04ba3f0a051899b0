"""Adaptors and composition strategies: point learners in, probabilistic predictors out."""

from __future__ import annotations

import math
import warnings

import numpy as np

from .distributions import (Empirical, Histogram, KernelDensity, Laplace, Mixture,
                            Normal, Uniform, affine_map, mixture, pushforward,
                            sigmoid_reference)
from .errors import DomainError, OutOfRange, TinyDispersionWarning
from .learners import (Constant, DensityBaseline, Estimator, PointLearner,
                       PredictedBatch, ProbEstimator)

_TINY = 1e-12
_SQRT3 = math.sqrt(3.0)
_SQRT2 = math.sqrt(2.0)


def _shape_dist(shape, loc, s):
    """Two-parameter distribution with mean ``loc`` and std ``s`` (variance-matched)."""
    s = max(float(s), _TINY)
    if shape == "normal":
        return Normal(loc, s)
    if shape == "laplace":
        return Laplace(loc, s / _SQRT2)
    if shape == "uniform":
        return Uniform(loc - _SQRT3 * s, loc + _SQRT3 * s)
    raise DomainError(f"unknown shape {shape!r}")


class ResidualEstimator(PointLearner):
    """Second-stage learner on transformed residuals of the location prediction.

    transform: squared -> rho = (yhat-y)^2, back sqrt; abs -> |yhat-y|, identity;
    log -> log(|yhat-y| + 1e-12), back exp.  Predictions are clamped nonnegative.
    """

    def __init__(self, inner, transform="squared", base="point"):
        if transform not in ("squared", "abs", "log"):
            raise DomainError(f"unknown residual transform {transform!r}")
        self.inner = inner
        self.transform = transform
        self.base = base

    def fit(self, X, y):
        raise DomainError("residual estimator is fitted with base predictions "
                          "by the enclosing parametric estimator")

    def fit_with_base(self, X, y, base_pred):
        err = np.abs(np.asarray(base_pred) - np.asarray(y, dtype=float))
        if self.transform == "squared":
            rho = err ** 2
        elif self.transform == "abs":
            rho = err
        else:
            rho = np.log(err + 1e-12)
        self.inner.fit(X, rho)
        self.n_features_ = self.inner.n_features_
        self.fitted_ = True
        return self

    def predict(self, X):
        self._check_fitted()
        raw = self.inner.predict(X)
        if self.transform == "squared":
            out = np.sqrt(np.clip(raw, 0.0, None))
        elif self.transform == "abs":
            out = raw
        else:
            out = np.exp(raw)
        return np.clip(out, 0.0, None)

    def __repr__(self):
        tail = "" if self.transform == "squared" else f", {self.transform}"
        return f"RE(p, {self.inner!r}{tail})"


DEFAULT_MIN_GRID = (0.0, 1.0, 2.0, 4.0, 8.0, 32.0)


class MinBounded(PointLearner):
    """Lower-bounds a dispersion learner's predictions by kappa.

    kappa=None requests tuning by the enclosing composite's nested CV over
    ``grid``; a standalone fit then behaves as kappa=0.
    """

    def __init__(self, inner, kappa=None, grid=DEFAULT_MIN_GRID):
        self.inner = inner
        self.kappa = kappa
        self.grid = tuple(float(g) for g in grid)

    def fit(self, X, y):
        self.inner.fit(X, y)
        self.n_features_ = self.inner.n_features_
        self.fitted_ = True
        return self

    def fit_with_base(self, X, y, base_pred):
        self.inner.fit_with_base(X, y, base_pred)
        self.n_features_ = self.inner.n_features_
        self.fitted_ = True
        return self

    def predict(self, X):
        self._check_fitted()
        kappa = 0.0 if self.kappa is None else float(self.kappa)
        return np.maximum(kappa, self.inner.predict(X))

    @property
    def tuned(self):
        return self.kappa is None or self.inner.tuned

    def __repr__(self):
        tail = "" if self.grid == DEFAULT_MIN_GRID else \
            ", " + ";".join(f"{g:g}" for g in self.grid)
        return f"Min({self.inner!r}{tail})"


def min_wrapper(inner, grid=DEFAULT_MIN_GRID):
    return MinBounded(inner, kappa=None, grid=grid)


def _collect_min_paths(est, prefix=""):
    """Parameter paths of MinBounded nodes that still need a kappa."""
    out = []
    for name, val in est.get_params().items():
        if isinstance(val, MinBounded) and val.kappa is None:
            out.append((f"{prefix}{name}__kappa", val.grid))
        if isinstance(val, Estimator):
            out.extend(_collect_min_paths(val, prefix=f"{prefix}{name}__"))
    return out


class ParametricEstimator(ProbEstimator):
    """Location + dispersion point learners composed into a parametric shape.

    Any nested Min node with unset kappa is tuned during fit by nested k-fold
    CV of the whole composite under the capped log-loss.
    """

    def __init__(self, shape="normal", point=None, disp=None,
                 tune_folds=5, seed=0):
        self.shape = shape
        self.point = point if point is not None else Constant("mean(y)")
        self.disp = disp if disp is not None else Constant("std(y)")
        self.tune_folds = tune_folds
        self.seed = seed

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(y, dtype=float)
        paths = _collect_min_paths(self)
        if paths:
            self._tune_min(X, y, paths)
        self.point.fit(X, y)
        base_pred = self.point.predict(X)
        if hasattr(self.disp, "fit_with_base"):
            self.disp.fit_with_base(X, y, base_pred)
        else:
            self.disp.fit(X, y)
        self.fitted_ = True
        return self

    def _tune_min(self, X, y, paths):
        from .losses import CappedLogLoss
        from .validation import kfold_cv

        loss = CappedLogLoss(1e-10)
        names = [p for p, _ in paths]
        combos = [()]
        for _, grid in paths:
            combos = [c + (v,) for c in combos for v in grid]
        best = None
        for combo in combos:
            cand = self.clone()
            for name, val in zip(names, combo):
                cand.set_params(**{name: val})
            res = kfold_cv(cand, None, self.tune_folds, loss, self.seed, X=X, y=y)
            if best is None or res.mean < best[1]:
                best = (combo, res.mean)
        for name, val in zip(names, best[0]):
            self.set_params(**{name: val})

    def predict(self, X):
        self._check_fitted()
        loc = self.point.predict(X)
        s = self.disp.predict(X)
        if np.any(s < _TINY):
            warnings.warn("dispersion clamped at 1e-12", TinyDispersionWarning)
        dists = [_shape_dist(self.shape, float(m), float(v)) for m, v in zip(loc, s)]
        return PredictedBatch(dists, estimator_id=repr(self))

    @property
    def tuned(self):
        return bool(_collect_min_paths(self)) or super().tuned

    def __repr__(self):
        letter = {"normal": "N", "laplace": "Laplace", "uniform": "Uniform"}[self.shape]
        return f"{letter}(p={self.point!r}, s={self.disp!r})"


def parametric_estimator(shape, point, disp, **kw):
    return ParametricEstimator(shape=shape, point=point, disp=disp, **kw)


# ---------------------------------------------------------------------------
# elicitation

_ELICITABLE = {"mean": "squared", "median": "absolute", "quantile": "quantile"}


def point_loss_value(tag, c, ys):
    """Mean point-prediction loss of constant c against sample ys."""
    ys = np.asarray(ys, dtype=float)
    if tag == "squared":
        return float(np.mean((c - ys) ** 2))
    if tag == "absolute":
        return float(np.mean(np.abs(c - ys)))
    if isinstance(tag, tuple) and tag[0] == "quantile":
        alpha = tag[1]
        return float(np.mean(alpha * np.maximum(ys - c, 0.0)
                             + (1.0 - alpha) * np.maximum(c - ys, 0.0)))
    raise DomainError(f"unknown point loss {tag!r}")


def elicit(tag, sample, grid=None):
    """Grid argmin of the expected point loss; ties break to the lowest value."""
    ys = np.asarray(sample, dtype=float)
    if grid is None:
        lo, hi = ys.min(), ys.max()
        grid = np.linspace(lo, hi, 2001)
    grid = np.asarray(grid, dtype=float)
    vals = np.array([point_loss_value(tag, c, ys) for c in grid])
    best = vals.min()
    tied = np.flatnonzero(vals <= best + 1e-12 * max(1.0, abs(best)))
    return float(grid[tied[0]])


class ElicitationEstimator(ProbEstimator):
    """Composes point learners for elicitable parameters into a shape.

    Provided shapes: 'laplace' (median learner; scale from absolute residuals)
    and 'uniform' (two quantile learners, extrapolated to the endpoints).
    Variance-parameterized shapes are rejected: the variance of a distribution
    cannot be elicited.
    """

    def __init__(self, shape, learners, losses):
        if shape in ("normal", "variance"):
            raise DomainError("the variance parameter cannot be elicited; "
                              "use the residual-composition adaptor instead")
        if shape == "laplace":
            if list(losses) != ["absolute"]:
                raise DomainError("laplace shape requires the absolute loss (median)")
        elif shape == "uniform":
            if (len(losses) != 2 or any(not (isinstance(l, tuple) and l[0] == "quantile")
                                        for l in losses)):
                raise DomainError("uniform shape requires two quantile losses")
        else:
            raise DomainError(f"unknown elicitation shape {shape!r}")
        self.shape = shape
        self.learners = list(learners)
        self.losses = list(losses)

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        for lr in self.learners:
            lr.fit(X, y)
        if self.shape == "laplace":
            med = self.learners[0].predict(X)
            self._scale = Constant("mean(y)")
            self._scale.fit(X, np.abs(y - med))
        self.fitted_ = True
        return self

    def predict(self, X):
        self._check_fitted()
        if self.shape == "laplace":
            med = self.learners[0].predict(X)
            b = np.clip(self._scale.predict(X), _TINY, None)
            dists = [Laplace(float(m), float(s)) for m, s in zip(med, b)]
        else:
            a1, a2 = self.losses[0][1], self.losses[1][1]
            q1 = self.learners[0].predict(X)
            q2 = self.learners[1].predict(X)
            span = (q2 - q1) / (a2 - a1)
            lo = q1 - a1 * span
            hi = q2 + (1.0 - a2) * span
            dists = [Uniform(l, h) if h > l else Uniform(l - _TINY, l + _TINY)
                     for l, h in zip(lo, hi)]
        return PredictedBatch(dists, estimator_id=f"Elicited({self.shape})")


def elicitation_adaptor(shape, losses, learners):
    return ElicitationEstimator(shape, learners, losses)


# ---------------------------------------------------------------------------
# sample-to-distribution adaptors

def kernel_density_adaptor(sample, B, b, shape="gaussian", fallback_sigma=1.0,
                           rng=None, weights=None):
    """Bootstrap-bagged kernel density: B subsets of size b, per-subset bandwidth.

    Kernels are normalized per subset size so the result is a true density;
    with b=1 and fixed fallback bandwidth this is classical KDE.
    """
    sample = np.asarray(sample, dtype=float)
    if sample.size == 0:
        raise DomainError("sample must be nonempty")
    if rng is None:
        rng = np.random.default_rng(0)
    atoms, bws = [], []
    for _ in range(int(B)):
        sub = rng.choice(sample, size=int(b), replace=True, p=weights)
        sd = float(np.std(sub))
        sigma = sd if (b > 1 and sd > 0) else float(fallback_sigma)
        atoms.append(sub)
        bws.append(np.full(int(b), sigma))
    return KernelDensity(np.concatenate(atoms), np.concatenate(bws), shape)


def histogram_adaptor(sample, edges):
    """Histogram density over contiguous bins; samples must fall inside them."""
    sample = np.asarray(sample, dtype=float)
    edges = np.asarray(edges, dtype=float)
    if np.any(sample < edges[0]) or np.any(sample > edges[-1]):
        raise OutOfRange("sample point outside all bins")
    counts, _ = np.histogram(sample, bins=edges)
    return Histogram(edges, counts / counts.sum())


def convolution_adaptor(p, noise, m, rng=None):
    """Approximation of the smoothed prediction p * p_Z.

    Atom part is exact: each atom contributes a shifted copy of the noise
    density, with the atom's weight.  The continuous part uses m seeded noise
    draws, fixed once, so the returned density is a consistent function.
    """
    alpha_c, q, atoms, wts = p.decompose()
    comps, weights = [], []
    alpha_d = 1.0 - alpha_c
    for a, w in zip(atoms, wts):
        comps.append(pushforward(noise, affine_map(1.0, float(a))))
        weights.append(alpha_d * float(w))
    if alpha_c > 0.0:
        if m <= 0:
            raise DomainError("continuous part requires at least one draw")
        if rng is None:
            rng = np.random.default_rng(0)
        zs = noise.sample(rng, int(m))
        for z in zs:
            comps.append(pushforward(q, affine_map(1.0, float(z))))
            weights.append(alpha_c / float(m))
    if len(comps) == 1:
        return comps[0]
    return Mixture(comps, np.asarray(weights) / np.sum(weights))


# ---------------------------------------------------------------------------
# wrappers around probabilistic estimators

class CappingMixture(ProbEstimator):
    """Mixes every prediction with a fixed reference density (outlier capping)."""

    def __init__(self, base, eps=1e-10, reference="uniform01"):
        if not 0.0 <= eps < 1.0:
            raise DomainError("eps must lie in [0, 1)")
        if reference not in ("uniform01", "sigmoid"):
            raise DomainError(f"unknown reference {reference!r}")
        self.base = base
        self.eps = float(eps)
        self.reference = reference

    def _ref_dist(self):
        return Uniform(0.0, 1.0) if self.reference == "uniform01" else sigmoid_reference()

    def fit(self, X, y):
        self.base.fit(X, y)
        self.fitted_ = True
        return self

    def predict(self, X):
        self._check_fitted()
        inner = self.base.predict(X)
        if self.eps == 0.0:
            return PredictedBatch(list(inner), estimator_id=repr(self))
        ref = self._ref_dist()
        dists = [mixture([ref, d], [self.eps, 1.0 - self.eps]) for d in inner]
        return PredictedBatch(dists, estimator_id=repr(self))

    def __repr__(self):
        return f"Cap({self.base!r}, eps={self.eps:g}, ref={self.reference})"


def capping_mixture(base, eps, reference="uniform01"):
    return CappingMixture(base, eps, reference)


class ClassicalBaseline(ProbEstimator):
    """Point learner plus a density estimate of its signed residuals, shifted."""

    def __init__(self, point, density="normal", bins=10, bandwidth=None):
        self.point = point
        self.density = density
        self.bins = bins
        self.bandwidth = bandwidth

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        self.point.fit(X, y)
        resid = y - self.point.predict(X)
        est = DensityBaseline(adaptor=self.density, bins=self.bins,
                              bandwidth=self.bandwidth)
        est.fit(X, resid)
        self.resid_dist_ = est.dist_
        if self.density == "normal" and self.resid_dist_.sigma <= _TINY:
            warnings.warn("degenerate residual density; dispersion clamped",
                          TinyDispersionWarning)
        self.fitted_ = True
        return self

    def predict(self, X):
        self._check_fitted()
        shifts = self.point.predict(X)
        dists = [pushforward(self.resid_dist_, affine_map(1.0, float(s))) for s in shifts]
        return PredictedBatch(dists, estimator_id=repr(self))

    def __repr__(self):
        return f"ClassicalBaseline({self.point!r}, {self.density})"


def classical_baseline(point, density="normal", **kw):
    return ClassicalBaseline(point, density, **kw)


# ---------------------------------------------------------------------------

def point_adaptor(batch, mode="mean"):
    """Summarize a prediction batch into point values.

    mode='mean' takes predictive means; mode=('elicited', tag) grid-minimizes
    the expected point loss over each predicted distribution.
    """
    if mode == "mean":
        out = []
        for d in batch:
            m = d.mean()
            if not math.isfinite(m):
                raise DomainError("predicted distribution lacks a finite mean")
            out.append(m)
        return np.asarray(out)
    kind, tag = mode
    if kind != "elicited":
        raise DomainError(f"unknown point adaptor mode {mode!r}")
    out = []
    n = 512
    qs = (np.arange(n) + 0.5) / n
    for d in batch:
        sample = np.asarray(d.quantile(qs), dtype=float)
        out.append(elicit(tag, sample, grid=np.unique(sample)))
    return np.asarray(out)
