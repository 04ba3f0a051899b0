"""Point learners, density baseline, estimator contracts, grid search."""

import math
import warnings

import numpy as np
import pytest

from distreg.distributions import Normal, adaptive_simpson, _integration_bounds
from distreg.errors import (ClampedKWarning, DomainError, NotFittedError,
                            RidgeFallbackWarning, ShapeError, TuningFailed)
from distreg.learners import (Constant, ConstantQuantile, Dataset,
                              DensityBaseline, KernelRidge, Knn, Ols,
                              grid_search)
from distreg.losses import LogLoss, log_loss
from distreg.composite import ParametricEstimator


class TestDataset:
    def test_shape_checks(self):
        with pytest.raises(ShapeError):
            Dataset(np.zeros((3, 2)), np.zeros(4))

    def test_columns_defaulted(self):
        d = Dataset(np.zeros((2, 3)), np.zeros(2))
        assert d.columns == ["x0", "x1", "x2"]
        assert (d.n_rows, d.n_features) == (2, 3)


class TestConstant:
    def test_mean_of_targets(self):
        c = Constant("mean(y)").fit(np.zeros((2, 1)), np.array([0.0, 2.0]))
        assert c.predict(np.zeros((5, 1))).tolist() == [1.0] * 5

    def test_literal(self):
        c = Constant(42.0).fit(np.zeros((2, 1)), np.array([0.0, 2.0]))
        assert c.predict(np.zeros((1, 1)))[0] == 42.0

    def test_std_denominator_flag(self):
        y = np.array([0.0, 2.0])
        pop = Constant("std(y)").fit(np.zeros((2, 1)), y)
        samp = Constant("std(y)", std_denominator="n-1").fit(np.zeros((2, 1)), y)
        assert pop.value_ == pytest.approx(1.0)
        assert samp.value_ == pytest.approx(math.sqrt(2.0))


class TestOls:
    def test_recovers_line(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(40, 2))
        y = 2.0 * X[:, 0] - 1.5 * X[:, 1] + 0.7
        m = Ols().fit(X, y)
        np.testing.assert_allclose(m.coef_, [2.0, -1.5], atol=1e-9)
        assert m.intercept_ == pytest.approx(0.7, abs=1e-9)
        np.testing.assert_allclose(m.predict(X), y, atol=1e-9)

    def test_out_of_sample_line(self):
        X = np.arange(10.0)[:, None]
        m = Ols().fit(X, 2.0 * X[:, 0] + 1.0)
        Xs = np.array([[20.0], [-5.0]])
        np.testing.assert_allclose(m.predict(Xs), [41.0, -9.0], atol=1e-9)

    def test_singular_fallback_flagged(self):
        X = np.ones((10, 2))  # duplicated constant columns: singular gram
        y = np.arange(10.0)
        with pytest.warns(RidgeFallbackWarning):
            m = Ols().fit(X, y)
        assert np.all(np.isfinite(m.predict(X)))

    def test_dimension_mismatch(self):
        m = Ols().fit(np.zeros((5, 2)), np.zeros(5))
        with pytest.raises(ShapeError):
            m.predict(np.zeros((3, 4)))

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            Ols().predict(np.zeros((1, 1)))


class TestKnn:
    def test_k1_returns_training_label(self):
        X = np.array([[0.0], [1.0], [2.0]])
        y = np.array([5.0, 7.0, 9.0])
        m = Knn(k=1).fit(X, y)
        assert m.predict(np.array([[1.0]]))[0] == 7.0

    def test_k_clamped_with_warning(self):
        with pytest.warns(ClampedKWarning):
            m = Knn(k=50).fit(np.zeros((3, 1)), np.array([1.0, 2.0, 3.0]))
        assert m.k_ == 3

    def test_distance_ties_break_by_row_index(self):
        X = np.array([[0.0], [0.0], [0.0]])
        y = np.array([1.0, 2.0, 3.0])
        m = Knn(k=2).fit(X, y)
        # equidistant: first two training rows win
        assert m.predict(np.array([[0.0]]))[0] == pytest.approx(1.5)

    def test_k_zero_rejected(self):
        with pytest.raises(DomainError):
            Knn(k=0).fit(np.zeros((3, 1)), np.zeros(3))


class TestKernelRidge:
    def test_identical_inputs_closed_form(self):
        # all training features equal x: mu(x) = sum(y) / (N + lambda / k(x,x))
        rng = np.random.default_rng(1)
        n, lam = 12, 0.5
        X = np.tile([[0.3, -0.2]], (n, 1))
        y = rng.normal(size=n)
        m = KernelRidge(lam=lam, gamma=0.7).fit(X, y)
        kxx = 1.0  # rbf at zero distance
        expected = y.sum() / (n + lam / kxx)
        assert m.predict(X[:1])[0] == pytest.approx(expected, abs=1e-10)

    def test_scaling_flag(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(30, 2)) * np.array([100.0, 0.01])
        y = X[:, 0] / 100 + rng.normal(scale=0.01, size=30)
        m = KernelRidge(lam=0.01, gamma=1.0, scale=True).fit(X, y)
        assert np.all(np.isfinite(m.predict(X)))


class TestEstimatorContract:
    def test_param_roundtrip_identical_predictions(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(25, 2))
        y = rng.normal(size=25)
        est = ParametricEstimator("normal", Knn(k=3), Constant("std(y)"))
        params = est.get_params(deep=True)
        clone = est.clone().set_params(**{k: v for k, v in params.items()
                                          if "__" not in k and k not in ("point", "disp")})
        est.fit(X, y)
        clone.fit(X, y)
        a = est.predict(X[:5])
        b = clone.predict(X[:5])
        for da, db in zip(a, b):
            assert da.mu == db.mu and da.sigma == db.sigma

    def test_refit_determinism(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(30, 1))
        y = rng.normal(size=30)
        m1 = DensityBaseline("kernel").fit(X, y)
        m2 = DensityBaseline("kernel").fit(X, y)
        xs = np.linspace(-2, 2, 9)
        np.testing.assert_array_equal(np.asarray(m1.dist_.pdf(xs)),
                                      np.asarray(m2.dist_.pdf(xs)))

    def test_clone_is_unfitted(self):
        m = Constant(1.0).fit(np.zeros((2, 1)), np.zeros(2))
        with pytest.raises(NotFittedError):
            m.clone().predict(np.zeros((1, 1)))


class TestDensityBaseline:
    def test_parametric_normal_values(self):
        b = DensityBaseline("normal").fit(np.zeros((2, 1)), np.array([0.0, 2.0]))
        batch = b.predict(np.zeros((3, 1)))
        assert isinstance(batch[0], Normal)
        assert batch[0].mu == 1.0 and batch[0].sigma == 1.0

    def test_uninformed_constant_across_rows(self):
        rng = np.random.default_rng(5)
        b = DensityBaseline("normal").fit(rng.normal(size=(50, 2)), rng.normal(size=50))
        batch = b.predict(rng.normal(size=(100, 2)))
        assert all(d is batch[0] for d in batch)

    def test_feature_permutation_leaves_predictions_unchanged(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(40, 2))
        y = rng.normal(size=40)
        b1 = DensityBaseline("normal").fit(X, y)
        b2 = DensityBaseline("normal").fit(X[rng.permutation(40)], y)
        assert b1.dist_.mu == b2.dist_.mu and b1.dist_.sigma == b2.dist_.sigma

    def test_log_loss_near_differential_entropy(self):
        # oracle: differential entropy of the standard normal
        rng = np.random.default_rng(7)
        y = rng.normal(size=10 ** 4)
        b = DensityBaseline("normal").fit(np.zeros((y.size, 1)), y)
        fresh = rng.normal(size=10 ** 4)
        losses = [log_loss(b.dist_, v) for v in fresh]
        target = 0.5 * math.log(2 * math.pi * math.e)
        assert np.mean(losses) == pytest.approx(target, abs=0.05)
        assert target == pytest.approx(1.4189, abs=1e-4)

    @pytest.mark.parametrize("adaptor", ["kernel", "hist"])
    def test_nonparametric_density_integrates(self, adaptor):
        rng = np.random.default_rng(8)
        y = rng.normal(size=200)
        b = DensityBaseline(adaptor).fit(np.zeros((200, 1)), y)
        a, hi = _integration_bounds(b.dist_)
        assert adaptive_simpson(lambda t: float(b.dist_.pdf(t)), a, hi) == \
            pytest.approx(1.0, abs=1e-4)

    def test_single_point_kernel_fallback(self):
        b = DensityBaseline("kernel").fit(np.zeros((1, 1)), np.array([3.0]))
        assert b.dist_.bandwidths[0] == 1.0


class TestConstantQuantile:
    def test_empirical_quantile(self):
        y = np.arange(1.0, 11.0)
        m = ConstantQuantile(0.3).fit(np.zeros((10, 1)), y)
        assert m.predict(np.zeros((1, 1)))[0] == 3.0


class TestGridSearch:
    def test_single_candidate_equals_plain_fit(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(30, 1))
        y = rng.normal(size=30)
        won, params, _ = grid_search(Knn(k=3), {"k": [3]}, folds=5, seed=0, X=X, y=y)
        assert params == {"k": 3}
        np.testing.assert_array_equal(won.predict(X), Knn(k=3).fit(X, y).predict(X))

    def test_generating_parameter_wins(self):
        wins = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            X = rng.normal(size=(80, 1))
            y = rng.normal(0.0, 2.0, size=80)
            est = ParametricEstimator("normal", Constant("mean(y)"), Constant(2.0))
            _, params, _ = grid_search(est, {"disp__spec": [0.5, 2.0, 8.0]},
                                       folds=5, loss=LogLoss(), seed=seed, X=X, y=y)
            wins += params["disp__spec"] == 2.0
        assert wins >= 18

    def test_knn_smoother_wins_on_noise(self):
        wins = 0
        for seed in range(20):
            rng = np.random.default_rng((10, seed))
            X = rng.normal(size=(60, 1))
            y = rng.normal(size=60)
            _, params, _ = grid_search(Knn(), {"k": [1, 50]}, folds=5, seed=seed,
                                       X=X, y=y)
            wins += params["k"] == 50
        assert wins >= 16

    def test_all_infinite_raises(self):
        X = np.zeros((20, 1))
        y = np.concatenate([np.zeros(10), np.full(10, 100.0)])
        est = ParametricEstimator("uniform", Constant("mean(y)"), Constant(1e-6))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            with pytest.raises(TuningFailed):
                grid_search(est, {"disp__spec": [1e-6, 1e-5]}, folds=5,
                            loss=LogLoss(), seed=0, X=X, y=y)
