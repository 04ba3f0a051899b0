"""Composition strategies and sample adaptors."""

import math
import warnings

import numpy as np
import pytest

from distreg.composite import (CappingMixture, ClassicalBaseline,
                               ElicitationEstimator, MinBounded,
                               ParametricEstimator, ResidualEstimator,
                               convolution_adaptor, elicit, histogram_adaptor,
                               kernel_density_adaptor, min_wrapper,
                               point_adaptor)
from distreg.distributions import (Empirical, Laplace, Normal, Uniform,
                                   adaptive_simpson, _integration_bounds)
from distreg.errors import DomainError, OutOfRange, TinyDispersionWarning
from distreg.learners import Constant, ConstantQuantile, DensityBaseline, Ols
from distreg.losses import capped_log_loss, log_loss
from distreg.validation import kfold_cv
from distreg.losses import CappedLogLoss


class TestParametricEstimator:
    def test_normal_from_constants(self):
        est = ParametricEstimator("normal", Constant("mean(y)"), Constant("std(y)"))
        est.fit(np.zeros((2, 1)), np.array([0.0, 2.0]))
        d = est.predict(np.zeros((1, 1)))[0]
        assert isinstance(d, Normal) and d.mu == 1.0 and d.sigma == 1.0

    def test_laplace_scale_is_std_over_sqrt2(self):
        est = ParametricEstimator("laplace", Constant("mean(y)"), Constant("std(y)"))
        est.fit(np.zeros((2, 1)), np.array([0.0, 2.0]))
        d = est.predict(np.zeros((1, 1)))[0]
        assert isinstance(d, Laplace) and d.b == pytest.approx(1 / math.sqrt(2))
        assert d.std() == pytest.approx(1.0)

    def test_uniform_variance_matched(self):
        est = ParametricEstimator("uniform", Constant(0.0), Constant(1.0))
        est.fit(np.zeros((2, 1)), np.array([0.0, 2.0]))
        d = est.predict(np.zeros((1, 1)))[0]
        assert isinstance(d, Uniform)
        assert d.lo == pytest.approx(-math.sqrt(3)) and d.hi == pytest.approx(math.sqrt(3))
        assert d.std() == pytest.approx(1.0)

    def test_uninformed_composite_ignores_features(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(30, 2))
        y = rng.normal(size=30)
        est = ParametricEstimator("normal", Constant("mean(y)"), Constant("std(y)"))
        a = est.fit(X, y).predict(X[:1])[0]
        b = est.fit(X[rng.permutation(30)], y).predict(X[:1])[0]
        assert a.mu == b.mu and a.sigma == b.sigma


class TestResidualEstimator:
    def _fit(self, transform, resid_value=2.0):
        X = np.zeros((6, 1))
        base_pred = np.zeros(6)
        y = np.full(6, resid_value)  # |residual| constant
        re = ResidualEstimator(Constant("mean(y)"), transform=transform)
        re.fit_with_base(X, y, base_pred)
        return re.predict(np.zeros((3, 1)))

    def test_abs_constant_residual(self):
        np.testing.assert_allclose(self._fit("abs"), 2.0)

    def test_squared_round_trip(self):
        np.testing.assert_allclose(self._fit("squared"), 2.0, rtol=1e-12)

    def test_transform_consistency_on_constant_residuals(self):
        vals = [self._fit(t) for t in ("squared", "abs", "log")]
        np.testing.assert_allclose(vals[0], vals[1], rtol=1e-9)
        np.testing.assert_allclose(vals[0], vals[2], rtol=1e-9)

    def test_plain_fit_rejected(self):
        with pytest.raises(DomainError):
            ResidualEstimator(Constant(1.0)).fit(np.zeros((2, 1)), np.zeros(2))

    def test_nonnegative_clamp(self):
        re = ResidualEstimator(Constant(-3.0), transform="abs")
        re.fit_with_base(np.zeros((4, 1)), np.ones(4), np.zeros(4))
        assert np.all(re.predict(np.zeros((2, 1))) == 0.0)


class TestMinWrapper:
    def test_kappa_zero_is_identity(self):
        inner = Constant(0.7)
        m = MinBounded(inner, kappa=0.0).fit(np.zeros((3, 1)), np.ones(3))
        np.testing.assert_allclose(m.predict(np.zeros((2, 1))), 0.7)

    def test_kappa_floors_inner_zero(self):
        m = MinBounded(Constant(0.0), kappa=2.0).fit(np.zeros((3, 1)), np.ones(3))
        np.testing.assert_allclose(m.predict(np.zeros((2, 1))), 2.0)

    def test_tuned_flag(self):
        est = ParametricEstimator("normal", Ols(), min_wrapper(
            ResidualEstimator(Constant("std(y)"))))
        assert est.tuned
        plain = ParametricEstimator("normal", Ols(), Constant("std(y)"))
        assert not plain.tuned

    def test_wrapped_capped_loss_no_worse_on_heteroscedastic(self):
        # occasional near-zero dispersion predictions; paired over seeds
        loss = CappedLogLoss(1e-10)
        wins = 0
        for seed in range(20):
            rng = np.random.default_rng((77, seed))
            n = 80
            X = rng.uniform(-1, 1, size=(n, 1))
            scale = np.where(X[:, 0] > 0.8, 1e-3, 1.0)
            y = rng.normal(0.0, scale)
            wrapped = ParametricEstimator(
                "normal", Constant(0.0),
                MinBounded(ResidualEstimator(Constant("mean(y)")), kappa=None,
                           grid=(0.0, 0.5, 1.0)), seed=seed)
            plain = ParametricEstimator(
                "normal", Constant(0.0), ResidualEstimator(Constant("mean(y)")))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                rw = kfold_cv(wrapped, None, 4, loss, seed=seed, X=X, y=y)
                rp = kfold_cv(plain, None, 4, loss, seed=seed, X=X, y=y)
            wins += rw.mean <= rp.mean + 1e-9
        assert wins >= 14


class TestElicitation:
    def test_squared_elicits_mean(self):
        # grid argmin of E[L_sq] on pmf {0: .5, 10: .5} -> 5
        sample = np.array([0.0] * 500 + [10.0] * 500)
        assert elicit("squared", sample, np.linspace(0, 10, 201)) == pytest.approx(5.0)

    def test_absolute_elicits_median_lower_tiebreak(self):
        sample = np.array([0.0] * 500 + [10.0] * 500)
        got = elicit("absolute", sample, np.linspace(0, 10, 101))
        assert got == 0.0

    def test_quantile_loss_elicits_quantile(self):
        rng = np.random.default_rng(4)
        sample = rng.uniform(size=20000)
        got = elicit(("quantile", 0.25), sample, np.linspace(0, 1, 201))
        assert got == pytest.approx(0.25, abs=0.02)

    def test_variance_rejected(self):
        with pytest.raises(DomainError):
            ElicitationEstimator("normal", [Ols(), Ols()], ["squared", "variance"])

    def test_laplace_shape(self):
        rng = np.random.default_rng(5)
        y = rng.laplace(2.0, 1.5, size=4000)
        est = ElicitationEstimator("laplace", [Constant("mean(y)")], ["absolute"])
        est.fit(np.zeros((y.size, 1)), y)
        d = est.predict(np.zeros((1, 1)))[0]
        assert isinstance(d, Laplace)
        assert d.b == pytest.approx(1.5, abs=0.15)  # E|Y - mu| = b

    def test_uniform_from_two_quantiles(self):
        rng = np.random.default_rng(6)
        y = rng.uniform(0.0, 4.0, size=8000)
        est = ElicitationEstimator("uniform",
                                   [ConstantQuantile(0.25), ConstantQuantile(0.75)],
                                   [("quantile", 0.25), ("quantile", 0.75)])
        est.fit(np.zeros((y.size, 1)), y)
        d = est.predict(np.zeros((1, 1)))[0]
        assert d.lo == pytest.approx(0.0, abs=0.15)
        assert d.hi == pytest.approx(4.0, abs=0.15)


class TestKernelDensityAdaptor:
    def test_classical_kde_integrates(self):
        rng = np.random.default_rng(7)
        sample = rng.normal(size=100)
        kde = kernel_density_adaptor(sample, B=100, b=1, fallback_sigma=0.4, rng=rng)
        a, b = _integration_bounds(kde)
        assert adaptive_simpson(lambda t: float(kde.pdf(t)), a, b) == \
            pytest.approx(1.0, abs=1e-6)

    def test_single_atom_is_the_kernel(self):
        kde = kernel_density_adaptor(np.array([3.0]), B=1, b=1, fallback_sigma=0.5,
                                     rng=np.random.default_rng(0))
        ref = Normal(3.0, 0.5)
        xs = np.linspace(1.0, 5.0, 21)
        np.testing.assert_allclose(np.asarray(kde.pdf(xs)), ref.pdf(xs), atol=1e-12)

    def test_kde_log_loss_gap_small(self):
        rng = np.random.default_rng(8)
        sample = rng.normal(size=10 ** 4)
        sd = float(np.std(sample))
        bw = 1.06 * sd * sample.size ** (-0.2)
        kde = kernel_density_adaptor(sample, B=sample.size, b=1, fallback_sigma=bw,
                                     rng=rng)
        fresh = rng.normal(size=2000)
        kde_loss = np.mean([log_loss(kde, v) for v in fresh])
        true_loss = np.mean([log_loss(Normal(0, 1), v) for v in fresh])
        assert kde_loss - true_loss < 0.05


class TestHistogramAdaptor:
    def test_single_bin_uniform(self):
        h = histogram_adaptor(np.array([0.1, 0.5, 0.9]), np.array([0.0, 1.0]))
        assert h.pdf(0.3) == pytest.approx(1.0)

    def test_three_to_one_split(self):
        h = histogram_adaptor(np.array([0.1, 0.2, 0.3, 1.5]),
                              np.array([0.0, 1.0, 2.0]))
        assert h.pdf(0.5) == pytest.approx(1.5 * 0.5)
        assert h.pdf(1.5) == pytest.approx(0.5 * 0.5)

    def test_random_histogram_integrates(self):
        rng = np.random.default_rng(9)
        sample = rng.normal(size=300)
        edges = np.linspace(sample.min() - 0.1, sample.max() + 0.1, 12)
        h = histogram_adaptor(sample, edges)
        a, b = h.support()
        assert adaptive_simpson(lambda t: float(h.pdf(t)), a, b) == \
            pytest.approx(1.0, abs=1e-6)

    def test_out_of_range(self):
        with pytest.raises(OutOfRange):
            histogram_adaptor(np.array([0.5, 2.5]), np.array([0.0, 1.0]))


class TestCappingMixture:
    def test_eps_zero_passthrough(self):
        base = DensityBaseline("normal")
        capped = CappingMixture(base, eps=0.0)
        rng = np.random.default_rng(10)
        X, y = rng.normal(size=(20, 1)), rng.normal(size=20)
        capped.fit(X, y)
        a = capped.predict(X[:3])
        b = base.predict(X[:3])
        assert all(da is db for da, db in zip(a, b))

    def test_unit_interval_loss_bounded(self):
        # wrapped log-loss <= -log eps on (0,1) targets
        rng = np.random.default_rng(11)
        X = rng.normal(size=(40, 1))
        y = rng.uniform(0.02, 0.98, size=40)
        eps = 1e-3
        est = CappingMixture(ParametricEstimator("normal", Ols(), Constant(1e-6)),
                             eps=eps, reference="uniform01")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TinyDispersionWarning)
            est.fit(X, y)
            batch = est.predict(X)
        for d, v in zip(batch, y):
            assert log_loss(d, v) <= -math.log(eps) + 1e-9

    def test_expected_loss_sandwich(self):
        # correct parts of the mixture-strategy bounds (see ledger):
        # upper: eps-mixture <= min(-log eps, base - log(1-eps)) on [0,1]
        # lower: pointwise >= cut-off - log 2
        rng = np.random.default_rng(12)
        eps = 0.05
        base = DensityBaseline("hist", bins=5)
        X = rng.normal(size=(60, 1))
        y = rng.uniform(size=60)
        base.fit(X, y)
        capped = CappingMixture(base, eps=eps).fit(X, y)
        pb = base.predict(X)
        pc = capped.predict(X)
        base_losses = np.array([capped_log_loss(d, v, 1e-12) for d, v in zip(pb, y)])
        mix_losses = np.array([log_loss(d, v) for d, v in zip(pc, y)])
        assert mix_losses.mean() <= min(-math.log(eps),
                                        base_losses.mean() - math.log1p(-eps)) + 1e-9
        cutoff = np.minimum(-math.log(eps), base_losses)
        assert np.all(mix_losses >= cutoff - math.log(2.0) - 1e-9)

    def test_capped_prediction_is_density(self):
        est = CappingMixture(DensityBaseline("normal"), eps=0.1, reference="sigmoid")
        est.fit(np.zeros((10, 1)), np.random.default_rng(1).normal(size=10))
        d = est.predict(np.zeros((1, 1)))[0]
        a, b = d.quantile(1e-9), d.quantile(1.0 - 1e-9)
        assert adaptive_simpson(lambda t: float(d.pdf(t)), a, b) == \
            pytest.approx(1.0, abs=1e-6)


class TestClassicalBaseline:
    def test_equals_parametric_form(self):
        rng = np.random.default_rng(13)
        X = rng.normal(size=(60, 1))
        y = 2.0 * X[:, 0] + rng.normal(scale=0.7, size=60)
        cb = ClassicalBaseline(Ols(), density="normal").fit(X, y)
        resid = y - Ols().fit(X, y).predict(X)
        pe = ParametricEstimator("normal", Ols(), Constant(float(resid.std())))
        pe.fit(X, y)
        xs = X[:5]
        for da, db in zip(cb.predict(xs), pe.predict(xs)):
            assert da.mean() == pytest.approx(db.mu, abs=1e-9)
            assert da.std() == pytest.approx(db.sigma, abs=1e-9)

    def test_noiseless_flags_degenerate(self):
        X = np.arange(10.0)[:, None]
        y = 3.0 * X[:, 0]
        with pytest.warns(TinyDispersionWarning):
            ClassicalBaseline(Ols(), density="normal").fit(X, y)


class TestConvolutionAdaptor:
    def test_pure_part_exact(self):
        p = Empirical([0.0, 2.0], [0.5, 0.5])
        z = Normal(0, 1)
        conv = convolution_adaptor(p, z, m=0)
        assert conv.pdf(1.0) == pytest.approx(0.5 * z.pdf(1.0) + 0.5 * z.pdf(-1.0),
                                              abs=1e-14)

    def test_mixed_input(self):
        from distreg.distributions import mixture

        p = mixture([Normal(0, 1), Empirical([5.0])], [0.5, 0.5])
        conv = convolution_adaptor(p, Normal(0, 0.3), m=50,
                                   rng=np.random.default_rng(3))
        assert conv.kind == "continuous"
        assert conv.pdf(5.0) > conv.pdf(3.0)

    def test_zero_draws_with_continuous_part(self):
        with pytest.raises(DomainError):
            convolution_adaptor(Normal(0, 1), Normal(0, 1), m=0)


class TestPointAdaptor:
    def batch(self, dists):
        from distreg.learners import PredictedBatch

        return PredictedBatch(list(dists))

    def test_mean_mode(self):
        out = point_adaptor(self.batch([Normal(3, 5)]), "mean")
        assert out[0] == pytest.approx(3.0)

    def test_elicited_absolute_median(self):
        out = point_adaptor(self.batch([Normal(3, 5)]), ("elicited", "absolute"))
        assert out[0] == pytest.approx(3.0, abs=0.05)

    def test_elicited_quantile(self):
        out = point_adaptor(self.batch([Uniform(0, 1)]),
                            ("elicited", ("quantile", 0.9)))
        assert out[0] == pytest.approx(0.9, abs=0.02)
