"""Model-spec grammar: parsing, rendering, estimator construction."""

import pytest

from distreg.composite import (CappingMixture, MinBounded, ParametricEstimator,
                               ResidualEstimator)
from distreg.errors import ParseError
from distreg.learners import Constant, DensityBaseline, KernelRidge, Knn, Ols
from distreg.meta import BaggingEstimator, GentleBoosting, GreedyBoosting
from distreg.modelspec import (ConstNode, MinNode, ParametricNode, ReNode,
                               build, parse_model_spec, render)

VOCABULARY = [
    "N(p=C(mean(y)), s=C(std(y)))",
    "N(p=C(42), s=C(42))",
    "N(p=LR, s=C(std(y)))",
    "N(p=KNN(k=5), s=C(std(y)))",
    "N(p=KRR(lambda=0.1, gamma=1, scale=true), s=C(std(y)))",
    "N(p=LR, s=RE(p, C(std(y))))",
    "N(p=LR, s=RE(p, LR, abs))",
    "N(p=LR, s=RE(p, KNN(k=3), log))",
    "N(p=LR, s=Min(RE(p, C(std(y)))))",
    "N(p=LR, s=Min(RE(p, LR), 0;1;2;4))",
    "Laplace(p=LR, s=C(std(y)))",
    "Uniform(p=C(mean(y)), s=C(std(y)))",
    "Cap(N(p=LR, s=C(std(y))), eps=1e-10, ref=uniform01)",
    "Cap(Baseline(normal), eps=0.01, ref=sigmoid)",
    "Baseline(kernel)",
    "Baseline(hist)",
    "Bag(N(p=LR, s=C(std(y))), n=8, frac=0.9, boot=true)",
    "BoostGreedy(k=2, alpha=0.05)",
    "BoostGentle(M=3, alpha=0.5, gamma=1)",
]


class TestParsing:
    def test_paper_style_baseline(self):
        ast = parse_model_spec("N(p=C(mean(y)), s=C(std(y)))")
        assert isinstance(ast, ParametricNode)
        assert ast.shape == "normal"
        assert ast.point == ConstNode("mean(y)")
        assert ast.disp == ConstNode("std(y)")

    def test_nested_min_residual(self):
        ast = parse_model_spec("N(p=LR, s=Min(RE(p, C(std(y)))))")
        assert isinstance(ast.disp, MinNode)
        assert isinstance(ast.disp.inner, ReNode)
        assert ast.disp.inner.inner == ConstNode("std(y)")

    def test_error_offset(self):
        with pytest.raises(ParseError) as exc:
            parse_model_spec("N(p=)")
        assert exc.value.offset == 4

    def test_whitespace_insensitive(self):
        a = parse_model_spec("N(p=LR,s=C(std(y)))")
        b = parse_model_spec("  N( p = LR ,  s = C( std(y) ) ) ")
        assert a == b

    def test_case_sensitive(self):
        with pytest.raises(ParseError):
            parse_model_spec("n(p=LR, s=C(std(y)))")

    def test_re_outside_dispersion_slot(self):
        with pytest.raises(ParseError) as exc:
            parse_model_spec("N(p=RE(p, LR), s=C(std(y)))")
        assert "dispersion" in str(exc.value)

    def test_unknown_token(self):
        with pytest.raises(ParseError):
            parse_model_spec("N(p=LR; s=C(std(y)))!")

    def test_arity_error(self):
        with pytest.raises(ParseError):
            parse_model_spec("KNN(k=)")

    def test_trailing_input(self):
        with pytest.raises(ParseError):
            parse_model_spec("Baseline(normal) extra")

    def test_empty(self):
        with pytest.raises(ParseError):
            parse_model_spec("   ")


class TestRoundTrip:
    @pytest.mark.parametrize("text", VOCABULARY)
    def test_render_parse_fixpoint(self, text):
        ast = parse_model_spec(text)
        rendered = render(ast)
        assert parse_model_spec(rendered) == ast
        # canonical form is a fixpoint
        assert render(parse_model_spec(rendered)) == rendered


class TestBuild:
    def test_parametric_types(self):
        est = build(parse_model_spec("N(p=LR, s=RE(p, C(std(y))))"))
        assert isinstance(est, ParametricEstimator)
        assert isinstance(est.point, Ols)
        assert isinstance(est.disp, ResidualEstimator)
        assert isinstance(est.disp.inner, Constant)

    def test_min_node_requests_tuning(self):
        est = build(parse_model_spec("N(p=LR, s=Min(RE(p, C(std(y)))))"))
        assert isinstance(est.disp, MinBounded)
        assert est.disp.kappa is None
        assert est.tuned

    def test_min_custom_grid(self):
        est = build(parse_model_spec("N(p=LR, s=Min(LR, 0;2;8))"))
        assert est.disp.grid == (0.0, 2.0, 8.0)

    def test_wrappers(self):
        assert isinstance(build(parse_model_spec("Baseline(kernel)")), DensityBaseline)
        cap = build(parse_model_spec("Cap(Baseline(normal), eps=0.1)"))
        assert isinstance(cap, CappingMixture) and cap.eps == 0.1
        bag = build(parse_model_spec("Bag(N(p=KNN(k=2), s=C(std(y))), n=3)"))
        assert isinstance(bag, BaggingEstimator) and bag.n_estimators == 3
        assert isinstance(bag.base.point, Knn)
        assert isinstance(build(parse_model_spec("BoostGreedy(k=1, alpha=0.1)")),
                          GreedyBoosting)
        gent = build(parse_model_spec("BoostGentle(M=2, alpha=0.3, gamma=0.5)"))
        assert isinstance(gent, GentleBoosting) and gent.rounds == 2

    def test_krr_params(self):
        est = build(parse_model_spec("N(p=KRR(lambda=0.5, gamma=2, scale=true), "
                                     "s=C(std(y)))"))
        krr = est.point
        assert isinstance(krr, KernelRidge)
        assert (krr.lam, krr.gamma, krr.scale) == (0.5, 2.0, True)

    def test_std_denominator_threaded(self):
        est = build(parse_model_spec("N(p=C(mean(y)), s=C(std(y)))"),
                    std_denominator="n-1")
        assert est.disp.std_denominator == "n-1"
