"""distreg: distributional regression with proper losses and validated comparison.

Predict full distributions from features, score them with strictly proper
losses, compose probabilistic predictors from point predictors, and run
model-agnostic benchmark and predictive-independence workflows.
"""

from .distributions import (Categorical, Distribution, Empirical, Histogram,
                            KernelDensity, Laplace, Mixture, Normal,
                            Pushforward, Uniform, affine_map, cdf_map,
                            composed_map, logit_map, mixture, pullback,
                            pushforward, sigmoid_map, sigmoid_reference)
from .losses import (CappedLogLoss, ConvolutionLoss, Crps, EpsMixtureLogLoss,
                     GneitingLoss, KernelFn, KernelLoss, LogLoss, Loss,
                     MeanVarianceLoss, SplitMixedLoss, capped_log_loss, crps,
                     constant_kernel, gaussian_kernel, gneiting_loss,
                     kernel_loss, laplace_kernel, log_loss, mean_variance_loss,
                     parse_loss, properness_probe)
from .learners import (Constant, ConstantQuantile, Dataset, DensityBaseline,
                       KernelRidge, Knn, Ols, PointLearner, PredictedBatch,
                       ProbEstimator, density_baseline, grid_search)
from .composite import (CappingMixture, ClassicalBaseline, ElicitationEstimator,
                        MinBounded, ParametricEstimator, ResidualEstimator,
                        capping_mixture, classical_baseline, convolution_adaptor,
                        elicit, elicitation_adaptor, histogram_adaptor,
                        kernel_density_adaptor, min_wrapper, parametric_estimator,
                        point_adaptor)
from .meta import (BaggingEstimator, GentleBoosting, GreedyBoosting, bagging,
                   diagnostics_export, gentle_boosting, greedy_boosting,
                   loss_residuals, probability_residuals)
from .validation import (BiasVarianceReport, Cell, ComparisonResult, CvResult,
                         EntropyReport, LossSample, ResultTable,
                         bias_variance_probe, compare_models, entropy_estimates,
                         estimate_generalization, kfold_cv, make_folds,
                         paired_t_test, result_table, wilcoxon_signed_rank)
from .independence import (KnnClassFrequency, mmd_identity_check, mmd_statistic,
                           predictive_independence_test, two_sample_test)
from .modelspec import build, parse_model_spec, render
from .cli import ExperimentConfig, load_csv, run_experiment

__version__ = "0.1.0"
