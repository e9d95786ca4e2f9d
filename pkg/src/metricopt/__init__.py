"""Generalized classification metrics on confusion tensors and bisection-based
post-processing of probability estimates into metric-optimal weighted
classifiers."""

from .averaging import AveragingSpec, instance_utility, macro_utility, micro_confusion, micro_utility
from .bisection import (
    BisectionConfig,
    BisectionTrace,
    bisect_macro,
    bisect_micro,
    brute_force_oracle,
)
from .confusion import (
    ConfusionTensor,
    LabelMatrix,
    ObservationMask,
    PredictionMatrix,
    ProbabilityField,
    expected_confusion,
    masked_confusion,
    per_sample_confusion,
    sample_confusion,
)
from .decision import (
    LossTensor,
    MixtureClassifier,
    WeightedClassifier,
    expected_weighted_loss,
    mixture_predict,
    weighted_predict,
)
from .errors import GuardError
from .estimators import (
    MultinomialLRModel,
    SyntheticConfig,
    fit_lr,
    generate_synthetic,
    performance_ratio,
    performance_ratio_grid,
    predict_proba,
)
from .metrics import (
    FractionalLinearMetric,
    LossMatrix,
    MetricSpec,
    as_fractional_linear,
    eval_metric,
    loss_from_gamma,
    loss_from_gradient,
    metric_from_config,
    metric_gradient,
)

__version__ = "0.1.0"

__all__ = [
    "AveragingSpec",
    "BisectionConfig",
    "BisectionTrace",
    "ConfusionTensor",
    "FractionalLinearMetric",
    "GuardError",
    "LabelMatrix",
    "LossMatrix",
    "LossTensor",
    "MetricSpec",
    "MixtureClassifier",
    "MultinomialLRModel",
    "ObservationMask",
    "PredictionMatrix",
    "ProbabilityField",
    "SyntheticConfig",
    "WeightedClassifier",
    "as_fractional_linear",
    "bisect_macro",
    "bisect_micro",
    "brute_force_oracle",
    "eval_metric",
    "expected_confusion",
    "expected_weighted_loss",
    "fit_lr",
    "generate_synthetic",
    "instance_utility",
    "loss_from_gamma",
    "loss_from_gradient",
    "macro_utility",
    "masked_confusion",
    "metric_from_config",
    "metric_gradient",
    "micro_confusion",
    "micro_utility",
    "mixture_predict",
    "per_sample_confusion",
    "performance_ratio",
    "performance_ratio_grid",
    "predict_proba",
    "sample_confusion",
    "weighted_predict",
]
