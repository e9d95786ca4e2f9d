"""Probability estimation and the synthetic performance-ratio experiment.

The multinomial logistic regression here follows the convention
eta_k(x) proportional to exp(-w_k^T x): larger weights make a class less
likely.  The synthetic generator draws standard-normal features and builds
class probabilities from weights w_{kd} = c1 * |k - d| (1-based indices), so
c1 = 0 yields exactly uniform conditionals and larger c1 skews them.

The performance-ratio experiment compares the plain argmax rule against the
weighted rule tuned to a diagonal exponential metric (weights exp(-c2 * i)):
the ratio of their test utilities is 1 exactly at c2 = 0 and grows with c2.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .confusion import LabelMatrix, ProbabilityField, sample_confusion
from .decision import LossTensor, WeightedClassifier, weighted_predict
from .errors import GuardError
from .metrics import MetricSpec, eval_metric, loss_from_gradient


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=-1, keepdims=True)


@dataclass
class MultinomialLRModel:
    """Per-output multinomial logistic regression with negated logits.

    ``weights`` has shape (M, K, D).  Outputs whose training labels contain a
    single class are recorded in ``constant_classes`` and predicted as that
    class with probability 1.
    """

    weights: np.ndarray
    l2_penalty: float
    trained: bool = False
    constant_classes: tuple = ()

    @property
    def n_outputs(self) -> int:
        return self.weights.shape[0]

    @property
    def n_classes(self) -> int:
        return self.weights.shape[1]


def _ce_loss_and_grad(
    weights: np.ndarray, features: np.ndarray, onehot: np.ndarray, l2: float
) -> tuple[float, np.ndarray]:
    """L2-regularized mean cross-entropy and its gradient for one output.

    ``weights`` is (K, D), logits are -X @ W^T.
    """
    n = features.shape[0]
    probs = _softmax_rows(-features @ weights.T)
    # log of the predicted probability at the true class, clipped for safety
    log_probs = np.log(np.clip(probs, 1e-300, None))
    loss = -float(np.sum(onehot * log_probs)) / n + 0.5 * l2 * float(np.sum(weights**2))
    grad = -(probs - onehot).T @ features / n + l2 * weights
    return loss, grad


def fit_lr(
    features: np.ndarray,
    labels: LabelMatrix,
    l2: float = 1e-4,
    seed: int = 0,
    step: float = 0.1,
    iterations: int = 500,
) -> MultinomialLRModel:
    """Fit one model per output by full-batch gradient descent.

    The descent is deterministic from a zero initialization, so ``seed`` is
    accepted only for interface parity.  No intercept column is added; append
    a constant feature when one is wanted.
    """
    features = np.asarray(features, dtype=float)
    if features.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {features.shape}")
    if not np.all(np.isfinite(features)):
        raise ValueError("features contain non-finite values")
    if features.shape[0] != labels.n_samples:
        raise ValueError(
            f"{features.shape[0]} feature rows for {labels.n_samples} label rows"
        )
    if l2 < 0:
        raise ValueError("l2 penalty must be nonnegative")
    n, d = features.shape
    m_out, k = labels.n_outputs, labels.n_classes
    weights = np.zeros((m_out, k, d))
    constant: list = []
    for m in range(m_out):
        classes = np.unique(labels.values[:, m])
        if classes.size == 1:
            constant.append(int(classes[0]))
            continue
        constant.append(None)
        onehot = np.zeros((n, k))
        onehot[np.arange(n), labels.values[:, m] - 1] = 1.0
        w = weights[m]
        for _ in range(iterations):
            _, grad = _ce_loss_and_grad(w, features, onehot, l2)
            w -= step * grad
    return MultinomialLRModel(weights, l2, trained=True, constant_classes=tuple(constant))


def predict_proba(model: MultinomialLRModel, features: np.ndarray) -> ProbabilityField:
    """Class probabilities softmax(-W x) per output, rows exactly on the simplex."""
    if not model.trained:
        raise ValueError("model is not trained")
    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or features.shape[1] != model.weights.shape[2]:
        raise ValueError(
            f"features shape {features.shape} does not match model dimension "
            f"D={model.weights.shape[2]}"
        )
    logits = -np.einsum("mkd,nd->nmk", model.weights, features)
    probs = _softmax_rows(logits)
    for m, fixed in enumerate(model.constant_classes):
        if fixed is not None:
            probs[:, m, :] = 0.0
            probs[:, m, fixed - 1] = 1.0
    return ProbabilityField(probs)


@dataclass(frozen=True)
class SyntheticConfig:
    """Generator settings: skew_c1 shapes the conditionals, metric_skew_c2 the
    diagonal metric used by the performance-ratio experiment."""

    n_samples: int
    n_features: int = 10
    n_classes: int = 10
    skew_c1: float = 0.0
    metric_skew_c2: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 2:
            raise ValueError("need at least 2 samples")
        if self.n_features < 1:
            raise ValueError("need at least 1 feature")
        if self.n_classes < 2:
            raise ValueError("need at least 2 classes")


def synthetic_weights(cfg: SyntheticConfig) -> np.ndarray:
    """Class-by-feature weights c1 * |k - d|, with d clamped to K when D > K."""
    class_idx = np.arange(1, cfg.n_classes + 1, dtype=float)[:, None]
    feat_idx = np.minimum(np.arange(1, cfg.n_features + 1, dtype=float), cfg.n_classes)[None, :]
    return cfg.skew_c1 * np.abs(class_idx - feat_idx)


def generate_synthetic(cfg: SyntheticConfig) -> tuple[np.ndarray, LabelMatrix, ProbabilityField]:
    """Draw features, true conditionals, and sampled labels (single output).

    Reproducible bit-for-bit from ``cfg.seed``.
    """
    rng = np.random.default_rng(cfg.seed)
    features = rng.standard_normal((cfg.n_samples, cfg.n_features))
    eta = _softmax_rows(-features @ synthetic_weights(cfg).T)
    cumulative = np.cumsum(eta, axis=1)
    draws = rng.random(cfg.n_samples)
    labels = np.minimum(np.sum(draws[:, None] >= cumulative, axis=1), cfg.n_classes - 1) + 1
    label_matrix = LabelMatrix(labels[:, None].astype(np.int64), n_classes=cfg.n_classes)
    return features, label_matrix, ProbabilityField(eta[:, None, :])


def _derived_seed(seq: np.random.SeedSequence) -> int:
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def _prepare_ratio_cell(cfg: SyntheticConfig, seed: int) -> tuple[LabelMatrix, ProbabilityField]:
    """Generate data, split 80/20, fit, and return test labels with estimated
    probabilities.  Independent of ``cfg.metric_skew_c2``."""
    gen_seq, split_seq = np.random.SeedSequence(entropy=(cfg.seed, seed)).spawn(2)
    features, labels, _ = generate_synthetic(replace(cfg, seed=_derived_seed(gen_seq)))
    n = cfg.n_samples
    n_train = int(round(0.8 * n))
    if n_train < 1 or n_train >= n:
        raise ValueError("sample size too small for an 80/20 split")
    order = np.random.default_rng(_derived_seed(split_seq)).permutation(n)
    train_idx, test_idx = order[:n_train], order[n_train:]
    model = fit_lr(features[train_idx], LabelMatrix(labels.values[train_idx], cfg.n_classes))
    probs_test = predict_proba(model, features[test_idx])
    labels_test = LabelMatrix(labels.values[test_idx], cfg.n_classes)
    return labels_test, probs_test


def _ratio_from_cell(
    labels_test: LabelMatrix, probs_test: ProbabilityField, c2: float
) -> tuple[float, float, float]:
    """(baseline utility, weighted-rule utility, ratio) under the c2 metric."""
    k = labels_test.n_classes
    spec = MetricSpec.weighted_exp(k, c2)
    argmax_loss = LossTensor.shared(np.ones((k, k)) - np.eye(k), labels_test.n_outputs)
    tuned = loss_from_gradient(spec, np.full((k, k), 1.0 / k**2))
    tuned_loss = LossTensor.shared(tuned, labels_test.n_outputs)
    preds_base = weighted_predict(WeightedClassifier(argmax_loss), probs_test)
    preds_tuned = weighted_predict(WeightedClassifier(tuned_loss), probs_test)
    utility_base = eval_metric(spec, sample_confusion(labels_test, preds_base).values[0])
    utility_tuned = eval_metric(spec, sample_confusion(labels_test, preds_tuned).values[0])
    if utility_base <= 0.0:
        raise GuardError("degenerate ratio: baseline utility is zero")
    return utility_base, utility_tuned, utility_tuned / utility_base


def performance_ratio(cfg: SyntheticConfig, seed: int) -> float:
    """Test-utility ratio of the metric-tuned rule over the argmax rule."""
    labels_test, probs_test = _prepare_ratio_cell(cfg, seed)
    _, _, ratio = _ratio_from_cell(labels_test, probs_test, cfg.metric_skew_c2)
    return ratio


def performance_ratio_grid(
    c1_values,
    c2_values,
    n_samples: int,
    seeds,
    n_features: int = 10,
    n_classes: int = 10,
) -> list[dict]:
    """One row per (c1, c2, seed) grid cell, in grid order.

    The generated data and the fitted model depend only on (c1, seed), so
    each such pair is prepared once and reused across the c2 values; the
    per-cell numbers match single ``performance_ratio`` calls exactly.
    """
    rows = []
    for c1 in c1_values:
        prepared = {}
        for seed in seeds:
            cfg = SyntheticConfig(
                n_samples=n_samples, n_features=n_features, n_classes=n_classes, skew_c1=c1
            )
            prepared[seed] = _prepare_ratio_cell(cfg, seed)
        for c2 in c2_values:
            for seed in seeds:
                labels_test, probs_test = prepared[seed]
                base, tuned, ratio = _ratio_from_cell(labels_test, probs_test, c2)
                rows.append(
                    {
                        "c1": c1,
                        "c2": c2,
                        "seed": seed,
                        "utility_baseline": base,
                        "utility_consistent": tuned,
                        "pr": ratio,
                    }
                )
    return rows
