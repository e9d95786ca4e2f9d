"""Weighted decision rules over conditional class probabilities.

Loss matrices share the confusion orientation: L[m][i, j] is the cost of
predicting class j when the true class is i, so the expected loss of a
classifier is the plain inner product <L, C>.  A weighted classifier scores
each candidate class k for output m as sum_l L[m][l, k] * eta_l (column k of
the slice) and predicts the minimizing class; ties break to the lowest class
index.  The decision is invariant under positive affine transforms of L,
which is what licenses rescaling loss matrices into [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .confusion import ConfusionTensor, PredictionMatrix, ProbabilityField
from .metrics import LossMatrix


def _readonly(arr) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class LossTensor:
    """Per-output stack of K x K loss matrices, shape (M, K, K), entries in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 3 or values.shape[1] != values.shape[2]:
            raise ValueError(f"loss tensor must have shape (M, K, K), got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("loss tensor must be finite")
        if values.min() < -1e-12 or values.max() > 1.0 + 1e-12:
            raise ValueError("loss tensor entries must lie in [0, 1]")
        object.__setattr__(self, "values", _readonly(values))

    @classmethod
    def shared(cls, loss: LossMatrix | np.ndarray, n_outputs: int) -> "LossTensor":
        """Tile one loss matrix across all outputs."""
        matrix = loss.values if isinstance(loss, LossMatrix) else np.asarray(loss, dtype=float)
        return cls(np.broadcast_to(matrix, (n_outputs, *matrix.shape)))

    @classmethod
    def from_slices(cls, slices) -> "LossTensor":
        stacked = [s.values if isinstance(s, LossMatrix) else np.asarray(s, float) for s in slices]
        return cls(np.stack(stacked))

    @property
    def n_outputs(self) -> int:
        return self.values.shape[0]

    @property
    def n_classes(self) -> int:
        return self.values.shape[1]

    def to_dict(self) -> dict:
        return {
            "M": self.n_outputs,
            "K": self.n_classes,
            "slices": self.values.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LossTensor":
        tensor = cls(np.asarray(doc["slices"], dtype=float))
        if tensor.n_outputs != doc["M"] or tensor.n_classes != doc["K"]:
            raise ValueError("loss tensor document dimensions disagree with its slices")
        return tensor


@dataclass(frozen=True)
class WeightedClassifier:
    """Deterministic argmin-of-weighted-score rule; ties go to the lowest class."""

    loss: LossTensor

    def predict(self, probs: ProbabilityField) -> PredictionMatrix:
        return weighted_predict(self, probs)


@dataclass(frozen=True)
class MixtureClassifier:
    """Randomized blend: each (sample, output) follows ``first`` with
    probability ``alpha`` and ``second`` otherwise."""

    first: WeightedClassifier
    second: WeightedClassifier
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"mixture alpha must lie in [0, 1], got {self.alpha}")


def weighted_predict(clf: WeightedClassifier, probs: ProbabilityField) -> PredictionMatrix:
    """Predict argmin_k <L[m][:, k], eta[n, m, :]> for every (sample, output).

    Column k of the loss slice carries the costs of predicting k against each
    true class, matching the rows-are-true confusion orientation; this is the
    decision that minimizes the expected weighted loss <L, C>.
    """
    loss = clf.loss
    if loss.n_outputs != probs.n_outputs or loss.n_classes != probs.n_classes:
        raise ValueError(
            f"loss tensor (M={loss.n_outputs}, K={loss.n_classes}) does not match "
            f"probability field (M={probs.n_outputs}, K={probs.n_classes})"
        )
    scores = np.einsum("mlk,nml->nmk", loss.values, probs.values)
    # argmin returns the first minimizer, which is the lowest class index.
    preds = np.argmin(scores, axis=2) + 1
    return PredictionMatrix(preds, n_classes=probs.n_classes)


def mixture_predict(clf: MixtureClassifier, probs: ProbabilityField, seed: int) -> PredictionMatrix:
    """Seed-reproducible mixture of the two component predictions.

    A counter-based generator draws one uniform per (sample, output), so the
    outcome is independent of evaluation order.
    """
    first = weighted_predict(clf.first, probs).values
    second = weighted_predict(clf.second, probs).values
    uniforms = np.random.Generator(np.random.Philox(key=seed)).random(first.shape)
    chosen = np.where(uniforms < clf.alpha, first, second)
    return PredictionMatrix(chosen, n_classes=probs.n_classes)


def expected_weighted_loss(loss: LossTensor, conf: ConfusionTensor) -> float:
    """Inner product <L, C> summed over all (output, true, predicted) positions."""
    if loss.values.shape != conf.values.shape:
        raise ValueError(
            f"loss tensor shape {loss.values.shape} does not match confusion shape "
            f"{conf.values.shape}"
        )
    return float(np.sum(loss.values * conf.values))
