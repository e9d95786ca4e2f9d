"""Confusion tensors for multioutput classification.

A confusion tensor stacks one K x K joint-mass matrix per output: entry
(m, i, j) is the probability mass of (true class i, predicted class j) for
output m.  Rows always index the true class and columns the predicted class,
and every output slice sums to one.  Classes are 1-based in user-facing
matrices and converted to 0-based array indices internally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Per-row / per-slice mass must match 1 this tightly at construction time.
SIMPLEX_ATOL = 1e-9


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.flags.writeable = False
    return out


def _validate_class_matrix(values: np.ndarray, n_classes: int, what: str) -> None:
    if values.ndim != 2:
        raise ValueError(f"{what} must be 2-D (samples x outputs), got shape {values.shape}")
    if values.size == 0:
        raise ValueError(f"{what} must be non-empty")
    if not np.issubdtype(values.dtype, np.integer):
        raise ValueError(f"{what} must hold integer class indices")
    lo, hi = int(values.min()), int(values.max())
    if lo < 1 or hi > n_classes:
        raise ValueError(
            f"{what} classes must lie in [1, {n_classes}], found range [{lo}, {hi}]"
        )


@dataclass(frozen=True)
class LabelMatrix:
    """True classes: one row per sample, one column per output, values in 1..K.

    Outputs with fewer native classes than K are padded implicitly: classes
    above an output's own count simply never occur in that column.
    """

    values: np.ndarray
    n_classes: int

    def __post_init__(self):
        values = np.asarray(self.values)
        _validate_class_matrix(values, self.n_classes, "labels")
        object.__setattr__(self, "values", _readonly(values))

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class PredictionMatrix:
    """Predicted classes, same layout and 1..K convention as LabelMatrix."""

    values: np.ndarray
    n_classes: int

    def __post_init__(self):
        values = np.asarray(self.values)
        _validate_class_matrix(values, self.n_classes, "predictions")
        object.__setattr__(self, "values", _readonly(values))

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ProbabilityField:
    """Per-sample conditional class probabilities, shape (N, M, K).

    Every (sample, output) row must lie on the probability simplex.
    """

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 3:
            raise ValueError(f"probability field must be 3-D (N, M, K), got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("probability field contains non-finite entries")
        if values.min() < 0:
            raise ValueError("probability field contains negative entries")
        row_sums = values.sum(axis=2)
        worst = float(np.abs(row_sums - 1.0).max())
        if worst > SIMPLEX_ATOL:
            raise ValueError(
                f"probability rows must sum to 1 within {SIMPLEX_ATOL}, worst deviation {worst:.3e}"
            )
        object.__setattr__(self, "values", _readonly(values))

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.values.shape[1]

    @property
    def n_classes(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class ConfusionTensor:
    """Joint (true, predicted) mass per output, shape (M, K, K).

    Entry (m, i, j) is the mass of samples with true class i predicted as j
    in output m; each output slice carries total mass 1.
    """

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 3 or values.shape[1] != values.shape[2]:
            raise ValueError(f"confusion tensor must have shape (M, K, K), got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("confusion tensor contains non-finite entries")
        if values.min() < -1e-12 or values.max() > 1.0 + 1e-12:
            raise ValueError("confusion entries must lie in [0, 1]")
        masses = values.sum(axis=(1, 2))
        worst = float(np.abs(masses - 1.0).max())
        if worst > SIMPLEX_ATOL:
            raise ValueError(
                f"each output slice must have mass 1 within {SIMPLEX_ATOL}, worst deviation {worst:.3e}"
            )
        object.__setattr__(self, "values", _readonly(values))

    @property
    def n_outputs(self) -> int:
        return self.values.shape[0]

    @property
    def n_classes(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ObservationMask:
    """Set of observed (sample, output) index pairs, 0-based."""

    entries: frozenset

    def __post_init__(self):
        entries = frozenset((int(n), int(m)) for n, m in self.entries)
        if not entries:
            raise ValueError("no observed entries")
        if any(n < 0 or m < 0 for n, m in entries):
            raise ValueError("mask entries must be nonnegative indices")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def full(cls, n_samples: int, n_outputs: int) -> "ObservationMask":
        return cls(frozenset((n, m) for n in range(n_samples) for m in range(n_outputs)))


def _check_paired(labels: LabelMatrix, preds: PredictionMatrix) -> None:
    if labels.values.shape != preds.values.shape:
        raise ValueError(
            f"labels shape {labels.values.shape} does not match predictions shape {preds.values.shape}"
        )
    if labels.n_classes != preds.n_classes:
        raise ValueError(
            f"labels use K={labels.n_classes} but predictions use K={preds.n_classes}"
        )


def sample_confusion(labels: LabelMatrix, preds: PredictionMatrix) -> ConfusionTensor:
    """Average the one-hot per-sample confusions: entry (m, i, j) is the
    fraction of samples with true class i and predicted class j in output m.
    """
    _check_paired(labels, preds)
    n, m_out, k = labels.n_samples, labels.n_outputs, labels.n_classes
    conf = np.zeros((m_out, k, k))
    for m in range(m_out):
        np.add.at(conf[m], (labels.values[:, m] - 1, preds.values[:, m] - 1), 1.0 / n)
    return ConfusionTensor(conf)


def per_sample_confusion(labels: LabelMatrix, preds: PredictionMatrix) -> np.ndarray:
    """One-hot confusion per (sample, output), shape (N, M, K, K).

    Averaging over samples reproduces ``sample_confusion``; instance-level
    utilities consume this tensor directly.
    """
    _check_paired(labels, preds)
    n, m_out, k = labels.n_samples, labels.n_outputs, labels.n_classes
    out = np.zeros((n, m_out, k, k))
    rows = np.arange(n)[:, None]
    cols = np.arange(m_out)[None, :]
    out[rows, cols, labels.values - 1, preds.values - 1] = 1.0
    return out


def masked_confusion(
    labels: LabelMatrix, preds: PredictionMatrix, mask: ObservationMask
) -> np.ndarray:
    """Confusion matrix over the observed (sample, output) pairs only.

    Each observed pair contributes equal mass 1/|mask|; the result is a plain
    K x K array with total mass 1.
    """
    _check_paired(labels, preds)
    n, m_out, k = labels.n_samples, labels.n_outputs, labels.n_classes
    for pair in mask.entries:
        if pair[0] >= n or pair[1] >= m_out:
            raise ValueError(f"mask entry {pair} out of bounds for {n} samples x {m_out} outputs")
    out = np.zeros((k, k))
    for sample, output in mask.entries:
        out[labels.values[sample, output] - 1, preds.values[sample, output] - 1] += 1.0
    return out / len(mask.entries)


def expected_confusion(probs: ProbabilityField, preds: PredictionMatrix) -> ConfusionTensor:
    """Probability-weighted confusion: entry (m, i, j) averages eta_i over the
    samples predicted as j in output m.

    With one-hot probabilities equal to the labels this coincides with
    ``sample_confusion``.
    """
    if probs.values.shape[:2] != preds.values.shape:
        raise ValueError(
            f"probability field shape {probs.values.shape} does not match predictions "
            f"shape {preds.values.shape}"
        )
    if probs.n_classes != preds.n_classes:
        raise ValueError(
            f"probability field uses K={probs.n_classes} but predictions use K={preds.n_classes}"
        )
    n, m_out, k = probs.values.shape
    conf = np.zeros((m_out, k, k))
    for m in range(m_out):
        # Accumulate transposed (predicted, true) so duplicate columns add up.
        acc = np.zeros((k, k))
        np.add.at(acc, preds.values[:, m] - 1, probs.values[:, m, :])
        conf[m] = acc.T / n
    return ConfusionTensor(conf)
