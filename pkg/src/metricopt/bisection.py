"""Bisection search for utility-optimal weighted classifiers.

For a ratio-of-linear metric, "is the optimum at least gamma" reduces to
maximizing the linear functional <A - gamma*B, C>, which the weighted
classifier with loss gamma*B - A solves exactly.  Halving the bracket
[lower, upper] on that test pins the optimal utility to within 2^-T after
T iterations.  Micro averaging shares one loss matrix across all outputs;
macro averaging runs one independent search per output.

Candidates can be scored on the sample confusion of the evaluation labels
(``eval_mode="sample"``, the estimation setting) or on the expected confusion
under the supplied probabilities (``eval_mode="expected"``, exact when those
probabilities are the true conditionals).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .averaging import AveragingSpec
from .confusion import LabelMatrix, PredictionMatrix, ProbabilityField
from .decision import LossTensor, WeightedClassifier
from .errors import GuardError
from .metrics import FractionalLinearMetric, MetricSpec, _eval_batch, loss_from_gamma

# brute_force_oracle refuses instances with more deterministic assignments.
MAX_ENUMERATION = 1_000_000
_CHUNK = 65536


@dataclass(frozen=True)
class BisectionConfig:
    """Search parameters.

    ``iterations`` fixes the number of halvings (50 reaches machine
    precision).  ``use_iteration_schedule`` switches to kappa * N iterations
    for fidelity runs; the extra iterations are redundant beyond ~50 since the
    bracket width is 2^-t.
    """

    iterations: int = 50
    seed: int = 0
    averaging: str = "micro"
    eval_mode: str = "sample"
    use_iteration_schedule: bool = False
    kappa: int = 1

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.averaging not in ("micro", "macro"):
            raise ValueError(f"averaging must be micro or macro, got {self.averaging!r}")
        if self.eval_mode not in ("sample", "expected"):
            raise ValueError(f"eval_mode must be sample or expected, got {self.eval_mode!r}")
        if self.kappa < 1:
            raise ValueError("kappa must be at least 1")

    def effective_iterations(self, n_eval: int) -> int:
        return self.kappa * n_eval if self.use_iteration_schedule else self.iterations


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    gamma: float
    lower: float
    upper: float
    utility: float
    accepted: bool


@dataclass
class BisectionTrace:
    """Full iteration history plus the final loss slice and classifier."""

    records: list[IterationRecord]
    final_loss: np.ndarray
    final_utility: float
    classifier: WeightedClassifier

    @property
    def widths(self) -> np.ndarray:
        return np.array([r.upper - r.lower for r in self.records])

    def to_dict(self) -> dict:
        return {
            "iterations": len(self.records),
            "gammas": [r.gamma for r in self.records],
            "lowers": [r.lower for r in self.records],
            "uppers": [r.upper for r in self.records],
            "utilities": [r.utility for r in self.records],
            "accepted": [r.accepted for r in self.records],
            "final_loss": self.final_loss.tolist(),
            "final_utility": self.final_utility,
        }


def _shared_predict(loss_matrix: np.ndarray, probs_vals: np.ndarray) -> np.ndarray:
    """Apply one K x K loss to every output; returns 1-based (N, M) classes.

    Candidate class k is scored by column k of the loss, matching the
    rows-are-true orientation of the loss and confusion matrices.
    """
    scores = np.einsum("lk,nml->nmk", loss_matrix, probs_vals)
    return np.argmin(scores, axis=2) + 1


def _micro_confusion_raw(
    labels_vals: np.ndarray,
    preds_vals: np.ndarray,
    probs_vals: np.ndarray,
    eval_mode: str,
    weights: np.ndarray,
    n_classes: int,
) -> np.ndarray:
    n = preds_vals.shape[0]
    mic_t = np.zeros((n_classes, n_classes))  # (predicted, true)
    for m in range(preds_vals.shape[1]):
        acc_t = np.zeros((n_classes, n_classes))
        if eval_mode == "sample":
            np.add.at(acc_t, (preds_vals[:, m] - 1, labels_vals[:, m] - 1), 1.0)
        else:
            np.add.at(acc_t, preds_vals[:, m] - 1, probs_vals[:, m, :])
        mic_t += weights[m] * acc_t
    return mic_t.T / n


def _bisect_single(
    labels_vals: np.ndarray,
    probs_vals: np.ndarray,
    flm: FractionalLinearMetric,
    iterations: int,
    eval_mode: str,
    weights: np.ndarray,
) -> tuple[np.ndarray, float, list[IterationRecord]]:
    k = flm.n_classes

    def utility_of(loss_matrix: np.ndarray) -> float:
        preds = _shared_predict(loss_matrix, probs_vals)
        conf = _micro_confusion_raw(labels_vals, preds, probs_vals, eval_mode, weights, k)
        return flm.evaluate(conf)

    # Start from the argmax rule (0-1 loss) so the search never returns
    # anything worse than the plain plug-in baseline.
    best_loss = np.ones((k, k)) - np.eye(k)
    best_utility = utility_of(best_loss)

    lower, upper = 0.0, 1.0
    records: list[IterationRecord] = []
    for t in range(1, iterations + 1):
        gamma = 0.5 * (lower + upper)
        cand_loss = loss_from_gamma(flm, gamma).values
        cand_utility = utility_of(cand_loss)
        accepted = cand_utility >= gamma  # exact equality counts as success
        if accepted:
            lower = gamma
            if cand_utility >= best_utility:
                best_loss, best_utility = cand_loss, cand_utility
        else:
            upper = gamma
        records.append(IterationRecord(t, gamma, lower, upper, cand_utility, accepted))
    return best_loss, best_utility, records


def _check_bisect_inputs(
    labels: LabelMatrix, probs_hat: ProbabilityField, flm: FractionalLinearMetric
) -> None:
    if labels.values.shape != probs_hat.values.shape[:2]:
        raise ValueError(
            f"labels shape {labels.values.shape} does not match probability field "
            f"shape {probs_hat.values.shape}"
        )
    if labels.n_classes != probs_hat.n_classes or labels.n_classes != flm.n_classes:
        raise ValueError(
            f"class counts disagree: labels K={labels.n_classes}, "
            f"probabilities K={probs_hat.n_classes}, metric K={flm.n_classes}"
        )


def bisect_micro(
    labels: LabelMatrix,
    probs_hat: ProbabilityField,
    flm: FractionalLinearMetric,
    cfg: BisectionConfig,
) -> tuple[WeightedClassifier, BisectionTrace]:
    """Search for the micro-averaged optimum with one loss shared by all outputs.

    ``labels`` and ``probs_hat`` are the evaluation split and the probability
    estimates at its points; the metric must map feasible confusions into
    [0, 1] so the initial bracket [0, 1] is valid.
    """
    _check_bisect_inputs(labels, probs_hat, flm)
    n, m_out = labels.values.shape
    weights = np.full(m_out, 1.0 / m_out)
    iterations = cfg.effective_iterations(n)
    loss, utility, records = _bisect_single(
        labels.values, probs_hat.values, flm, iterations, cfg.eval_mode, weights
    )
    classifier = WeightedClassifier(LossTensor.shared(loss, m_out))
    return classifier, BisectionTrace(records, loss, utility, classifier)


def bisect_macro(
    labels: LabelMatrix,
    probs_hat: ProbabilityField,
    flm: FractionalLinearMetric,
    cfg: BisectionConfig,
) -> tuple[WeightedClassifier, list[BisectionTrace]]:
    """Independent single-output searches; the loss slices may differ per output."""
    _check_bisect_inputs(labels, probs_hat, flm)
    n, m_out = labels.values.shape
    iterations = cfg.effective_iterations(n)
    slices = []
    traces = []
    for m in range(m_out):
        loss, utility, records = _bisect_single(
            labels.values[:, m : m + 1],
            probs_hat.values[:, m : m + 1, :],
            flm,
            iterations,
            cfg.eval_mode,
            np.ones(1),
        )
        slices.append(loss)
        traces.append(
            BisectionTrace(records, loss, utility, WeightedClassifier(LossTensor.shared(loss, 1)))
        )
    classifier = WeightedClassifier(LossTensor.from_slices(slices))
    return classifier, traces


def _decode_assignments(start: int, stop: int, n_cells: int, n_classes: int) -> np.ndarray:
    """Assignment indices [start, stop) as 0-based digits, last cell fastest."""
    remainder = np.arange(start, stop, dtype=np.int64)
    digits = np.empty((stop - start, n_cells), dtype=np.int64)
    for pos in range(n_cells - 1, -1, -1):
        digits[:, pos] = remainder % n_classes
        remainder //= n_classes
    return digits


def _assignment_utilities(
    digits: np.ndarray,
    rows: np.ndarray,
    weights: np.ndarray,
    spec: MetricSpec,
    mode: str,
) -> np.ndarray:
    n, m_out, k = rows.shape
    p = digits.shape[0]
    batch = np.arange(p)
    if mode in ("micro", "macro"):
        conf_t = np.zeros((p, m_out, k, k))  # (batch, output, predicted, true)
        for n_i in range(n):
            for m_i in range(m_out):
                col = digits[:, n_i * m_out + m_i]
                conf_t[batch, m_i, col, :] += rows[n_i, m_i, :] / n
        conf = conf_t.transpose(0, 1, 3, 2)
        if mode == "micro":
            return _eval_batch(spec, np.einsum("m,pmij->pij", weights, conf))
        return _eval_batch(spec, conf) @ weights
    inst_t = np.zeros((p, n, k, k))
    for n_i in range(n):
        for m_i in range(m_out):
            col = digits[:, n_i * m_out + m_i]
            inst_t[batch, n_i, col, :] += weights[m_i] * rows[n_i, m_i, :]
    return _eval_batch(spec, inst_t.transpose(0, 1, 3, 2)).mean(axis=1)


def brute_force_oracle(
    labels: LabelMatrix,
    probs: ProbabilityField | None,
    spec: MetricSpec,
    avg: AveragingSpec,
) -> tuple[float, PredictionMatrix]:
    """Exhaustively maximize the averaged metric over every deterministic
    prediction matrix.

    With ``probs`` given the utility uses expected confusions, otherwise the
    sample confusions of ``labels``.  Guarded at K^(N*M) <= 10^6 assignments;
    ties resolve to the first maximizer in enumeration order (all class-1
    predictions first, last cell varying fastest).
    """
    n, m_out = labels.values.shape
    k = labels.n_classes
    total = k ** (n * m_out)
    if total > MAX_ENUMERATION:
        raise GuardError(f"instance too large: K^(N*M) = {total} exceeds {MAX_ENUMERATION}")
    if probs is None:
        rows = np.zeros((n, m_out, k))
        sample_idx = np.arange(n)[:, None]
        output_idx = np.arange(m_out)[None, :]
        rows[sample_idx, output_idx, labels.values - 1] = 1.0
    else:
        if probs.values.shape != (n, m_out, k):
            raise ValueError(
                f"probability field shape {probs.values.shape} does not match labels "
                f"(N={n}, M={m_out}, K={k})"
            )
        rows = probs.values
    weights = avg.weights_for(m_out)

    best_utility = -np.inf
    best_digits = None
    for start in range(0, total, _CHUNK):
        stop = min(start + _CHUNK, total)
        digits = _decode_assignments(start, stop, n * m_out, k)
        utilities = _assignment_utilities(digits, rows, weights, spec, avg.mode)
        utilities = np.where(np.isnan(utilities), -np.inf, utilities)
        local_best = int(np.argmax(utilities))
        if utilities[local_best] > best_utility:
            best_utility = float(utilities[local_best])
            best_digits = digits[local_best]
    if best_digits is None or not np.isfinite(best_utility):
        raise GuardError("degenerate denominator: metric undefined on every assignment")
    preds = PredictionMatrix(best_digits.reshape(n, m_out) + 1, n_classes=k)
    return best_utility, preds
