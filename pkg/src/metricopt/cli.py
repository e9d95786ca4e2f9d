"""Command-line harness: evaluate metrics, post-process probabilities into
weighted classifiers, run the synthetic grid, and query the exhaustive oracle.

Every command is deterministic given its seed (flag --seed, falling back to
the METRICOPT_SEED environment variable, then 0) and emits a JSON report.
Exit codes: 0 success, 2 input error, 3 numerical/guard error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .averaging import AveragingSpec, instance_utility, macro_utility, micro_utility
from .bisection import BisectionConfig, bisect_macro, bisect_micro, brute_force_oracle
from .confusion import (
    LabelMatrix,
    PredictionMatrix,
    ProbabilityField,
    per_sample_confusion,
    sample_confusion,
)
from .decision import LossTensor, WeightedClassifier, weighted_predict
from .errors import GuardError
from .estimators import fit_lr, performance_ratio_grid, predict_proba
from .fileio import read_features, read_labels, read_probs, write_predictions, write_probs
from .metrics import MetricSpec, as_fractional_linear, loss_from_gradient, metric_from_config


@dataclass
class RunReport:
    """Reproducibility record for one command invocation."""

    command: list[str]
    config_hash: str
    seed: int
    utilities: dict
    confusion: list | None = None
    loss: dict | None = None
    trace: dict | list | None = None
    predictions: list | None = None
    wall_clock_s: float = 0.0

    def to_json(self) -> str:
        payload = {
            "command": self.command,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "utilities": self.utilities,
            "confusion": self.confusion,
            "loss": self.loss,
            "trace": self.trace,
            "predictions": self.predictions,
            "wall_clock_s": self.wall_clock_s,
        }
        return json.dumps(payload, sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls(**json.loads(text))


def _config_hash(parts: dict) -> str:
    return hashlib.sha256(json.dumps(parts, sort_keys=True).encode()).hexdigest()


def _resolve_seed(value: int | None) -> int:
    if value is not None:
        return value
    return int(os.environ.get("METRICOPT_SEED", "0"))


def _load_metric_config(arg: str) -> dict:
    text = arg.strip()
    if text.startswith("{"):
        return json.loads(text)
    path = Path(arg)
    if path.exists():
        with open(path) as handle:
            return json.load(handle)
    # bare kind shorthand, e.g. --metric ordinal
    return {"kind": text}


def _utilities_for(
    spec: MetricSpec,
    labels: LabelMatrix,
    preds: PredictionMatrix,
    requested: str,
) -> dict:
    """Requested-mode utility, plus the other modes where they are defined."""
    conf = sample_confusion(labels, preds)
    per_sample = per_sample_confusion(labels, preds)
    utilities: dict = {}
    evaluators = {
        "micro": lambda: micro_utility(spec, conf, AveragingSpec("micro")),
        "macro": lambda: macro_utility(spec, conf, AveragingSpec("macro")),
        "instance": lambda: instance_utility(spec, per_sample, AveragingSpec("instance")),
    }
    utilities[requested] = evaluators[requested]()
    for mode, evaluate in evaluators.items():
        if mode == requested:
            continue
        try:
            utilities[mode] = evaluate()
        except GuardError:
            utilities[mode] = None
    return utilities


def _emit(report: RunReport, out: str | None) -> None:
    text = report.to_json()
    if out:
        with open(out, "w", newline="\n") as handle:
            handle.write(text + "\n")
    else:
        print(text)


def cmd_eval(args) -> int:
    started = time.perf_counter()
    labels = read_labels(args.labels)
    preds_raw = read_labels(args.preds)
    n_classes = max(labels.n_classes, preds_raw.n_classes)
    labels = LabelMatrix(labels.values, n_classes)
    preds = PredictionMatrix(preds_raw.values, n_classes)
    spec = metric_from_config(_load_metric_config(args.metric), n_classes)
    utilities = _utilities_for(spec, labels, preds, args.averaging)
    conf = sample_confusion(labels, preds)
    seed = _resolve_seed(args.seed)
    report = RunReport(
        command=[
            "eval",
            "--labels", args.labels,
            "--preds", args.preds,
            "--metric", args.metric,
            "--averaging", args.averaging,
        ],
        config_hash=_config_hash(
            {"metric": _load_metric_config(args.metric), "averaging": args.averaging, "seed": seed}
        ),
        seed=seed,
        utilities=utilities,
        confusion=conf.values.tolist(),
        wall_clock_s=time.perf_counter() - started,
    )
    _emit(report, args.out)
    return 0


def _split_indices(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle into a fitting half of size ceil(N/2) and the rest."""
    order = np.random.default_rng(seed).permutation(n)
    cut = (n + 1) // 2
    return order[:cut], order[cut:]


def cmd_postprocess(args) -> int:
    started = time.perf_counter()
    seed = _resolve_seed(args.seed)
    labels = read_labels(args.labels)
    if args.probs:
        probs = read_probs(args.probs)
        if probs.n_classes < labels.n_classes:
            raise ValueError(
                f"probability file K={probs.n_classes} below labels K={labels.n_classes}"
            )
        labels = LabelMatrix(labels.values, probs.n_classes)
        labels_eval, probs_eval, probs_full = labels, probs, probs
    elif args.features:
        features = read_features(args.features)
        fit_idx, eval_idx = _split_indices(labels.n_samples, seed)
        model = fit_lr(
            features[fit_idx], LabelMatrix(labels.values[fit_idx], labels.n_classes), seed=seed
        )
        probs_full = predict_proba(model, features)
        labels_eval = LabelMatrix(labels.values[eval_idx], labels.n_classes)
        probs_eval = ProbabilityField(probs_full.values[eval_idx])
    else:
        raise ValueError("postprocess needs --probs or --features to obtain probabilities")

    config = _load_metric_config(args.metric)
    spec = metric_from_config(config, labels.n_classes)
    try:
        flm = as_fractional_linear(spec)
    except ValueError:
        raise ValueError(f"bisection unsupported for this metric: {spec.kind}") from None

    trace_doc: dict | list | None
    if flm.is_linear:
        # constant gradient: the optimal loss is closed-form, no search needed
        uniform = np.full((spec.n_classes,) * 2, 1.0 / spec.n_classes**2)
        loss = LossTensor.shared(loss_from_gradient(spec, uniform), labels.n_outputs)
        classifier = WeightedClassifier(loss)
        trace_doc = None
    else:
        cfg = BisectionConfig(iterations=args.iters, seed=seed, averaging=args.averaging)
        if args.averaging == "micro":
            classifier, trace = bisect_micro(labels_eval, probs_eval, flm, cfg)
            trace_doc = trace.to_dict()
        else:
            classifier, traces = bisect_macro(labels_eval, probs_eval, flm, cfg)
            trace_doc = [t.to_dict() for t in traces]

    preds = weighted_predict(classifier, probs_full)
    if args.preds:
        write_predictions(args.preds, preds)
    utilities = _utilities_for(spec, labels, preds, args.averaging)
    report = RunReport(
        command=[
            "postprocess",
            "--labels", args.labels,
            "--probs" if args.probs else "--features",
            args.probs or args.features,
            "--metric", args.metric,
            "--averaging", args.averaging,
            "--iters", str(args.iters),
        ],
        config_hash=_config_hash(
            {
                "metric": config,
                "averaging": args.averaging,
                "iters": args.iters,
                "seed": seed,
            }
        ),
        seed=seed,
        utilities=utilities,
        confusion=sample_confusion(labels, preds).values.tolist(),
        loss=classifier.loss.to_dict(),
        trace=trace_doc,
        wall_clock_s=time.perf_counter() - started,
    )
    _emit(report, args.out)
    return 0


def _parse_float_list(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _parse_int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _grid_rows_for_c1(task) -> list[dict]:
    c1, c2_values, n, seeds, d, k = task
    return performance_ratio_grid([c1], c2_values, n, seeds, n_features=d, n_classes=k)


def cmd_synth(args) -> int:
    c1_values = _parse_float_list(args.c1)
    c2_values = _parse_float_list(args.c2)
    seeds = _parse_int_list(args.seeds)
    if not c1_values or not c2_values or not seeds:
        raise ValueError("--c1, --c2 and --seeds must be non-empty")
    tasks = [(c1, c2_values, args.n, seeds, args.features_dim, args.classes) for c1 in c1_values]
    if args.workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            chunks = list(pool.map(_grid_rows_for_c1, tasks))
    else:
        chunks = [_grid_rows_for_c1(task) for task in tasks]
    rows = [row for chunk in chunks for row in chunk]
    with open(args.out, "w", newline="\n") as handle:
        handle.write("c1,c2,seed,utility_baseline,utility_consistent,pr\n")
        for row in rows:
            handle.write(
                f"{row['c1']!r},{row['c2']!r},{row['seed']},"
                f"{row['utility_baseline']!r},{row['utility_consistent']!r},{row['pr']!r}\n"
            )
    return 0


def cmd_oracle(args) -> int:
    started = time.perf_counter()
    labels = read_labels(args.labels)
    probs = None
    if args.probs:
        probs = read_probs(args.probs)
        if probs.n_classes < labels.n_classes:
            raise ValueError(
                f"probability file K={probs.n_classes} below labels K={labels.n_classes}"
            )
        labels = LabelMatrix(labels.values, probs.n_classes)
    spec = metric_from_config(_load_metric_config(args.metric), labels.n_classes)
    utility, preds = brute_force_oracle(labels, probs, spec, AveragingSpec(args.averaging))
    seed = _resolve_seed(args.seed)
    report = RunReport(
        command=["oracle", args.labels],
        config_hash=_config_hash(
            {"metric": _load_metric_config(args.metric), "averaging": args.averaging, "seed": seed}
        ),
        seed=seed,
        utilities={args.averaging: utility},
        predictions=preds.values.tolist(),
        wall_clock_s=time.perf_counter() - started,
    )
    if args.preds:
        write_predictions(args.preds, preds)
    _emit(report, args.out)
    return 0


def cmd_train_lr(args) -> int:
    started = time.perf_counter()
    if not args.features:
        raise ValueError("train-lr needs --features")
    if not args.out:
        raise ValueError("train-lr needs --out for the probability file")
    features = read_features(args.features)
    labels = read_labels(args.labels)
    seed = _resolve_seed(args.seed)
    model = fit_lr(features, labels, seed=seed, iterations=args.iters)
    probs = predict_proba(model, features)
    write_probs(args.out, probs)
    report = RunReport(
        command=["train-lr", args.features, args.labels],
        config_hash=_config_hash({"iters": args.iters, "seed": seed}),
        seed=seed,
        utilities={},
        wall_clock_s=time.perf_counter() - started,
    )
    print(report.to_json())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metricopt",
        description="Evaluate averaged classification metrics and post-process "
        "probabilities into metric-optimal weighted classifiers.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p, averaging_choices=("micro", "macro", "instance")):
        p.add_argument("--seed", type=int, default=None, help="seed (default METRICOPT_SEED or 0)")
        p.add_argument("--out", default=None, help="write the JSON report here instead of stdout")
        p.add_argument("--metric", required=True, help="metric kind, JSON, or JSON file path")
        p.add_argument("--averaging", choices=averaging_choices, default="micro")

    p_eval = sub.add_parser("eval", help="evaluate a metric on labels vs predictions")
    p_eval.add_argument("--labels", required=True)
    p_eval.add_argument("--preds", required=True)
    add_common(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_post = sub.add_parser("postprocess", help="fit a weighted classifier to the metric")
    p_post.add_argument("--labels", required=True)
    p_post.add_argument("--probs", default=None, help="probability CSV (full set as eval split)")
    p_post.add_argument("--features", default=None, help="feature CSV (internal fit/eval split)")
    p_post.add_argument("--preds", default=None, help="write final predictions here")
    p_post.add_argument("--iters", type=int, default=50, help="bisection iterations")
    # instance averaging has no weighted-classifier characterization to fit
    add_common(p_post, averaging_choices=("micro", "macro"))
    p_post.set_defaults(func=cmd_postprocess)

    p_synth = sub.add_parser("synth", help="synthetic performance-ratio grid to CSV")
    p_synth.add_argument("--c1", required=True, help="comma-separated skew values")
    p_synth.add_argument("--c2", required=True, help="comma-separated metric-skew values")
    p_synth.add_argument("--n", type=int, required=True)
    p_synth.add_argument("--seeds", required=True, help="comma-separated seeds")
    p_synth.add_argument("--features-dim", type=int, default=10)
    p_synth.add_argument("--classes", type=int, default=10)
    p_synth.add_argument("--workers", type=int, default=1)
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--seed", type=int, default=None)
    p_synth.set_defaults(func=cmd_synth)

    p_oracle = sub.add_parser("oracle", help="exhaustive optimum over deterministic predictions")
    p_oracle.add_argument("--labels", required=True)
    p_oracle.add_argument("--probs", default=None)
    p_oracle.add_argument("--preds", default=None, help="write the optimal predictions here")
    add_common(p_oracle)
    p_oracle.set_defaults(func=cmd_oracle)

    p_train = sub.add_parser("train-lr", help="fit logistic regression, emit probabilities")
    p_train.add_argument("--features", required=True)
    p_train.add_argument("--labels", required=True)
    p_train.add_argument("--iters", type=int, default=500, help="gradient-descent iterations")
    p_train.add_argument("--out", required=True, help="probability CSV path")
    p_train.add_argument("--seed", type=int, default=None)
    p_train.set_defaults(func=cmd_train_lr)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def console_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_entry()
