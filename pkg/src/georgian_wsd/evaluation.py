"""Metrics, the repeated-training protocol and the training-size ablation.

Every evaluator emits the same Metrics shape, and every document written by
write_metrics carries a `kind` tag so downstream tooling can consume LSTM
and transformer results interchangeably.
"""

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import lstm
from .corpus import stratified_subsample

METRICS_KINDS = ("metrics", "repetition", "ablation")


@dataclass
class Metrics:
    accuracy: float
    per_class: list  # (precision, recall, support) per class
    confusion: np.ndarray  # confusion[true][pred] counts
    n_examples: int


@dataclass
class RepetitionSummary:
    runs: int
    mean_accuracy: float
    min_accuracy: float
    max_accuracy: float
    std_accuracy: float
    per_run: list  # (seed, accuracy)


@dataclass
class AblationCurve:
    points: list  # (fraction, train_size, accuracy)
    epochs_per_point: int = 10


def evaluate(predict_fn, test) -> Metrics:
    """Run predict_fn over every test window and tabulate the confusion matrix."""
    if not test:
        raise ValueError("test set is empty")
    n_classes = max(ex.label for ex in test) + 1
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    for ex in test:
        pred = predict_fn(ex.window)
        if pred >= n_classes:  # predictor knows more classes than the test set
            confusion = np.pad(confusion, ((0, pred + 1 - n_classes), (0, pred + 1 - n_classes)))
            n_classes = pred + 1
        confusion[ex.label, pred] += 1
    n = int(confusion.sum())
    accuracy = float(np.trace(confusion)) / n
    per_class = []
    for c in range(n_classes):
        support = int(confusion[c].sum())
        pred_total = int(confusion[:, c].sum())
        precision = float(confusion[c, c]) / pred_total if pred_total else 0.0
        recall = float(confusion[c, c]) / support if support else 0.0
        per_class.append((precision, recall, support))
    return Metrics(accuracy=accuracy, per_class=per_class, confusion=confusion, n_examples=n)


def max_parallel_runs() -> int:
    """Repetition concurrency cap, from WSD_THREADS (default 1 = sequential)."""
    try:
        return max(1, int(os.environ.get("WSD_THREADS", "1")))
    except ValueError:
        return 1


def repeat_training(n: int, base_seed: int, run_accuracy) -> RepetitionSummary:
    """Run n seeded train+evaluate cycles and aggregate their accuracies.

    run_accuracy(seed) performs one full cycle on a fixed data split; seeds
    are base_seed..base_seed+n-1.  Runs may execute in parallel (WSD_THREADS)
    but results aggregate in seed order.
    """
    if n < 1:
        raise ValueError("need at least one run")
    seeds = [base_seed + i for i in range(n)]
    workers = max_parallel_runs()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            accs = list(pool.map(run_accuracy, seeds))
    else:
        accs = [run_accuracy(seed) for seed in seeds]
    for i, acc in enumerate(accs):
        if acc is None or not math.isfinite(acc):
            raise RuntimeError("training run %d (seed %d) failed" % (i, seeds[i]))
    arr = np.array(accs, dtype=np.float64)
    return RepetitionSummary(
        runs=n,
        mean_accuracy=float(arr.mean()),
        min_accuracy=float(arr.min()),
        max_accuracy=float(arr.max()),
        std_accuracy=float(arr.std()),
        per_run=list(zip(seeds, [float(a) for a in accs])),
    )


def _examples_hash(examples) -> str:
    h = hashlib.sha256()
    for ex in examples:
        h.update(("%d\t%d\t%s\n" % (ex.label, ex.window.target_index, " ".join(ex.window.tokens))).encode("utf-8"))
    return h.hexdigest()


def ablate_training_size(fractions, epochs: int, train_examples, test_examples,
                         matrix, config: lstm.ClassifierTrainConfig,
                         subsample_seed: int = 42, log=None) -> AblationCurve:
    """Accuracy per training-set fraction, at a fixed epoch budget.

    Each point trains on a seeded stratified subset for exactly `epochs`
    epochs (early stopping off) and evaluates on the same full test set.
    """
    fractions = list(fractions)
    if not fractions:
        raise ValueError("need at least one fraction")
    if any(not 0.0 < f <= 1.0 for f in fractions):
        raise ValueError("fractions must lie in (0,1]")
    if any(b <= a for a, b in zip(fractions, fractions[1:])):
        raise ValueError("fractions must be strictly increasing, got %r" % (fractions,))

    test_hash = _examples_hash(test_examples)
    fixed_cfg = replace(config, max_epochs=epochs, early_stopping_patience=None)
    points = []
    for frac in fractions:
        subset = stratified_subsample(train_examples, frac, subsample_seed)
        model, _ = lstm.train(subset, None, matrix, fixed_cfg)
        assert _examples_hash(test_examples) == test_hash, "test set changed between ablation points"
        metrics = evaluate(lambda w: lstm.predict(model, w, matrix)[0], test_examples)
        points.append((frac, len(subset), metrics.accuracy))
        if log is not None:
            log("fraction %.4g: train_size=%d accuracy=%.6f" % (frac, len(subset), metrics.accuracy))
    return AblationCurve(points=points, epochs_per_point=epochs)


def metrics_to_doc(obj, model_name: str, test_size: int) -> dict:
    if isinstance(obj, Metrics):
        return {
            "kind": "metrics",
            "model": model_name,
            "test_size": test_size,
            "accuracy": obj.accuracy,
            "per_class": [
                {"label": c, "precision": p, "recall": r, "support": s}
                for c, (p, r, s) in enumerate(obj.per_class)
            ],
            "confusion": obj.confusion.tolist(),
            "n_examples": obj.n_examples,
        }
    if isinstance(obj, RepetitionSummary):
        return {
            "kind": "repetition",
            "model": model_name,
            "test_size": test_size,
            "runs": obj.runs,
            "mean_accuracy": obj.mean_accuracy,
            "min_accuracy": obj.min_accuracy,
            "max_accuracy": obj.max_accuracy,
            "std_accuracy": obj.std_accuracy,
            "per_run": [{"seed": s, "accuracy": a} for s, a in obj.per_run],
        }
    if isinstance(obj, AblationCurve):
        return {
            "kind": "ablation",
            "model": model_name,
            "test_size": test_size,
            "epochs_per_point": obj.epochs_per_point,
            "points": [
                {"fraction": f, "train_size": n, "accuracy": a} for f, n, a in obj.points
            ],
        }
    raise TypeError("cannot serialize %r as a metrics document" % type(obj).__name__)


def write_metrics(obj, path, model_name: str = "lstm", test_size: int | None = None) -> None:
    """Serialize a Metrics/RepetitionSummary/AblationCurve as a JSON document.

    Floats go through json.dump unmodified, which keeps full double
    precision (well past 6 significant digits).
    """
    if test_size is None:
        test_size = obj.n_examples if isinstance(obj, Metrics) else 0
    doc = metrics_to_doc(obj, model_name, test_size)
    with open(path, "w", encoding="utf-8") as out:
        json.dump(doc, out, indent=2, ensure_ascii=False)
        out.write("\n")


def read_metrics(path):
    """Load a metrics document back into its dataclass; returns (kind, object, doc)."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    kind = doc.get("kind")
    if kind == "metrics":
        per_class = [(c["precision"], c["recall"], c["support"]) for c in doc["per_class"]]
        obj = Metrics(accuracy=doc["accuracy"], per_class=per_class,
                      confusion=np.array(doc["confusion"], dtype=np.int64),
                      n_examples=doc["n_examples"])
    elif kind == "repetition":
        obj = RepetitionSummary(
            runs=doc["runs"], mean_accuracy=doc["mean_accuracy"],
            min_accuracy=doc["min_accuracy"], max_accuracy=doc["max_accuracy"],
            std_accuracy=doc["std_accuracy"],
            per_run=[(r["seed"], r["accuracy"]) for r in doc["per_run"]])
    elif kind == "ablation":
        obj = AblationCurve(
            points=[(p["fraction"], p["train_size"], p["accuracy"]) for p in doc["points"]],
            epochs_per_point=doc["epochs_per_point"])
    else:
        raise ValueError("unknown metrics document kind %r" % kind)
    return kind, obj, doc
