"""Metrics, validation-set mixing search, and the few-shot protocol.

The protocol mirrors common practice for evaluating classifiers built on
frozen encoder features: sample a per-class budget of training rows with a
fixed seed, pick the mixing weight alpha on the validation split, fit at the
chosen alpha, score the full test split, and aggregate mean and sample
standard deviation over seeds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import DatasetBundle, FeatureMatrix, LongTailGroups, ZeroShotHead, sample_fewshot
from .errors import LengthMismatch
from .gda import EnsembleModel, ensemble_logits, fit_pipeline, predict

__all__ = [
    "DEFAULT_ALPHA_GRID",
    "EvalReport",
    "AlphaSearchResult",
    "evaluate",
    "search_alpha",
    "run_fewshot_protocol",
    "report_to_json",
]

DEFAULT_ALPHA_GRID = (0.001, 0.01, 0.1, 1.0, 10.0, 100.0)


@dataclass(frozen=True)
class EvalReport:
    """Accuracy, macro F1 and optional frequency-group accuracies."""

    accuracy: float
    macro_f1: float
    group_accuracy: dict | None
    per_class_correct: np.ndarray
    n_test: int

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "groups": self.group_accuracy,
            "n_test": self.n_test,
        }


@dataclass(frozen=True)
class AlphaSearchResult:
    best_alpha: float
    grid: tuple
    val_accuracy_per_alpha: tuple


def evaluate(predictions, truth, groups: LongTailGroups | None = None,
             n_classes: int | None = None) -> EvalReport:
    """Exact-match accuracy, macro F1, and per-group accuracy.

    Macro F1 averages per-class F1 = 2PR/(P+R) over all classes in
    [0, n_classes); a class with neither predictions nor true instances
    contributes 0. Group accuracy restricts to test rows whose true class
    falls in each of the many/medium/few buckets (None for an empty bucket).
    """
    predictions = np.asarray(predictions, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if predictions.shape != truth.shape or predictions.ndim != 1:
        raise LengthMismatch(
            f"predictions {predictions.shape} and truth {truth.shape} differ"
        )
    n = predictions.shape[0]
    if n == 0:
        raise LengthMismatch("cannot evaluate zero predictions")
    if n_classes is None:
        n_classes = int(max(predictions.max(), truth.max())) + 1
        if groups is not None:
            n_classes = max(n_classes, groups.n_classes)
    elif int(max(predictions.max(), truth.max())) >= n_classes:
        raise ValueError(
            f"labels reach {int(max(predictions.max(), truth.max()))} "
            f"but n_classes={n_classes}"
        )

    confusion = np.bincount(
        truth * n_classes + predictions, minlength=n_classes * n_classes
    ).reshape(n_classes, n_classes)
    tp = np.diag(confusion).astype(np.float64)
    fp = confusion.sum(axis=0) - tp
    fn = confusion.sum(axis=1) - tp
    denom = 2 * tp + fp + fn
    f1 = np.divide(2 * tp, denom, out=np.zeros(n_classes), where=denom > 0)

    group_accuracy = None
    if groups is not None:
        group_accuracy = {}
        for name in ("many", "medium", "few"):
            members = getattr(groups, name)
            mask = np.isin(truth, list(members))
            if mask.any():
                group_accuracy[name] = float(
                    np.mean(predictions[mask] == truth[mask])
                )
            else:
                group_accuracy[name] = None

    return EvalReport(
        accuracy=float(np.mean(predictions == truth)),
        macro_f1=float(f1.mean()),
        group_accuracy=group_accuracy,
        per_class_correct=tp.astype(np.int64),
        n_test=n,
    )


def search_alpha(train_features, train_labels, val_features, val_labels,
                 zeroshot: ZeroShotHead, grid=DEFAULT_ALPHA_GRID,
                 estimator: str = "ks") -> AlphaSearchResult:
    """Pick the mixing weight maximizing validation accuracy.

    The Gaussian statistics do not depend on alpha, so the classifier is fit
    once and only the mixing is swept. Ties go to the smaller alpha.
    """
    grid = tuple(float(a) for a in grid)
    if not grid:
        raise ValueError("alpha grid must be nonempty")
    if any(a < 0 for a in grid):
        raise ValueError("alpha grid values must be >= 0")

    model = fit_pipeline(train_features, train_labels, zeroshot, alpha=0.0,
                         estimator=estimator)
    val = val_features.values if isinstance(val_features, FeatureMatrix) else val_features
    val = np.asarray(val, dtype=np.float64)
    val_labels = np.asarray(val_labels, dtype=np.int64)
    zs_scores = val @ model.zeroshot.weight.T
    gda_scores = val @ model.gda.weight.T + model.gda.bias

    accuracies = []
    best_alpha, best_acc = None, -1.0
    for alpha in grid:
        preds = predict(zs_scores + alpha * gda_scores)
        acc = float(np.mean(preds == val_labels))
        accuracies.append(acc)
        if acc > best_acc or (acc == best_acc and alpha < best_alpha):
            best_alpha, best_acc = alpha, acc
    return AlphaSearchResult(
        best_alpha=best_alpha, grid=grid, val_accuracy_per_alpha=tuple(accuracies)
    )


def _subset(features: FeatureMatrix, labels, indices) -> tuple:
    sub = FeatureMatrix(features.values[indices], normalized=features.normalized)
    return sub, np.asarray(labels)[indices]


def run_fewshot_protocol(bundle: DatasetBundle, shots_list, seeds,
                         alpha_grid=DEFAULT_ALPHA_GRID, estimator: str = "ks",
                         groups: LongTailGroups | None = None) -> dict:
    """Sweep (shots, seed) cells and aggregate test accuracy per shots value.

    For every cell: subsample the training split, search alpha on the
    validation split, fit at the best alpha, and evaluate on the test split.
    The returned dict is JSON-serializable and byte-reproducible for
    identical inputs; ``report_to_json`` fixes the serialization.

    A 1-shot budget makes every sample equal its class mean, so the pooled
    covariance is exactly zero; only ``estimator="pinv"`` is defined there
    (the ridge and shrinkage estimators raise DegenerateCovariance).
    """
    shots_list = [int(s) for s in shots_list]
    seeds = [int(s) for s in seeds]
    if not shots_list:
        raise ValueError("shots_list must be nonempty")
    if not seeds:
        raise ValueError("seeds must be nonempty")

    train_x, train_y = bundle.train
    val_x, val_y = bundle.val
    test_x, test_y = bundle.test

    cells = []
    summary = []
    for shots in shots_list:
        cell_accuracies = []
        for seed in seeds:
            split = sample_fewshot(train_y, shots, seed)
            sub_x, sub_y = _subset(train_x, train_y, split.indices)
            search = search_alpha(sub_x, sub_y, val_x, val_y, bundle.zeroshot,
                                  grid=alpha_grid, estimator=estimator)
            model = fit_pipeline(sub_x, sub_y, bundle.zeroshot,
                                 alpha=search.best_alpha, estimator=estimator)
            preds = predict(ensemble_logits(test_x, model))
            report = evaluate(preds, test_y, groups=groups,
                              n_classes=bundle.zeroshot.k)
            cells.append({
                "shots": shots,
                "seed": seed,
                "alpha": search.best_alpha,
                "accuracy": report.accuracy,
                "macro_f1": report.macro_f1,
                "groups": report.group_accuracy,
            })
            cell_accuracies.append(report.accuracy)
        mean = float(np.mean(cell_accuracies))
        stdev = float(np.std(cell_accuracies, ddof=1)) if len(cell_accuracies) > 1 else 0.0
        summary.append({"shots": shots, "mean": mean, "stdev": stdev})

    return {
        "dataset": bundle.name,
        "estimator": estimator,
        "cells": cells,
        "summary": summary,
    }


def report_to_json(report: dict) -> str:
    """Canonical JSON serialization of a protocol report (trailing newline)."""
    return json.dumps(report, indent=2) + "\n"
