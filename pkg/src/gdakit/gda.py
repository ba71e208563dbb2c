"""Linear classifiers from Gaussian class statistics, and their ensembles.

Under the model "each class is Gaussian with its own mean and a shared
covariance", the Bayes posterior is a softmax over linear logits with

    w_i = P mu_i,    b_i = log p_i - mu_i' P mu_i / 2,

where P is the precision (inverse covariance) and p_i the class prior.
``fit_pipeline`` estimates the means and a regularized precision from labeled
features and ensembles the resulting classifier with a text-derived zero-shot
head via

    logits = x W_c' + alpha * (x W' + b).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from . import estimators
from .data import FEATURE_DTYPE, FeatureMatrix, ZeroShotHead, read_npy, write_npy
from .errors import DimensionMismatch, IoFailure
from .estimators import ClassStats, PrecisionMatrix

__all__ = [
    "LinearClassifier",
    "EnsembleModel",
    "ZeroShotHead",
    "build_classifier",
    "gda_posterior",
    "ensemble_logits",
    "predict",
    "fit_pipeline",
    "save_model",
    "load_model",
]


@dataclass(frozen=True)
class LinearClassifier:
    """Weights (K, D), biases (K,) and priors (K,) of a linear classifier."""

    weight: np.ndarray
    bias: np.ndarray
    priors: np.ndarray

    def __post_init__(self):
        weight = np.asarray(self.weight, dtype=np.float64)
        bias = np.asarray(self.bias, dtype=np.float64)
        priors = np.asarray(self.priors, dtype=np.float64)
        if weight.ndim != 2 or bias.shape != (weight.shape[0],):
            raise DimensionMismatch(
                f"weight {weight.shape} and bias {bias.shape} disagree"
            )
        if priors.shape != (weight.shape[0],):
            raise DimensionMismatch(f"priors shape {priors.shape} != ({weight.shape[0]},)")
        if not (np.isfinite(weight).all() and np.isfinite(bias).all()):
            raise ValueError("classifier weight/bias must be finite")
        if priors.min() < 0 or abs(priors.sum() - 1.0) > 1e-6:
            raise ValueError("priors must be nonnegative and sum to 1")
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "bias", bias)
        object.__setattr__(self, "priors", priors)

    @property
    def k(self) -> int:
        return self.weight.shape[0]

    @property
    def d(self) -> int:
        return self.weight.shape[1]


@dataclass(frozen=True)
class EnsembleModel:
    """A zero-shot head mixed with a Gaussian-statistics classifier.

    ``alpha`` scales the classifier branch; ``estimator`` and ``normalized``
    record how the statistics were produced so the model round-trips through
    its on-disk form.
    """

    zeroshot: ZeroShotHead
    gda: LinearClassifier
    alpha: float
    estimator: str = "ks"
    normalized: bool = True
    knn_k: int | None = None

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if (self.zeroshot.k, self.zeroshot.d) != (self.gda.k, self.gda.d):
            raise DimensionMismatch(
                f"zero-shot head is {self.zeroshot.weight.shape}, "
                f"classifier is {self.gda.weight.shape}"
            )

    @property
    def k(self) -> int:
        return self.gda.k

    @property
    def d(self) -> int:
        return self.gda.d


def build_classifier(means, precision: PrecisionMatrix, priors) -> LinearClassifier:
    """Turn class means, a precision matrix and priors into linear weights."""
    means = np.asarray(means, dtype=np.float64)
    p = precision.values
    if means.shape[1] != p.shape[0]:
        raise DimensionMismatch(
            f"means have d={means.shape[1]}, precision is {p.shape[0]}x{p.shape[1]}"
        )
    weight = means @ p  # row i is P mu_i since P is symmetric
    bias = np.log(np.asarray(priors, dtype=np.float64)) - 0.5 * np.einsum(
        "kd,kd->k", weight, means
    )
    return LinearClassifier(weight=weight, bias=bias, priors=priors)


def _as_rows(x) -> np.ndarray:
    values = x.values if isinstance(x, FeatureMatrix) else x
    return np.asarray(values, dtype=np.float64)


def gda_posterior(x, clf: LinearClassifier) -> np.ndarray:
    """Softmax posterior over classes, one row per sample.

    The row maximum is subtracted before exponentiation, so arbitrarily
    large logits stay finite.
    """
    rows = _as_rows(x)
    if rows.shape[1] != clf.d:
        raise DimensionMismatch(f"features have d={rows.shape[1]}, classifier d={clf.d}")
    logits = rows @ clf.weight.T + clf.bias
    logits -= logits.max(axis=1, keepdims=True)
    np.exp(logits, out=logits)
    logits /= logits.sum(axis=1, keepdims=True)
    return logits


def ensemble_logits(x, model: EnsembleModel) -> np.ndarray:
    """x W_c' + alpha * (x W' + b) for every row of x."""
    rows = _as_rows(x)
    if rows.shape[1] != model.d:
        raise DimensionMismatch(f"features have d={rows.shape[1]}, model d={model.d}")
    gda_part = rows @ model.gda.weight.T + model.gda.bias
    return rows @ model.zeroshot.weight.T + model.alpha * gda_part


def predict(logits) -> np.ndarray:
    """Argmax over classes per row; ties go to the smallest class index."""
    logits = np.asarray(logits)
    if logits.ndim != 2 or logits.shape[1] < 1:
        raise DimensionMismatch(f"logits must be (n, k), got {logits.shape}")
    return np.argmax(logits, axis=1).astype(np.int64)


def fit_pipeline(features, labels, zeroshot: ZeroShotHead, alpha: float,
                 estimator: str = "ks") -> EnsembleModel:
    """Estimate statistics from labeled features and build the ensemble.

    Class count and feature dimension come from the zero-shot head; every
    class in [0, K) must appear among the labels. Priors are uniform 1/K.
    """
    if not isinstance(features, FeatureMatrix):
        features = FeatureMatrix(features)
    labels = np.asarray(labels, dtype=np.int64)
    if features.d != zeroshot.d:
        raise DimensionMismatch(
            f"features have d={features.d}, zero-shot head has d={zeroshot.d}"
        )
    k = zeroshot.k
    means = estimators.class_means(features, labels, k)
    stats = estimators.pooled_covariance(features, labels, means)
    centered = _as_rows(features) - means[labels]
    precision = estimators.estimate_precision(estimator, stats, centered)
    clf = build_classifier(means, precision, np.full(k, 1.0 / k))
    return EnsembleModel(
        zeroshot=zeroshot,
        gda=clf,
        alpha=float(alpha),
        estimator=estimator,
        normalized=features.normalized,
    )


def save_model(model: EnsembleModel, out_dir) -> None:
    """Write W.npy, b.npy, Wc.npy (float32) and meta.json into a directory."""
    os.makedirs(out_dir, exist_ok=True)
    write_npy(os.path.join(out_dir, "W.npy"),
              model.gda.weight.astype(FEATURE_DTYPE))
    write_npy(os.path.join(out_dir, "b.npy"),
              model.gda.bias.astype(FEATURE_DTYPE))
    write_npy(os.path.join(out_dir, "Wc.npy"),
              model.zeroshot.weight.astype(FEATURE_DTYPE))
    meta = {
        "alpha": model.alpha,
        "estimator": model.estimator,
        "normalized": model.normalized,
        "k": model.k,
        "d": model.d,
    }
    if model.knn_k is not None:
        meta["knn_k"] = model.knn_k
    try:
        with open(os.path.join(out_dir, "meta.json"), "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write meta.json under {out_dir}: {exc}") from exc


def load_model(model_dir) -> EnsembleModel:
    """Inverse of save_model. Priors are reconstructed as uniform."""
    try:
        with open(os.path.join(model_dir, "meta.json"), encoding="utf-8") as fh:
            meta = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read meta.json under {model_dir}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IoFailure(f"meta.json under {model_dir} is not valid JSON: {exc}") from exc
    weight = read_npy(os.path.join(model_dir, "W.npy"), FEATURE_DTYPE, ndim=2)
    bias = read_npy(os.path.join(model_dir, "b.npy"), FEATURE_DTYPE, ndim=1)
    head = read_npy(os.path.join(model_dir, "Wc.npy"), FEATURE_DTYPE, ndim=2)
    k = int(meta["k"])
    if weight.shape[0] != k or head.shape[0] != k:
        raise DimensionMismatch(
            f"meta.json says k={k} but W has {weight.shape[0]} rows, "
            f"Wc has {head.shape[0]}"
        )
    if weight.shape[1] != int(meta["d"]):
        raise DimensionMismatch(
            f"meta.json says d={meta['d']} but W has {weight.shape[1]} columns"
        )
    clf = LinearClassifier(weight=weight, bias=bias, priors=np.full(k, 1.0 / k))
    return EnsembleModel(
        zeroshot=ZeroShotHead(head),
        gda=clf,
        alpha=float(meta["alpha"]),
        estimator=str(meta["estimator"]),
        normalized=bool(meta["normalized"]),
        knn_k=int(meta["knn_k"]) if "knn_k" in meta else None,
    )
