"""Extending a fitted classifier beyond its labeled classes.

Two routes:

* ``knn_synthesize`` / ``b2n_fit`` cover classes with no training data at
  all: each new class borrows the k base training rows most similar to its
  text embedding (inner product; cosine on normalized features) as stand-in
  labeled data, and the classifier is re-estimated over the union.

* ``em_fit`` covers fully unlabeled data: samples are treated as an
  equal-prior Gaussian mixture with shared covariance, initialized from the
  zero-shot head, and mean/covariance are refined by
  expectation-maximization. The E-step scores samples with the same mixed
  logits used at prediction time (``mode="ensemble"``) or with the Gaussian
  branch alone (``mode="pure_gmm"``, the textbook mixture update).

The covariance produced by each M-step is inverted through the same
ridge-type regularizer used for supervised fitting (``inversion="ks"``).
``inversion="exact"`` is available for low-dimensional diagnostics where the
unregularized mixture update and its likelihood guarantee are wanted.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import estimators
from .data import FeatureMatrix, ZeroShotHead
from .errors import DimensionMismatch
from .estimators import PrecisionMatrix
from .gda import EnsembleModel, LinearClassifier, build_classifier

__all__ = [
    "SynthesizedDataset",
    "knn_synthesize",
    "b2n_fit",
    "EmState",
    "EmFitResult",
    "em_init",
    "em_e_step",
    "em_m_step",
    "em_fit",
    "gmm_loglik",
]

# responsibility mass below which a mixture component is considered starved
_DEGENERATE_MASS = 1e-8


@dataclass(frozen=True)
class SynthesizedDataset:
    """Base rows reused as labeled data for classes that have none.

    ``features`` rows are bit-identical copies of base training rows
    (``None`` when there are no new classes); ``source_indices`` records
    which base row each one came from.
    """

    features: FeatureMatrix | None
    labels: np.ndarray
    source_indices: np.ndarray


def knn_synthesize(base_features, new_text_embeddings, k: int = 64,
                   first_label: int = 0) -> SynthesizedDataset:
    """Select the k most text-similar base rows per new class.

    Similarity is the inner product between each new class's text embedding
    and the base rows (cosine similarity when both are unit-norm, which is
    the intended use). Ties go to the smaller base row index; a base row may
    be selected by several new classes. If k reaches the base size, every
    base row is selected. Labels count up from ``first_label``.
    """
    if not isinstance(base_features, FeatureMatrix):
        base_features = FeatureMatrix(base_features)
    text = np.asarray(new_text_embeddings, dtype=np.float64)
    if text.ndim != 2:
        raise DimensionMismatch(f"text embeddings must be 2-D, got {text.shape}")
    if text.shape[0] and text.shape[1] != base_features.d:
        raise DimensionMismatch(
            f"text embeddings have d={text.shape[1]}, base features d={base_features.d}"
        )
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")

    n = base_features.n
    take = min(k, n)
    sims = text @ base_features.values.astype(np.float64).T
    chunks = []
    for i in range(text.shape[0]):
        order = np.argsort(-sims[i], kind="stable")  # stable: ties keep row order
        chunks.append(order[:take].astype(np.int64))
    source = np.concatenate(chunks) if chunks else np.empty(0, np.int64)
    labels = first_label + np.repeat(np.arange(text.shape[0], dtype=np.int64), take)
    if source.size:
        features = FeatureMatrix(base_features.values[source],
                                 normalized=base_features.normalized)
    else:
        features = None  # no new classes: nothing to synthesize
    return SynthesizedDataset(features=features, labels=labels, source_indices=source)


def b2n_fit(features, labels, all_text, k: int = 64, alpha: float = 1.0,
            estimator: str = "ks") -> EnsembleModel:
    """Fit an M-class ensemble from base data plus synthesized new classes.

    ``all_text`` holds one text embedding per class for all M classes; rows
    [0, K) correspond to the base classes present in ``labels`` and rows
    [K, M) to new classes, which receive k synthesized samples each. Means
    and the shared covariance are re-estimated over the union of real and
    synthesized rows. With M = K this reduces exactly to ``fit_pipeline``.
    """
    if not isinstance(features, FeatureMatrix):
        features = FeatureMatrix(features)
    labels = np.asarray(labels, dtype=np.int64)
    all_text = np.asarray(all_text, dtype=np.float64)
    if all_text.ndim != 2 or all_text.shape[1] != features.d:
        raise DimensionMismatch(
            f"text matrix {all_text.shape} does not match feature dimension {features.d}"
        )
    n_base_classes = int(labels.max()) + 1
    n_all_classes = all_text.shape[0]
    if n_all_classes < n_base_classes:
        raise DimensionMismatch(
            f"text matrix has {n_all_classes} rows but labels use {n_base_classes} classes"
        )

    from .gda import fit_pipeline

    head = ZeroShotHead(all_text)
    if n_all_classes == n_base_classes:
        return fit_pipeline(features, labels, head, alpha, estimator)

    synth = knn_synthesize(features, all_text[n_base_classes:], k,
                           first_label=n_base_classes)
    union_x = FeatureMatrix(
        np.vstack([features.values, synth.features.values]),
        normalized=features.normalized,
    )
    union_y = np.concatenate([labels, synth.labels])
    model = fit_pipeline(union_x, union_y, head, alpha, estimator)
    return EnsembleModel(
        zeroshot=model.zeroshot,
        gda=model.gda,
        alpha=model.alpha,
        estimator=model.estimator,
        normalized=model.normalized,
        knn_k=k,
    )


# ---------------------------------------------------------------------------
# Expectation-maximization over unlabeled features


@dataclass(frozen=True)
class EmState:
    """Mixture parameters after some number of EM iterations.

    ``objective`` is the observed-data log-likelihood of the equal-prior
    mixture when it is being tracked (exact inversion), else NaN.
    """

    means: np.ndarray
    covariance: np.ndarray
    iteration: int
    objective: float = float("nan")


@dataclass(frozen=True)
class EmFitResult:
    model: EnsembleModel
    state: EmState
    n_iter: int
    converged: bool
    loglik_trace: tuple


def _state_precision(state: EmState, n_samples: int, inversion: str) -> PrecisionMatrix:
    if inversion == "ks":
        return estimators.ks_precision_from_cov(state.covariance, n_samples)
    if inversion == "exact":
        cov = np.asarray(state.covariance, dtype=np.float64)
        return PrecisionMatrix(values=np.linalg.inv(cov), method="exact")
    raise ValueError(f"unknown inversion {inversion!r}; choose 'ks' or 'exact'")


def _state_classifier(state: EmState, n_samples: int, inversion: str) -> LinearClassifier:
    k = state.means.shape[0]
    precision = _state_precision(state, n_samples, inversion)
    return build_classifier(state.means, precision, np.full(k, 1.0 / k))


def em_init(zeroshot: ZeroShotHead, x) -> EmState:
    """Start EM from the zero-shot head's rows and the global covariance.

    The covariance is the sample covariance of all rows around the global
    mean (denominator N - 1); its trace must be positive, i.e. the data must
    not be constant.
    """
    if not isinstance(x, FeatureMatrix):
        x = FeatureMatrix(x)
    if zeroshot.d != x.d:
        raise DimensionMismatch(f"head has d={zeroshot.d}, features have d={x.d}")
    values = x.values.astype(np.float64)
    centered = values - values.mean(axis=0)
    denom = max(x.n - 1, 1)
    cov = (centered.T @ centered) / denom
    cov = (cov + cov.T) / 2.0
    # fail fast on constant data; the same check ks_precision would make
    estimators.ks_precision_from_cov(cov, x.n)
    return EmState(means=zeroshot.weight.copy(), covariance=cov, iteration=0)


def em_e_step(x, state: EmState, zeroshot: ZeroShotHead, alpha: float,
              mode: str = "ensemble", inversion: str = "ks") -> np.ndarray:
    """Soft assignments of each row to each mixture component.

    In ``ensemble`` mode the responsibilities are the softmax of the mixed
    logits (zero-shot scores plus alpha times the Gaussian branch built from
    the current state). In ``pure_gmm`` mode only the Gaussian branch is
    used, which with exact inversion reproduces the standard equal-prior
    shared-covariance mixture responsibilities. Rows sum to 1.
    """
    if not isinstance(x, FeatureMatrix):
        x = FeatureMatrix(x)
    if mode not in ("ensemble", "pure_gmm"):
        raise ValueError(f"unknown mode {mode!r}; choose 'ensemble' or 'pure_gmm'")
    clf = _state_classifier(state, x.n, inversion)
    values = x.values.astype(np.float64)
    logits = values @ clf.weight.T + clf.bias
    if mode == "ensemble":
        if zeroshot.d != x.d or zeroshot.k != state.means.shape[0]:
            raise DimensionMismatch("zero-shot head does not match the EM state")
        logits = values @ zeroshot.weight.T + alpha * logits
    logits -= logits.max(axis=1, keepdims=True)
    np.exp(logits, out=logits)
    logits /= logits.sum(axis=1, keepdims=True)
    return logits


def em_m_step(x, gamma, prev_means=None):
    """Responsibility-weighted means and shared covariance.

    The covariance is the uniform average over components of each
    component's responsibility-normalized scatter:

        mu_k  = sum_i g_ik x_i / sum_i g_ik
        Sigma = (1/K) sum_k [ sum_i g_ik (x_i - mu_k)(x_i - mu_k)' / sum_i g_ik ]

    A component whose responsibility mass falls below 1e-8 keeps its
    previous mean (or the global mean if none is given), contributes zero
    scatter, and triggers a warning.
    """
    if not isinstance(x, FeatureMatrix):
        x = FeatureMatrix(x)
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.ndim != 2 or gamma.shape[0] != x.n:
        raise DimensionMismatch(f"gamma shape {gamma.shape} does not match n={x.n}")
    values = x.values.astype(np.float64)
    n_components = gamma.shape[1]
    mass = gamma.sum(axis=0)

    means = np.zeros((n_components, x.d))
    cov = np.zeros((x.d, x.d))
    global_mean = values.mean(axis=0)
    for k in range(n_components):
        if mass[k] < _DEGENERATE_MASS:
            warnings.warn(
                f"component {k} has responsibility mass {mass[k]:.3e}; keeping its mean",
                RuntimeWarning,
                stacklevel=2,
            )
            means[k] = prev_means[k] if prev_means is not None else global_mean
            continue
        means[k] = gamma[:, k] @ values / mass[k]
        diff = values - means[k]
        cov += (diff.T * gamma[:, k]) @ diff / mass[k]
    cov /= n_components
    return means, (cov + cov.T) / 2.0


def gmm_loglik(x, means, cov) -> float:
    """Observed-data log-likelihood of an equal-prior shared-covariance mixture."""
    values = x.values.astype(np.float64) if isinstance(x, FeatureMatrix) else np.asarray(x, dtype=np.float64)
    means = np.asarray(means, dtype=np.float64)
    cov = np.asarray(cov, dtype=np.float64)
    n, d = values.shape
    k = means.shape[0]
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        return float("nan")
    precision = np.linalg.inv(cov)
    log_comp = np.empty((n, k))
    for j in range(k):
        diff = values - means[j]
        maha = np.einsum("nd,de,ne->n", diff, precision, diff)
        log_comp[:, j] = -0.5 * (maha + logdet + d * np.log(2.0 * np.pi)) - np.log(k)
    top = log_comp.max(axis=1, keepdims=True)
    return float(np.sum(top.ravel() + np.log(np.exp(log_comp - top).sum(axis=1))))


def em_fit(x, zeroshot: ZeroShotHead, alpha: float = 1.0, mode: str = "ensemble",
           max_iter: int = 100, tol: float = 1e-4,
           inversion: str = "ks") -> EmFitResult:
    """Run EM from the zero-shot initialization until the means settle.

    Stops when the largest absolute change of any mean entry drops below
    ``tol`` or after ``max_iter`` iterations. The final classifier is
    rebuilt from the converged state with the chosen inversion;
    ``max_iter=0`` returns the initialization's classifier untouched. The
    log-likelihood trace is populated when ``inversion="exact"``.
    """
    if not isinstance(x, FeatureMatrix):
        x = FeatureMatrix(x)
    if max_iter < 0:
        raise ValueError(f"max_iter must be >= 0, got {max_iter}")
    track_ll = inversion == "exact"
    state = em_init(zeroshot, x)
    if track_ll:
        state = EmState(state.means, state.covariance, 0,
                        gmm_loglik(x, state.means, state.covariance))
    trace = [state.objective]
    converged = False
    for iteration in range(1, max_iter + 1):
        gamma = em_e_step(x, state, zeroshot, alpha, mode=mode, inversion=inversion)
        means, cov = em_m_step(x, gamma, prev_means=state.means)
        delta = float(np.abs(means - state.means).max())
        objective = gmm_loglik(x, means, cov) if track_ll else float("nan")
        state = EmState(means=means, covariance=cov, iteration=iteration,
                        objective=objective)
        trace.append(state.objective)
        if delta < tol:
            converged = True
            break
    clf = _state_classifier(state, x.n, inversion)
    model = EnsembleModel(
        zeroshot=zeroshot,
        gda=clf,
        alpha=float(alpha),
        estimator="ks" if inversion == "ks" else "exact",
        normalized=x.normalized,
    )
    return EmFitResult(model=model, state=state, n_iter=state.iteration,
                       converged=converged, loglik_trace=tuple(trace))
