"""Class statistics and precision-matrix estimators.

The workhorse is the closed-form ridge-type estimate

    P = D * ((N - 1) * S + tr(S) * I)^(-1)

(tag ``"ks"``), which regularizes the pooled class-centered covariance S by
its own trace and is positive definite whenever tr(S) > 0. Alternatives are
the Ledoit-Wolf and OAS linear shrinkage estimators (covariance shrunk toward
``tr(S)/D * I`` with a data-driven coefficient, then inverted) and a plain
Moore-Penrose pseudoinverse. Shrunk and ridge-regularized matrices are
inverted with a symmetric positive-definite (Cholesky) solve; only the
pseudoinverse path uses an eigendecomposition.

All computations are float64 regardless of the (typically float32) input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .data import FeatureMatrix
from .errors import (
    DegenerateCovariance,
    DimensionMismatch,
    EmptyClass,
    TooFewSamples,
)

ESTIMATORS = ("ks", "ledoit_wolf", "oas", "pinv")

# relative eigenvalue cutoff defining numerical rank for the pseudoinverse
_PINV_RCOND = 1e-10


@dataclass(frozen=True)
class ClassStats:
    """Per-class means plus the pooled class-centered covariance.

    ``pooled_cov`` is the sample covariance (denominator N - 1) of the rows
    after subtracting each row's class mean; it is symmetric positive
    semidefinite by construction.
    """

    means: np.ndarray
    counts: np.ndarray
    pooled_cov: np.ndarray
    n_total: int


@dataclass(frozen=True)
class PrecisionMatrix:
    """A (D, D) symmetric estimate of the inverse covariance."""

    values: np.ndarray
    method: str

    @property
    def d(self) -> int:
        return self.values.shape[0]


def _as_array(x) -> np.ndarray:
    values = x.values if isinstance(x, FeatureMatrix) else x
    return np.asarray(values, dtype=np.float64)


def _symmetrize(a: np.ndarray) -> np.ndarray:
    return (a + a.T) / 2.0


def _spd_inverse(a: np.ndarray) -> np.ndarray:
    """Invert a symmetric positive-definite matrix via Cholesky."""
    factor = cho_factor(a, lower=True, check_finite=False)
    return _symmetrize(cho_solve(factor, np.eye(a.shape[0]), check_finite=False))


def class_means(x, y, k: int) -> np.ndarray:
    """Arithmetic mean of the rows of each class, as a (k, d) float64 matrix.

    Every class in [0, k) must have at least one sample; otherwise
    EmptyClass is raised for the first missing one.
    """
    values = _as_array(x)
    y = np.asarray(y, dtype=np.int64)
    if y.shape[0] != values.shape[0]:
        raise DimensionMismatch(
            f"{values.shape[0]} feature rows but {y.shape[0]} labels"
        )
    if y.size and (y.min() < 0 or y.max() >= k):
        raise DimensionMismatch(f"labels must lie in [0, {k})")
    counts = np.bincount(y, minlength=k)
    for c in range(k):
        if counts[c] == 0:
            raise EmptyClass(c)
    sums = np.zeros((k, values.shape[1]))
    np.add.at(sums, y, values)
    return sums / counts[:, None]


def pooled_covariance(x, y, means: np.ndarray) -> ClassStats:
    """Pooled covariance of class-centered rows, denominator N - 1."""
    values = _as_array(x)
    y = np.asarray(y, dtype=np.int64)
    means = np.asarray(means, dtype=np.float64)
    n = values.shape[0]
    if n < 2:
        raise TooFewSamples(f"need at least 2 samples, got {n}")
    if means.shape[1] != values.shape[1]:
        raise DimensionMismatch(
            f"means have d={means.shape[1]}, features have d={values.shape[1]}"
        )
    centered = values - means[y]
    cov = _symmetrize(centered.T @ centered / (n - 1))
    counts = np.bincount(y, minlength=means.shape[0])
    return ClassStats(means=means, counts=counts, pooled_cov=cov, n_total=n)


def ks_precision_from_cov(cov: np.ndarray, n_samples: int) -> PrecisionMatrix:
    """Ridge-type precision D * ((N-1) * cov + tr(cov) * I)^(-1)."""
    cov = np.asarray(cov, dtype=np.float64)
    d = cov.shape[0]
    trace = float(np.trace(cov))
    if trace <= 1e-12:
        raise DegenerateCovariance(f"covariance trace {trace:.3e} is not positive")
    regularized = (n_samples - 1) * cov + trace * np.eye(d)
    return PrecisionMatrix(values=d * _spd_inverse(regularized), method="ks")


def ks_precision(stats: ClassStats) -> PrecisionMatrix:
    return ks_precision_from_cov(stats.pooled_cov, stats.n_total)


def ledoit_wolf_shrinkage(x_centered) -> float:
    """Ledoit-Wolf optimal shrinkage coefficient, clipped to [0, 1].

    Computed from already-centered rows with the biased empirical covariance
    S = X'X / N and target ``tr(S)/D * I``:

        delta = ||S - mu I||_F^2 / D          (dispersion around the target)
        beta  = (sum_i ||x_i x_i' - S||_F^2) / (N^2 D)
        coef  = min(beta, delta) / delta
    """
    values = _as_array(x_centered)
    n, d = values.shape
    if n < 2:
        raise TooFewSamples(f"need at least 2 samples, got {n}")
    cov = values.T @ values / n
    mu = np.trace(cov) / d
    delta = float(((cov - mu * np.eye(d)) ** 2).sum()) / d
    if delta == 0.0:
        return 0.0
    sq_norms = (values**2).sum(axis=1)
    beta = (float((sq_norms**2).sum()) / n**2 - float((cov**2).sum()) / n) / d
    return float(np.clip(min(beta, delta) / delta, 0.0, 1.0))


def _shrunk_precision(values: np.ndarray, coef: float, method: str) -> PrecisionMatrix:
    n, d = values.shape
    cov = _symmetrize(values.T @ values / n)
    trace = float(np.trace(cov))
    if trace <= 1e-12:
        raise DegenerateCovariance(f"covariance trace {trace:.3e} is not positive")
    shrunk = (1.0 - coef) * cov + coef * (trace / d) * np.eye(d)
    return PrecisionMatrix(values=_spd_inverse(shrunk), method=method)


def ledoit_wolf_precision(x_centered) -> PrecisionMatrix:
    """Invert the Ledoit-Wolf shrunk covariance of centered rows."""
    values = _as_array(x_centered)
    coef = ledoit_wolf_shrinkage(values)
    return _shrunk_precision(values, coef, "ledoit_wolf")


def oas_shrinkage(x_centered) -> float:
    """Oracle-approximating shrinkage coefficient, clipped to [0, 1].

    Published closed form for Gaussian data:

        coef = ((1 - 2/D) tr(S^2) + tr(S)^2)
               / ((N + 1 - 2/D) (tr(S^2) - tr(S)^2 / D))
    """
    values = _as_array(x_centered)
    n, d = values.shape
    if n < 2:
        raise TooFewSamples(f"need at least 2 samples, got {n}")
    cov = values.T @ values / n
    tr = float(np.trace(cov))
    tr_sq = float((cov**2).sum())  # tr(S @ S) for symmetric S
    denom = (n + 1.0 - 2.0 / d) * (tr_sq - tr**2 / d)
    if denom <= 0.0:
        return 1.0
    num = (1.0 - 2.0 / d) * tr_sq + tr**2
    return float(np.clip(num / denom, 0.0, 1.0))


def oas_precision(x_centered) -> PrecisionMatrix:
    """Invert the OAS-shrunk covariance of centered rows."""
    values = _as_array(x_centered)
    coef = oas_shrinkage(values)
    return _shrunk_precision(values, coef, "oas")


def pinv_precision(stats: ClassStats) -> PrecisionMatrix:
    """Moore-Penrose pseudoinverse of the pooled covariance.

    Eigenvalues below 1e-10 of the largest are treated as exact zeros.
    """
    cov = np.asarray(stats.pooled_cov, dtype=np.float64)
    eigvals, eigvecs = np.linalg.eigh(cov)
    keep = eigvals > _PINV_RCOND * max(float(eigvals.max()), 0.0)
    inv_vals = np.zeros_like(eigvals)
    inv_vals[keep] = 1.0 / eigvals[keep]
    pinv = _symmetrize((eigvecs * inv_vals) @ eigvecs.T)
    return PrecisionMatrix(values=pinv, method="pinv")


def estimate_precision(method: str, stats: ClassStats, centered_rows=None) -> PrecisionMatrix:
    """Dispatch on the estimator tag; shrinkage methods need centered rows."""
    if method == "ks":
        return ks_precision(stats)
    if method == "pinv":
        return pinv_precision(stats)
    if method in ("ledoit_wolf", "oas"):
        if centered_rows is None:
            raise ValueError(f"{method} estimator requires the centered rows")
        fn = ledoit_wolf_precision if method == "ledoit_wolf" else oas_precision
        return fn(centered_rows)
    raise ValueError(f"unknown estimator {method!r}; choose from {ESTIMATORS}")
