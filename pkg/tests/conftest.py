import numpy as np
import pytest

from gdakit import DatasetBundle, FeatureMatrix, ZeroShotHead, l2_normalize


def random_spd(rng, d, scale=1.0):
    """A well-conditioned random symmetric positive-definite matrix."""
    a = rng.standard_normal((d, d))
    return scale * (a @ a.T / d + np.eye(d))


def unit_rows(rng, k, d):
    w = rng.standard_normal((k, d))
    return w / np.linalg.norm(w, axis=1, keepdims=True)


def gaussian_class_data(rng, means, cov, per_class):
    """Sample per_class rows from each class's Gaussian (shared covariance)."""
    k, d = means.shape
    chol = np.linalg.cholesky(cov)
    y = np.repeat(np.arange(k), per_class)
    x = means[y] + rng.standard_normal((len(y), d)) @ chol.T
    return x, y


def make_sphere_bundle(seed=0, n_classes=5, d=16, n_train=40, n_val=20,
                       n_test=20, spread=0.25, name="synthetic"):
    """A separable synthetic bundle: unit-norm features around unit-norm
    class directions, zero-shot head equal to the class directions."""
    rng = np.random.default_rng(seed)
    directions = unit_rows(rng, n_classes, d)

    def split(per_class):
        y = np.repeat(np.arange(n_classes), per_class)
        x = directions[y] + spread * rng.standard_normal((len(y), d))
        return l2_normalize(FeatureMatrix(x)), y

    return DatasetBundle(
        name=name,
        train=split(n_train),
        val=split(n_val),
        test=split(n_test),
        zeroshot=ZeroShotHead(directions),
        class_names=[f"class_{i}" for i in range(n_classes)],
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
