"""Compare precision-matrix estimators as the per-class budget grows.

With few samples in a high-dimensional space the empirical covariance is
singular; the estimators differ in how they make it invertible. The
zero-shot head is zeroed here so the statistics branch is evaluated on its
own. The ridge-type default needs at least 2 samples per class (a 1-shot
budget zeroes the class-centered scatter), so the sweep starts at 2.
"""

import numpy as np

from gdakit import (
    FeatureMatrix,
    ZeroShotHead,
    ensemble_logits,
    fit_pipeline,
    l2_normalize,
    predict,
    sample_fewshot,
)

rng = np.random.default_rng(7)
K, D = 10, 64

directions = rng.standard_normal((K, D))
directions /= np.linalg.norm(directions, axis=1, keepdims=True)


def sample(per_class, spread=0.4):
    y = np.repeat(np.arange(K), per_class)
    x = directions[y] + spread * rng.standard_normal((len(y), D))
    return l2_normalize(FeatureMatrix(x)), y


train_x, train_y = sample(64)
test_x, test_y = sample(200)
mute_head = ZeroShotHead(np.zeros((K, D)))  # statistics branch only

shots_grid = (2, 4, 8, 16, 32)
estimators = ("ks", "ledoit_wolf", "oas", "pinv")

print(f"{'estimator':<12}" + "".join(f"{s:>8}" for s in shots_grid))
for estimator in estimators:
    row = []
    for shots in shots_grid:
        split = sample_fewshot(train_y, shots, seed=0)
        sub_x = FeatureMatrix(train_x.values[split.indices], normalized=True)
        model = fit_pipeline(sub_x, train_y[split.indices], mute_head,
                             alpha=1.0, estimator=estimator)
        preds = predict(ensemble_logits(test_x, model))
        row.append(np.mean(preds == test_y))
    print(f"{estimator:<12}" + "".join(f"{acc:>8.3f}" for acc in row))
