"""Fit a classifier from Gaussian statistics and inspect its posterior.

Synthetic stand-in for encoder features: five classes of unit-norm vectors
clustered around five directions. The zero-shot head is a noisy copy of the
directions, so neither branch is perfect alone and the ensemble helps.
"""

import numpy as np

from gdakit import (
    FeatureMatrix,
    ZeroShotHead,
    ensemble_logits,
    evaluate,
    fit_pipeline,
    gda_posterior,
    l2_normalize,
    predict,
)

rng = np.random.default_rng(0)
K, D = 5, 32

directions = rng.standard_normal((K, D))
directions /= np.linalg.norm(directions, axis=1, keepdims=True)


def sample(per_class, spread=0.45):
    y = np.repeat(np.arange(K), per_class)
    x = directions[y] + spread * rng.standard_normal((len(y), D))
    return l2_normalize(FeatureMatrix(x)), y


train_x, train_y = sample(16)          # 16 shots per class
test_x, test_y = sample(400)

# a deliberately imperfect text head: true directions plus noise
head_rows = directions + 0.35 * rng.standard_normal((K, D))
head = ZeroShotHead(head_rows / np.linalg.norm(head_rows, axis=1, keepdims=True))

model = fit_pipeline(train_x, train_y, head, alpha=1.0, estimator="ks")

print("posterior of the first three test samples:")
post = gda_posterior(test_x, model.gda)[:3]
for row in post:
    print("  " + "  ".join(f"{p:.3f}" for p in row), "-> sums to", f"{row.sum():.6f}")

for name, alpha, zero_head in (
    ("zero-shot head only", 0.0, False),
    ("statistics branch only", 1.0, True),
    ("ensemble (alpha=1)", 1.0, False),
):
    m = fit_pipeline(train_x, train_y,
                     ZeroShotHead(np.zeros((K, D))) if zero_head else head,
                     alpha=alpha)
    report = evaluate(predict(ensemble_logits(test_x, m)), test_y)
    print(f"{name:24s} accuracy {report.accuracy:.4f}  macro-F1 {report.macro_f1:.4f}")
