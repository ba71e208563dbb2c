"""Adapt to a dataset with no labels at all via expectation-maximization.

Unlabeled features are modeled as an equal-prior Gaussian mixture with a
shared covariance, initialized from the zero-shot head. Each E-step scores
samples with the same mixed logits used at prediction time; each M-step
re-estimates the means and covariance from the soft assignments.
"""

import numpy as np

from gdakit import (
    EnsembleModel,
    FeatureMatrix,
    ZeroShotHead,
    em_fit,
    ensemble_logits,
    l2_normalize,
    predict,
)

rng = np.random.default_rng(5)
K, D = 6, 48

directions = rng.standard_normal((K, D))
directions /= np.linalg.norm(directions, axis=1, keepdims=True)

# the head is a degraded guess at the true directions
head_rows = directions + 0.5 * rng.standard_normal((K, D))
head = ZeroShotHead(head_rows / np.linalg.norm(head_rows, axis=1, keepdims=True))

y = np.repeat(np.arange(K), 300)
x = l2_normalize(FeatureMatrix(directions[y] + 0.35 * rng.standard_normal((len(y), D))))

# the regularized precision shrinks like 1/N, so with N=1800 unlabeled rows
# the mixing weight has to be well above 1 for the Gaussian branch to count
result = em_fit(x, head, alpha=40.0, mode="ensemble", max_iter=100, tol=1e-4)
status = "converged" if result.converged else "hit the cap"
print(f"EM {status} after {result.n_iter} iterations")

zs_only = EnsembleModel(head, result.model.gda, alpha=0.0)
for name, model in (("zero-shot head only", zs_only), ("EM-adapted ensemble", result.model)):
    acc = np.mean(predict(ensemble_logits(x, model)) == y)
    print(f"{name:22s} accuracy {acc:.4f}")
