"""Training-free linear classifiers over precomputed embedding features.

Build a classifier from per-class Gaussian statistics (means plus a shared,
ridge-regularized covariance), mix it with a text-derived zero-shot head,
and extend it to unseen classes (nearest-neighbor data synthesis) or
unlabeled data (expectation-maximization). Everything operates on NPY files
of encoder features; no gradient training anywhere.
"""

from .data import (
    DatasetBundle,
    FeatureMatrix,
    FewShotSplit,
    LongTailGroups,
    ZeroShotHead,
    l2_normalize,
    load_bundle,
    load_labels,
    load_matrix,
    partition_longtail,
    sample_fewshot,
    save_labels,
    save_matrix,
)
from .errors import (
    DegenerateCovariance,
    DegeneracyError,
    DimensionMismatch,
    DTypeMismatch,
    EmptyClass,
    GdakitError,
    IoFailure,
    LengthMismatch,
    MalformedHeader,
    TooFewSamples,
    ZeroRow,
)
from .estimators import (
    ESTIMATORS,
    ClassStats,
    PrecisionMatrix,
    class_means,
    estimate_precision,
    ks_precision,
    ks_precision_from_cov,
    ledoit_wolf_precision,
    ledoit_wolf_shrinkage,
    oas_precision,
    oas_shrinkage,
    pinv_precision,
    pooled_covariance,
)
from .evaluation import (
    DEFAULT_ALPHA_GRID,
    AlphaSearchResult,
    EvalReport,
    evaluate,
    report_to_json,
    run_fewshot_protocol,
    search_alpha,
)
from .extensions import (
    EmFitResult,
    EmState,
    SynthesizedDataset,
    b2n_fit,
    em_e_step,
    em_fit,
    em_init,
    em_m_step,
    gmm_loglik,
    knn_synthesize,
)
from .gda import (
    EnsembleModel,
    LinearClassifier,
    build_classifier,
    ensemble_logits,
    fit_pipeline,
    gda_posterior,
    load_model,
    predict,
    save_model,
)

__version__ = "0.1.0"
