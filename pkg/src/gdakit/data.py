"""Embedding datasets on disk: NPY I/O, normalization, and split construction.

On-disk layout of a dataset bundle (all arrays little-endian, C order)::

    <name>/train_features.npy   float32, shape (N, D)
    <name>/train_labels.npy     int64,   shape (N,)
    <name>/val_features.npy     float32
    <name>/val_labels.npy       int64
    <name>/test_features.npy    float32
    <name>/test_labels.npy      int64
    <name>/zeroshot_weights.npy float32, shape (K, D), unit-norm rows
    <name>/class_names.txt      one UTF-8 name per line, K lines

Arrays use the NPY version 1.0 format: magic ``\\x93NUMPY``, version bytes
``(1, 0)``, a little-endian uint16 header length, then a Python dict literal
``{'descr': ..., 'fortran_order': False, 'shape': ...}`` padded with spaces
and terminated by a newline so the payload starts on a 64-byte boundary.
"""

from __future__ import annotations

import ast
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    DTypeMismatch,
    IoFailure,
    LengthMismatch,
    MalformedHeader,
    ZeroRow,
)

_MAGIC = b"\x93NUMPY"
_VERSION = bytes((1, 0))

FEATURE_DTYPE = np.dtype("<f4")
LABEL_DTYPE = np.dtype("<i8")


# ---------------------------------------------------------------------------
# Raw NPY v1.0 reader/writer


def read_npy(path, dtype, ndim):
    """Read an NPY v1.0 file holding a C-order array of the given dtype.

    Parameters
    ----------
    path : str or os.PathLike
    dtype : numpy dtype
        Required on-disk dtype ('<f4' for features/weights, '<i8' for labels).
    ndim : int
        Required array rank; anything else raises MalformedHeader.

    Returns
    -------
    ndarray
        A fresh, writable array of exactly the stored bytes.
    """
    dtype = np.dtype(dtype)
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    if len(raw) < 10 or raw[:6] != _MAGIC:
        raise MalformedHeader(f"{path}: missing NPY magic string")
    if raw[6:8] != _VERSION:
        raise MalformedHeader(f"{path}: unsupported NPY version {raw[6]}.{raw[7]}")
    header_len = int.from_bytes(raw[8:10], "little")
    if len(raw) < 10 + header_len:
        raise MalformedHeader(f"{path}: truncated header")
    header = raw[10 : 10 + header_len]

    try:
        meta = ast.literal_eval(header.decode("latin1"))
    except (ValueError, SyntaxError) as exc:
        raise MalformedHeader(f"{path}: unparseable header") from exc
    if not isinstance(meta, dict) or set(meta) != {"descr", "fortran_order", "shape"}:
        raise MalformedHeader(f"{path}: header keys must be descr/fortran_order/shape")
    if meta["fortran_order"] is not False:
        raise MalformedHeader(f"{path}: fortran_order must be False")
    shape = meta["shape"]
    if not (
        isinstance(shape, tuple)
        and all(isinstance(s, int) and s >= 0 for s in shape)
    ):
        raise MalformedHeader(f"{path}: bad shape {shape!r}")
    if len(shape) != ndim:
        raise MalformedHeader(f"{path}: expected a {ndim}-D array, got shape {shape}")
    if meta["descr"] != dtype.str:
        raise DTypeMismatch(f"{path}: dtype is {meta['descr']!r}, expected {dtype.str!r}")

    payload = raw[10 + header_len :]
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    if len(payload) != expected:
        raise MalformedHeader(
            f"{path}: payload holds {len(payload)} bytes, header implies {expected}"
        )
    return np.frombuffer(payload, dtype=dtype).reshape(shape).copy()


def write_npy(path, array):
    """Write an array as NPY v1.0, byte-compatible with ``numpy.save``."""
    array = np.ascontiguousarray(array)
    header = (
        f"{{'descr': {array.dtype.str!r}, 'fortran_order': False, "
        f"'shape': {array.shape!r}, }}"
    )
    # pad so magic+version+length+header is a multiple of 64, newline-terminated
    unpadded = len(_MAGIC) + 2 + 2 + len(header) + 1
    header = header + " " * (-unpadded % 64) + "\n"
    try:
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(_VERSION)
            fh.write(len(header).to_bytes(2, "little"))
            fh.write(header.encode("latin1"))
            fh.write(array.tobytes(order="C"))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class FeatureMatrix:
    """An (n, d) float32 matrix of embedding vectors, one sample per row.

    Entries must be finite and both dimensions at least 1. When
    ``normalized`` is set every row must already have unit Euclidean norm
    (within 1e-4). The wrapped array is made read-only; treat instances as
    immutable values.
    """

    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float32, order="C")
        if values.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {values.shape}")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"features must be at least 1x1, got {values.shape}")
        if not np.isfinite(values).all():
            raise ValueError("features contain NaN or Inf entries")
        if self.normalized:
            norms = np.linalg.norm(values.astype(np.float64), axis=1)
            if np.abs(norms - 1.0).max() > 1e-4:
                raise ValueError("normalized flag set but rows are not unit-norm")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ZeroShotHead:
    """A (K, D) matrix of text-derived class weights, one row per class.

    Real heads have unit-norm rows (inner products against normalized
    features are then cosine scores); call ``validate_unit_norm`` to assert
    that. Construction stays lenient so ablations can use zero or scaled
    heads.
    """

    weight: np.ndarray

    def __post_init__(self):
        weight = np.array(self.weight, dtype=np.float64, order="C")
        if weight.ndim != 2 or weight.shape[0] < 1 or weight.shape[1] < 1:
            raise ValueError(f"zero-shot weights must be 2-D, got {weight.shape}")
        if not np.isfinite(weight).all():
            raise ValueError("zero-shot weights contain NaN or Inf entries")
        weight.flags.writeable = False
        object.__setattr__(self, "weight", weight)

    @property
    def k(self) -> int:
        return self.weight.shape[0]

    @property
    def d(self) -> int:
        return self.weight.shape[1]

    def validate_unit_norm(self, tol: float = 1e-3):
        norms = np.linalg.norm(self.weight, axis=1)
        worst = float(np.abs(norms - 1.0).max())
        if worst > tol:
            raise ValueError(
                f"zero-shot rows must be unit-norm within {tol}, worst deviation {worst:.2e}"
            )


@dataclass(frozen=True)
class FewShotSplit:
    """Row indices selected for a per-class budget of training samples."""

    shots: int
    seed: int
    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        object.__setattr__(self, "indices", idx)


@dataclass(frozen=True)
class LongTailGroups:
    """Class indices bucketed by training frequency.

    many: more than 100 samples; medium: 20 to 100 inclusive; few: under 20.
    The three sets partition [0, K).
    """

    many: frozenset
    medium: frozenset
    few: frozenset

    @property
    def n_classes(self) -> int:
        return len(self.many) + len(self.medium) + len(self.few)


@dataclass(frozen=True)
class DatasetBundle:
    """All splits of one dataset plus its zero-shot head and class names."""

    name: str
    train: tuple
    val: tuple
    test: tuple
    zeroshot: ZeroShotHead
    class_names: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# Operations


def load_matrix(path) -> FeatureMatrix:
    """Load a float32 NPY feature matrix. Rejects non-2D or non-'<f4' files."""
    values = read_npy(path, FEATURE_DTYPE, ndim=2)
    try:
        return FeatureMatrix(values)
    except ValueError as exc:
        raise MalformedHeader(f"{path}: {exc}") from exc


def save_matrix(path, matrix) -> None:
    """Write a FeatureMatrix (or float32 array) as NPY v1.0."""
    values = matrix.values if isinstance(matrix, FeatureMatrix) else matrix
    write_npy(path, np.asarray(values, dtype=FEATURE_DTYPE))


def load_labels(path) -> np.ndarray:
    """Load an int64 NPY label vector; entries must be nonnegative."""
    labels = read_npy(path, LABEL_DTYPE, ndim=1)
    if labels.size and labels.min() < 0:
        raise MalformedHeader(f"{path}: labels must be nonnegative")
    return labels


def save_labels(path, labels) -> None:
    write_npy(path, np.asarray(labels, dtype=LABEL_DTYPE))


def l2_normalize(x: FeatureMatrix) -> FeatureMatrix:
    """Scale every row to unit Euclidean norm.

    Raises ZeroRow if any row norm is below 1e-12. Idempotent up to float32
    rounding.
    """
    values = x.values.astype(np.float64)
    norms = np.linalg.norm(values, axis=1)
    if norms.min() < 1e-12:
        raise ZeroRow(f"row {int(np.argmin(norms))} has norm {norms.min():.3e}")
    return FeatureMatrix(values / norms[:, None], normalized=True)


def _as_labels(labels) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1:
        raise ValueError(f"labels must be 1-D, got shape {labels.shape}")
    if labels.size and labels.min() < 0:
        raise ValueError("labels must be nonnegative")
    return labels


def sample_fewshot(labels, shots: int, seed: int) -> FewShotSplit:
    """Draw up to ``shots`` training rows per class, reproducibly.

    Per class ``c`` the rows with that label are permuted by a Philox
    counter-based generator keyed with the two 64-bit words
    ``(seed mod 2**64, c)``, and the first ``shots`` survivors are kept
    (all of them when the class holds fewer). The returned indices are
    unique and sorted ascending. Identical inputs give identical output on
    every platform.
    """
    labels = _as_labels(labels)
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    n_classes = int(labels.max()) + 1 if labels.size else 0
    picked = []
    for c in range(n_classes):
        rows = np.flatnonzero(labels == c)
        if rows.size == 0:
            continue
        if rows.size <= shots:
            picked.append(rows)
            continue
        key = np.array([seed % 2**64, c], dtype=np.uint64)
        rng = np.random.Generator(np.random.Philox(key=key))
        picked.append(rng.permutation(rows)[:shots])
    indices = np.sort(np.concatenate(picked)) if picked else np.empty(0, np.int64)
    return FewShotSplit(shots=shots, seed=seed, indices=indices)


def partition_longtail(labels, n_classes=None) -> LongTailGroups:
    """Bucket classes by sample count: many (>100), medium (20-100), few (<20)."""
    labels = _as_labels(labels)
    if n_classes is None:
        n_classes = int(labels.max()) + 1 if labels.size else 0
    counts = np.bincount(labels, minlength=n_classes)
    many = frozenset(np.flatnonzero(counts > 100).tolist())
    medium = frozenset(np.flatnonzero((counts >= 20) & (counts <= 100)).tolist())
    few = frozenset(np.flatnonzero(counts < 20).tolist())
    return LongTailGroups(many=many, medium=medium, few=few)


def _load_split(root, split, normalize):
    features = load_matrix(os.path.join(root, f"{split}_features.npy"))
    labels = load_labels(os.path.join(root, f"{split}_labels.npy"))
    if labels.shape[0] != features.n:
        raise LengthMismatch(
            f"{split} split has {features.n} feature rows but {labels.shape[0]} labels"
        )
    if normalize:
        features = l2_normalize(features)
    return features, labels


def load_bundle(root, normalize: bool = True) -> DatasetBundle:
    """Load a dataset directory into a DatasetBundle.

    Features are L2-normalized by default so that inner products against the
    zero-shot head are cosine scores; pass ``normalize=False`` to keep raw
    encoder outputs. The zero-shot head is required to have unit-norm rows
    and one row per class name.
    """
    train = _load_split(root, "train", normalize)
    val = _load_split(root, "val", normalize)
    test = _load_split(root, "test", normalize)

    head = ZeroShotHead(read_npy(os.path.join(root, "zeroshot_weights.npy"),
                                 FEATURE_DTYPE, ndim=2))
    head.validate_unit_norm()

    names_path = os.path.join(root, "class_names.txt")
    try:
        with open(names_path, encoding="utf-8") as fh:
            class_names = [line.rstrip("\n") for line in fh if line.strip()]
    except OSError as exc:
        raise IoFailure(f"cannot read {names_path}: {exc}") from exc

    d = train[0].d
    for split_name, (features, _) in (("val", val), ("test", test)):
        if features.d != d:
            raise DimensionMismatch(
                f"{split_name} features have d={features.d}, train has d={d}"
            )
    if head.d != d:
        raise DimensionMismatch(f"zero-shot head has d={head.d}, features have d={d}")
    if head.k != len(class_names):
        raise DimensionMismatch(
            f"zero-shot head has {head.k} rows but {len(class_names)} class names"
        )
    for split_name, (_, labels) in (("train", train), ("val", val), ("test", test)):
        if labels.size and labels.max() >= head.k:
            raise DimensionMismatch(
                f"{split_name} labels reach {int(labels.max())}, head has {head.k} classes"
            )

    return DatasetBundle(
        name=os.path.basename(os.path.normpath(root)),
        train=train,
        val=val,
        test=test,
        zeroshot=head,
        class_names=class_names,
    )
