"""Walk image-folder datasets and write embedding bundles.

Expected input layout (one directory per class, any common image format)::

    <data_root>/<dataset>/<split>/<class_name>/<image files>

Outputs land in the consumer's documented bundle layout:
``<out>/<split>_features.npy`` (float32, L2-normalized rows),
``<out>/<split>_labels.npy`` (int64) and ``<out>/class_names.txt``. Class
indices come from the sorted union of class directories across all splits
present, so separately extracted splits stay consistent. All files are
written atomically (temp file + rename) and reruns are byte-identical for
deterministic encoders.
"""

import os
import tempfile

import numpy as np
from PIL import Image

from .errors import DatasetMissing
from .prompts import PromptTemplateSet

IMAGE_EXTENSIONS = {".jpg", ".jpeg", ".png", ".bmp", ".webp", ".tif", ".tiff"}
SPLITS = ("train", "val", "test")


def _atomic_write_npy(path, array):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(suffix=".npy", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            np.save(fh, array)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def _atomic_write_text(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(suffix=".txt", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def list_classes(dataset_root) -> list:
    """Sorted union of class directory names across the splits present."""
    names = set()
    found_split = False
    for split in SPLITS:
        split_dir = os.path.join(dataset_root, split)
        if not os.path.isdir(split_dir):
            continue
        found_split = True
        for entry in os.listdir(split_dir):
            if os.path.isdir(os.path.join(split_dir, entry)):
                names.add(entry)
    if not found_split:
        raise DatasetMissing(f"no train/val/test directories under {dataset_root}")
    if not names:
        raise DatasetMissing(f"no class directories under {dataset_root}")
    return sorted(names)


def _split_images(dataset_root, split, class_names):
    split_dir = os.path.join(dataset_root, split)
    if not os.path.isdir(split_dir):
        raise DatasetMissing(f"split directory {split_dir} does not exist")
    paths, labels = [], []
    for index, name in enumerate(class_names):
        class_dir = os.path.join(split_dir, name)
        if not os.path.isdir(class_dir):
            continue
        for filename in sorted(os.listdir(class_dir)):
            if os.path.splitext(filename)[1].lower() in IMAGE_EXTENSIONS:
                paths.append(os.path.join(class_dir, filename))
                labels.append(index)
    if not paths:
        raise DatasetMissing(f"split {split!r} contains no images")
    return paths, np.asarray(labels, dtype=np.int64)


def normalize_rows(rows) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    if norms.min() <= 0:
        raise ValueError("encoder produced a zero embedding")
    return (rows / norms).astype(np.float32)


def extract_features(dataset_root, split, encoder, out_dir,
                     batch_size: int = 32) -> dict:
    """Embed one split and write features + labels + class names.

    Nothing is written until the whole split is encoded, so a failure never
    leaves partial files behind. Returns a summary dict.
    """
    class_names = list_classes(dataset_root)
    paths, labels = _split_images(dataset_root, split, class_names)

    chunks = []
    for start in range(0, len(paths), batch_size):
        batch_paths = paths[start : start + batch_size]
        images = []
        try:
            for path in batch_paths:
                with Image.open(path) as img:
                    images.append(img.convert("RGB"))
            chunks.append(encoder.encode_images(images))
        finally:
            for img in images:
                img.close()
    features = normalize_rows(np.vstack(chunks))

    os.makedirs(out_dir, exist_ok=True)
    _atomic_write_npy(os.path.join(out_dir, f"{split}_features.npy"), features)
    _atomic_write_npy(os.path.join(out_dir, f"{split}_labels.npy"), labels)
    _atomic_write_text(os.path.join(out_dir, "class_names.txt"),
                       "".join(f"{name}\n" for name in class_names))
    return {
        "split": split,
        "images": len(paths),
        "dim": int(features.shape[1]),
        "classes": len(class_names),
    }


def build_zeroshot_head(class_names, templates: PromptTemplateSet, encoder,
                        out_dir) -> np.ndarray:
    """Prompt-ensembled class weights, written as zeroshot_weights.npy.

    Each filled template is embedded and L2-normalized, the per-class
    embeddings are averaged, and the average is re-normalized; with one
    template this degenerates to plain encoding. Rows come out unit-norm.
    """
    class_names = list(class_names)
    if not class_names:
        raise ValueError("class_names must be nonempty")
    rows = []
    for name in class_names:
        embeddings = normalize_rows(encoder.encode_texts(templates.fill(name)))
        mean = embeddings.astype(np.float64).mean(axis=0, keepdims=True)
        rows.append(normalize_rows(mean)[0])
    weights = np.stack(rows).astype(np.float32)
    os.makedirs(out_dir, exist_ok=True)
    _atomic_write_npy(os.path.join(out_dir, "zeroshot_weights.npy"), weights)
    return weights
