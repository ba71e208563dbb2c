"""Run the full few-shot protocol on a synthetic dataset directory.

Writes a bundle in the documented on-disk layout, then sweeps
(shots, seed) cells: subsample training rows, search the mixing weight on
the validation split, fit, and score the test split. The printed JSON is
byte-reproducible for identical inputs.
"""

import os
import tempfile

import numpy as np

from gdakit import load_bundle, report_to_json, run_fewshot_protocol
from gdakit.data import write_npy

rng = np.random.default_rng(11)
K, D = 8, 64

directions = rng.standard_normal((K, D))
directions /= np.linalg.norm(directions, axis=1, keepdims=True)


def write_split(root, split, per_class, spread=0.5):
    y = np.repeat(np.arange(K), per_class)
    x = directions[y] + spread * rng.standard_normal((len(y), D))
    write_npy(os.path.join(root, f"{split}_features.npy"), x.astype(np.float32))
    write_npy(os.path.join(root, f"{split}_labels.npy"), y.astype(np.int64))


with tempfile.TemporaryDirectory() as tmp:
    root = os.path.join(tmp, "synthetic")
    os.makedirs(root)
    write_split(root, "train", per_class=32)
    write_split(root, "val", per_class=16)
    write_split(root, "test", per_class=64)
    write_npy(os.path.join(root, "zeroshot_weights.npy"),
              directions.astype(np.float32))
    with open(os.path.join(root, "class_names.txt"), "w") as fh:
        fh.writelines(f"concept {i}\n" for i in range(K))

    bundle = load_bundle(root)
    report = run_fewshot_protocol(bundle, shots_list=[2, 4, 8, 16],
                                  seeds=[0, 1, 2])
    print(report_to_json(report))
