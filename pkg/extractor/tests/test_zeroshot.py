import hashlib

import numpy as np
import pytest

from extractor import (
    PromptTemplateSet,
    StubEncoder,
    build_zeroshot_head,
    get_templates,
    normalize_rows,
)


class TestBuildZeroshotHead:
    def test_single_template_single_class(self, tmp_path):
        encoder = StubEncoder(dim=32)
        templates = PromptTemplateSet("x", ("a photo of a {class}.",))
        weights = build_zeroshot_head(["lynx"], templates, encoder, tmp_path)
        raw = encoder.encode_texts(["a photo of a lynx."])
        np.testing.assert_allclose(weights, normalize_rows(raw), atol=1e-7)

    def test_rows_unit_norm(self, tmp_path):
        templates = get_templates("imagenet")  # six-template ensemble
        names = [f"class {i}" for i in range(7)]
        weights = build_zeroshot_head(names, templates, StubEncoder(dim=64), tmp_path)
        assert weights.shape == (7, 64)
        norms = np.linalg.norm(weights.astype(np.float64), axis=1)
        assert np.abs(norms - 1.0).max() <= 1e-4

    def test_duplicate_templates_match_single(self, tmp_path):
        encoder = StubEncoder(dim=16)
        single = PromptTemplateSet("x", ("a photo of a {class}.",))
        double = PromptTemplateSet("x", ("a photo of a {class}.",) * 2)
        a = build_zeroshot_head(["fox"], single, encoder, tmp_path / "a")
        b = build_zeroshot_head(["fox"], double, encoder, tmp_path / "b")
        np.testing.assert_allclose(a, b, atol=1e-7)

    def test_written_file_round_trips(self, tmp_path):
        weights = build_zeroshot_head(["a", "b"], get_templates("eurosat"),
                                      StubEncoder(dim=24), tmp_path)
        np.testing.assert_array_equal(np.load(tmp_path / "zeroshot_weights.npy"),
                                      weights)

    def test_rerun_byte_identical(self, tmp_path):
        for _ in range(2):
            build_zeroshot_head(["x", "y", "z"], get_templates("dtd"),
                                StubEncoder(dim=20), tmp_path)
            digest = hashlib.sha256(
                (tmp_path / "zeroshot_weights.npy").read_bytes()
            ).hexdigest()
        assert digest == hashlib.sha256(
            (tmp_path / "zeroshot_weights.npy").read_bytes()
        ).hexdigest()

    def test_rejects_empty_class_list(self, tmp_path):
        with pytest.raises(ValueError):
            build_zeroshot_head([], get_templates("dtd"), StubEncoder(), tmp_path)

    def test_passes_consumer_validation(self, tmp_path):
        gdakit = pytest.importorskip("gdakit")
        build_zeroshot_head(["a", "b", "c"], get_templates("caltech101"),
                            StubEncoder(dim=28), tmp_path)
        head = gdakit.ZeroShotHead(
            gdakit.data.read_npy(tmp_path / "zeroshot_weights.npy", "<f4", ndim=2)
        )
        head.validate_unit_norm()
        assert head.k == 3
