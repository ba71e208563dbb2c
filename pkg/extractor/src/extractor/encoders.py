"""Encoder backends that embed images and texts into a shared space.

Real extraction uses a contrastively pretrained vision-language model.
Tags ``rn50``/``rn101``/``vitb32``/``vitb16`` select the standard variants:
the ResNet ones require the ``open_clip`` package, the ViT ones load via
``open_clip`` when present and fall back to ``transformers``. Model weights
are fetched by those libraries on first use.

The ``stub`` backend hashes raw image/text bytes into fixed vectors. It
needs no model files, is byte-deterministic across platforms, and exists so
pipelines and tests can run end to end without network access.
"""

import hashlib

import numpy as np

from .errors import EncoderLoadError

# tag -> (open_clip model name, transformers checkpoint or None, feature dim)
ENCODER_TAGS = {
    "rn50": ("RN50", None, 1024),
    "rn101": ("RN101", None, 512),
    "vitb32": ("ViT-B-32", "openai/clip-vit-base-patch32", 512),
    "vitb16": ("ViT-B-16", "openai/clip-vit-base-patch16", 512),
}


class StubEncoder:
    """Deterministic hash-based embeddings for tests and dry runs."""

    def __init__(self, dim: int = 64):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.name = f"stub{dim}"
        self.dim = dim

    def _vector(self, payload: bytes) -> np.ndarray:
        words = []
        block = 0
        while len(words) * 8 < self.dim:
            digest = hashlib.sha256(payload + block.to_bytes(4, "little")).digest()
            words.append(np.frombuffer(digest, dtype="<u4"))
            block += 1
        raw = np.concatenate(words)[: self.dim].astype(np.float64)
        return raw / 2**31 - 1.0  # map uint32 onto [-1, 1)

    def encode_images(self, images) -> np.ndarray:
        rows = []
        for image in images:
            rgb = image.convert("RGB")
            payload = b"image:" + rgb.size[0].to_bytes(4, "little")
            payload += rgb.size[1].to_bytes(4, "little") + rgb.tobytes()
            rows.append(self._vector(payload))
        return np.stack(rows).astype(np.float32)

    def encode_texts(self, texts) -> np.ndarray:
        rows = [self._vector(b"text:" + t.encode("utf-8")) for t in texts]
        return np.stack(rows).astype(np.float32)


class OpenClipEncoder:
    """Any of the four standard variants through the open_clip package."""

    def __init__(self, tag: str):
        try:
            import open_clip
            import torch
        except ImportError as exc:
            raise EncoderLoadError(
                f"encoder {tag!r} needs the open_clip backend: pip install open_clip_torch"
            ) from exc
        model_name, _, dim = ENCODER_TAGS[tag]
        try:
            model, _, preprocess = open_clip.create_model_and_transforms(
                model_name, pretrained="openai"
            )
        except Exception as exc:
            raise EncoderLoadError(f"loading {model_name} failed: {exc}") from exc
        self.name = tag
        self.dim = dim
        self._torch = torch
        self._model = model.eval()
        self._preprocess = preprocess
        self._tokenize = open_clip.get_tokenizer(model_name)

    def encode_images(self, images) -> np.ndarray:
        torch = self._torch
        batch = torch.stack([self._preprocess(img.convert("RGB")) for img in images])
        with torch.no_grad():
            features = self._model.encode_image(batch)
        return features.cpu().numpy().astype(np.float32)

    def encode_texts(self, texts) -> np.ndarray:
        torch = self._torch
        tokens = self._tokenize(list(texts))
        with torch.no_grad():
            features = self._model.encode_text(tokens)
        return features.cpu().numpy().astype(np.float32)


class HfClipEncoder:
    """ViT variants through transformers (no ResNet checkpoints exist there)."""

    def __init__(self, tag: str):
        _, checkpoint, dim = ENCODER_TAGS[tag]
        if checkpoint is None:
            raise EncoderLoadError(
                f"encoder {tag!r} is not published for transformers; "
                "install open_clip_torch instead"
            )
        try:
            import torch
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise EncoderLoadError(
                f"encoder {tag!r} needs torch + transformers installed"
            ) from exc
        try:
            self._model = CLIPModel.from_pretrained(checkpoint).eval()
            self._processor = CLIPProcessor.from_pretrained(checkpoint)
        except Exception as exc:
            raise EncoderLoadError(f"loading {checkpoint} failed: {exc}") from exc
        self.name = tag
        self.dim = dim
        self._torch = torch

    def encode_images(self, images) -> np.ndarray:
        torch = self._torch
        inputs = self._processor(
            images=[img.convert("RGB") for img in images], return_tensors="pt"
        )
        with torch.no_grad():
            features = self._model.get_image_features(**inputs)
        return features.cpu().numpy().astype(np.float32)

    def encode_texts(self, texts) -> np.ndarray:
        torch = self._torch
        inputs = self._processor(text=list(texts), return_tensors="pt", padding=True)
        with torch.no_grad():
            features = self._model.get_text_features(**inputs)
        return features.cpu().numpy().astype(np.float32)


def get_encoder(tag: str):
    """Build an encoder from its tag; 'stub' or 'stub<dim>' for the hash backend."""
    tag = tag.strip().lower()
    if tag.startswith("stub"):
        suffix = tag[4:]
        return StubEncoder(dim=int(suffix) if suffix else 64)
    if tag not in ENCODER_TAGS:
        known = ", ".join((*ENCODER_TAGS, "stub"))
        raise EncoderLoadError(f"unknown encoder {tag!r}; known tags: {known}")
    try:
        return OpenClipEncoder(tag)
    except EncoderLoadError:
        if ENCODER_TAGS[tag][1] is None:
            raise
        return HfClipEncoder(tag)
