"""Turn image folders and class names into embedding dataset bundles."""

from .encoders import ENCODER_TAGS, StubEncoder, get_encoder
from .errors import BadTemplate, DatasetMissing, EncoderLoadError, ExtractorError
from .extract import build_zeroshot_head, extract_features, list_classes, normalize_rows
from .prompts import DEFAULT_TEMPLATES, PromptTemplateSet, get_templates, known_datasets

__version__ = "0.1.0"
