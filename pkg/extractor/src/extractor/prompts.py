"""Per-dataset prompt template sets for the zero-shot classifier weights.

Every template contains exactly one ``{class}`` placeholder. Most datasets
use a single handcrafted sentence; the generic object-recognition set uses
an ensemble of six, averaged in embedding space.
"""

from dataclasses import dataclass

from .errors import BadTemplate

_TEMPLATE_TABLE = {
    "caltech101": ("a photo of a {class}.",),
    "oxford_pets": ("a photo of a {class}, a type of pet.",),
    "stanford_cars": ("a photo of a {class}.",),
    "flowers102": ("a photo of a {class}, a type of flower.",),
    "food101": ("a photo of {class}, a type of food.",),
    "fgvc_aircraft": ("a photo of a {class}, a type of aircraft.",),
    "sun397": ("a photo of a {class}.",),
    "dtd": ("{class} texture.",),
    "eurosat": ("a centered satellite photo of {class}.",),
    "ucf101": ("a photo of a person doing {class}.",),
    "imagenet": (
        "a bad photo of the {class}.",
        "a origami {class}.",
        "a photo of the large {class}.",
        "a {class} in a video game.",
        "art of the {class}.",
        "a photo of the small {class}.",
    ),
    "imagenet_lt": ("a photo of a {class}.",),
    "places_lt": ("a photo of a {class}.",),
}

_ALIASES = {
    "pets": "oxford_pets",
    "oxfordpets": "oxford_pets",
    "cars": "stanford_cars",
    "stanfordcars": "stanford_cars",
    "flowers": "flowers102",
    "aircraft": "fgvc_aircraft",
    "fgvcaircraft": "fgvc_aircraft",
    "sun": "sun397",
    "caltech": "caltech101",
    "food": "food101",
    "ucf": "ucf101",
    "imagenetlt": "imagenet_lt",
    "placeslt": "places_lt",
}

DEFAULT_TEMPLATES = ("a photo of a {class}.",)


@dataclass(frozen=True)
class PromptTemplateSet:
    """Templates for one dataset; each holds exactly one '{class}' slot."""

    dataset: str
    templates: tuple

    def __post_init__(self):
        for template in self.templates:
            if template.count("{class}") != 1:
                raise BadTemplate(
                    f"template {template!r} must contain exactly one '{{class}}'"
                )

    def fill(self, class_name: str) -> list:
        return [t.replace("{class}", class_name) for t in self.templates]


def known_datasets() -> tuple:
    return tuple(sorted(_TEMPLATE_TABLE))


def get_templates(dataset: str) -> PromptTemplateSet:
    """Template set for a dataset name (a few aliases accepted)."""
    key = dataset.strip().lower().replace("-", "_")
    key = _ALIASES.get(key.replace("_", ""), key)
    if key not in _TEMPLATE_TABLE:
        raise KeyError(
            f"no template set for {dataset!r}; known: {', '.join(known_datasets())}"
        )
    return PromptTemplateSet(dataset=key, templates=_TEMPLATE_TABLE[key])
