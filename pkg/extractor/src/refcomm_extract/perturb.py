"""Image perturbations applied before preprocessing.

Kinds: none, grayscale, color-jitter, resize, gaussian-blur, gaussian-blob.
Blur radii are drawn per image, uniformly from [0.1, 10] by default; blob
mode ignores the source images entirely and embeds pure-noise images. All
draws come from a seeded generator and the drawn parameters are logged in
the manifest.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from PIL import Image, ImageEnhance, ImageFilter

from .errors import ExtractError

KINDS = ("none", "grayscale", "color-jitter", "resize", "gaussian-blur",
         "gaussian-blob")

_DEFAULTS = {
    "none": {},
    "grayscale": {},
    "color-jitter": {"brightness": 0.4, "contrast": 0.4, "saturation": 0.4},
    "resize": {"factor": 0.5},
    "gaussian-blur": {"radius_min": 0.1, "radius_max": 10.0},
    "gaussian-blob": {"size": 64},
}


@dataclass
class PerturbationSpec:
    kind: str = "none"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ExtractError(f"unknown perturbation {self.kind!r}; one of {KINDS}")
        merged = dict(_DEFAULTS[self.kind])
        for key, value in self.params.items():
            if key not in merged:
                raise ExtractError(
                    f"unknown parameter {key!r} for perturbation {self.kind!r}"
                )
            merged[key] = value
        self.params = merged

    @property
    def ignores_images(self) -> bool:
        return self.kind == "gaussian-blob"

    def to_manifest(self) -> dict:
        return {"kind": self.kind, "params": self.params}


def parse_perturbation(text: str | None) -> PerturbationSpec:
    """Parse ``KIND`` or ``KIND:key=value,key=value`` CLI syntax."""
    if not text:
        return PerturbationSpec("none")
    kind, _, rest = text.partition(":")
    params = {}
    if rest:
        for item in rest.split(","):
            key, _, value = item.partition("=")
            if not _:
                raise ExtractError(f"bad perturbation parameter {item!r}")
            params[key.strip()] = float(value)
    return PerturbationSpec(kind.strip(), params)


def apply_perturbation(image: Image.Image, spec: PerturbationSpec,
                       rng: np.random.Generator) -> Image.Image:
    if spec.kind in ("none", "gaussian-blob"):
        return image
    if spec.kind == "grayscale":
        return image.convert("L").convert("RGB")
    if spec.kind == "color-jitter":
        p = spec.params
        out = image
        for name, enhancer in (("brightness", ImageEnhance.Brightness),
                               ("contrast", ImageEnhance.Contrast),
                               ("saturation", ImageEnhance.Color)):
            span = p[name]
            if span > 0:
                factor = float(rng.uniform(max(0.0, 1 - span), 1 + span))
                out = enhancer(out).enhance(factor)
        return out
    if spec.kind == "resize":
        factor = spec.params["factor"]
        w, h = image.size
        small = image.resize((max(1, int(w * factor)), max(1, int(h * factor))),
                             Image.BILINEAR)
        return small.resize((w, h), Image.BILINEAR)
    if spec.kind == "gaussian-blur":
        radius = float(rng.uniform(spec.params["radius_min"],
                                   spec.params["radius_max"]))
        return image.filter(ImageFilter.GaussianBlur(radius=radius))
    raise ExtractError(f"unhandled perturbation {spec.kind!r}")


def blob_image(spec: PerturbationSpec, rng: np.random.Generator) -> Image.Image:
    size = int(spec.params.get("size", 64))
    pixels = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
    return Image.fromarray(pixels, mode="RGB")
