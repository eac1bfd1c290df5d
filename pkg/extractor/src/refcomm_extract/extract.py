"""End-to-end extraction: images -> backbone features -> embedding file."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .backbones import load_backbone
from .errors import ExtractError
from .perturb import PerturbationSpec, apply_perturbation, blob_image
from .store import UNLABELED, write_store

log = logging.getLogger("refcomm_extract")

IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png", ".bmp", ".webp"}

_IMAGENET_MEAN = torch.tensor([0.485, 0.456, 0.406]).view(3, 1, 1)
_IMAGENET_STD = torch.tensor([0.229, 0.224, 0.225]).view(3, 1, 1)


@dataclass
class ExtractResult:
    path: Path
    count: int
    skipped: int
    dim: int
    classes: dict  # class name -> class id (empty when unlabeled)


def discover_images(images_dir) -> list:
    """Sorted image paths; class labels from immediate parent directories."""
    root = Path(images_dir)
    if not root.is_dir():
        raise ExtractError(f"image directory not found: {root}")
    paths = sorted(
        p for p in root.rglob("*")
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )
    if not paths:
        raise ExtractError(f"no images under {root}")
    return paths


def _class_map(paths, root) -> dict:
    names = sorted({p.parent.name for p in paths if p.parent != Path(root)})
    return {name: i for i, name in enumerate(names)}


def _preprocess(image: Image.Image, input_size: int) -> torch.Tensor:
    image = image.convert("RGB").resize((input_size, input_size),
                                        Image.BILINEAR)
    arr = torch.from_numpy(
        np.asarray(image, dtype=np.float32).transpose(2, 0, 1) / 255.0
    )
    return (arr - _IMAGENET_MEAN) / _IMAGENET_STD


def extract(model_id: str, images_dir, out_path,
            perturbation: PerturbationSpec | None = None, seed: int = 0,
            weights: str = "pretrained", features: str = "logits",
            batch_size: int = 8, blob_count: int | None = None) -> ExtractResult:
    """Embed every image under images_dir and write one store file.

    Undecodable images are skipped individually; more than 10% skips is a
    failure. Blob mode replaces the image collection with seeded noise
    images (blob_count of them, default: as many as there are images).
    """
    perturbation = perturbation or PerturbationSpec("none")
    model, spec = load_backbone(model_id, weights=weights, features=features,
                                seed=seed)
    rng = np.random.default_rng(seed)

    if perturbation.ignores_images:
        n = blob_count or 256
        sources = [("blob", i) for i in range(n)]
        class_map = {}
    else:
        paths = discover_images(images_dir)
        class_map = _class_map(paths, images_dir)
        sources = [("file", p) for p in paths]

    vectors = []
    image_ids = []
    class_ids = []
    skipped = 0
    batch: list = []
    meta: list = []

    def flush():
        if not batch:
            return
        with torch.no_grad():
            feats = model(torch.stack(batch)).numpy().astype(np.float32)
        vectors.append(feats)
        for image_id, class_id in meta:
            image_ids.append(image_id)
            class_ids.append(class_id)
        batch.clear()
        meta.clear()

    for index, (kind, source) in enumerate(sources):
        if kind == "blob":
            image = blob_image(perturbation, rng)
            class_id = UNLABELED
        else:
            try:
                with Image.open(source) as raw:
                    image = raw.convert("RGB")
            except Exception as e:
                skipped += 1
                log.warning("skipping %s: %s", source, e)
                continue
            parent = source.parent.name
            class_id = class_map.get(parent, UNLABELED)
            image = apply_perturbation(image, perturbation, rng)
        batch.append(_preprocess(image, spec.input_size))
        meta.append((index, class_id))
        if len(batch) >= batch_size:
            flush()
    flush()

    total = len(sources)
    if skipped > 0.10 * total:
        raise ExtractError(
            f"{skipped}/{total} images unreadable (>10%); aborting"
        )
    if not vectors:
        raise ExtractError("no images could be embedded")
    allv = np.concatenate(vectors, axis=0)
    manifest = {
        "source": "extracted",
        "perturbation": None if perturbation.kind == "none"
        else perturbation.kind,
        "params": {
            "backbone": spec.model_id,
            "weights": weights,
            "features": features,
            "output_dim": int(allv.shape[1]),
            "preprocessing": spec.preprocessing,
            "perturbation": perturbation.to_manifest(),
            "torch_version": torch.__version__,
            "skipped": skipped,
            "classes": class_map,
        },
        "seed": seed,
    }
    write_store(out_path, spec.model_id, allv,
                np.asarray(image_ids, dtype=np.uint64),
                np.asarray(class_ids, dtype=np.uint32), manifest)
    log.info("wrote %d records (dim %d, skipped %d) to %s",
             allv.shape[0], allv.shape[1], skipped, out_path)
    return ExtractResult(path=Path(out_path), count=allv.shape[0],
                         skipped=skipped, dim=int(allv.shape[1]),
                         classes=class_map)
