"""Structural validation and summary statistics for embedding files."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import VerifyError
from .store import manifest_path, read_store_header


@dataclass
class VerifyReport:
    path: str
    architecture_name: str
    dim: int
    count: int
    class_histogram: dict
    norm_mean: float
    norm_min: float
    norm_max: float
    manifest_checked: bool
    problems: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "ok": self.ok,
            "architecture_name": self.architecture_name,
            "dim": self.dim,
            "count": self.count,
            "class_histogram": self.class_histogram,
            "vector_norms": {
                "mean": self.norm_mean, "min": self.norm_min, "max": self.norm_max,
            },
            "manifest_checked": self.manifest_checked,
            "problems": self.problems,
        }


def verify(path) -> VerifyReport:
    """Raises VerifyError for malformed files; reports content-level problems."""
    path = Path(path)
    if not path.exists():
        raise VerifyError(f"{path}: no such file")
    header = read_store_header(path)
    problems = []
    ids = header["image_ids"]
    if len(np.unique(ids)) != len(ids):
        problems.append("duplicate image ids")
    vectors = header["vectors"]
    if vectors.size and not np.all(np.isfinite(vectors)):
        problems.append("non-finite vector entries")
    norms = np.linalg.norm(vectors, axis=1) if vectors.size else np.zeros(0)
    classes, counts = np.unique(header["class_ids"], return_counts=True)
    histogram = {int(c): int(n) for c, n in zip(classes, counts)}
    manifest_checked = False
    mpath = manifest_path(path)
    if mpath.exists():
        manifest_checked = True
        try:
            manifest = json.loads(mpath.read_text())
        except json.JSONDecodeError as e:
            problems.append(f"manifest is not valid JSON: {e}")
        else:
            declared = manifest.get("params", {}).get("output_dim")
            if declared is not None and declared != header["dim"]:
                problems.append(
                    f"manifest declares dim {declared} but file has "
                    f"dim {header['dim']}"
                )
    return VerifyReport(
        path=str(path),
        architecture_name=header["architecture_name"],
        dim=header["dim"],
        count=header["count"],
        class_histogram=histogram,
        norm_mean=float(norms.mean()) if norms.size else 0.0,
        norm_min=float(norms.min()) if norms.size else 0.0,
        norm_max=float(norms.max()) if norms.size else 0.0,
        manifest_checked=manifest_checked,
        problems=problems,
    )
