"""refcomm-extract: embed image collections with pre-trained vision backbones.

Writes the refcomm embedding-store binary format (magic EMB1) plus a JSON
manifest sidecar, optionally applying image perturbations (grayscale, color
jitter, resize, gaussian blur) or replacing images with gaussian-noise blobs.
"""

from .backbones import BackboneSpec, available_backbones, load_backbone
from .errors import ExtractError, VerifyError
from .extract import ExtractResult, extract
from .perturb import PerturbationSpec, parse_perturbation
from .store import read_store_header, write_store
from .verify import VerifyReport, verify

__version__ = "0.1.0"

__all__ = [
    "BackboneSpec", "available_backbones", "load_backbone",
    "PerturbationSpec", "parse_perturbation",
    "ExtractResult", "extract",
    "VerifyReport", "verify",
    "write_store", "read_store_header",
    "ExtractError", "VerifyError",
]
