"""Vision backbone registry and loading.

Published torchvision classifiers are exposed under their usual names; the
``tiny`` entry is a small seeded CNN for offline use and tests. Features are
the model's final pre-softmax outputs by default; ``penultimate`` strips the
classification head for backbones that have one (and is the natural choice
for self-supervised checkpoints loaded without a head).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
from torch import nn

from .errors import ExtractError


@dataclass
class BackboneSpec:
    model_id: str
    output_dim: int  # logits dim (classifier entries)
    penultimate_dim: int
    input_size: int = 224
    preprocessing: str = "resize+center-crop+imagenet-normalize"
    builder: object = field(default=None, repr=False)
    head_attr: str = "fc"


class _TinyBackbone(nn.Module):
    """Small seeded CNN: 3x64x64 -> 32-d pooled features -> 64-d head."""

    def __init__(self):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(3, 16, 3, stride=2, padding=1), nn.ReLU(),
            nn.Conv2d(16, 32, 3, stride=2, padding=1), nn.ReLU(),
            nn.AdaptiveAvgPool2d(1), nn.Flatten(),
        )
        self.fc = nn.Linear(32, 64)

    def forward(self, x):
        return self.fc(self.features(x))


def _tv(name):
    import torchvision.models as tvm

    return getattr(tvm, name)


_REGISTRY: dict = {}


def _register(model_id, builder_name, output_dim, penultimate_dim,
              input_size=224, head_attr="fc"):
    _REGISTRY[model_id] = dict(
        builder_name=builder_name, output_dim=output_dim,
        penultimate_dim=penultimate_dim, input_size=input_size,
        head_attr=head_attr,
    )


_register("resnet18", "resnet18", 1000, 512)
_register("resnet152", "resnet152", 1000, 2048)
_register("inception_v3", "inception_v3", 1000, 2048, input_size=299)
_register("vgg11", "vgg11", 1000, 4096, head_attr="classifier")
_register("vit_b_16", "vit_b_16", 1000, 768, head_attr="heads")
_register("swin_b", "swin_b", 1000, 1024, head_attr="head")
_REGISTRY["tiny"] = dict(builder_name=None, output_dim=64, penultimate_dim=32,
                         input_size=64, head_attr="fc")


def available_backbones():
    return sorted(_REGISTRY)


def _strip_head(model: nn.Module, head_attr: str) -> None:
    head = getattr(model, head_attr)
    if isinstance(head, nn.Sequential):
        # replace the last linear in the classifier stack
        for i in range(len(head) - 1, -1, -1):
            if isinstance(head[i], nn.Linear):
                head[i] = nn.Identity()
                break
        else:
            setattr(model, head_attr, nn.Identity())
    else:
        setattr(model, head_attr, nn.Identity())


def load_backbone(model_id: str, weights: str = "pretrained",
                  features: str = "logits", seed: int = 0):
    """Returns (module in eval mode, BackboneSpec with resolved output dim)."""
    if model_id not in _REGISTRY:
        raise ExtractError(
            f"unknown backbone {model_id!r}; available: {available_backbones()}"
        )
    if weights not in ("pretrained", "random"):
        raise ExtractError(f"weights must be pretrained|random, got {weights!r}")
    if features not in ("logits", "penultimate"):
        raise ExtractError(f"features must be logits|penultimate, got {features!r}")
    entry = _REGISTRY[model_id]
    torch.manual_seed(seed)
    if model_id == "tiny":
        model = _TinyBackbone()
        if weights == "pretrained":
            raise ExtractError("the tiny backbone has no published weights; "
                               "use --weights random")
    else:
        builder = _tv(entry["builder_name"])
        kwargs = {}
        if entry["builder_name"] == "inception_v3":
            kwargs["init_weights"] = True
            kwargs["aux_logits"] = True
        if weights == "pretrained":
            try:
                model = builder(weights="DEFAULT", **kwargs)
            except Exception as e:  # no network / no cache
                raise ExtractError(
                    f"could not obtain pretrained weights for {model_id!r} "
                    f"({type(e).__name__}: {e}); pass --weights random for a "
                    "seeded randomly-initialized backbone"
                ) from e
        else:
            model = builder(weights=None, **kwargs)
    if entry["builder_name"] == "inception_v3":
        model.aux_logits = False
        model.AuxLogits = None
    dim = entry["output_dim"]
    if features == "penultimate":
        _strip_head(model, entry["head_attr"])
        dim = entry["penultimate_dim"]
    model.eval()
    spec = BackboneSpec(
        model_id=model_id, output_dim=dim,
        penultimate_dim=entry["penultimate_dim"],
        input_size=entry["input_size"],
        preprocessing=f"resize({entry['input_size']})+center-crop+"
                      "imagenet-normalize",
        builder=None, head_attr=entry["head_attr"],
    )
    return model, spec
