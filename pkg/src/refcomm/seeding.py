"""Deterministic seed derivation.

All randomness in a run funnels from one root seed. Sub-streams are derived
from (root_seed, *string tags): each tag is hashed with SHA-256 and the first
8 bytes feed a numpy SeedSequence together with the root seed. The scheme is
stable across processes and platforms, so any component can be re-run in
isolation and reproduce its stream exactly.

Documented tags in use:
    synth            dataset generation (plus per-stage sub-tags)
    agent/<name>/<role>   agent parameter initialization
    train            training loop (shuffling, pair sampling, gumbel noise)
    eval/<suite>     evaluation batch sampling
    probe            probe training
    blobs/<arch>     structureless blob stores
"""

from __future__ import annotations

import hashlib

import numpy as np


def _tag_entropy(tag: str) -> int:
    return int.from_bytes(hashlib.sha256(tag.encode("utf-8")).digest()[:8], "little")


def seed_sequence(root_seed: int, *tags: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(root_seed)] + [_tag_entropy(t) for t in tags])


def rng_for(root_seed: int, *tags: str) -> np.random.Generator:
    """Child generator for a component, keyed by the root seed and tags."""
    return np.random.default_rng(seed_sequence(root_seed, *tags))
