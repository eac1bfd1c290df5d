"""Embedding stores: binary I/O, synthetic generation, splits, game batches.

Embedding file layout (little-endian throughout)::

    magic     4 bytes   b"EMB1"
    version   u16       currently 1
    dim       u32       vector length
    count     u64       number of records
    name_len  u16       architecture-name byte length
    name      UTF-8     architecture name
    records   count x ( image_id u64, class_id u32, dim x f32 )

A sidecar manifest (same basename, suffix ``.manifest.json``) records how the
store was produced. This file pair is the contract with external extractors.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    FormatError,
    InsufficientDataError,
    ShapeError,
)
from .seeding import rng_for

MAGIC = b"EMB1"
FORMAT_VERSION = 1
UNLABELED = 0xFFFFFFFF  # class_id sentinel for structureless stores

_HEADER = struct.Struct("<4sHIQH")


@dataclass
class EmbeddingRecord:
    image_id: int
    class_id: int
    vector: np.ndarray


@dataclass
class DatasetManifest:
    source: str  # "synthetic" | "extracted"
    perturbation: str | None = None
    params: dict = field(default_factory=dict)
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "perturbation": self.perturbation,
            "params": self.params,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        return cls(
            source=d.get("source", "unknown"),
            perturbation=d.get("perturbation"),
            params=d.get("params", {}),
            seed=d.get("seed"),
        )


class EmbeddingStore:
    """A frozen vision module's output: labeled vectors per image id.

    Stored columnar (ids, class ids, vector matrix) for speed; records() gives
    the row view. Stores are immutable after construction and safe to share
    across evaluation workers.
    """

    def __init__(
        self,
        architecture_name: str,
        vectors: np.ndarray,
        image_ids: np.ndarray,
        class_ids: np.ndarray,
        manifest: DatasetManifest | None = None,
    ):
        vectors = np.ascontiguousarray(np.asarray(vectors, dtype=np.float32))
        if vectors.ndim != 2:
            raise ShapeError(f"vectors must be 2-d, got shape {vectors.shape}")
        image_ids = np.asarray(image_ids, dtype=np.uint64)
        class_ids = np.asarray(class_ids, dtype=np.uint32)
        n = vectors.shape[0]
        if image_ids.shape != (n,) or class_ids.shape != (n,):
            raise ShapeError(
                f"ids/classes must have length {n}, got "
                f"{image_ids.shape} and {class_ids.shape}"
            )
        if not np.all(np.isfinite(vectors)):
            raise ConfigError(f"store {architecture_name!r} has non-finite vectors")
        if n and np.unique(image_ids).size != n:
            raise ConfigError(f"store {architecture_name!r} has duplicate image ids")
        self.architecture_name = architecture_name
        self.vectors = vectors
        self.image_ids = image_ids
        self.class_ids = class_ids
        self.manifest = manifest
        self._row_of = {int(i): k for k, i in enumerate(image_ids)}

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def rows_for(self, ids) -> np.ndarray:
        return np.array([self._row_of[int(i)] for i in ids], dtype=np.int64)

    def vectors_for(self, ids) -> np.ndarray:
        return self.vectors[self.rows_for(ids)]

    def classes_for(self, ids) -> np.ndarray:
        return self.class_ids[self.rows_for(ids)]

    def ids_of_class(self, class_id: int) -> np.ndarray:
        return self.image_ids[self.class_ids == class_id]

    def records(self):
        for k in range(len(self)):
            yield EmbeddingRecord(
                int(self.image_ids[k]), int(self.class_ids[k]), self.vectors[k]
            )


def _manifest_path(path) -> Path:
    return Path(path).with_suffix(".manifest.json")


def _record_dtype(dim: int) -> np.dtype:
    return np.dtype(
        [("image_id", "<u8"), ("class_id", "<u4"), ("vector", "<f4", (dim,))]
    )


def write_store(store: EmbeddingStore, path) -> None:
    """Serialize a store (plus its manifest sidecar when present)."""
    path = Path(path)
    name = store.architecture_name.encode("utf-8")
    records = np.empty(len(store), dtype=_record_dtype(store.dim))
    records["image_id"] = store.image_ids
    records["class_id"] = store.class_ids
    records["vector"] = store.vectors
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, store.dim, len(store), len(name))
    path.write_bytes(header + name + records.tobytes())
    if store.manifest is not None:
        _manifest_path(path).write_text(
            json.dumps(store.manifest.to_dict(), indent=2, sort_keys=True) + "\n"
        )


def read_store(path) -> EmbeddingStore:
    """Read a store file; manifest sidecar is loaded when present."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: truncated header", offset=len(blob))
    magic, version, dim, count, name_len = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}", offset=0)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}", offset=4)
    offset = _HEADER.size
    if len(blob) < offset + name_len:
        raise FormatError(f"{path}: truncated architecture name", offset=len(blob))
    name = blob[offset : offset + name_len].decode("utf-8")
    offset += name_len
    rec_size = 12 + 4 * dim
    expected = offset + rec_size * count
    if len(blob) != expected:
        raise FormatError(
            f"{path}: expected {expected} bytes for {count} records of dim {dim}, "
            f"got {len(blob)}",
            offset=min(len(blob), expected),
        )
    records = np.frombuffer(blob, dtype=_record_dtype(dim), count=count, offset=offset)
    image_ids = records["image_id"].copy()
    class_ids = records["class_id"].copy()
    vectors = np.ascontiguousarray(records["vector"])
    manifest = None
    mpath = _manifest_path(path)
    if mpath.exists():
        manifest = DatasetManifest.from_dict(json.loads(mpath.read_text()))
    return EmbeddingStore(name, vectors, image_ids, class_ids, manifest)


# ---------------------------------------------------------------------------
# synthetic generation


@dataclass
class ArchitectureSpec:
    name: str
    dim: int
    nonlinear: bool = False
    identity_map: bool = False  # requires dim == latent_dim; mainly for tests


DEFAULT_ARCHITECTURES = (
    ArchitectureSpec("lin64", 64, False),
    ArchitectureSpec("tanh128", 128, True),
    ArchitectureSpec("lin256", 256, False),
    ArchitectureSpec("tanh384", 384, True),
    ArchitectureSpec("lin512", 512, False),
    ArchitectureSpec("tanh1024", 1024, True),
)


@dataclass
class SyntheticGenConfig:
    """Heterogeneous embedding generator over a shared latent space.

    Every image is a latent draw z = class_mean + within-class noise; each
    architecture observes f_a(z) + observation noise through its own fixed
    seeded random linear map (optionally squashed with tanh). The same
    image_id therefore denotes the same underlying image in every store.
    """

    num_classes: int = 100
    images_per_class: int = 100
    latent_dim: int = 64
    architectures: tuple = DEFAULT_ARCHITECTURES
    sigma_within: float = 0.3
    sigma_obs: float = 0.1
    ood_num_classes: int = 20
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.architectures, (list, tuple)) and self.architectures:
            if isinstance(self.architectures[0], (list, tuple)):
                self.architectures = tuple(
                    ArchitectureSpec(*a) for a in self.architectures
                )
            else:
                self.architectures = tuple(self.architectures)
        if self.num_classes < 1 or self.images_per_class < 1 or self.latent_dim < 1:
            raise ConfigError("num_classes, images_per_class, latent_dim must be >= 1")
        if any(a.dim < 1 for a in self.architectures):
            raise ConfigError("architecture output dims must be >= 1")
        if self.sigma_within < 0 or self.sigma_obs < 0:
            raise ConfigError("noise levels must be >= 0")
        names = [a.name for a in self.architectures]
        if len(set(names)) != len(names):
            raise ConfigError("architecture names must be unique")

    def to_dict(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "images_per_class": self.images_per_class,
            "latent_dim": self.latent_dim,
            "architectures": [
                [a.name, a.dim, a.nonlinear, a.identity_map]
                for a in self.architectures
            ],
            "sigma_within": self.sigma_within,
            "sigma_obs": self.sigma_obs,
            "ood_num_classes": self.ood_num_classes,
            "seed": self.seed,
        }


@dataclass
class SyntheticDataset:
    stores: dict  # architecture name -> in-domain EmbeddingStore
    ood_stores: dict  # architecture name -> held-out-class EmbeddingStore


def _make_latents(means, images_per_class, sigma_within, rng, first_image_id):
    num_classes, latent_dim = means.shape
    n = num_classes * images_per_class
    class_ids = np.repeat(np.arange(means.shape[0], dtype=np.uint32), images_per_class)
    z = means[class_ids] + sigma_within * rng.standard_normal((n, latent_dim))
    image_ids = np.arange(first_image_id, first_image_id + n, dtype=np.uint64)
    return z, image_ids, class_ids


def synth_generate(config: SyntheticGenConfig) -> SyntheticDataset:
    """One aligned store per architecture, plus OOD stores on disjoint classes."""
    seed = config.seed
    k = config.latent_dim
    mean_rng = rng_for(seed, "synth", "class-means")
    means = mean_rng.standard_normal((config.num_classes, k))
    ood_means = mean_rng.standard_normal((config.ood_num_classes, k))

    z_in, ids_in, cls_in = _make_latents(
        means,
        config.images_per_class,
        config.sigma_within,
        rng_for(seed, "synth", "within-noise"),
        first_image_id=0,
    )
    z_ood, ids_ood, cls_ood = _make_latents(
        ood_means,
        config.images_per_class,
        config.sigma_within,
        rng_for(seed, "synth", "within-noise-ood"),
        first_image_id=len(ids_in),
    )
    cls_ood = cls_ood + np.uint32(config.num_classes)  # disjoint class ids

    stores: dict = {}
    ood_stores: dict = {}
    for arch in config.architectures:
        if arch.identity_map:
            if arch.dim != k:
                raise ConfigError(
                    f"identity_map architecture {arch.name!r} needs dim == "
                    f"latent_dim ({k}), got {arch.dim}"
                )
            A = np.eye(k)
        else:
            map_rng = rng_for(seed, "synth", f"map/{arch.name}")
            A = map_rng.standard_normal((k, arch.dim)) / np.sqrt(k)
        obs_rng = rng_for(seed, "synth", f"obs/{arch.name}")

        def observe(z, ids, classes):
            e = z @ A
            if arch.nonlinear:
                e = np.tanh(e)
            e = e + config.sigma_obs * obs_rng.standard_normal(e.shape)
            manifest = DatasetManifest(
                source="synthetic",
                params={
                    "generator": config.to_dict(),
                    "architecture": arch.name,
                    "ood": bool(classes[0] >= config.num_classes) if len(classes) else False,
                },
                seed=seed,
            )
            return EmbeddingStore(
                arch.name, e.astype(np.float32), ids, classes, manifest
            )

        stores[arch.name] = observe(z_in, ids_in, cls_in)
        ood_stores[arch.name] = observe(z_ood, ids_ood, cls_ood)
    return SyntheticDataset(stores=stores, ood_stores=ood_stores)


def synth_blobs(dim: int, count: int, seed: int, name: str = "blobs") -> EmbeddingStore:
    """Structureless store: i.i.d. standard-normal vectors, no class labels."""
    rng = rng_for(seed, "blobs", name)
    vectors = rng.standard_normal((count, dim)).astype(np.float32)
    ids = np.arange(count, dtype=np.uint64)
    classes = np.full(count, UNLABELED, dtype=np.uint32)
    manifest = DatasetManifest(
        source="synthetic",
        perturbation="gaussian-blob",
        params={"dim": dim, "count": count},
        seed=seed,
    )
    return EmbeddingStore(name, vectors, ids, classes, manifest)


# ---------------------------------------------------------------------------
# splits and batches


def make_splits(store: EmbeddingStore, test_fraction: float, seed: int):
    """Deterministic (train_ids, test_ids) partition by image id.

    Depends only on the id set and the seed, so it is identical across all
    aligned architecture stores.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test_fraction must be in (0, 1), got {test_fraction}")
    ids = np.sort(store.image_ids)
    rng = rng_for(seed, "splits")
    perm = rng.permutation(len(ids))
    n_test = int(np.floor(len(ids) * test_fraction + 0.5))
    test_ids = np.sort(ids[perm[:n_test]])
    train_ids = np.sort(ids[perm[n_test:]])
    return train_ids, test_ids


@dataclass
class GameRound:
    target_pos: int
    sender_store: str | None = None
    receiver_store: str | None = None


@dataclass
class GameBatch:
    """Candidate set plus per-round targets for one referential-game step."""

    candidate_ids: np.ndarray
    rounds: list

    def __post_init__(self):
        self.candidate_ids = np.asarray(self.candidate_ids, dtype=np.uint64)
        n = len(self.candidate_ids)
        if np.unique(self.candidate_ids).size != n:
            raise ConfigError("candidate ids must be distinct")
        for r in self.rounds:
            if not 0 <= r.target_pos < n:
                raise ConfigError(
                    f"target position {r.target_pos} out of range for {n} candidates"
                )

    @property
    def target_positions(self) -> np.ndarray:
        return np.array([r.target_pos for r in self.rounds], dtype=np.int64)


def build_batch(ids, batch_size: int, rng: np.random.Generator) -> GameBatch:
    """Sample batch_size distinct candidates; each is the target of one round."""
    ids = np.asarray(ids)
    if len(ids) < batch_size:
        raise InsufficientDataError(
            f"need at least {batch_size} ids to build a batch, got {len(ids)}"
        )
    candidates = rng.choice(ids, size=batch_size, replace=False)
    order = rng.permutation(batch_size)
    rounds = [GameRound(int(p)) for p in order]
    if batch_size == 1:
        warnings.warn("game batch with a single candidate is degenerate", stacklevel=2)
    return GameBatch(candidate_ids=candidates, rounds=rounds)


def build_single_class_batch(
    store: EmbeddingStore,
    class_id: int,
    size: int = 32,
    rng: np.random.Generator | None = None,
) -> GameBatch:
    """Batch whose candidates all share one class (finer-than-class test)."""
    ids = store.ids_of_class(class_id)
    if len(ids) < size:
        raise InsufficientDataError(
            f"class {class_id} has only {len(ids)} images, need {size}"
        )
    rng = rng or np.random.default_rng()
    if len(ids) == size:
        candidates = ids.copy()
    else:
        candidates = rng.choice(ids, size=size, replace=False)
    order = rng.permutation(size)
    return GameBatch(candidate_ids=candidates, rounds=[GameRound(int(p)) for p in order])
