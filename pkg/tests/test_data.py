import numpy as np
import pytest

from refcomm import data
from refcomm.errors import ConfigError, FormatError, InsufficientDataError


def make_store(n=10, dim=4, seed=0, name="test"):
    rng = np.random.default_rng(seed)
    return data.EmbeddingStore(
        name,
        rng.standard_normal((n, dim)).astype(np.float32),
        np.arange(n, dtype=np.uint64),
        rng.integers(0, 3, size=n).astype(np.uint32),
        manifest=data.DatasetManifest(source="synthetic", seed=seed),
    )


class TestSerialization:
    def test_empty_store_round_trips(self, tmp_path):
        store = data.EmbeddingStore(
            "empty", np.zeros((0, 8), dtype=np.float32),
            np.zeros(0, dtype=np.uint64), np.zeros(0, dtype=np.uint32),
        )
        path = tmp_path / "empty.emb"
        data.write_store(store, path)
        loaded = data.read_store(path)
        assert loaded.architecture_name == "empty"
        assert loaded.dim == 8 and len(loaded) == 0

    def test_thousand_record_store_bit_exact(self, tmp_path):
        store = make_store(n=1000, dim=16, seed=1)
        p1 = tmp_path / "a.emb"
        p2 = tmp_path / "b.emb"
        data.write_store(store, p1)
        loaded = data.read_store(p1)
        data.write_store(loaded, p2)
        assert p1.read_bytes() == p2.read_bytes()
        np.testing.assert_array_equal(loaded.vectors, store.vectors)
        np.testing.assert_array_equal(loaded.image_ids, store.image_ids)
        np.testing.assert_array_equal(loaded.class_ids, store.class_ids)

    def test_truncated_file_is_format_error(self, tmp_path):
        store = make_store(n=5, dim=4)
        path = tmp_path / "t.emb"
        data.write_store(store, path)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) - 7])  # cut mid-record
        with pytest.raises(FormatError) as exc:
            data.read_store(path)
        assert exc.value.offset is not None

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.emb"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(FormatError, match="magic"):
            data.read_store(path)

    def test_bad_version(self, tmp_path):
        store = make_store(n=1, dim=2)
        path = tmp_path / "v.emb"
        data.write_store(store, path)
        blob = bytearray(path.read_bytes())
        blob[4] = 99
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="version"):
            data.read_store(path)

    def test_manifest_sidecar_round_trip(self, tmp_path):
        store = make_store(n=3, dim=2, seed=5)
        path = tmp_path / "m.emb"
        data.write_store(store, path)
        assert (tmp_path / "m.manifest.json").exists()
        loaded = data.read_store(path)
        assert loaded.manifest.source == "synthetic"
        assert loaded.manifest.seed == 5

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            data.EmbeddingStore(
                "dup", np.zeros((2, 2), dtype=np.float32),
                np.array([1, 1], dtype=np.uint64), np.zeros(2, dtype=np.uint32),
            )

    def test_non_finite_vectors_rejected(self):
        v = np.zeros((2, 2), dtype=np.float32)
        v[0, 0] = np.inf
        with pytest.raises(ConfigError, match="non-finite"):
            data.EmbeddingStore(
                "inf", v, np.arange(2, dtype=np.uint64), np.zeros(2, dtype=np.uint32)
            )


class TestSyntheticGeneration:
    def test_zero_noise_identity_maps_give_identical_stores(self):
        cfg = data.SyntheticGenConfig(
            num_classes=3, images_per_class=4, latent_dim=8,
            architectures=(
                data.ArchitectureSpec("a", 8, identity_map=True),
                data.ArchitectureSpec("b", 8, identity_map=True),
            ),
            sigma_within=0.0, sigma_obs=0.0, ood_num_classes=1, seed=0,
        )
        ds = data.synth_generate(cfg)
        np.testing.assert_array_equal(ds.stores["a"].vectors, ds.stores["b"].vectors)

    def test_nearest_class_mean_decodes_same_class_across_stores(self):
        # default-style config: shared image decodes its class in every store
        cfg = data.SyntheticGenConfig(
            num_classes=100, images_per_class=100, latent_dim=64,
            architectures=(("d64", 64, False), ("d128", 128, True)),
            sigma_within=0.3, sigma_obs=0.1, ood_num_classes=2, seed=3,
        )
        ds = data.synth_generate(cfg)
        for store in ds.stores.values():
            centroids = np.stack([
                store.vectors[store.class_ids == c].mean(axis=0)
                for c in range(cfg.num_classes)
            ])
            d2 = (
                (store.vectors**2).sum(1)[:, None]
                - 2 * store.vectors @ centroids.T
                + (centroids**2).sum(1)[None, :]
            )
            acc = np.mean(np.argmin(d2, axis=1) == store.class_ids)
            assert acc > 0.95, f"{store.architecture_name}: {acc}"

    def test_stores_are_aligned_across_architectures(self):
        cfg = data.SyntheticGenConfig(
            num_classes=4, images_per_class=3, latent_dim=6,
            architectures=(("x", 5, False), ("y", 7, True)),
            ood_num_classes=2, seed=1,
        )
        ds = data.synth_generate(cfg)
        np.testing.assert_array_equal(
            ds.stores["x"].image_ids, ds.stores["y"].image_ids
        )
        np.testing.assert_array_equal(
            ds.stores["x"].class_ids, ds.stores["y"].class_ids
        )
        # OOD ids and classes are disjoint from in-domain ones
        assert not set(ds.ood_stores["x"].image_ids) & set(ds.stores["x"].image_ids)
        assert not set(ds.ood_stores["x"].class_ids) & set(ds.stores["x"].class_ids)

    def test_different_seeds_give_different_maps(self):
        kw = dict(
            num_classes=5, images_per_class=10, latent_dim=8,
            architectures=(("a", 8, False),), sigma_within=0.1, sigma_obs=0.05,
            ood_num_classes=1,
        )
        s1 = data.synth_generate(data.SyntheticGenConfig(seed=1, **kw)).stores["a"]
        s2 = data.synth_generate(data.SyntheticGenConfig(seed=2, **kw)).stores["a"]
        cross = np.linalg.norm(s1.vectors - s2.vectors, axis=1).mean()
        noise_floor = 0.05 * np.sqrt(8) * 2  # both stores' observation noise
        assert cross > 5 * noise_floor

    def test_generator_config_validation(self):
        with pytest.raises(ConfigError):
            data.SyntheticGenConfig(num_classes=0)
        with pytest.raises(ConfigError):
            data.SyntheticGenConfig(sigma_within=-1.0)


class TestBlobs:
    def test_empty(self):
        store = data.synth_blobs(8, 0, seed=0)
        assert len(store) == 0

    def test_moments(self):
        store = data.synth_blobs(4, 10_000, seed=1)
        assert np.all(np.abs(store.vectors.mean(axis=0)) < 0.05)
        assert np.all(np.abs(store.vectors.var(axis=0) - 1.0) < 0.05)

    def test_no_class_structure(self):
        # pseudo-labels: nearest-centroid accuracy stays at chance
        store = data.synth_blobs(16, 4000, seed=2)
        rng = np.random.default_rng(0)
        labels = rng.integers(0, 10, size=len(store))
        half = len(store) // 2
        centroids = np.stack([
            store.vectors[:half][labels[:half] == c].mean(axis=0) for c in range(10)
        ])
        test = store.vectors[half:]
        d2 = (
            (test**2).sum(1)[:, None]
            - 2 * test @ centroids.T
            + (centroids**2).sum(1)[None, :]
        )
        acc = np.mean(np.argmin(d2, axis=1) == labels[half:])
        assert abs(acc - 0.1) < 0.03

    def test_unlabeled_sentinel(self):
        store = data.synth_blobs(2, 5, seed=3)
        assert np.all(store.class_ids == data.UNLABELED)


class TestSplits:
    def test_paper_ratio_50k(self):
        store = data.EmbeddingStore(
            "big", np.zeros((50_000, 1), dtype=np.float32),
            np.arange(50_000, dtype=np.uint64),
            np.zeros(50_000, dtype=np.uint32),
        )
        train, test = data.make_splits(store, 0.1, seed=0)
        assert len(train) == 45_000 and len(test) == 5_000

    def test_ten_images(self):
        store = make_store(n=10)
        train, test = data.make_splits(store, 0.1, seed=0)
        assert len(train) == 9 and len(test) == 1

    def test_deterministic_and_partition(self):
        store = make_store(n=100, seed=4)
        t1 = data.make_splits(store, 0.2, seed=7)
        t2 = data.make_splits(store, 0.2, seed=7)
        np.testing.assert_array_equal(t1[0], t2[0])
        np.testing.assert_array_equal(t1[1], t2[1])
        merged = np.sort(np.concatenate(t1))
        np.testing.assert_array_equal(merged, np.sort(store.image_ids))

    def test_identical_across_aligned_stores(self):
        cfg = data.SyntheticGenConfig(
            num_classes=4, images_per_class=5, latent_dim=4,
            architectures=(("p", 4, False), ("q", 6, False)),
            ood_num_classes=1, seed=0,
        )
        ds = data.synth_generate(cfg)
        a = data.make_splits(ds.stores["p"], 0.25, seed=3)
        b = data.make_splits(ds.stores["q"], 0.25, seed=3)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_bad_fraction(self):
        with pytest.raises(ConfigError):
            data.make_splits(make_store(), 0.0, seed=0)


class TestBatches:
    def test_target_positions_are_permutation(self):
        rng = np.random.default_rng(0)
        batch = data.build_batch(np.arange(200), 64, rng)
        assert sorted(batch.target_positions.tolist()) == list(range(64))
        assert len(batch.rounds) == 64

    def test_two_candidates(self):
        rng = np.random.default_rng(1)
        batch = data.build_batch(np.arange(10), 2, rng)
        assert sorted(batch.target_positions.tolist()) == [0, 1]

    def test_candidates_distinct_over_many_batches(self):
        rng = np.random.default_rng(2)
        ids = np.arange(100)
        for _ in range(1000):
            batch = data.build_batch(ids, 16, rng)
            assert len(set(batch.candidate_ids.tolist())) == 16

    def test_too_few_ids(self):
        with pytest.raises(InsufficientDataError):
            data.build_batch(np.arange(3), 8, np.random.default_rng(0))

    def test_single_class_batch_uses_all_when_exact(self):
        store = data.EmbeddingStore(
            "s", np.random.default_rng(0).standard_normal((32, 3)).astype(np.float32),
            np.arange(32, dtype=np.uint64), np.full(32, 7, dtype=np.uint32),
        )
        batch = data.build_single_class_batch(store, 7, size=32,
                                              rng=np.random.default_rng(0))
        assert set(batch.candidate_ids.tolist()) == set(range(32))

    def test_single_class_batch_all_same_class(self):
        cfg = data.SyntheticGenConfig(
            num_classes=100, images_per_class=40, latent_dim=8,
            architectures=(("a", 8, False),), ood_num_classes=1, seed=0,
        )
        store = data.synth_generate(cfg).stores["a"]
        rng = np.random.default_rng(0)
        for cid in range(100):
            batch = data.build_single_class_batch(store, cid, size=32, rng=rng)
            assert np.all(store.classes_for(batch.candidate_ids) == cid)

    def test_single_class_too_small_names_class(self):
        store = make_store(n=6)
        with pytest.raises(InsufficientDataError, match="class 0"):
            data.build_single_class_batch(store, 0, size=32)
