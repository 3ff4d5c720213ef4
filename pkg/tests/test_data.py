import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beammix._binio import BadMagicError, TruncatedFileError, VersionMismatchError
from beammix.channel import ArrayGeometry, ChannelSample, default_scene_families
from beammix.data import (
    ChannelDataset,
    InsufficientSamplesError,
    MixSpec,
    generate_dataset,
    largest_remainder_counts,
    load_dataset,
    mix_datasets,
    save_dataset,
    split_dataset,
)

GEOM = ArrayGeometry(n_antennas=8)


def make_dataset(scene_id: str, n: int, seed: int = 0) -> ChannelDataset:
    rng = np.random.default_rng(seed)
    samples = [
        ChannelSample(
            h=rng.normal(size=8) + 1j * rng.normal(size=8),
            scene_id=scene_id,
            seed_index=i,
        )
        for i in range(n)
    ]
    return ChannelDataset(samples=samples)


class TestLargestRemainder:
    def test_even_split(self):
        assert list(largest_remainder_counts(1000, np.array([0.5, 0.5]))) == [500, 500]

    def test_seventy_thirty(self):
        assert list(largest_remainder_counts(1000, np.array([0.7, 0.3]))) == [700, 300]

    def test_thirds_of_ten_tie_breaks_low_index(self):
        counts = largest_remainder_counts(10, np.array([1 / 3, 1 / 3, 1 / 3]))
        assert list(counts) == [4, 3, 3]

    @given(
        total=st.integers(1, 2000),
        weights=st.lists(st.floats(0.01, 10.0), min_size=1, max_size=6),
    )
    @settings(max_examples=100, deadline=None)
    def test_counts_sum_and_stay_close(self, total, weights):
        q = np.asarray(weights) / np.sum(weights)
        counts = largest_remainder_counts(total, q)
        assert counts.sum() == total
        assert np.all(np.abs(counts - total * q) < 1.0)


class TestMixDatasets:
    def test_counts_and_total(self):
        a, b = make_dataset("A", 700, 1), make_dataset("B", 400, 2)
        mixed = mix_datasets([a, b], MixSpec(np.array([0.7, 0.3]), 1000), rng_seed=3)
        assert mixed.n == 1000
        assert sum(s.scene_id == "A" for s in mixed.samples) == 700
        assert sum(s.scene_id == "B" for s in mixed.samples) == 300
        assert mixed.scene_id == "mixed"

    def test_single_source_is_shuffled_permutation(self):
        a = make_dataset("A", 50, 4)
        mixed = mix_datasets([a], MixSpec(np.array([1.0]), 50), rng_seed=5)
        original = sorted(s.seed_index for s in a.samples)
        assert sorted(s.seed_index for s in mixed.samples) == original
        assert [s.seed_index for s in mixed.samples] != [s.seed_index for s in a.samples]

    def test_sampling_without_replacement(self):
        a = make_dataset("A", 30, 6)
        mixed = mix_datasets([a], MixSpec(np.array([1.0]), 30), rng_seed=7)
        assert len({s.seed_index for s in mixed.samples}) == 30

    def test_insufficient_samples_raises(self):
        a, b = make_dataset("A", 10, 1), make_dataset("B", 10, 2)
        with pytest.raises(InsufficientSamplesError):
            mix_datasets([a, b], MixSpec(np.array([0.9, 0.1]), 20), rng_seed=0)

    def test_mismatched_antennas_raises(self):
        a = make_dataset("A", 5, 1)
        rng = np.random.default_rng(0)
        b = ChannelDataset(
            samples=[
                ChannelSample(h=rng.normal(size=4) + 1j * rng.normal(size=4), scene_id="B")
            ]
        )
        with pytest.raises(ValueError):
            mix_datasets([a, b], MixSpec(np.array([0.5, 0.5]), 2), rng_seed=0)

    def test_deterministic_given_seed(self):
        a, b = make_dataset("A", 100, 1), make_dataset("B", 100, 2)
        spec = MixSpec(np.array([0.4, 0.6]), 100)
        m1 = mix_datasets([a, b], spec, rng_seed=11)
        m2 = mix_datasets([a, b], spec, rng_seed=11)
        assert [s.seed_index for s in m1.samples] == [s.seed_index for s in m2.samples]

    def test_bad_proportions_rejected(self):
        with pytest.raises(ValueError):
            MixSpec(np.array([0.5, 0.6]), 10)
        with pytest.raises(ValueError):
            MixSpec(np.array([-0.1, 1.1]), 10)


class TestSplit:
    def test_exact_division(self):
        d = make_dataset("A", 1000, 1)
        train, test = split_dataset(d, 0.8, rng_seed=0)
        assert (train.n, test.n) == (800, 200)

    def test_floor_on_train_rule(self):
        d = make_dataset("A", 3, 2)
        train, test = split_dataset(d, 0.5, rng_seed=0)
        assert (train.n, test.n) == (1, 2)

    def test_partition_is_disjoint_and_complete(self):
        d = make_dataset("A", 57, 3)
        train, test = split_dataset(d, 0.6, rng_seed=1)
        ids = sorted(s.seed_index for s in train.samples + test.samples)
        assert ids == list(range(57))

    def test_deterministic(self):
        d = make_dataset("A", 20, 4)
        t1 = split_dataset(d, 0.5, rng_seed=9)
        t2 = split_dataset(d, 0.5, rng_seed=9)
        assert [s.seed_index for s in t1[0].samples] == [s.seed_index for s in t2[0].samples]

    def test_too_small_raises(self):
        d = make_dataset("A", 1, 5)
        with pytest.raises(ValueError):
            split_dataset(d, 0.5, rng_seed=0)


class TestDumpFormat:
    def test_round_trip_bit_exact(self, tmp_path):
        d = make_dataset("family_A", 10, 6)
        path = tmp_path / "d.chnl"
        save_dataset(d, path)
        loaded = load_dataset(path)
        assert loaded.n == 10
        for s1, s2 in zip(d.samples, loaded.samples):
            assert np.array_equal(s1.h, s2.h)
            assert (s1.scene_id, s1.seed_index) == (s2.scene_id, s2.seed_index)
        # second save is byte-identical
        path2 = tmp_path / "d2.chnl"
        save_dataset(loaded, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_empty_dataset_round_trips(self, tmp_path):
        path = tmp_path / "empty.chnl"
        save_dataset(ChannelDataset(samples=[]), path)
        assert load_dataset(path).n == 0

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.chnl"
        save_dataset(make_dataset("A", 2, 7), path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"XXXX"
        path.write_bytes(bytes(raw))
        with pytest.raises(BadMagicError):
            load_dataset(path)

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "v.chnl"
        save_dataset(make_dataset("A", 2, 8), path)
        raw = bytearray(path.read_bytes())
        raw[4:8] = (99).to_bytes(4, "little")
        path.write_bytes(bytes(raw))
        with pytest.raises(VersionMismatchError):
            load_dataset(path)

    def test_truncated_file(self, tmp_path):
        path = tmp_path / "t.chnl"
        save_dataset(make_dataset("A", 4, 9), path)
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) - 7])
        with pytest.raises(TruncatedFileError):
            load_dataset(path)

    def test_generated_dataset_uses_seed_rule(self):
        scene = default_scene_families()["family_A"]
        geom = ArrayGeometry(16)
        d = generate_dataset(scene, geom, 5, base_seed=100)
        assert [s.seed_index for s in d.samples] == [100, 101, 102, 103, 104]
        assert d.scene_id == "family_A"
