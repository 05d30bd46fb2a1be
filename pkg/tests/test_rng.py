"""Tests for labeled random streams."""

import numpy as np

from loewnerlab.rng import label_key, seed_sequence, spawn, stream


class TestStreams:
    def test_same_labels_same_stream(self):
        a = stream(7, "loops", 3).standard_normal(16)
        b = stream(7, "loops", 3).standard_normal(16)
        assert np.array_equal(a, b)

    def test_different_labels_differ(self):
        a = stream(7, "loops", 3).standard_normal(16)
        b = stream(7, "loops", 4).standard_normal(16)
        assert not np.array_equal(a, b)

    def test_different_seeds_differ(self):
        a = stream(7, "paths").random(8)
        b = stream(8, "paths").random(8)
        assert not np.array_equal(a, b)

    def test_philox_bit_generator(self):
        assert isinstance(stream(1).bit_generator, np.random.Philox)

    def test_label_key_is_32_bit_and_stable(self):
        key = label_key("bracket")
        assert 0 <= key < 2**32
        assert key == label_key("bracket")
        assert label_key(3) == label_key("3")

    def test_seed_sequence_spawn_key(self):
        seq = seed_sequence(5, "a", 1)
        assert seq.spawn_key == (label_key("a"), label_key(1))


class TestSpawn:
    def test_spawn_matches_indexed_streams(self):
        spawned = [g.random(4) for g in spawn(11, "paths", 3)]
        direct = [stream(11, "paths", i).random(4) for i in range(3)]
        for a, b in zip(spawned, direct, strict=True):
            assert np.array_equal(a, b)
