import struct

import numpy as np
import pytest

from fetaprune.data import (
    IdxCountMismatchError, IdxFormatError, IdxTruncatedError, ToySpec, load_idx,
    read_idx_images, synth_blobs, toy_gaussian, train_test_split)
from fetaprune.numerics import ValidationError


def write_idx_images(path, images):
    images = np.asarray(images, dtype=np.uint8)
    n, r, c = images.shape
    path.write_bytes(struct.pack(">IIII", 2051, n, r, c) + images.tobytes())


def write_idx_labels(path, labels):
    labels = np.asarray(labels, dtype=np.uint8)
    path.write_bytes(struct.pack(">II", 2049, labels.size) + labels.tobytes())


class TestToy:
    def test_deterministic(self):
        a = toy_gaussian(ToySpec(5, 3, 20, seed=4))
        b = toy_gaussian(ToySpec(5, 3, 20, seed=4))
        assert a.inputs.tobytes() == b.inputs.tobytes()
        assert a.outputs.tobytes() == b.outputs.tobytes()

    def test_shapes_and_sign(self):
        d = toy_gaussian(ToySpec(1, 2, 7))
        assert d.inputs.shape == (7, 1) and d.outputs.shape == (7, 2)
        assert np.all(toy_gaussian(ToySpec(3, 4, 50), nonnegative=True).outputs >= 0)
        assert np.any(d.outputs < 0) or np.any(toy_gaussian(ToySpec(3, 4, 50)).outputs < 0)

    def test_mean(self):
        d = toy_gaussian(ToySpec(1000, 1, 1000, seed=1))
        assert abs(d.inputs.mean()) < 0.01

    def test_invalid(self):
        with pytest.raises(ValidationError):
            ToySpec(0, 1, 1)


class TestBlobs:
    def test_zero_spread_one_nn(self):
        data = synth_blobs(4, 3, 10, 0.0, seed=0)
        d = np.sum((data.inputs[:, None] - data.inputs[None]) ** 2, axis=2)
        np.fill_diagonal(d, np.inf)
        assert np.all(data.labels[np.argmin(d, axis=1)] == data.labels)

    def test_counts_and_determinism(self):
        a = synth_blobs(3, 5, 7, 0.3, seed=2, latent_dim=2, noise=0.1)
        b = synth_blobs(3, 5, 7, 0.3, seed=2, latent_dim=2, noise=0.1)
        assert len(a) == 21 and np.bincount(a.labels).tolist() == [7, 7, 7]
        assert a.inputs.tobytes() == b.inputs.tobytes()

    def test_invalid(self):
        with pytest.raises(ValidationError):
            synth_blobs(2, 2, 0, 0.1)

    def test_split(self):
        data = synth_blobs(2, 2, 50, 0.1)
        train, test = train_test_split(data, 0.2, seed=0)
        assert len(train) == 80 and len(test) == 20
        with pytest.raises(ValidationError):
            train_test_split(data, 1.0)


class TestIdx:
    def test_hand_fixture(self, tmp_path):
        raw = bytes([0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2,
                     0, 255, 51, 102, 255, 0, 0, 255])
        (tmp_path / "img").write_bytes(raw)
        (tmp_path / "lab").write_bytes(bytes([0, 0, 8, 1, 0, 0, 0, 2, 1, 0]))
        data = load_idx(tmp_path / "img", tmp_path / "lab")
        np.testing.assert_allclose(data.inputs, [[0, 1, 0.2, 0.4], [1, 0, 0, 1]])
        assert data.labels.tolist() == [1, 0]

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        images = rng.integers(0, 256, (5, 3, 4), dtype=np.uint8)
        labels = rng.integers(0, 10, 5)
        write_idx_images(tmp_path / "i", images)
        write_idx_labels(tmp_path / "l", labels)
        data = load_idx(tmp_path / "i", tmp_path / "l", n_classes=10)
        np.testing.assert_array_equal(np.round(data.inputs * 255).astype(np.uint8),
                                      images.reshape(5, 12))
        np.testing.assert_array_equal(data.labels, labels)
        assert len(load_idx(tmp_path / "i", tmp_path / "l", n_classes=10, limit=2)) == 2

    def test_empty_file(self, tmp_path):
        (tmp_path / "e").write_bytes(b"")
        with pytest.raises(IdxFormatError):
            read_idx_images(tmp_path / "e")

    def test_wrong_magic(self, tmp_path):
        write_idx_labels(tmp_path / "l", [1, 2])
        with pytest.raises(IdxFormatError):
            read_idx_images(tmp_path / "l")

    def test_truncated(self, tmp_path):
        write_idx_images(tmp_path / "i", np.zeros((2, 2, 2)))
        (tmp_path / "t").write_bytes((tmp_path / "i").read_bytes()[:-1])
        with pytest.raises(IdxTruncatedError):
            read_idx_images(tmp_path / "t")

    def test_count_mismatch(self, tmp_path):
        write_idx_images(tmp_path / "i", np.zeros((3, 2, 2)))
        write_idx_labels(tmp_path / "l", [0, 1])
        with pytest.raises(IdxCountMismatchError):
            load_idx(tmp_path / "i", tmp_path / "l")
