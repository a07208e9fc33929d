"""Dataset generation, IDX ingestion, and splitting."""

import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lcc.data import (
    Dataset,
    IdxFormatError,
    SwissRollSpec,
    gen_swiss_roll,
    read_idx,
    roll_target,
    split,
)


class TestSwissRoll:
    def test_noise_dims_extend_ambient_dimension(self):
        ds = gen_swiss_roll(SwissRollSpec(n=50, noise_dims=253, seed=1))
        assert ds.d == 256

    def test_clean_points_satisfy_parametrization(self):
        ds = gen_swiss_roll(SwissRollSpec(n=500, seed=2))
        assert ds.d == 3
        t = ds.intrinsic[:, 0]
        radii = np.sqrt(ds.points[:, 0] ** 2 + ds.points[:, 2] ** 2)
        np.testing.assert_allclose(radii, t, atol=1e-9)
        assert np.all(t >= 1.5 * np.pi) and np.all(t <= 4.5 * np.pi)

    def test_same_seed_is_bit_identical(self):
        spec = SwissRollSpec(n=200, noise_dims=5, seed=77)
        a, b = gen_swiss_roll(spec), gen_swiss_roll(spec)
        assert np.array_equal(a.points, b.points)
        assert np.array_equal(a.targets, b.targets)
        assert np.array_equal(a.intrinsic, b.intrinsic)

    def test_intrinsic_to_ambient_is_invertible(self):
        ds = gen_swiss_roll(SwissRollSpec(n=1000, noise_dims=2, seed=3))
        t = np.sqrt(ds.points[:, 0] ** 2 + ds.points[:, 2] ** 2)
        h = ds.points[:, 1]
        np.testing.assert_allclose(t, ds.intrinsic[:, 0], atol=1e-9)
        np.testing.assert_allclose(h, ds.intrinsic[:, 1], atol=1e-9)

    def test_targets_match_intrinsic_chart(self):
        ds = gen_swiss_roll(SwissRollSpec(n=100, seed=4))
        expected = roll_target(ds.intrinsic[:, 0], ds.intrinsic[:, 1])
        np.testing.assert_array_equal(ds.targets, expected)

    def test_noise_moments(self):
        n = 20000
        ds = gen_swiss_roll(SwissRollSpec(n=n, noise_dims=8, seed=5))
        noise = ds.points[:, 3:]
        assert np.all(np.abs(noise.mean(axis=0)) < 5.0 / np.sqrt(n))
        assert np.all(np.abs(noise.var(axis=0) - 1.0) < 5.0 * np.sqrt(2.0 / n))

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SwissRollSpec(n=0)
        with pytest.raises(ValueError):
            SwissRollSpec(n=10, noise_dims=-1)
        with pytest.raises(ValueError):
            SwissRollSpec(n=10, t_range=(2.0, 2.0))


def _write_idx_pair(tmp_path, images, labels, image_magic=0x803, label_magic=0x801,
                    truncate_images=False):
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images.shape
    img_path = tmp_path / "images-idx3-ubyte"
    lab_path = tmp_path / "labels-idx1-ubyte"
    payload = struct.pack(">IIII", image_magic, n, rows, cols) + images.tobytes()
    if truncate_images:
        payload = payload[:-3]
    img_path.write_bytes(payload)
    lab_path.write_bytes(struct.pack(">II", label_magic, len(labels)) + labels.tobytes())
    return img_path, lab_path


class TestReadIdx:
    def _images(self, n=6, fill=128):
        rng = np.random.default_rng(0)
        return rng.integers(1, 255, size=(n, 4, 5)).astype(np.uint8), \
            (np.arange(n) % 10).astype(np.uint8)

    def test_reads_and_unit_normalizes(self, tmp_path):
        images, labels = self._images()
        ds = read_idx(*_write_idx_pair(tmp_path, images, labels))
        assert ds.n == 6 and ds.d == 20
        np.testing.assert_allclose(np.linalg.norm(ds.points, axis=1), 1.0, atol=1e-6)
        np.testing.assert_array_equal(ds.targets, labels)

    def test_header_count_is_respected(self, tmp_path):
        images, labels = self._images(n=9)
        ds = read_idx(*_write_idx_pair(tmp_path, images, labels))
        assert ds.n == 9

    def test_bad_image_magic_rejected(self, tmp_path):
        images, labels = self._images()
        paths = _write_idx_pair(tmp_path, images, labels, image_magic=0x804)
        with pytest.raises(IdxFormatError, match="magic"):
            read_idx(*paths)

    def test_bad_label_magic_rejected(self, tmp_path):
        images, labels = self._images()
        paths = _write_idx_pair(tmp_path, images, labels, label_magic=0x802)
        with pytest.raises(IdxFormatError, match="magic"):
            read_idx(*paths)

    def test_count_mismatch_rejected(self, tmp_path):
        images, labels = self._images()
        paths = _write_idx_pair(tmp_path, images, labels[:-1])
        with pytest.raises(IdxFormatError, match="mismatch"):
            read_idx(*paths)

    def test_truncated_file_rejected(self, tmp_path):
        images, labels = self._images()
        paths = _write_idx_pair(tmp_path, images, labels, truncate_images=True)
        with pytest.raises(IdxFormatError, match="truncated"):
            read_idx(*paths)

    def test_all_zero_image_rejected(self, tmp_path):
        images, labels = self._images()
        images[2] = 0
        paths = _write_idx_pair(tmp_path, images, labels)
        with pytest.raises(IdxFormatError, match="zero"):
            read_idx(*paths)


class TestSplit:
    def test_sizes_and_disjointness(self):
        ds = gen_swiss_roll(SwissRollSpec(n=100, seed=6))
        labeled, unlabeled, test = split(ds, 10, 20, seed=1)
        assert (labeled.n, unlabeled.n, test.n) == (10, 70, 20)
        pools = [set(map(tuple, d.points)) for d in (labeled, unlabeled, test)]
        assert not (pools[0] & pools[1]) and not (pools[0] & pools[2]) \
            and not (pools[1] & pools[2])

    def test_all_labeled_leaves_unlabeled_empty(self):
        ds = gen_swiss_roll(SwissRollSpec(n=25, seed=6))
        labeled, unlabeled, test = split(ds, 25, 0, seed=1)
        assert labeled.n == 25 and unlabeled.n == 0 and test.n == 0

    def test_deterministic(self):
        ds = gen_swiss_roll(SwissRollSpec(n=60, seed=6))
        a = split(ds, 15, 15, seed=9)
        b = split(ds, 15, 15, seed=9)
        for x, y in zip(a, b):
            assert np.array_equal(x.points, y.points)

    def test_counts_exceeding_n_rejected(self):
        ds = gen_swiss_roll(SwissRollSpec(n=10, seed=6))
        with pytest.raises(ValueError):
            split(ds, 8, 3, seed=0)

    @given(n=st.integers(1, 60), n_labeled=st.integers(0, 60),
           n_test=st.integers(0, 60), seed=st.integers(0, 2**31))
    @settings(max_examples=60, deadline=None)
    def test_split_is_a_partition(self, n, n_labeled, n_test, seed):
        if n_labeled + n_test > n:
            return
        points = np.arange(n, dtype=np.float64)[:, None]
        ds = Dataset(points=points)
        parts = split(ds, n_labeled, n_test, seed)
        indices = np.concatenate([p.points[:, 0] for p in parts])
        assert sorted(indices.astype(int).tolist()) == list(range(n))


class TestDataset:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Dataset(points=np.array([[1.0, np.nan]]))

    def test_rejects_intrinsic_wider_than_ambient(self):
        with pytest.raises(ValueError):
            Dataset(points=np.zeros((2, 2)), intrinsic=np.zeros((2, 3)))

    def test_rejects_misaligned_targets(self):
        with pytest.raises(ValueError):
            Dataset(points=np.zeros((3, 2)), targets=np.zeros(2))
