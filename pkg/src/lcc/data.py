"""Synthetic manifold datasets and MNIST-style IDX ingestion.

The Swiss-roll generator produces points on the classical roll
(t cos t, h, t sin t) with a smooth regression target defined on the
intrinsic (t, h) chart, optionally padded with independent Gaussian
noise dimensions to stress high-dimensional behaviour.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from math import pi

import numpy as np

T_RANGE_DEFAULT = (1.5 * pi, 4.5 * pi)
H_RANGE_DEFAULT = (0.0, 21.0)


class IdxFormatError(ValueError):
    """Raised when an IDX file fails structural validation."""


@dataclass
class Dataset:
    """Point cloud with optional targets and intrinsic coordinates.

    points     : (n, d) float64, one sample per row
    targets    : optional (n,) vector; float for regression, int labels
                 for classification
    intrinsic  : optional (n, m) manifold coordinates, m <= d
    """

    points: np.ndarray
    targets: np.ndarray | None = None
    intrinsic: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=np.float64)
        if self.points.ndim != 2:
            raise ValueError("points must be a 2-d array")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("points contain non-finite values")
        if self.targets is not None:
            self.targets = np.asarray(self.targets)
            if self.targets.shape != (self.points.shape[0],):
                raise ValueError("targets length must match point count")
        if self.intrinsic is not None:
            self.intrinsic = np.ascontiguousarray(self.intrinsic, dtype=np.float64)
            if self.intrinsic.shape[0] != self.points.shape[0]:
                raise ValueError("intrinsic row count must match point count")
            if self.intrinsic.shape[1] > self.points.shape[1]:
                raise ValueError("intrinsic dimension exceeds ambient dimension")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(
            points=self.points[idx].copy(),
            targets=None if self.targets is None else self.targets[idx].copy(),
            intrinsic=None if self.intrinsic is None else self.intrinsic[idx].copy(),
        )


@dataclass(frozen=True)
class SwissRollSpec:
    """Sampling plan for the Swiss-roll generator.

    `scale` multiplies the three embedding coordinates (not the noise),
    setting the signal size relative to the unit-variance noise
    dimensions; intrinsic coordinates and targets are unaffected.
    """

    n: int
    noise_dims: int = 0
    t_range: tuple[float, float] = T_RANGE_DEFAULT
    h_range: tuple[float, float] = H_RANGE_DEFAULT
    scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.noise_dims < 0:
            raise ValueError("noise_dims must be nonnegative")
        if not self.t_range[0] < self.t_range[1]:
            raise ValueError("t_range must be a nonempty interval")
        if not self.h_range[0] < self.h_range[1]:
            raise ValueError("h_range must be a nonempty interval")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    @property
    def d(self) -> int:
        return 3 + self.noise_dims


def roll_target(t, h):
    """Two-scale regression target on the intrinsic chart.

    A slowly varying band pattern plus a higher-frequency component:
    the slow part is easy for any method, while the fast part separates
    local averaging (which tracks it from nearby labeled points) from
    coarse global fits.  Smooth with bounded gradient and Hessian.
    """
    return np.sin(t / 2.0) * np.cos(h / 5.0) + 0.6 * np.sin(2.0 * t) * np.cos(h / 2.0)


def roll_target_smoothness():
    """Conservative (alpha, beta) for roll_target on the intrinsic chart.

    |df/dt| <= 1/2 + 1.2 and |df/dh| <= 1/5 + 0.3 give
    alpha = sqrt(1.7^2 + 0.5^2).  Hessian entries are bounded by 2.65,
    0.7, 0.19, so the spectral norm is below the nuclear-norm bound
    2.65 + 2*0.7 + 0.19 and beta is half of that.  Valid on any box.
    """
    alpha = float(np.sqrt(1.7 ** 2 + 0.5 ** 2))
    beta = 0.5 * (2.65 + 2 * 0.7 + 0.19)
    return alpha, beta


def gen_swiss_roll(spec: SwissRollSpec) -> Dataset:
    """Sample the Swiss roll; deterministic for a fixed spec.

    t ~ U(t_range), h ~ U(h_range); ambient (t cos t, h, t sin t); when
    noise_dims = k > 0, k extra i.i.d. standard-normal coordinates are
    appended.
    """
    rng = np.random.default_rng(spec.seed)
    t = rng.uniform(spec.t_range[0], spec.t_range[1], size=spec.n)
    h = rng.uniform(spec.h_range[0], spec.h_range[1], size=spec.n)
    points = np.empty((spec.n, spec.d))
    points[:, 0] = t * np.cos(t)
    points[:, 1] = h
    points[:, 2] = t * np.sin(t)
    if spec.noise_dims:
        points[:, 3:] = rng.standard_normal(size=(spec.n, spec.noise_dims))
    return Dataset(
        points=points,
        targets=roll_target(t, h),
        intrinsic=np.column_stack([t, h]),
    )


_IMAGE_MAGIC = 0x00000803
_LABEL_MAGIC = 0x00000801


def _read_exact(f, count, path, what):
    buf = f.read(count)
    if len(buf) != count:
        raise IdxFormatError(f"{path}: truncated file while reading {what}")
    return buf


def read_idx(images_path, labels_path) -> Dataset:
    """Load an IDX image/label pair as unit-norm vectors.

    Pixels are scaled to [0, 1] and each image vector is L2-normalized;
    all-zero images are rejected since they cannot be normalized.
    """
    with open(images_path, "rb") as f:
        magic, n, rows, cols = struct.unpack(">IIII", _read_exact(f, 16, images_path, "header"))
        if magic != _IMAGE_MAGIC:
            raise IdxFormatError(
                f"{images_path}: bad magic number 0x{magic:08x}, expected 0x{_IMAGE_MAGIC:08x}"
            )
        raw = _read_exact(f, n * rows * cols, images_path, "pixel data")
    with open(labels_path, "rb") as f:
        magic, n_labels = struct.unpack(">II", _read_exact(f, 8, labels_path, "header"))
        if magic != _LABEL_MAGIC:
            raise IdxFormatError(
                f"{labels_path}: bad magic number 0x{magic:08x}, expected 0x{_LABEL_MAGIC:08x}"
            )
        labels = np.frombuffer(_read_exact(f, n_labels, labels_path, "label data"), dtype=np.uint8)
    if n_labels != n:
        raise IdxFormatError(
            f"image/label count mismatch: {n} images vs {n_labels} labels"
        )
    pixels = np.frombuffer(raw, dtype=np.uint8).reshape(n, rows * cols)
    points = pixels.astype(np.float64) / 255.0
    norms = np.linalg.norm(points, axis=1)
    if np.any(norms == 0.0):
        bad = int(np.flatnonzero(norms == 0.0)[0])
        raise IdxFormatError(f"image {bad} is all zero and cannot be unit-normalized")
    points /= norms[:, None]
    return Dataset(points=points, targets=labels.astype(np.int64))


def split(dataset: Dataset, n_labeled: int, n_test: int, seed: int):
    """Seeded disjoint partition into (labeled, unlabeled, test)."""
    if n_labeled < 0 or n_test < 0:
        raise ValueError("split sizes must be nonnegative")
    if n_labeled + n_test > dataset.n:
        raise ValueError(
            f"requested {n_labeled}+{n_test} points from a dataset of {dataset.n}"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(dataset.n)
    labeled = dataset.subset(order[:n_labeled])
    test = dataset.subset(order[n_labeled:n_labeled + n_test])
    unlabeled = dataset.subset(order[n_labeled + n_test:])
    return labeled, unlabeled, test
