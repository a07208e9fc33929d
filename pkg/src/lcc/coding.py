"""Encoding points against a codebook of anchor vectors.

Two encoder families share one coordinate-descent solver:

  * locality-weighted coding: per-anchor threshold mu * ||v - x||^(1+p)
  * plain sparse coding: uniform threshold beta

Both return a stationary point of

    0.5 * ||x - sum_v gamma_v v||^2 + sum_v w_v |gamma_v|

certified by a subgradient (KKT) residual check.  The sum-to-one
constraint is intentionally not enforced here.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._kernels import run_full_sweeps, solve_batch
from .data import Dataset

RIDGE_MODE = "ridge-regularized"
UNIT_NORM_MODE = "unit-norm-constrained"


class EncodingError(RuntimeError):
    """Coordinate descent failed to reach the KKT tolerance.

    Carries the offending point indices and their final KKT residuals.
    """

    def __init__(self, indices, residuals):
        self.indices = list(indices)
        self.residuals = list(residuals)
        worst = max(self.residuals)
        super().__init__(
            f"encoder did not converge for {len(self.indices)} point(s) "
            f"(worst KKT residual {worst:.3e}); indices {self.indices[:10]}"
        )


@dataclass(frozen=True)
class Codebook:
    """Ordered set of anchor vectors, rows of `anchors`."""

    anchors: np.ndarray
    mode: str = RIDGE_MODE

    def __post_init__(self):
        anchors = np.ascontiguousarray(self.anchors, dtype=np.float64)
        object.__setattr__(self, "anchors", anchors)
        if anchors.ndim != 2 or anchors.shape[0] == 0:
            raise ValueError("anchors must be a nonempty 2-d array")
        if not np.all(np.isfinite(anchors)):
            raise ValueError("anchors contain non-finite values")
        if self.mode not in (RIDGE_MODE, UNIT_NORM_MODE):
            raise ValueError(f"unknown codebook mode {self.mode!r}")
        if self.mode == UNIT_NORM_MODE:
            norms = np.linalg.norm(anchors, axis=1)
            if np.any(norms > 1.0 + 1e-9):
                raise ValueError("unit-norm codebook has an anchor with norm > 1")

    @property
    def size(self) -> int:
        return self.anchors.shape[0]

    @property
    def d(self) -> int:
        return self.anchors.shape[1]


@dataclass
class Code:
    """Sparse coefficient vector over a codebook: index -> coefficient."""

    entries: dict[int, float]
    size: int

    def __post_init__(self):
        for idx, value in self.entries.items():
            if not 0 <= idx < self.size:
                raise ValueError(f"coefficient index {idx} out of range")
            if value == 0.0 or not np.isfinite(value):
                raise ValueError(f"coefficient at {idx} must be finite and nonzero")

    @classmethod
    def from_dense(cls, gamma, size=None) -> "Code":
        gamma = np.asarray(gamma, dtype=np.float64)
        size = gamma.shape[0] if size is None else size
        entries = {int(i): float(gamma[i]) for i in np.flatnonzero(gamma)}
        return cls(entries=entries, size=size)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.size)
        for idx, value in self.entries.items():
            dense[idx] = value
        return dense

    def to_json_dict(self) -> dict:
        return {
            "size": self.size,
            "entries": [[i, self.entries[i]] for i in sorted(self.entries)],
        }

    @classmethod
    def from_json_dict(cls, obj) -> "Code":
        return cls(entries={int(i): float(v) for i, v in obj["entries"]}, size=int(obj["size"]))


@dataclass(frozen=True)
class CodingConfig:
    """Encoder settings; mu selects locality weighting, beta_sparse the
    plain L1 penalty, and at most one of them may be positive."""

    mu: float = 0.0
    beta_sparse: float = 0.0
    p: int = 1
    tol: float = 1e-8
    max_iter: int = 10000

    def __post_init__(self):
        if self.mu < 0 or self.beta_sparse < 0:
            raise ValueError("penalty weights must be nonnegative")
        if self.mu > 0 and self.beta_sparse > 0:
            raise ValueError("mu and beta_sparse are mutually exclusive")
        if self.p not in (0, 1):
            raise ValueError("p must be 0 or 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


def anchor_distances_sq(points, anchors):
    """Squared Euclidean distances, clipped at zero.

    Rows are computed independently (one matvec per point) so encoding a
    batch and encoding point by point give bit-identical results.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    anchor_sq = np.einsum("ij,ij->i", anchors, anchors)
    out = np.empty((points.shape[0], anchors.shape[0]))
    for i in range(points.shape[0]):
        cross = anchors @ points[i]
        out[i] = points[i] @ points[i] + anchor_sq - 2.0 * cross
    np.maximum(out, 0.0, out=out)
    return out


def penalty_weights(points, anchors, config: CodingConfig):
    """Per-coefficient L1 weights for a batch of points (n, |C|)."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n = points.shape[0]
    if config.beta_sparse > 0 or (config.mu == 0 and config.beta_sparse == 0):
        return np.full((n, anchors.shape[0]), config.beta_sparse)
    dist_sq = anchor_distances_sq(points, anchors)
    if config.p == 1:
        return config.mu * dist_sq
    return config.mu * np.sqrt(dist_sq)


def encode_matrix(points, codebook: Codebook, config: CodingConfig, warm=None):
    """Encode rows of `points`; returns the dense (n, |C|) coefficient matrix.

    `warm`, when given, is mutated in place and used as the starting
    iterate (useful across dictionary-learning rounds).  Raises
    EncodingError listing every point that missed the KKT tolerance.
    """
    points = np.atleast_2d(np.ascontiguousarray(points, dtype=np.float64))
    n = points.shape[0]
    anchors = codebook.anchors
    if points.shape[1] != codebook.d:
        raise ValueError("point dimension does not match codebook")
    G = anchors @ anchors.T
    B = np.empty((n, codebook.size))
    for i in range(n):
        B[i] = anchors @ points[i]
    W = penalty_weights(points, anchors, config)

    dead = np.flatnonzero(np.diag(G) == 0.0)
    if dead.size:
        degenerate = dead[np.all(W[:, dead] == 0.0, axis=0)]
        if degenerate.size:
            warnings.warn(
                f"skipping zero-norm anchors with zero penalty weight: {degenerate.tolist()}",
                RuntimeWarning,
            )
    if warm is None:
        gamma = np.zeros((n, codebook.size))
    else:
        gamma = warm
        if gamma.shape != (n, codebook.size):
            raise ValueError("warm start has wrong shape")
        if dead.size:
            gamma[:, dead] = 0.0
    _, kkt, converged = solve_batch(G, B, W, gamma, config.tol, config.max_iter)
    if not np.all(converged):
        bad = np.flatnonzero(~converged)
        raise EncodingError(bad.tolist(), kkt[bad].tolist())
    return gamma


def encode_lcc(x, codebook: Codebook, config: CodingConfig) -> Code:
    """Locality-weighted encoding of a single point."""
    if config.beta_sparse > 0:
        raise ValueError("encode_lcc requires beta_sparse == 0")
    gamma = encode_matrix(np.asarray(x)[None, :], codebook, config)
    return Code.from_dense(gamma[0])


def encode_sparse(x, codebook: Codebook, config: CodingConfig) -> Code:
    """Plain sparse-coding encoding of a single point."""
    if config.mu > 0:
        raise ValueError("encode_sparse requires mu == 0")
    gamma = encode_matrix(np.asarray(x)[None, :], codebook, config)
    return Code.from_dense(gamma[0])


def encode_dataset(dataset: Dataset, codebook: Codebook, config: CodingConfig) -> list[Code]:
    """Encode every sample; the encoder family follows the config."""
    gamma = encode_matrix(dataset.points, codebook, config)
    return matrix_to_codes(gamma)


def reconstruct(code: Code, codebook: Codebook) -> np.ndarray:
    """Physical approximation sum_v gamma_v v of the encoded point."""
    out = np.zeros(codebook.d)
    for idx, value in code.entries.items():
        if idx >= codebook.size:
            raise IndexError(f"code index {idx} out of range for codebook of {codebook.size}")
        out += value * codebook.anchors[idx]
    return out


def coding_norm(code: Code) -> float:
    """Euclidean norm of the coefficient vector."""
    return float(np.sqrt(sum(v * v for v in code.entries.values())))


def codes_to_matrix(codes, size) -> np.ndarray:
    dense = np.zeros((len(codes), size))
    for i, code in enumerate(codes):
        for idx, value in code.entries.items():
            dense[i, idx] = value
    return dense


def matrix_to_codes(gamma) -> list[Code]:
    size = gamma.shape[1]
    return [Code.from_dense(row, size) for row in gamma]


def encoding_objective(x, codebook: Codebook, gamma, config: CodingConfig) -> float:
    """Value of the per-point encoder objective at coefficients gamma."""
    if isinstance(gamma, Code):
        gamma = gamma.to_dense()
    gamma = np.asarray(gamma, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    residual = x - codebook.anchors.T @ gamma
    weights = penalty_weights(x[None, :], codebook.anchors, config)[0]
    return float(0.5 * residual @ residual + weights @ np.abs(gamma))


def kkt_residual(x, codebook: Codebook, gamma, config: CodingConfig) -> float:
    """Recompute the subgradient violation from scratch (no solver state)."""
    if isinstance(gamma, Code):
        gamma = gamma.to_dense()
    gamma = np.asarray(gamma, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    anchors = codebook.anchors
    grad = anchors @ (x - anchors.T @ gamma)
    weights = penalty_weights(x[None, :], anchors, config)[0]
    diag = np.einsum("ij,ij->i", anchors, anchors)
    worst = 0.0
    for v in range(anchors.shape[0]):
        if gamma[v] == 0.0:
            viol = abs(grad[v]) - weights[v]
        elif diag[v] > 0:
            viol = abs(grad[v] - np.sign(gamma[v]) * weights[v]) / diag[v]
        else:
            continue
        worst = max(worst, viol)
    return worst


def descend_sweeps(x, codebook: Codebook, gamma, config: CodingConfig, n_sweeps: int):
    """Advance coefficients by exactly n_sweeps full cyclic passes.

    Diagnostic hook for monotonicity checks; mutates gamma in place.
    """
    anchors = codebook.anchors
    G = anchors @ anchors.T
    b = anchors @ np.asarray(x, dtype=np.float64)
    w = penalty_weights(np.asarray(x)[None, :], anchors, config)[0]
    run_full_sweeps(G, b, w, gamma, n_sweeps)
