"""Constructive manifold coding: epsilon-net, local tangent frames, and
sum-to-one projection codes.

The anchor set is the union of the net centers and, for each center u,
the offset points u + v_j(u) where {v_j(u)} is an orthogonal frame of
norm epsilon estimated by local PCA.  A point is coded by projecting
its offset from the nearest center onto that center's frame, with the
remaining mass 1 - sum_j gamma'_j assigned to the center itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .diagnostics import SmoothnessSpec


@dataclass
class ConstructedCode:
    """Sparse sum-to-one code over a cover's anchor list."""

    entries: dict[int, float]
    size: int

    def sum(self) -> float:
        """Correctly rounded sum of the stored coefficients."""
        return math.fsum(self.entries.values())

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.size)
        for idx, value in self.entries.items():
            dense[idx] = value
        return dense


@dataclass
class ManifoldCover:
    """Epsilon-net centers with per-center tangent frames.

    anchors stacks the centers first, then frame offset points in
    center-major order: anchor N + i*m + j is centers[i] + frames[i, j].
    """

    epsilon: float
    m: int
    centers: np.ndarray
    frames: np.ndarray

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        n_centers = self.centers.shape[0]
        if self.frames.shape[:2] != (n_centers, self.m):
            raise ValueError("frames must be (n_centers, m, d)")
        self.anchors = np.vstack([
            self.centers,
            (self.centers[:, None, :] + self.frames).reshape(n_centers * self.m, -1),
        ])

    @property
    def n_centers(self) -> int:
        return self.centers.shape[0]

    @property
    def n_anchors(self) -> int:
        return self.anchors.shape[0]

    def anchor_index(self, center: int, frame: int | None = None) -> int:
        if frame is None:
            return center
        return self.n_centers + center * self.m + frame


def greedy_cover(dataset: Dataset, epsilon: float) -> np.ndarray:
    """Farthest-point epsilon-net over the data, seeded at index 0.

    Repeatedly adds the point farthest from the chosen centers until no
    point is farther than epsilon.  Greedy is within N(eps/2)/N(eps) of
    the optimal cover size, which we do not assert, only note.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    X = dataset.points
    if X.shape[0] == 0:
        raise ValueError("cannot cover an empty dataset")
    chosen = [0]
    dist = np.linalg.norm(X - X[0], axis=1)
    while True:
        farthest = int(np.argmax(dist))
        if dist[farthest] <= epsilon:
            break
        chosen.append(farthest)
        np.minimum(dist, np.linalg.norm(X - X[farthest], axis=1), out=dist)
    return X[chosen].copy()


def cover_radius(dataset: Dataset, centers) -> float:
    """sup over data of the distance to the nearest center."""
    X = dataset.points
    dist_sq = (
        np.einsum("ij,ij->i", X, X)[:, None]
        - 2.0 * X @ centers.T
        + np.einsum("ij,ij->i", centers, centers)[None, :]
    )
    np.maximum(dist_sq, 0.0, out=dist_sq)
    return float(np.sqrt(dist_sq.min(axis=1).max()))


def tangent_frame(center, dataset: Dataset, m: int, epsilon: float) -> np.ndarray:
    """Top-m principal directions of neighbor offsets, scaled to norm epsilon.

    Neighbors are the data points within radius 2 * epsilon of the
    center (the center itself contributes nothing); directions come
    from the SVD of the offsets so they are pairwise orthogonal.
    """
    center = np.asarray(center, dtype=np.float64)
    offsets = dataset.points - center
    dist = np.linalg.norm(offsets, axis=1)
    nearby = offsets[(dist > 0) & (dist <= 2.0 * epsilon)]
    if nearby.shape[0] < m:
        raise ValueError(
            f"center {center.tolist()} has {nearby.shape[0]} neighbors within "
            f"{2 * epsilon:g}, need at least {m}"
        )
    _, svals, vt = np.linalg.svd(nearby, full_matrices=False)
    if svals[m - 1] <= 1e-12 * svals[0]:
        raise ValueError(
            f"neighborhood of center {center.tolist()} is rank deficient: "
            f"only {int(np.sum(svals > 1e-12 * svals[0]))} meaningful directions"
        )
    return epsilon * vt[:m]


def build_cover(dataset: Dataset, epsilon: float, m: int) -> ManifoldCover:
    """Greedy net plus a tangent frame at every center."""
    centers = greedy_cover(dataset, epsilon)
    frames = np.stack([
        tangent_frame(center, dataset, m, epsilon) for center in centers
    ])
    return ManifoldCover(epsilon=epsilon, m=m, centers=centers, frames=frames)


def construct_code(x, cover: ManifoldCover) -> ConstructedCode:
    """Project x onto the frame of its nearest center.

    gamma'_j = frame_j . (x - u) / epsilon^2 goes to the offset anchor
    u + frame_j, and the center receives 1 - sum_j gamma'_j, so the
    coefficients sum to one by construction.
    """
    x = np.asarray(x, dtype=np.float64)
    dist = np.linalg.norm(cover.centers - x, axis=1)
    u_idx = int(np.argmin(dist))
    offset = x - cover.centers[u_idx]
    eps_sq = cover.epsilon * cover.epsilon
    entries: dict[int, float] = {}
    projections = []
    for j in range(cover.m):
        coeff = float(cover.frames[u_idx, j] @ offset / eps_sq)
        projections.append(coeff)
        if coeff != 0.0:
            entries[cover.anchor_index(u_idx, j)] = coeff
    center_coeff = math.fsum([1.0] + [-c for c in projections])
    if center_coeff != 0.0:
        entries[cover.anchor_index(u_idx)] = center_coeff
    return ConstructedCode(entries=entries, size=cover.n_anchors)


def reconstruct_constructed(code: ConstructedCode, cover: ManifoldCover) -> np.ndarray:
    out = np.zeros(cover.anchors.shape[1])
    for idx, value in code.entries.items():
        out += value * cover.anchors[idx]
    return out


def coding_norm_sq(code: ConstructedCode) -> float:
    return float(sum(v * v for v in code.entries.values()))


def _q_terms(x, code: ConstructedCode, cover: ManifoldCover, spec: SmoothnessSpec):
    recon = reconstruct_constructed(code, cover)
    recon_err = float(np.linalg.norm(np.asarray(x) - recon))
    locality = 0.0
    for idx, value in code.entries.items():
        locality += abs(value) * float(
            np.linalg.norm(cover.anchors[idx] - recon) ** (1.0 + spec.p)
        )
    return recon_err, locality


def verify_bounds(dataset: Dataset, cover: ManifoldCover, spec: SmoothnessSpec) -> dict:
    """Empirical check of the cover's cardinality, locality, and
    coding-norm guarantees.

    The true covering number is unknowable, so every bound substitutes
    the greedy cover size; the report says so explicitly.  The curvature
    constant is likewise reported as the empirical value
    max ||x - g(x)|| / epsilon^(1+p) and reused in the locality bound.
    """
    eps = cover.epsilon
    m = cover.m
    recon_errs = []
    localities = []
    norms_sq = []
    sum_devs = []
    for x in dataset.points:
        code = construct_code(x, cover)
        recon_err, locality = _q_terms(x, code, cover, spec)
        recon_errs.append(recon_err)
        localities.append(locality)
        norms_sq.append(coding_norm_sq(code))
        sum_devs.append(abs(code.sum() - 1.0))
    recon_errs = np.asarray(recon_errs)
    localities = np.asarray(localities)
    q_measured = float(np.mean(spec.alpha * recon_errs + spec.beta * localities))
    cp_empirical = float(recon_errs.max() / eps ** (1.0 + spec.p))
    q_bound = (
        spec.alpha * cp_empirical
        + (1.0 + math.sqrt(m) + 2.0 ** (1.0 + spec.p) * math.sqrt(m)) * spec.beta
    ) * eps ** (1.0 + spec.p)
    max_norm_sq = float(max(norms_sq))
    norm_bound = 1.0 + (1.0 + math.sqrt(m)) ** 2
    radius = cover_radius(dataset, cover.centers)
    return {
        "epsilon": eps,
        "m": m,
        "covering_number_source": "greedy",
        "n_centers": cover.n_centers,
        "n_anchors": cover.n_anchors,
        "anchor_bound": (1 + m) * cover.n_centers,
        "anchor_ok": cover.n_anchors <= (1 + m) * cover.n_centers,
        "cover_radius": radius,
        "cover_ok": radius <= eps,
        "q_measured": q_measured,
        "cp_empirical": cp_empirical,
        "q_bound": q_bound,
        "q_ok": q_measured <= q_bound,
        "max_coding_norm_sq": max_norm_sq,
        "coding_norm_bound": norm_bound,
        "coding_norm_ok": max_norm_sq <= norm_bound,
        "max_sum_to_one_deviation": float(max(sum_devs)),
        "alpha": spec.alpha,
        "beta": spec.beta,
        "p": spec.p,
    }
