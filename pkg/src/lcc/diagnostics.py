"""Locality diagnostics: the localization measure, the linear-
approximation gap, and per-pair sign/distance reports."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coding import Code, Codebook, codes_to_matrix
from .data import Dataset

N_HISTOGRAM_BINS = 50


@dataclass(frozen=True)
class SmoothnessSpec:
    """First-order smoothness class: change bound alpha, Taylor-remainder
    bound beta with exponent 1 + p."""

    alpha: float
    beta: float
    p: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if not 0 < self.p <= 1:
            raise ValueError("p must lie in (0, 1]")


@dataclass
class LocalityReport:
    """Sign class and anchor distance for every (sample, anchor) pair.

    sign_class is +1 / -1 / 0; histograms share 50 uniform bins over
    [0, max distance].
    """

    sample_index: np.ndarray
    anchor_index: np.ndarray
    sign_class: np.ndarray
    distance: np.ndarray
    bin_edges: np.ndarray
    hist_positive: np.ndarray
    hist_negative: np.ndarray
    hist_zero: np.ndarray
    mean_distance: float

    def positive_distances(self) -> np.ndarray:
        return self.distance[self.sign_class > 0]

    def negative_distances(self) -> np.ndarray:
        return self.distance[self.sign_class < 0]


def _reconstructions(gamma, anchors):
    return gamma @ anchors


def _support_locality_term(gamma, anchors, recon, p):
    """sum_v |gamma_v| ||v - recon||^(1+p) per sample, support only."""
    anchor_sq = np.einsum("ij,ij->i", anchors, anchors)
    recon_sq = np.einsum("ij,ij->i", recon, recon)
    dist_sq = recon_sq[:, None] - 2.0 * recon @ anchors.T + anchor_sq[None, :]
    np.maximum(dist_sq, 0.0, out=dist_sq)
    powered = dist_sq ** ((1.0 + p) / 2.0)
    return np.sum(np.abs(gamma) * powered, axis=1)


def localization_measure(dataset: Dataset, codebook: Codebook, codes, spec: SmoothnessSpec) -> float:
    """Sample mean of alpha ||x - g(x)|| + beta sum_v |gamma_v| ||v - g(x)||^(1+p)."""
    gamma = codes if isinstance(codes, np.ndarray) else codes_to_matrix(codes, codebook.size)
    if gamma.shape[0] != dataset.n:
        raise ValueError("codes must align with the dataset")
    recon = _reconstructions(gamma, codebook.anchors)
    recon_err = np.linalg.norm(dataset.points - recon, axis=1)
    locality = _support_locality_term(gamma, codebook.anchors, recon, spec.p)
    return float(np.mean(spec.alpha * recon_err + spec.beta * locality))


def linearization_gap(f, x, code: Code, codebook: Codebook, spec: SmoothnessSpec):
    """(lhs, rhs) of the linear-approximation bound at one point.

    lhs = |f(x) - sum_v gamma_v f(v)|; rhs is the locality bound.  The
    bound is only guaranteed when the coefficients sum to one.
    """
    x = np.asarray(x, dtype=np.float64)
    gamma = code.to_dense()
    recon = codebook.anchors.T @ gamma
    approx = sum(value * f(codebook.anchors[idx]) for idx, value in code.entries.items())
    lhs = abs(f(x) - approx)
    locality = _support_locality_term(
        gamma[None, :], codebook.anchors, recon[None, :], spec.p
    )[0]
    rhs = spec.alpha * np.linalg.norm(x - recon) + spec.beta * locality
    return float(lhs), float(rhs)


def locality_report(dataset: Dataset, codebook: Codebook, codes) -> LocalityReport:
    """Sign/distance record for every (sample, anchor) pair."""
    gamma = codes if isinstance(codes, np.ndarray) else codes_to_matrix(codes, codebook.size)
    if gamma.shape[0] != dataset.n:
        raise ValueError("codes must align with the dataset")
    anchors = codebook.anchors
    X = dataset.points
    dist_sq = (
        np.einsum("ij,ij->i", X, X)[:, None]
        - 2.0 * X @ anchors.T
        + np.einsum("ij,ij->i", anchors, anchors)[None, :]
    )
    np.maximum(dist_sq, 0.0, out=dist_sq)
    distance = np.sqrt(dist_sq)
    sign_class = np.sign(gamma).astype(np.int8)
    n, size = gamma.shape
    sample_index = np.repeat(np.arange(n), size)
    anchor_index = np.tile(np.arange(size), n)
    flat_sign = sign_class.ravel()
    flat_dist = distance.ravel()
    max_dist = float(flat_dist.max()) if flat_dist.size else 0.0
    edges = np.linspace(0.0, max_dist if max_dist > 0 else 1.0, N_HISTOGRAM_BINS + 1)
    hist_pos = np.histogram(flat_dist[flat_sign > 0], bins=edges)[0]
    hist_neg = np.histogram(flat_dist[flat_sign < 0], bins=edges)[0]
    hist_zero = np.histogram(flat_dist[flat_sign == 0], bins=edges)[0]
    return LocalityReport(
        sample_index=sample_index,
        anchor_index=anchor_index,
        sign_class=flat_sign,
        distance=flat_dist,
        bin_edges=edges,
        hist_positive=hist_pos,
        hist_negative=hist_neg,
        hist_zero=hist_zero,
        mean_distance=float(flat_dist.mean()) if flat_dist.size else 0.0,
    )
