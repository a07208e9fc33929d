"""Anchor-point learning by alternating minimization.

One round alternates a batch encode (coordinate descent per point) with
an anchor update.  In ridge mode the anchor update is a single exact
joint solve of the (|C| x |C|) normal equations shared across ambient
dimensions; in unit-norm mode it is block coordinate descent over
anchors, where each block has a scalar-times-identity Hessian so the
ball-constrained minimizer is the unconstrained one rescaled.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .coding import (
    RIDGE_MODE,
    UNIT_NORM_MODE,
    Code,
    Codebook,
    CodingConfig,
    codes_to_matrix,
    encode_matrix,
    penalty_weights,
)
from .data import Dataset


@dataclass(frozen=True)
class DictLearnConfig:
    codebook_size: int
    coding: CodingConfig = field(default_factory=CodingConfig)
    lambda_ridge: float = 0.0
    n_iters: int = 30
    init: str = "random-sample"
    seed: int = 0
    mode: str = RIDGE_MODE

    def __post_init__(self):
        if self.codebook_size < 1:
            raise ValueError("codebook_size must be at least 1")
        if self.lambda_ridge < 0:
            raise ValueError("lambda_ridge must be nonnegative")
        if self.n_iters < 0:
            raise ValueError("n_iters must be nonnegative")
        if self.init not in ("random-sample", "kmeans"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.mode not in (RIDGE_MODE, UNIT_NORM_MODE):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == UNIT_NORM_MODE and self.lambda_ridge != 0:
            raise ValueError("unit-norm mode requires lambda_ridge == 0")
        if self.coding.mu > 0 and self.coding.p != 1:
            raise ValueError("anchor updates need p == 1 when mu > 0")

    @property
    def locality_mu(self) -> float:
        """Locality weight seen by the anchor update (0 in sparse mode)."""
        return 0.0 if self.coding.beta_sparse > 0 else self.coding.mu


def _ball_project(anchors):
    norms = np.linalg.norm(anchors, axis=1)
    over = norms > 1.0
    if np.any(over):
        anchors = anchors.copy()
        anchors[over] /= norms[over, None]
    return anchors


def init_codebook(dataset: Dataset, config: DictLearnConfig) -> Codebook:
    """Seeded initialization: distinct data rows, or Lloyd k-means from a
    random partition (fixpoint or 100 iterations)."""
    n, size = dataset.n, config.codebook_size
    if n < size:
        raise ValueError(f"need at least {size} points to place {size} anchors, got {n}")
    rng = np.random.default_rng(config.seed)
    X = dataset.points
    if config.init == "random-sample":
        idx = rng.choice(n, size=size, replace=False)
        anchors = X[idx].copy()
    else:
        assignment = rng.integers(0, size, size=n)
        anchors = np.empty((size, X.shape[1]))
        point_sq = np.einsum("ij,ij->i", X, X)
        for _ in range(100):
            for c in range(size):
                members = assignment == c
                if np.any(members):
                    anchors[c] = X[members].mean(axis=0)
                # empty cluster keeps its previous center
            dist = point_sq[:, None] - 2.0 * X @ anchors.T \
                + np.einsum("ij,ij->i", anchors, anchors)[None, :]
            new_assignment = np.argmin(dist, axis=1)
            if np.array_equal(new_assignment, assignment):
                break
            assignment = new_assignment
    if config.mode == UNIT_NORM_MODE:
        anchors = _ball_project(anchors)
    return Codebook(anchors=anchors, mode=config.mode)


def _update_anchors(X, gamma, anchors, config: DictLearnConfig):
    """Exact anchor update; returns (new_anchors, dead_column_indices).

    Anchors whose coefficient column is all zero are left unchanged.
    """
    mu = config.locality_mu
    lam = config.lambda_ridge
    size = anchors.shape[0]
    M = gamma.T @ gamma
    abs_gamma = np.abs(gamma)
    col_weight = abs_gamma.sum(axis=0)
    active = (M.diagonal() > 0) | (col_weight > 0)
    dead = np.flatnonzero(~active)
    new_anchors = anchors.copy()

    if config.mode == RIDGE_MODE:
        S = abs_gamma.T @ X
        lhs = M + np.diag(2.0 * mu * col_weight) + 2.0 * lam * np.eye(size)
        rhs = gamma.T @ X + 2.0 * mu * S
        act = np.flatnonzero(active)
        if act.size:
            sub = lhs[np.ix_(act, act)]
            try:
                solved = np.linalg.solve(sub, rhs[act])
            except np.linalg.LinAlgError:
                warnings.warn("anchor system singular; using least-squares solve", RuntimeWarning)
                solved = np.linalg.lstsq(sub, rhs[act], rcond=None)[0]
            new_anchors[act] = solved
        return new_anchors, dead

    # unit-norm mode: block coordinate descent, exact per-anchor minimizer
    P = gamma.T @ X
    S = abs_gamma.T @ X
    curvature = M.diagonal() + 2.0 * mu * col_weight
    for _ in range(100):
        max_move = 0.0
        for v in range(size):
            if curvature[v] <= 0.0:
                continue
            numer = P[v] - M[v] @ new_anchors + M[v, v] * new_anchors[v] + 2.0 * mu * S[v]
            cand = numer / curvature[v]
            norm = np.linalg.norm(cand)
            if norm > 1.0:
                cand = cand / norm
            move = np.linalg.norm(cand - new_anchors[v])
            if move > max_move:
                max_move = move
            new_anchors[v] = cand
        if max_move < 1e-7:
            break
    return new_anchors, dead


def update_codebook(dataset: Dataset, codes, codebook: Codebook, config: DictLearnConfig) -> Codebook:
    """One exact anchor update given fixed codes.

    Dead anchors (all-zero coefficient column) are kept unchanged and
    reported through a RuntimeWarning; the current codebook supplies
    their positions and the starting point of the unit-norm sweep.
    """
    gamma = codes if isinstance(codes, np.ndarray) else codes_to_matrix(codes, config.codebook_size)
    if gamma.shape != (dataset.n, config.codebook_size):
        raise ValueError("codes do not match dataset/codebook sizes")
    if codebook.size != config.codebook_size:
        raise ValueError("codebook size does not match config")
    new_anchors, dead = _update_anchors(dataset.points, gamma, codebook.anchors, config)
    if dead.size:
        warnings.warn(f"anchors with all-zero code columns kept unchanged: {dead.tolist()}",
                      RuntimeWarning)
    return Codebook(anchors=new_anchors, mode=config.mode)


def learning_objective(points, anchors, gamma, coding: CodingConfig, lambda_ridge: float = 0.0) -> float:
    """Full alternating-minimization objective at (anchors, gamma)."""
    if isinstance(anchors, Codebook):
        anchors = anchors.anchors
    residual = points - gamma @ anchors
    weights = penalty_weights(points, anchors, coding)
    return float(
        0.5 * np.sum(residual * residual)
        + np.sum(weights * np.abs(gamma))
        + lambda_ridge * np.sum(anchors * anchors)
    )


def learn(dataset: Dataset, config: DictLearnConfig):
    """Alternate encoding and anchor updates for n_iters rounds.

    Returns (codebook, history) where history holds the full objective
    after every half-step (encode, update, encode, ...).  Dead anchors
    are re-seeded to random data rows after the update half-step, which
    is reported via RuntimeWarning.
    """
    codebook = init_codebook(dataset, config)
    anchors = codebook.anchors.copy()
    X = dataset.points
    reseed_rng = np.random.default_rng([config.seed, 0x5EED])
    gamma = np.zeros((dataset.n, config.codebook_size))
    history: list[float] = []
    for _ in range(config.n_iters):
        gamma = encode_matrix(X, Codebook(anchors, mode=config.mode), config.coding, warm=gamma)
        history.append(learning_objective(X, anchors, gamma, config.coding, config.lambda_ridge))
        anchors, dead = _update_anchors(X, gamma, anchors, config)
        history.append(learning_objective(X, anchors, gamma, config.coding, config.lambda_ridge))
        if dead.size:
            warnings.warn(f"re-seeding dead anchors {dead.tolist()} to random data rows",
                          RuntimeWarning)
            replacement = X[reseed_rng.choice(dataset.n, size=dead.size, replace=False)]
            if config.mode == UNIT_NORM_MODE:
                replacement = _ball_project(replacement)
            anchors[dead] = replacement
    return Codebook(anchors=anchors, mode=config.mode), history


def rectify_signs(codebook: Codebook, codes):
    """Flip anchors whose coefficients are mostly negative.

    Valid for plain sparse coding, where negating an anchor together
    with its coefficients leaves the objective unchanged; returns the
    rectified (codebook, codes) pair.
    """
    pos = np.zeros(codebook.size, dtype=np.int64)
    neg = np.zeros(codebook.size, dtype=np.int64)
    for code in codes:
        for idx, value in code.entries.items():
            if value > 0:
                pos[idx] += 1
            elif value < 0:
                neg[idx] += 1
    flip = neg > pos
    if not np.any(flip):
        return codebook, list(codes)
    anchors = codebook.anchors.copy()
    anchors[flip] = -anchors[flip]
    flipped = set(np.flatnonzero(flip).tolist())
    new_codes = []
    for code in codes:
        entries = {
            idx: (-value if idx in flipped else value)
            for idx, value in code.entries.items()
        }
        new_codes.append(Code(entries=entries, size=code.size))
    return Codebook(anchors=anchors, mode=codebook.mode), new_codes
