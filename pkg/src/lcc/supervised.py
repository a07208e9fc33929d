"""Linear learning on codes, plus the local kernel-smoothing baseline.

Regression is ridge on code features with an exact normal-equation
solve; classification is one-vs-all with a Lipschitz loss minimized by
full-batch gradient descent under a backtracking line search.  Neither
model uses an intercept: sum-to-one codings make a constant feature
redundant, and an optional flag covers the rest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coding import Code, codes_to_matrix
from .data import Dataset

LOSSES = ("squared", "logistic", "squared_hinge")


class TrainingError(RuntimeError):
    """Gradient descent missed the gradient tolerance within the cap."""


@dataclass
class LinearModel:
    """Per-anchor weights; stacked one row per class for classification."""

    weights: np.ndarray
    lam: float
    loss: str
    classes: list | None = None

    def __post_init__(self):
        self.weights = np.atleast_2d(np.asarray(self.weights, dtype=np.float64))
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.classes is not None and len(self.classes) != self.weights.shape[0]:
            raise ValueError("one weight row per class required")

    @property
    def lipschitz_bound(self) -> float:
        """Loss-derivative bound used by the theory (1 for the provided
        classification losses; squared loss is not globally Lipschitz)."""
        return 1.0 if self.loss in ("logistic", "squared_hinge") else float("inf")


def _as_matrix(codes, size=None):
    if isinstance(codes, np.ndarray):
        return np.atleast_2d(codes)
    if size is None:
        if not codes:
            raise ValueError("cannot infer code length from an empty list")
        size = codes[0].size
    return codes_to_matrix(codes, size)


def train_ridge(codes, targets, lam: float) -> LinearModel:
    """Exact minimizer of sum_i 0.5 (w . g_i - y_i)^2 + lam ||w||^2."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    gamma = _as_matrix(codes)
    y = np.asarray(targets, dtype=np.float64)
    if y.shape != (gamma.shape[0],):
        raise ValueError("targets must align with codes")
    size = gamma.shape[1]
    lhs = gamma.T @ gamma + 2.0 * lam * np.eye(size)
    w = np.linalg.solve(lhs, gamma.T @ y)
    return LinearModel(weights=w, lam=lam, loss="squared")


def _loss_value_grad(margins, loss):
    """phi(m) summed, and dphi/dm elementwise, for labels folded into m."""
    if loss == "logistic":
        value = np.sum(np.logaddexp(0.0, -margins))
        grad = -1.0 / (1.0 + np.exp(margins))
    elif loss == "squared_hinge":
        slack = np.maximum(0.0, 1.0 - margins)
        value = np.sum(slack * slack)
        grad = -2.0 * slack
    else:
        raise ValueError(f"unsupported classification loss {loss!r}")
    return value, grad


def _fit_binary(gamma, y, lam, loss, tol, max_iter):
    """Full-batch gradient descent with Armijo backtracking."""
    w = np.zeros(gamma.shape[1])

    def objective_grad(w):
        margins = y * (gamma @ w)
        value, dphi = _loss_value_grad(margins, loss)
        value += lam * w @ w
        grad = gamma.T @ (y * dphi) + 2.0 * lam * w
        return value, grad

    value, grad = objective_grad(w)
    step = 1.0 / max(1.0, np.sum(gamma * gamma))
    for _ in range(max_iter):
        gnorm_sq = grad @ grad
        if np.sqrt(gnorm_sq) <= tol:
            return w
        step *= 2.0
        for _ in range(80):
            trial = w - step * grad
            trial_value, trial_grad = objective_grad(trial)
            if trial_value <= value - 1e-4 * step * gnorm_sq:
                break
            step *= 0.5
        else:
            raise TrainingError(
                f"line search stalled at gradient norm {np.sqrt(gnorm_sq):.3e}"
            )
        w, value, grad = trial, trial_value, trial_grad
    _, grad = objective_grad(w)
    raise TrainingError(
        f"gradient descent hit the iteration cap at gradient norm {np.linalg.norm(grad):.3e}"
    )


def classifier_gradient(model: LinearModel, codes, labels, class_index: int = 0):
    """Objective gradient at the model's weights for one binary problem."""
    gamma = _as_matrix(codes, model.weights.shape[1])
    w = model.weights[class_index]
    cls = model.classes[class_index]
    y = np.where(np.asarray(labels) == cls, 1.0, -1.0)
    margins = y * (gamma @ w)
    _, dphi = _loss_value_grad(margins, model.loss)
    return gamma.T @ (y * dphi) + 2.0 * model.lam * w


def train_classifier(codes, labels, lam: float, loss: str = "squared_hinge",
                     tol: float = 1e-6, max_iter: int = 100000) -> LinearModel:
    """One-vs-all linear classification on codes."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    gamma = _as_matrix(codes)
    labels = np.asarray(labels)
    if labels.shape != (gamma.shape[0],):
        raise ValueError("labels must align with codes")
    classes = np.unique(labels)
    if classes.size < 2:
        raise ValueError("need at least two classes")
    weights = np.empty((classes.size, gamma.shape[1]))
    for k, cls in enumerate(classes):
        y = np.where(labels == cls, 1.0, -1.0)
        weights[k] = _fit_binary(gamma, y, lam, loss, tol, max_iter)
    return LinearModel(weights=weights, lam=lam, loss=loss, classes=classes.tolist())


def predict(model: LinearModel, code):
    """Inner product of weights and code; argmax over classes when
    classifying, ties broken by the lowest class index."""
    dense = code.to_dense() if isinstance(code, Code) else np.asarray(code, dtype=np.float64)
    if dense.shape[-1] != model.weights.shape[1]:
        raise ValueError("code length does not match model")
    scores = model.weights @ dense
    if model.classes is None:
        return float(scores[0])
    return model.classes[int(np.argmax(scores))]


def predict_batch(model: LinearModel, codes):
    gamma = _as_matrix(codes, model.weights.shape[1])
    scores = gamma @ model.weights.T
    if model.classes is None:
        return scores[:, 0]
    picks = np.argmax(scores, axis=1)
    return np.asarray([model.classes[i] for i in picks])


@dataclass(frozen=True)
class SmootherConfig:
    """K-nearest-neighbor smoothing with adaptive Gaussian bandwidth."""

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")


def kernel_smooth(train: Dataset, query, config: SmootherConfig) -> float:
    """Weighted average of the k nearest training targets.

    Weights are exp(-||x - x_i||^2 / h^2) with h the distance to the
    k-th neighbor; distance ties are broken by lower index.  When all k
    neighbors coincide with the query (h = 0) the plain mean is used.
    """
    return float(kernel_smooth_batch(train, np.asarray(query)[None, :], config)[0])


def kernel_smooth_batch(train: Dataset, queries, config: SmootherConfig) -> np.ndarray:
    if train.targets is None:
        raise ValueError("training dataset has no targets")
    if train.n == 0:
        raise ValueError("training dataset is empty")
    if config.k > train.n:
        raise ValueError(f"k={config.k} exceeds training size {train.n}")
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    X = train.points
    targets = np.asarray(train.targets, dtype=np.float64)
    dist_sq = (
        np.einsum("ij,ij->i", queries, queries)[:, None]
        - 2.0 * queries @ X.T
        + np.einsum("ij,ij->i", X, X)[None, :]
    )
    np.maximum(dist_sq, 0.0, out=dist_sq)
    order = np.argsort(dist_sq, axis=1, kind="stable")[:, :config.k]
    out = np.empty(queries.shape[0])
    for i in range(queries.shape[0]):
        idx = order[i]
        d_sq = dist_sq[i, idx]
        h_sq = d_sq[-1]
        if h_sq == 0.0:
            out[i] = targets[idx].mean()
        else:
            w = np.exp(-d_sq / h_sq)
            out[i] = (w @ targets[idx]) / w.sum()
    return out


def rmse(predictions, targets) -> float:
    predictions = np.asarray(predictions, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if predictions.shape != targets.shape or predictions.size == 0:
        raise ValueError("predictions and targets must be nonempty and aligned")
    diff = predictions - targets
    return float(np.sqrt(np.mean(diff * diff)))


def error_rate(predictions, labels) -> float:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape or predictions.size == 0:
        raise ValueError("predictions and labels must be nonempty and aligned")
    return float(np.mean(predictions != labels))
