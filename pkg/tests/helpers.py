"""Independent oracles shared by the test modules.

Nothing here may call into the solver paths it is used to check.
"""

import numpy as np


def dense_grid_minimum(objective, n_vars, lo=-2.0, hi=2.0, final_step=1e-4):
    """Multilevel dense grid search for the minimum of a convex objective.

    Each level evaluates a full dense grid (21 points per axis) over the
    current box, then recenters a box of +-2 old steps on the incumbent
    and shrinks the step x5 until it is at or below final_step.  The
    objective must accept an (n_points, n_vars) array and return a
    vector of values.
    """
    center = np.full(n_vars, (lo + hi) / 2.0)
    half = (hi - lo) / 2.0
    step = half / 10.0
    best_point = center.copy()
    best_value = np.inf
    while True:
        axes = [center[i] + step * np.arange(-10, 11) for i in range(n_vars)]
        mesh = np.meshgrid(*axes, indexing="ij")
        points = np.stack([m.ravel() for m in mesh], axis=1)
        values = objective(points)
        k = int(np.argmin(values))
        if values[k] < best_value:
            best_value = float(values[k])
            best_point = points[k].copy()
        if step <= final_step:
            return best_value, best_point
        center = best_point
        step /= 5.0


def golden_section_minimum(f, lo, hi, tol=1e-12):
    """Golden-section search for a scalar unimodal function."""
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def weighted_l1_objective_batch(x, anchors, weights):
    """Vectorized encoder objective for grid search oracles."""
    def objective(points):
        residual = x[None, :] - points @ anchors
        return 0.5 * np.einsum("ij,ij->i", residual, residual) \
            + np.abs(points) @ weights
    return objective


def random_encoder_instance(rng, d_max=4, c_max=4):
    """Random small encoding problem (anchors scaled to keep the optimum
    inside the grid-search box)."""
    d = int(rng.integers(1, d_max + 1))
    size = int(rng.integers(1, c_max + 1))
    anchors = rng.standard_normal((size, d)) / np.sqrt(d)
    x = rng.standard_normal(d)
    return x, anchors
