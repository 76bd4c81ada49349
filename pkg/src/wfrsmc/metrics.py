"""Distances between weighted samples and grid densities."""

from __future__ import annotations

import numpy as np
from scipy.stats import wasserstein_distance

from .core import Ensemble, InvalidArgumentError, normalized_weights


def ensemble_values(e: Ensemble, coord: int = 0):
    """Alive positions along ``coord`` and their normalized weights."""
    w = normalized_weights(e)
    return e.x[e.alive, coord], w[e.alive]


def wasserstein1(e1: Ensemble, e2: Ensemble, coord: int = 0) -> float:
    """1-Wasserstein distance between two weighted 1-D empirical measures."""
    x1, w1 = ensemble_values(e1, coord)
    x2, w2 = ensemble_values(e2, coord)
    return float(wasserstein_distance(x1, x2, w1, w2))


def histogram(x, weights, edges) -> np.ndarray:
    """Bin probabilities; mass outside ``edges`` is dropped, then renormalized."""
    counts, _ = np.histogram(np.asarray(x, dtype=float), bins=edges, weights=weights)
    total = counts.sum()
    if not total > 0:
        raise InvalidArgumentError("no mass falls inside the histogram range")
    return counts / total


def tv_histograms(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise InvalidArgumentError("histograms need the same bins")
    return 0.5 * float(np.sum(np.abs(p - q)))


def tv_ensembles(e1: Ensemble, e2: Ensemble, bins: int = 64, coord: int = 0) -> float:
    """TV distance of 64-bin (default) weighted histograms on a shared range."""
    x1, w1 = ensemble_values(e1, coord)
    x2, w2 = ensemble_values(e2, coord)
    lo = min(x1.min(), x2.min())
    hi = max(x1.max(), x2.max())
    edges = np.linspace(lo, hi, bins + 1)
    return tv_histograms(histogram(x1, w1, edges), histogram(x2, w2, edges))


def tv_ensemble_grid(e: Ensemble, grid, bins: int = 64, coord: int = 0) -> float:
    """TV distance between an ensemble histogram and a grid density binned on the same edges.

    The grid's cell count must be a multiple of ``bins`` so each bin holds
    whole cells.
    """
    if grid.n_cells % bins:
        raise InvalidArgumentError(f"{grid.n_cells} cells do not split evenly into {bins} bins")
    edges = np.linspace(grid.lo, grid.hi, bins + 1)
    x, w = ensemble_values(e, coord)
    grid_mass = grid.values.reshape(bins, -1).sum(axis=1) * grid.dx
    return tv_histograms(histogram(x, w, edges), grid_mass / grid_mass.sum())


def wasserstein1_to_grid(e: Ensemble, grid, coord: int = 0) -> float:
    """1-Wasserstein distance from a weighted ensemble to a grid density (cell centers as atoms)."""
    x, w = ensemble_values(e, coord)
    return float(wasserstein_distance(x, grid.centers, w, grid.values))
