"""
Exact Local Outlier Factor.

    k-distance(p)       distance to the k-th nearest other point
    N_k(p)              all other points within k-distance(p) (ties included,
                        so |N_k(p)| can exceed k)
    reach-dist(p, o)    max(k-distance(o), d(p, o))
    lrd(p)              1 / mean over o in N_k(p) of reach-dist(p, o)
    LOF(p)              mean over o in N_k(p) of lrd(o) / lrd(p)

When every reach distance of p is 0 (p sits on duplicates) lrd(p) is +inf;
a ratio of two infinite densities counts as 1, so mutual duplicates score 1.

Neighbours come from the full pairwise distance matrix; class clouds are
capped well below the size where that matters.
"""

import numpy as np
from scipy.spatial.distance import cdist

from src.utils.validators import ArgumentError, ShapeError


def k_distances(distances: np.ndarray, k: int) -> np.ndarray:
    """k-th smallest entry per row; the diagonal must already be excluded (inf)."""
    return np.partition(distances, k - 1, axis=1)[:, k - 1]


def local_reachability_density(distances: np.ndarray, k: int) -> np.ndarray:
    """lrd per point from a pairwise distance matrix with an infinite diagonal."""
    kdist = k_distances(distances, k)
    neighbours = distances <= kdist[:, None]
    reach = np.maximum(kdist[None, :], distances)
    mean_reach = np.where(neighbours, reach, 0.0).sum(axis=1) / neighbours.sum(axis=1)
    with np.errstate(divide="ignore"):
        return np.where(mean_reach > 0.0, 1.0 / mean_reach, np.inf)


def lof_scores(points, k: int) -> np.ndarray:
    """
    LOF score of every point against the others.

    Args:
        points: (n, d) feature vectors
        k: Neighbour count (MinPts), at least 1

    Returns:
        (n,) scores; about 1 for inliers, well above 1 for outliers

    Raises:
        ArgumentError: k < 1 or fewer than k + 1 points

    Example:
        >>> lof_scores([[0, 0], [0, 1], [1, 0], [1, 1]], k=2)
        array([1., 1., 1., 1.])
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"points must be a 2-D matrix, got {x.ndim}-D")
    if k < 1:
        raise ArgumentError(f"k must be at least 1, got {k}")
    n = x.shape[0]
    if n < k + 1:
        raise ArgumentError(f"LOF with k={k} needs at least {k + 1} points, got {n}")

    distances = cdist(x, x, metric="euclidean")
    np.fill_diagonal(distances, np.inf)
    kdist = k_distances(distances, k)
    neighbours = distances <= kdist[:, None]
    lrd = local_reachability_density(distances, k)

    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = lrd[None, :] / lrd[:, None]
    both_infinite = np.isinf(lrd)[None, :] & np.isinf(lrd)[:, None]
    ratio = np.where(both_infinite, 1.0, ratio)
    return np.where(neighbours, ratio, 0.0).sum(axis=1) / neighbours.sum(axis=1)
