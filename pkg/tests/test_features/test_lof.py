import math

import numpy as np
import pytest

from src.features.lof import lof_scores
from src.utils.validators import ArgumentError, ShapeError


def brute_force_lof(points, k):
    """Definition-by-definition LOF with plain loops."""
    pts = [tuple(p) for p in np.asarray(points, dtype=float)]
    n = len(pts)
    dist = [[math.dist(pts[i], pts[j]) for j in range(n)] for i in range(n)]
    kdist, hood = [], []
    for i in range(n):
        others = sorted(dist[i][j] for j in range(n) if j != i)
        kd = others[k - 1]
        kdist.append(kd)
        hood.append([j for j in range(n) if j != i and dist[i][j] <= kd])
    lrd = []
    for i in range(n):
        total = sum(max(kdist[o], dist[i][o]) for o in hood[i])
        mean = total / len(hood[i])
        lrd.append(math.inf if mean == 0 else 1.0 / mean)
    scores = []
    for i in range(n):
        ratios = []
        for o in hood[i]:
            if math.isinf(lrd[o]) and math.isinf(lrd[i]):
                ratios.append(1.0)
            else:
                ratios.append(lrd[o] / lrd[i])
        scores.append(sum(ratios) / len(ratios))
    return np.array(scores)


def _lattice(nx=5, ny=4, spacing=1.0):
    return np.array([[x * spacing, y * spacing] for x in range(nx) for y in range(ny)], dtype=float)


def test_unit_square_corners_score_one():
    scores = lof_scores([[0, 0], [0, 1], [1, 0], [1, 1]], k=2)
    assert np.array_equal(scores, np.ones(4))


def test_identical_points_score_one():
    scores = lof_scores(np.full((6, 3), 2.5), k=3)
    assert np.array_equal(scores, np.ones(6))


def test_far_point_stands_out_from_tight_cluster():
    cluster = _lattice(spacing=0.5)
    points = np.vstack([cluster, [[1.0, 15.0]]])
    scores = lof_scores(points, k=5)
    assert scores[-1] > 2.0
    assert np.all(scores[:-1] < 1.3)


def test_gaussian_outlier_scores_above_two():
    rng = np.random.default_rng(3)
    points = np.vstack([rng.normal(size=(20, 2)), [[10.0, 0.0]]])
    assert lof_scores(points, k=5)[-1] > 2.0


def test_ties_at_k_distance_are_all_neighbours():
    """On a lattice the k-th distance is shared by several points; all count."""
    points = _lattice()
    np.testing.assert_allclose(lof_scores(points, k=5), brute_force_lof(points, 5), rtol=1e-12)


@pytest.mark.parametrize("seed", range(100))
def test_matches_brute_force_oracle(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.choice([2, 5, 10, 20]))
    n = int(rng.integers(k + 1, 301 if seed % 10 == 0 else 81))
    dim = int(rng.integers(1, 6))
    points = rng.normal(size=(n, dim)) * rng.uniform(0.1, 10.0)
    if seed % 7 == 0:
        points[: n // 4] = points[0]
    expected = brute_force_lof(points, k)
    actual = lof_scores(points, k)
    assert np.array_equal(np.isinf(actual), np.isinf(expected))
    finite = np.isfinite(expected)
    np.testing.assert_allclose(actual[finite], expected[finite], rtol=1e-9, atol=1e-9)


def test_scores_are_invariant_to_translation_scaling_and_order():
    rng = np.random.default_rng(8)
    points = rng.normal(size=(40, 3))
    base = lof_scores(points, k=5)
    np.testing.assert_allclose(lof_scores(points * 7.5 + 3.0, k=5), base, rtol=1e-9)
    perm = rng.permutation(40)
    np.testing.assert_allclose(lof_scores(points[perm], k=5), base[perm], rtol=1e-12)


def test_too_few_points():
    with pytest.raises(ArgumentError):
        lof_scores(np.zeros((3, 2)), k=3)


def test_k_must_be_positive():
    with pytest.raises(ArgumentError):
        lof_scores(np.zeros((3, 2)), k=0)


def test_points_must_be_a_matrix():
    with pytest.raises(ShapeError):
        lof_scores(np.zeros(5), k=1)


@pytest.mark.parametrize("seed, k", [(0, 5), (1, 10), (2, 20)])
def test_agrees_with_sklearn_on_tie_free_data(seed, k):
    from sklearn.neighbors import LocalOutlierFactor

    points = np.random.default_rng(seed).normal(size=(80, 3))
    reference = LocalOutlierFactor(n_neighbors=k, algorithm="brute").fit(points)
    np.testing.assert_allclose(lof_scores(points, k), -reference.negative_outlier_factor_, rtol=1e-6)


def test_rigid_motion_leaves_scores_unchanged():
    rng = np.random.default_rng(21)
    points = rng.normal(size=(40, 5))
    rotation, _ = np.linalg.qr(rng.normal(size=(5, 5)))
    moved = points @ rotation + rng.normal(size=5)
    np.testing.assert_allclose(lof_scores(moved, 6), lof_scores(points, 6), rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("scale", [0.5, 3.0])
def test_uniform_scaling_leaves_scores_unchanged(scale):
    points = np.random.default_rng(8).normal(size=(30, 3))
    np.testing.assert_allclose(lof_scores(scale * points, 4), lof_scores(points, 4), rtol=1e-9, atol=1e-9)
