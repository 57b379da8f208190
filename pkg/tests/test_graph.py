import numpy as np
import pytest

from oracles import knn_naive
from vortexseg import _core_py
from vortexseg.graph import BACKEND, KnnGraph, knn_bruteforce, knn_grid


def test_collinear_nearest():
    pts = np.array([[0.0], [1.0], [3.0]])
    g = knn_bruteforce(pts, 1)
    assert g.neighbors.ravel().tolist() == [1, 0, 1]


def test_coincident_points_attract_each_other():
    pts = np.array([[0.0, 0.0], [5.0, 5.0], [0.0, 0.0], [9.0, 0.0]])
    g = knn_bruteforce(pts, 1)
    assert g.neighbors[0, 0] == 2
    assert g.neighbors[2, 0] == 0


def test_matches_naive_oracle(rng):
    pts = rng.normal(size=(64, 3))
    g = knn_bruteforce(pts, 5)
    assert np.array_equal(g.neighbors, knn_naive(pts, 5))


def test_grid_equals_bruteforce_random(rng):
    for trial in range(10):
        n = int(rng.integers(10, 400))
        k = int(rng.integers(1, min(n, 24)))
        pts = rng.uniform(-50, 50, size=(n, 2))
        assert np.array_equal(knn_grid(pts, k).neighbors,
                              knn_bruteforce(pts, k).neighbors)


def test_grid_handles_isolated_point(rng):
    pts = np.vstack([rng.normal(scale=0.5, size=(60, 2)), [[500.0, 500.0]]])
    k = 7
    g = knn_grid(pts, k)
    b = knn_bruteforce(pts, k)
    assert np.array_equal(g.neighbors, b.neighbors)
    assert len(set(g.neighbors[-1].tolist())) == k


def test_grid_equals_bruteforce_on_lattice_ties():
    xx, yy = np.meshgrid(np.arange(9.0), np.arange(9.0))
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    assert np.array_equal(knn_grid(pts, 8).neighbors,
                          knn_bruteforce(pts, 8).neighbors)


def test_permutation_consistency(rng):
    pts = rng.normal(size=(80, 2))
    k = 6
    base = knn_bruteforce(pts, k).neighbors
    perm = rng.permutation(80)
    permuted = knn_bruteforce(pts[perm], k).neighbors
    inverse = np.empty(80, dtype=np.int64)
    inverse[perm] = np.arange(80)
    # neighbor SETS map back exactly (row order inside may differ only on
    # ties, and this cloud has none)
    for new_i, old_i in enumerate(perm):
        assert sorted(perm[permuted[new_i]].tolist()) == sorted(base[old_i].tolist())


def test_rejects_bad_inputs(rng):
    pts = rng.normal(size=(5, 2))
    with pytest.raises(ValueError):
        knn_bruteforce(pts, 5)
    with pytest.raises(ValueError):
        knn_bruteforce(pts, 0)
    with pytest.raises(ValueError):
        knn_grid(rng.normal(size=(5, 3)), 2)
    bad = pts.copy()
    bad[0, 0] = np.nan
    with pytest.raises(ValueError):
        knn_bruteforce(bad, 2)


def test_result_shape_and_type(rng):
    pts = rng.normal(size=(30, 2))
    g = knn_grid(pts, 4)
    assert isinstance(g, KnnGraph)
    assert g.n == 30 and g.k == 4
    assert g.neighbors.shape == (30, 4)
    assert g.neighbors.dtype == np.int32
    assert not np.any(g.neighbors == np.arange(30)[:, None])  # no self loops


@pytest.mark.skipif(BACKEND != "compiled", reason="compiled backend not built")
def test_backends_bit_identical(rng):
    for trial in range(8):
        n = int(rng.integers(20, 600))
        k = int(rng.integers(1, 21))
        d = int(rng.integers(1, 6))
        pts = np.ascontiguousarray(rng.normal(size=(n, d)) * rng.uniform(0.1, 100))
        from vortexseg import _core

        assert np.array_equal(_core.knn_bruteforce(pts, k),
                              _core_py.knn_bruteforce(pts, k))
        if d == 2:
            assert np.array_equal(_core.knn_grid(pts, k),
                                  _core_py.knn_grid(pts, k))
