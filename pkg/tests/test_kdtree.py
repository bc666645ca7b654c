import numpy as np
import pytest

from sphereguide.kdtree import KdTree, brute_nearest
from sphereguide.rng import substream


def test_single_point():
    tree = KdTree(np.array([[1.0, 2.0, 3.0]]))
    idx, dist = tree.query(np.array([1.0, 2.0, 4.0]))
    assert idx == 0
    assert dist == pytest.approx(1.0)


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        KdTree(np.empty((0, 3)))
    with pytest.raises(ValueError):
        KdTree(np.ones(5))
    with pytest.raises(ValueError):
        KdTree(np.ones((4, 3)), leaf_size=0)


def test_matches_brute_force():
    rng = substream(61, "fuzz")
    for d in (1, 2, 6, 16):
        pts = rng.standard_normal((400, d))
        tree = KdTree(pts, leaf_size=4)
        for _ in range(150):
            x = rng.standard_normal(d) * rng.uniform(0.1, 3.0)
            assert tree.query(x) == brute_nearest(pts, x)


def test_exact_on_grid_with_ties():
    # duplicate points and queries equidistant to several: lowest index wins
    base = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    pts = np.vstack([base, base, base])  # every point triplicated
    tree = KdTree(pts, leaf_size=2)
    idx, dist = tree.query(np.array([0.5, 0.5]))
    assert idx == 0
    assert dist == pytest.approx(np.sqrt(0.5))
    idx, dist = tree.query(np.array([1.0, 1.0]))
    assert idx == 3
    assert dist == 0.0


def test_tie_break_matches_brute_force():
    rng = substream(61, "ties")
    # coarse lattice points make exact ties common
    pts = rng.integers(0, 3, size=(300, 3)).astype(float)
    tree = KdTree(pts, leaf_size=8)
    for _ in range(200):
        x = rng.integers(0, 3, size=3).astype(float)
        assert tree.query(x) == brute_nearest(pts, x)
    for _ in range(100):
        x = rng.integers(0, 6, size=3) * 0.5
        assert tree.query(x) == brute_nearest(pts, x)


def test_query_point_in_set():
    rng = substream(61, "member")
    pts = rng.standard_normal((250, 4))
    tree = KdTree(pts)
    for i in range(0, 250, 17):
        idx, dist = tree.query(pts[i])
        assert idx == i
        assert dist == 0.0


def test_leaf_size_irrelevant():
    rng = substream(61, "leaves")
    pts = rng.standard_normal((200, 3))
    trees = [KdTree(pts, leaf_size=k) for k in (1, 2, 7, 64, 500)]
    for _ in range(60):
        x = rng.standard_normal(3)
        results = {t.query(x) for t in trees}
        assert len(results) == 1
