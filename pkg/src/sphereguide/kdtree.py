"""Exact kd-tree nearest-neighbor search.

Median-split tree over a fixed point set.  Queries return exactly the
brute-force argmin; ties in distance resolve to the lowest point index, so
results are independent of tree layout.
"""
from __future__ import annotations

import numpy as np

_LEAF_SIZE = 32


class _Node:
    __slots__ = ("axis", "thr", "left", "right", "idx")

    def __init__(self, axis=-1, thr=0.0, left=None, right=None, idx=None):
        self.axis = axis
        self.thr = thr
        self.left = left
        self.right = right
        self.idx = idx


class KdTree:
    def __init__(self, points, leaf_size: int = _LEAF_SIZE):
        pts = np.ascontiguousarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("points must be a non-empty (n, d) array")
        if leaf_size < 1:
            raise ValueError("leaf_size must be positive")
        self.points = pts
        self._leaf_size = leaf_size
        self._root = self._build(np.arange(pts.shape[0]), 0)

    def _build(self, idx: np.ndarray, depth: int) -> _Node:
        if idx.size <= self._leaf_size:
            # sorted leaf indices make argmin pick the lowest index on ties
            return _Node(idx=np.sort(idx))
        axis = depth % self.points.shape[1]
        order = idx[np.argsort(self.points[idx, axis], kind="stable")]
        mid = order.size // 2
        thr = float(self.points[order[mid], axis])
        return _Node(axis=axis, thr=thr,
                     left=self._build(order[:mid], depth + 1),
                     right=self._build(order[mid:], depth + 1))

    def query(self, x) -> tuple:
        """(index, distance) of the nearest stored point to ``x``."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.points.shape[1],):
            raise ValueError(f"query shape {x.shape} does not match "
                             f"dimension {self.points.shape[1]}")
        best_d2 = np.inf
        best_i = -1
        stack = [(self._root, 0.0)]
        while stack:
            node, bound = stack.pop()
            if bound > best_d2:
                continue
            if node.idx is not None:
                d2 = ((self.points[node.idx] - x) ** 2).sum(axis=1)
                j = int(np.argmin(d2))
                if d2[j] < best_d2 or (d2[j] == best_d2
                                       and node.idx[j] < best_i):
                    best_d2 = float(d2[j])
                    best_i = int(node.idx[j])
                continue
            delta = x[node.axis] - node.thr
            near, far = ((node.left, node.right) if delta < 0.0
                         else (node.right, node.left))
            # equality included: an equidistant lower index may sit beyond
            if delta * delta <= best_d2:
                stack.append((far, delta * delta))
            stack.append((near, bound))
        return best_i, float(np.sqrt(best_d2))


def brute_nearest(points: np.ndarray, x) -> tuple:
    """Reference linear scan with the same lowest-index tie rule."""
    d2 = ((np.asarray(points, dtype=float) - np.asarray(x, dtype=float)) ** 2).sum(axis=1)
    i = int(np.argmin(d2))
    return i, float(np.sqrt(d2[i]))
