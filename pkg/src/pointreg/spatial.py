"""Exact nearest-neighbor queries over a fixed reference cloud.

Backed by a balanced KD-tree (scipy's cKDTree). Queries are exact, return
squared Euclidean distances recomputed in a fixed float64 order, and break
exact distance ties by the lowest original cloud index, so results are
reproducible bit-for-bit regardless of worker count.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyReferenceError
from .geometry import PointCloud

__all__ = ["SpatialIndex", "build_index"]

# Second-neighbor distances within this relative band trigger the exact
# tie-resolution path; for continuous data this essentially never fires.
_TIE_BAND = 1e-9


class SpatialIndex:
    """Immutable exact-NN index over the valid points of a reference cloud.

    Returned indices refer to the reference cloud's original indexing
    (invalid entries keep their slots but are never returned).
    """

    def __init__(self, reference: PointCloud, leaf_size: int = 16):
        if leaf_size < 1:
            raise ValueError("leaf_size must be a positive integer")
        orig = reference.valid_indices()
        if len(orig) == 0:
            raise EmptyReferenceError("reference cloud has no valid points")
        self.reference = reference
        self.leaf_size = int(leaf_size)
        self._orig = orig
        self._pts = reference.points[orig]
        self._tree = cKDTree(self._pts, leafsize=leaf_size)

    def __len__(self) -> int:
        return len(self._pts)

    def nearest(self, point) -> tuple[int, float]:
        """Nearest reference entry to one query point.

        Returns (original index, squared distance); ties go to the lowest
        original index.
        """
        q = np.asarray(point, dtype=np.float64).reshape(1, 3)
        if not np.all(np.isfinite(q)):
            raise ValueError("query point must be finite")
        idx, d2 = self.query(q)
        return int(idx[0]), float(d2[0])

    def query(self, points: np.ndarray, workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """Exact nearest neighbors for an (M, 3) batch of query points.

        Returns (original indices, squared distances). Output is identical
        for any `workers` value (each query is independent); squared
        distances are recomputed as sum((q - p)**2) in float64 so they match
        a brute-force scan bitwise.
        """
        q = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if len(q) == 0:
            return np.empty(0, dtype=np.int64), np.empty(0)
        k = 2 if len(self._pts) >= 2 else 1
        dist, local = self._tree.query(q, k=k, workers=workers)
        if k == 1:
            dist = dist[:, None]
            local = local[:, None]
        near = local[:, 0].astype(np.int64)

        if k == 2:
            # Near-equal first and second neighbors: resolve exactly.
            suspect = np.flatnonzero(dist[:, 1] - dist[:, 0] <= _TIE_BAND * (1.0 + dist[:, 0]))
            for row in suspect:
                radius = dist[row, 0] * (1.0 + _TIE_BAND)
                cands = np.sort(self._tree.query_ball_point(q[row], radius))
                diffs = self._pts[cands] - q[row]
                cd2 = np.einsum("ij,ij->i", diffs, diffs)
                near[row] = cands[np.argmin(cd2)]  # argmin returns first (lowest) on ties

        diff = q - self._pts[near]
        d2 = np.einsum("ij,ij->i", diff, diff)
        return self._orig[near], d2


def build_index(reference: PointCloud, leaf_size: int = 16) -> SpatialIndex:
    """Build an exact-NN index over the valid points of `reference`."""
    return SpatialIndex(reference, leaf_size)
