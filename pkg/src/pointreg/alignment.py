"""Similarity-transform estimation between corresponding point clouds.

`umeyama` is the closed-form least-squares fit of (scale, rotation,
translation) given index-paired clouds; `icp` is the classic iterative
baseline that re-derives correspondences by nearest neighbor each round and
fits the same similarity family, so the two are directly comparable.

All reductions (centroids, cross-covariance, residuals) accumulate partial
sums over fixed-size chunks combined in chunk order, independent of any
thread count, so results are bitwise reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateGeometryError,
    LengthMismatchError,
    NonPositiveScaleError,
    TooFewPairsError,
)
from .geometry import PointCloud, SimilarityTransform, compose, svd3
from .spatial import SpatialIndex

__all__ = ["AlignmentResult", "umeyama", "icp"]

_CHUNK = 65536
# Second singular value below this fraction of the first means the source
# points are (numerically) collinear and the rotation is underdetermined.
_RANK_RTOL = 1e-9


@dataclass(frozen=True)
class AlignmentResult:
    """A fitted transform plus fit diagnostics.

    rms_residual is the root-mean-square distance between transformed source
    and target over the pairs used; used_count is the number of jointly valid
    pairs; iterations is 1 for the closed-form path.
    """

    transform: SimilarityTransform
    rms_residual: float
    used_count: int
    iterations: int


def _chunked_colsum(a: np.ndarray) -> np.ndarray:
    """Column sums via fixed-size chunk partials combined in chunk order."""
    total = np.zeros(a.shape[1:])
    for start in range(0, len(a), _CHUNK):
        total += a[start:start + _CHUNK].sum(axis=0)
    return total


def _chunked_cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Sum of outer products a_i b_i^T, chunked for reproducibility."""
    total = np.zeros((3, 3))
    for start in range(0, len(a), _CHUNK):
        total += np.einsum(
            "ni,nj->ij", a[start:start + _CHUNK], b[start:start + _CHUNK]
        )
    return total


def _fit_similarity(src: np.ndarray, dst: np.ndarray) -> tuple[SimilarityTransform, float]:
    """Closed-form similarity fit of paired (N, 3) arrays src -> dst."""
    n = len(src)
    src_mean = _chunked_colsum(src) / n
    dst_mean = _chunked_colsum(dst) / n
    src_c = src - src_mean
    dst_c = dst - dst_mean

    src_var = float(_chunked_colsum(src_c * src_c).sum()) / n
    cross = _chunked_cross(dst_c, src_c) / n
    U, sigma, V = svd3(cross)
    if sigma[0] <= 0.0 or sigma[1] <= _RANK_RTOL * sigma[0]:
        raise DegenerateGeometryError(
            "cross-covariance rank < 2 (source points are collinear or coincident)"
        )
    d3 = 1.0 if np.linalg.det(U) * np.linalg.det(V) >= 0.0 else -1.0
    R = (U * np.array([1.0, 1.0, d3])) @ V.T
    s = (sigma[0] + sigma[1] + d3 * sigma[2]) / src_var
    if s <= 0.0:
        raise NonPositiveScaleError(f"estimated scale {s} is not positive")
    t = dst_mean - s * (R @ src_mean)

    transform = SimilarityTransform(s, R, t)
    resid = transform.apply_to_points(src) - dst
    rms = float(np.sqrt(_chunked_colsum(resid * resid).sum() / n))
    return transform, rms


def umeyama(source: PointCloud, target: PointCloud) -> AlignmentResult:
    """Closed-form similarity transform mapping source onto target.

    Clouds must be index-paired and equal length; pairs where either entry
    is invalid are excluded from the fit. The returned transform minimizes
    the mean squared error (1/n) * sum ||s R p_k + t - q_k||^2 over the used
    pairs, with the reflection-safe sign correction so the rotation is
    always proper.
    """
    if len(source) != len(target):
        raise LengthMismatchError(
            f"source has {len(source)} entries, target has {len(target)}"
        )
    mask = source.valid & target.valid
    n = int(np.count_nonzero(mask))
    if n < 3:
        raise TooFewPairsError(f"need at least 3 jointly valid pairs, got {n}")
    transform, rms = _fit_similarity(source.points[mask], target.points[mask])
    return AlignmentResult(transform, rms, n, 1)


def icp(
    source: PointCloud,
    target: PointCloud,
    max_iters: int = 50,
    rel_tol: float = 1e-6,
    leaf_size: int = 16,
    workers: int = 1,
) -> AlignmentResult:
    """Similarity ICP: alternate NN matching and closed-form similarity fits.

    Each round matches the currently transformed source points to their
    nearest valid target points, fits an incremental similarity on those
    matches, and composes it onto the running transform. Stops when the
    relative change in RMS residual drops below rel_tol or after max_iters.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if rel_tol < 0.0:
        raise ValueError("rel_tol must be nonnegative")
    src = source.valid_points()
    if len(src) < 3:
        raise TooFewPairsError(f"need at least 3 valid source points, got {len(src)}")
    index = SpatialIndex(target, leaf_size)

    extent = float(np.max(src.max(axis=0) - src.min(axis=0))) if len(src) else 0.0
    abs_floor = 1e-15 * (extent + 1.0)

    transform = SimilarityTransform.identity()
    rms = float("inf")
    prev_rms = None
    iterations = 0
    for _ in range(max_iters):
        moved = transform.apply_to_points(src)
        match_idx, _ = index.query(moved, workers=workers)
        matched = target.points[match_idx]
        step, rms = _fit_similarity(moved, matched)
        transform = compose(step, transform)
        iterations += 1
        if rms <= abs_floor:
            break
        if prev_rms is not None and abs(prev_rms - rms) <= rel_tol * max(prev_rms, abs_floor):
            break
        prev_rms = rms
    return AlignmentResult(transform, rms, len(src), iterations)
