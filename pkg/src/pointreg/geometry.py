"""Core geometric value types: point clouds and similarity transforms.

All scalar computation is float64. Points are plain numpy arrays: a point is
shape (3,), a rotation is a row-major (3, 3) matrix. Containers are immutable
after construction (their arrays are frozen), so they can be shared freely
across threads and processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PointCloud",
    "SimilarityTransform",
    "apply_transform",
    "compose",
    "svd3",
    "rotation_about_axis",
    "random_rotation",
]

ORTHONORMALITY_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.float64, copy=True, order="C")
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class PointCloud:
    """An ordered set of 3D points with a per-point validity mask.

    Ordering is significant: entry k of a cloud unprojected from an image
    corresponds to pixel k in row-major order, and invalid entries are kept
    in place (never compacted) so that index arithmetic survives every
    pipeline stage. Points flagged valid must be finite; invalid entries may
    hold arbitrary values.
    """

    points: np.ndarray
    valid: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must have shape (N, 3), got {pts.shape}")
        if self.valid is None:
            mask = np.ones(len(pts), dtype=bool)
        else:
            mask = np.asarray(self.valid, dtype=bool)
        if mask.shape != (len(pts),):
            raise ValueError(
                f"valid mask has shape {mask.shape}, expected ({len(pts)},)"
            )
        if not np.all(np.isfinite(pts[mask])):
            raise ValueError("valid points must be finite")
        pts = _frozen(pts)
        mask = np.array(mask, copy=True)
        mask.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "valid", mask)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def n_valid(self) -> int:
        return int(np.count_nonzero(self.valid))

    def valid_points(self) -> np.ndarray:
        """The (K, 3) array of valid points, in original order."""
        return self.points[self.valid]

    def valid_indices(self) -> np.ndarray:
        """Original indices of the valid entries."""
        return np.flatnonzero(self.valid)


@dataclass(frozen=True)
class SimilarityTransform:
    """A map p -> scale * rotation @ p + translation with scale > 0.

    The rotation must be proper (orthonormal, det +1) to within 1e-12;
    violating inputs are rejected at construction, so downstream code never
    has to re-validate.
    """

    scale: float = 1.0
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        s = float(self.scale)
        R = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64)
        if not np.isfinite(s) or s <= 0.0:
            raise ValueError(f"scale must be positive and finite, got {s}")
        if R.shape != (3, 3) or not np.all(np.isfinite(R)):
            raise ValueError("rotation must be a finite 3x3 matrix")
        if t.shape != (3,) or not np.all(np.isfinite(t)):
            raise ValueError("translation must be a finite 3-vector")
        if np.max(np.abs(R.T @ R - np.eye(3))) > ORTHONORMALITY_TOL:
            raise ValueError("rotation is not orthonormal within 1e-12")
        if abs(np.linalg.det(R) - 1.0) > ORTHONORMALITY_TOL:
            raise ValueError("rotation must have determinant +1 within 1e-12")
        object.__setattr__(self, "scale", s)
        object.__setattr__(self, "rotation", _frozen(R))
        object.__setattr__(self, "translation", _frozen(t))

    @classmethod
    def identity(cls) -> "SimilarityTransform":
        return cls(1.0, np.eye(3), np.zeros(3))

    def inverse(self) -> "SimilarityTransform":
        inv_s = 1.0 / self.scale
        inv_R = self.rotation.T
        return SimilarityTransform(inv_s, inv_R, -inv_s * (inv_R @ self.translation))

    def apply_to_points(self, points: np.ndarray) -> np.ndarray:
        """Apply to a raw (N, 3) array, returning a new array."""
        points = np.asarray(points, dtype=np.float64)
        return self.scale * (points @ self.rotation.T) + self.translation


def apply_transform(transform: SimilarityTransform, cloud: PointCloud) -> PointCloud:
    """Transform every valid point of a cloud; invalid entries pass through.

    Length and validity mask are preserved exactly, keeping index <-> pixel
    provenance intact.
    """
    out = np.array(cloud.points, copy=True)
    mask = cloud.valid
    out[mask] = transform.apply_to_points(cloud.points[mask])
    return PointCloud(out, mask)


def compose(second: SimilarityTransform, first: SimilarityTransform) -> SimilarityTransform:
    """The transform that applies `first`, then `second`."""
    s = second.scale * first.scale
    R = second.rotation @ first.rotation
    t = second.scale * (second.rotation @ first.translation) + second.translation
    return SimilarityTransform(s, R, t)


def svd3(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Singular value decomposition of a 3x3 matrix.

    Returns (U, sigma, V) with matrix = U @ diag(sigma) @ V.T, singular
    values sorted descending and nonnegative, U and V orthogonal.
    """
    M = np.asarray(matrix, dtype=np.float64)
    if M.shape != (3, 3) or not np.all(np.isfinite(M)):
        raise ValueError("svd3 expects a finite 3x3 matrix")
    U, sigma, Vt = np.linalg.svd(M)
    return U, sigma, Vt.T


def rotation_about_axis(axis: np.ndarray, angle_rad: float) -> np.ndarray:
    """Rodrigues rotation matrix about a (not necessarily unit) axis."""
    axis = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(axis)
    if n == 0.0:
        raise ValueError("rotation axis must be nonzero")
    x, y, z = axis / n
    K = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + np.sin(angle_rad) * K + (1.0 - np.cos(angle_rad)) * (K @ K)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniformly distributed proper rotation, drawn from a unit quaternion."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )
