"""Depth maps, camera models, and pixel-to-world unprojection.

A pixel (u, v) with depth d lifts to camera space as d * K^-1 (u, v, 1)^T and
to world space through the camera-to-world pose. Pixel coordinates are the
integer indices themselves, addressed at the pixel center with no half-pixel
offset; depth is z-depth along the optical axis, not ray length. Unprojected
clouds are row-major over pixels (index = v * width + u), and invalid pixels
produce invalid cloud entries in place so indices keep their pixel meaning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, MixedResolutionError
from .geometry import PointCloud, _frozen

__all__ = [
    "CameraModel",
    "DepthMap",
    "PixelProvenance",
    "unproject",
    "project_points",
    "aggregate_views",
]

ROTATION_TOL = 1e-6


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics plus a camera-to-world pose.

    `rotation` and `translation` map camera-frame points into world frame:
    p_world = rotation @ p_cam + translation.
    """

    intrinsics: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        K = np.asarray(self.intrinsics, dtype=np.float64)
        R = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64)
        if K.shape != (3, 3) or not np.all(np.isfinite(K)):
            raise ValueError("intrinsics must be a finite 3x3 matrix")
        if not np.array_equal(K[2], [0.0, 0.0, 1.0]):
            raise ValueError("last intrinsics row must be (0, 0, 1)")
        if K[0, 0] <= 0.0 or K[1, 1] <= 0.0:
            raise ValueError("focal lengths must be positive")
        if R.shape != (3, 3) or not np.all(np.isfinite(R)):
            raise ValueError("rotation must be a finite 3x3 matrix")
        if np.max(np.abs(R.T @ R - np.eye(3))) > ROTATION_TOL:
            raise ValueError("pose rotation is not orthonormal within 1e-6")
        if abs(np.linalg.det(R) - 1.0) > ROTATION_TOL:
            raise ValueError("pose rotation must have determinant +1")
        if t.shape != (3,) or not np.all(np.isfinite(t)):
            raise ValueError("translation must be a finite 3-vector")
        if int(self.width) < 1 or int(self.height) < 1:
            raise ValueError("image dimensions must be positive")
        object.__setattr__(self, "intrinsics", _frozen(K))
        object.__setattr__(self, "rotation", _frozen(R))
        object.__setattr__(self, "translation", _frozen(t))
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel z-depth with a validity mask, top-left origin, row-major.

    Valid entries must be finite and strictly positive; invalid entries may
    carry arbitrary values (readers keep raw sentinel pixels so files can be
    rewritten bit-exactly).
    """

    values: np.ndarray
    valid: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        d = np.asarray(self.values, dtype=np.float64)
        if d.ndim != 2:
            raise ValueError(f"depth must be a 2D array, got shape {d.shape}")
        if self.valid is None:
            mask = np.isfinite(d) & (d > 0.0)
        else:
            mask = np.asarray(self.valid, dtype=bool)
        if mask.shape != d.shape:
            raise ValueError("valid mask shape must match depth shape")
        masked = d[mask]
        if not (np.all(np.isfinite(masked)) and np.all(masked > 0.0)):
            raise ValueError("valid depth values must be finite and > 0")
        d = _frozen(d)
        mask = np.array(mask, copy=True)
        mask.flags.writeable = False
        object.__setattr__(self, "values", d)
        object.__setattr__(self, "valid", mask)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class PixelProvenance:
    """Per-entry (view, u, v) origin of an aggregated cloud's indices."""

    view: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        view = np.asarray(self.view, dtype=np.int64)
        u = np.asarray(self.u, dtype=np.int64)
        v = np.asarray(self.v, dtype=np.int64)
        if not (view.shape == u.shape == v.shape) or view.ndim != 1:
            raise ValueError("provenance arrays must be 1D and equal length")
        for a in (view, u, v):
            a.flags.writeable = False
        object.__setattr__(self, "view", view)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    def __len__(self) -> int:
        return len(self.view)


def pixel_rays(cam: CameraModel) -> np.ndarray:
    """World-frame ray directions R @ K^-1 (u, v, 1)^T for every pixel.

    Returns an (H*W, 3) array in row-major pixel order. A pixel's world point
    is ray * depth + camera translation, which is also the depth-derivative
    of the unprojected point.
    """
    K_inv = np.linalg.inv(cam.intrinsics)
    u = np.arange(cam.width, dtype=np.float64)
    v = np.arange(cam.height, dtype=np.float64)
    uu, vv = np.meshgrid(u, v)  # (H, W) each
    pix = np.stack([uu.ravel(), vv.ravel(), np.ones(cam.width * cam.height)])
    return (cam.rotation @ (K_inv @ pix)).T


def unproject(depth: DepthMap, cam: CameraModel) -> PointCloud:
    """Lift a depth map to a world-space cloud, one entry per pixel.

    Invalid pixels become invalid entries (zero coordinates) rather than
    being dropped, so entry k always corresponds to pixel k row-major.
    """
    if (depth.height, depth.width) != (cam.height, cam.width):
        raise DimensionMismatchError(
            f"depth is {depth.width}x{depth.height}, "
            f"camera expects {cam.width}x{cam.height}"
        )
    rays = pixel_rays(cam)
    d = depth.values.ravel()
    mask = depth.valid.ravel()
    pts = np.zeros((d.size, 3))
    pts[mask] = rays[mask] * d[mask, None] + cam.translation
    return PointCloud(pts, mask)


def project_points(cam: CameraModel, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Project world points back through the camera.

    Returns (u, v, depth) arrays; depth is the camera-frame z coordinate.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    p_cam = (pts - cam.translation) @ cam.rotation
    z = p_cam[:, 2]
    uvw = p_cam @ cam.intrinsics.T
    return uvw[:, 0] / uvw[:, 2], uvw[:, 1] / uvw[:, 2], z


def aggregate_views(
    clouds: "list[PointCloud] | tuple[PointCloud, ...]",
    width: int,
    height: int,
) -> tuple[PointCloud, PixelProvenance]:
    """Concatenate per-view clouds in view order with pixel provenance.

    Every view must have exactly width*height entries; the output has
    n_views * height * width entries regardless of how many are invalid.
    """
    if not clouds:
        raise MixedResolutionError("no views to aggregate")
    n_px = int(width) * int(height)
    for j, c in enumerate(clouds):
        if len(c) != n_px:
            raise MixedResolutionError(
                f"view {j} has {len(c)} entries, expected {n_px} for "
                f"{width}x{height}"
            )
    points = np.concatenate([c.points for c in clouds])
    valid = np.concatenate([c.valid for c in clouds])
    u = np.tile(np.arange(width, dtype=np.int64), height)
    v = np.repeat(np.arange(height, dtype=np.int64), width)
    prov = PixelProvenance(
        view=np.repeat(np.arange(len(clouds), dtype=np.int64), n_px),
        u=np.tile(u, len(clouds)),
        v=np.tile(v, len(clouds)),
    )
    return PointCloud(points, valid), prov
