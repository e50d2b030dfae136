"""Deterministic desk-scale scenes with known geometry and seeded corruptions.

Each scene holds, per view, an exactly piecewise-constant ground-truth depth
map plus a corrupted copy whose values near depth discontinuities are blended
across the boundary (the classic "flying pixel" artifact), with optional iid
noise everywhere. A pseudo-ground-truth pointmap stands in for an external
geometry prior: the ground-truth cloud with optional per-pixel correspondence
jitter, iid point noise, and a seeded global similarity misalignment.

Randomness discipline: everything derives from numpy's PCG64 seeded through
SeedSequence(seed).spawn(); child streams are assigned in a fixed order
(layout, correspondence jitter, pointmap noise, misalignment, then one
corruption stream per view), so identical specs reproduce byte-identical
bundles on any platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .alignment import umeyama
from .camera import CameraModel, DepthMap, aggregate_views, unproject
from .errors import DegeneracyError
from .geometry import (
    PointCloud,
    SimilarityTransform,
    apply_transform,
    rotation_about_axis,
)
from .loss import LossWeights, chain_to_depth, one_to_one_loss, pm_loss
from .metrics import evaluate

__all__ = [
    "MisalignBounds",
    "SceneSpec",
    "SceneBundle",
    "TraceRow",
    "generate",
    "run_toy_optimization",
    "LOSS_KINDS",
]

LOSS_KINDS = ("pm_3d", "one_to_one_2d", "none")


@dataclass(frozen=True)
class MisalignBounds:
    """Sampling bounds for the pointmap's global similarity misalignment.

    Translation is bounded as a fraction of the ground-truth cloud's bounding
    box diagonal. Defaults are large enough to break naive pixel pairing but
    small enough that the closed-form alignment still locks on.
    """

    scale_min: float = 0.9
    scale_max: float = 1.1
    max_rotation_deg: float = 10.0
    max_translation_frac: float = 0.1

    def __post_init__(self):
        if not (0.0 < self.scale_min <= self.scale_max):
            raise ValueError("need 0 < scale_min <= scale_max")
        if self.max_rotation_deg < 0.0 or self.max_translation_frac < 0.0:
            raise ValueError("rotation and translation bounds must be nonnegative")

    @classmethod
    def identity(cls) -> "MisalignBounds":
        return cls(1.0, 1.0, 0.0, 0.0)


@dataclass(frozen=True)
class SceneSpec:
    """Full description of a synthetic scene; equal specs generate equal bundles."""

    seed: int = 0
    width: int = 48
    height: int = 36
    n_views: int = 2
    layout: str = "two_plane"
    d_fg: float = 1.0
    d_bg: float = 3.0
    bleed_px: int = 2
    noise_sigma_depth: float = 0.01
    noise_sigma_pm: float = 0.01
    pm_jitter_px: int = 1
    misalign: MisalignBounds = field(default_factory=MisalignBounds)

    def __post_init__(self):
        if self.layout not in ("two_plane", "boxes"):
            raise ValueError(f"unknown layout {self.layout!r}")
        if not (0.0 < self.d_fg < self.d_bg):
            raise ValueError("need d_bg > d_fg > 0")
        if self.bleed_px < 0 or self.pm_jitter_px < 0:
            raise ValueError("pixel radii must be nonnegative")
        if self.noise_sigma_depth < 0.0 or self.noise_sigma_pm < 0.0:
            raise ValueError("noise sigmas must be nonnegative")
        if self.width < 4 or self.height < 4 or self.n_views < 1:
            raise ValueError("scene must have at least one 4x4 view")


@dataclass(frozen=True)
class SceneBundle:
    """Generated scene: cameras, depths, ground-truth cloud, pseudo pointmap.

    `spec` and `misalign` are None for bundles reloaded from disk.
    """

    cameras: tuple
    gt_depths: tuple
    corrupted_depths: tuple
    gt_cloud: PointCloud
    pseudo_pointmap: PointCloud
    spec: "SceneSpec | None" = None
    misalign: "SimilarityTransform | None" = None

    @property
    def width(self) -> int:
        return self.cameras[0].width

    @property
    def height(self) -> int:
        return self.cameras[0].height


@dataclass(frozen=True)
class TraceRow:
    step: int
    loss: float
    gt_overall: float


def _arc_cameras(spec: SceneSpec) -> tuple:
    """Cameras spread on a horizontal arc, all looking at the world origin."""
    radius = 0.5 * (spec.d_fg + spec.d_bg)
    if spec.n_views == 1:
        angles = np.array([0.0])
    else:
        half = np.deg2rad(15.0)
        angles = np.linspace(-half, half, spec.n_views)
    focal = float(spec.width)
    K = np.array(
        [
            [focal, 0.0, (spec.width - 1) / 2.0],
            [0.0, focal, (spec.height - 1) / 2.0],
            [0.0, 0.0, 1.0],
        ]
    )
    cams = []
    for a in angles:
        center = radius * np.array([np.sin(a), 0.0, -np.cos(a)])
        forward = -center / np.linalg.norm(center)
        right = np.cross([0.0, 1.0, 0.0], forward)
        right /= np.linalg.norm(right)
        down = np.cross(forward, right)
        R = np.column_stack([right, down, forward])
        cams.append(
            CameraModel(
                intrinsics=K,
                rotation=R,
                translation=center,
                width=spec.width,
                height=spec.height,
            )
        )
    return tuple(cams)


def _layout_depth(spec: SceneSpec, view: int, rng: np.random.Generator) -> np.ndarray:
    """Piecewise-constant ground-truth depth for one view."""
    h, w = spec.height, spec.width
    depth = np.full((h, w), spec.d_bg)
    if spec.layout == "two_plane":
        # Foreground rectangle covering roughly the central half, shifted a
        # little per view so the views are not identical billboards.
        du = int(rng.integers(-w // 8, w // 8 + 1))
        dv = int(rng.integers(-h // 8, h // 8 + 1))
        v0, v1 = h // 4 + dv, 3 * h // 4 + dv
        u0, u1 = w // 4 + du, 3 * w // 4 + du
        depth[max(v0, 0):min(v1, h), max(u0, 0):min(u1, w)] = spec.d_fg
    else:  # boxes
        for _ in range(3):
            bw = int(rng.integers(w // 6, w // 3 + 1))
            bh = int(rng.integers(h // 6, h // 3 + 1))
            u0 = int(rng.integers(0, w - bw + 1))
            v0 = int(rng.integers(0, h - bh + 1))
            d = float(rng.uniform(spec.d_fg, spec.d_fg + 0.6 * (spec.d_bg - spec.d_fg)))
            region = depth[v0:v0 + bh, u0:u0 + bw]
            np.minimum(region, d, out=region)
    return depth


def _bleed_band(depth: np.ndarray, bleed_px: int) -> np.ndarray:
    """Pixels within bleed_px of an inter-pixel depth discontinuity."""
    if bleed_px == 0:
        return np.zeros(depth.shape, dtype=bool)
    edges = np.zeros(depth.shape, dtype=bool)
    horiz = depth[:, 1:] != depth[:, :-1]
    edges[:, 1:] |= horiz
    edges[:, :-1] |= horiz
    vert = depth[1:, :] != depth[:-1, :]
    edges[1:, :] |= vert
    edges[:-1, :] |= vert
    if bleed_px > 1:
        size = 2 * (bleed_px - 1) + 1
        edges = ndimage.maximum_filter(edges, size=size, mode="constant")
    return edges


def _corrupt_depth(
    spec: SceneSpec, gt: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    corrupted = gt.copy()
    band = _bleed_band(gt, spec.bleed_px)
    if band.any():
        size = 2 * spec.bleed_px + 1
        blurred = ndimage.uniform_filter(gt, size=size, mode="nearest")
        corrupted[band] = blurred[band]
    if spec.noise_sigma_depth > 0.0:
        corrupted = corrupted + spec.noise_sigma_depth * rng.standard_normal(gt.shape)
    return corrupted


def _jitter_correspondences(
    spec: SceneSpec, points: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Resample each pixel's pointmap entry from a random nearby pixel.

    Models the residual misregistration between a pointmap and the depth
    pixels: the point set stays on the true surfaces, but the per-pixel
    pairing is no longer trustworthy, especially across depth boundaries.
    """
    if spec.pm_jitter_px == 0:
        return points.copy()
    h, w, j = spec.height, spec.width, spec.pm_jitter_px
    n_px = h * w
    u = np.tile(np.arange(w), h)
    v = np.repeat(np.arange(h), w)
    out = np.empty_like(points)
    for view in range(spec.n_views):
        du = rng.integers(-j, j + 1, size=n_px)
        dv = rng.integers(-j, j + 1, size=n_px)
        su = np.clip(u + du, 0, w - 1)
        sv = np.clip(v + dv, 0, h - 1)
        src = view * n_px + sv * w + su
        out[view * n_px:(view + 1) * n_px] = points[src]
    return out


def _sample_misalign(
    bounds: MisalignBounds, diameter: float, rng: np.random.Generator
) -> SimilarityTransform:
    s = float(rng.uniform(bounds.scale_min, bounds.scale_max))
    axis = rng.standard_normal(3)
    axis /= np.linalg.norm(axis)
    angle = float(rng.uniform(0.0, np.deg2rad(bounds.max_rotation_deg)))
    R = rotation_about_axis(axis, angle)
    direction = rng.standard_normal(3)
    direction /= np.linalg.norm(direction)
    t = direction * rng.uniform(0.0, bounds.max_translation_frac * diameter)
    return SimilarityTransform(s, R, t)


def generate(spec: SceneSpec) -> SceneBundle:
    """Deterministically generate the scene described by `spec`."""
    root = np.random.SeedSequence(spec.seed)
    children = root.spawn(4 + spec.n_views)
    rng_layout = np.random.Generator(np.random.PCG64(children[0]))
    rng_jitter = np.random.Generator(np.random.PCG64(children[1]))
    rng_pm = np.random.Generator(np.random.PCG64(children[2]))
    rng_misalign = np.random.Generator(np.random.PCG64(children[3]))
    rng_corrupt = [
        np.random.Generator(np.random.PCG64(c)) for c in children[4:]
    ]

    cameras = _arc_cameras(spec)
    gt_arrays = [_layout_depth(spec, j, rng_layout) for j in range(spec.n_views)]
    gt_depths = tuple(DepthMap(a) for a in gt_arrays)
    corrupted_depths = tuple(
        DepthMap(_corrupt_depth(spec, a, rng_corrupt[j]))
        for j, a in enumerate(gt_arrays)
    )

    gt_cloud, _ = aggregate_views(
        [unproject(d, c) for d, c in zip(gt_depths, cameras)],
        spec.width,
        spec.height,
    )

    pm_points = _jitter_correspondences(spec, gt_cloud.points, rng_jitter)
    if spec.noise_sigma_pm > 0.0:
        pm_points = pm_points + spec.noise_sigma_pm * rng_pm.standard_normal(pm_points.shape)
    extent = gt_cloud.points.max(axis=0) - gt_cloud.points.min(axis=0)
    diameter = float(np.linalg.norm(extent))
    misalign = _sample_misalign(spec.misalign, diameter, rng_misalign)
    pseudo = apply_transform(misalign, PointCloud(pm_points))

    return SceneBundle(
        cameras=cameras,
        gt_depths=gt_depths,
        corrupted_depths=corrupted_depths,
        gt_cloud=gt_cloud,
        pseudo_pointmap=pseudo,
        spec=spec,
        misalign=misalign,
    )


def run_toy_optimization(
    bundle: SceneBundle,
    loss_kind: str,
    steps: int,
    lr: float,
    weights: "LossWeights | None" = None,
    leaf_size: int = 16,
    workers: int = 1,
) -> list[TraceRow]:
    """Gradient descent on per-pixel depth, starting from the corrupted maps.

    The objective is lambda_render * (depth MSE against the corrupted maps,
    anchoring the non-boundary structure) plus lambda_pm * (the chosen
    geometric loss against the pseudo pointmap). Each step records the total
    loss and the overall-mean cloud metric against the ground-truth cloud,
    both evaluated before that step's update. If the alignment inside the
    geometric term degenerates at some step, that term is skipped for the
    step and the anchor alone drives the update.
    """
    if loss_kind not in LOSS_KINDS:
        raise ValueError(f"loss_kind must be one of {LOSS_KINDS}, got {loss_kind!r}")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if lr <= 0.0:
        raise ValueError("lr must be positive")
    weights = weights if weights is not None else LossWeights()

    w, h = bundle.width, bundle.height
    n_px = w * h
    anchors = [d.values for d in bundle.corrupted_depths]
    masks = [d.valid for d in bundle.corrupted_depths]
    depths = [np.array(d.values) for d in bundle.corrupted_depths]
    n_anchor = int(sum(m.sum() for m in masks))

    trace: list[TraceRow] = []
    for step in range(steps):
        dmaps = [DepthMap(d, m) for d, m in zip(depths, masks)]
        clouds = [unproject(dm, c) for dm, c in zip(dmaps, bundle.cameras)]
        pred, _ = aggregate_views(clouds, w, h)

        mse_val = 0.0
        mse_grads = []
        for d, a, m in zip(depths, anchors, masks):
            resid = np.where(m, d - a, 0.0)
            mse_val += float(np.sum(resid * resid))
            mse_grads.append((2.0 / n_anchor) * resid)
        mse_val /= n_anchor

        geom_val = 0.0
        geom_grads = [np.zeros((h, w)) for _ in range(len(depths))]
        if loss_kind != "none":
            try:
                if loss_kind == "pm_3d":
                    lv, _ = pm_loss(
                        pred, bundle.pseudo_pointmap, leaf_size=leaf_size, workers=workers
                    )
                else:
                    align = umeyama(bundle.pseudo_pointmap, pred)
                    aligned = apply_transform(align.transform, bundle.pseudo_pointmap)
                    lv = one_to_one_loss(pred, aligned)
                geom_val = lv.value
                for j in range(len(depths)):
                    view_grad = lv.grad[j * n_px:(j + 1) * n_px]
                    geom_grads[j] = chain_to_depth(view_grad, dmaps[j], bundle.cameras[j])
            except DegeneracyError:
                geom_val = 0.0

        total = weights.lambda_render * mse_val + weights.lambda_pm * geom_val
        overall = evaluate(
            pred, bundle.gt_cloud, leaf_size=leaf_size, workers=workers
        ).overall_mean
        trace.append(TraceRow(step=step, loss=total, gt_overall=overall))

        for j in range(len(depths)):
            g = weights.lambda_render * mse_grads[j] + weights.lambda_pm * geom_grads[j]
            updated = depths[j] - lr * g
            # Depth must stay positive for the next unprojection.
            depths[j] = np.where(masks[j], np.maximum(updated, 1e-6), depths[j])
    return trace
