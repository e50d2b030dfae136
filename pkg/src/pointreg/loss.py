"""Geometric training losses over predicted point clouds.

The main kernel is a single-directional Chamfer loss: for each valid
predicted point, the squared distance to its exact nearest neighbor in a
reference cloud, averaged over valid predicted points. Its analytic gradient
holds the nearest-neighbor assignment fixed (a subgradient at ties), which is
exact wherever assignments are locally stable. A pixel-paired one-to-one loss
is provided as the ablation baseline, plus a helper that chains per-point
gradients back to per-pixel depth gradients through the unprojection rays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .alignment import umeyama
from .camera import CameraModel, DepthMap, pixel_rays
from .errors import (
    EmptyPredictionError,
    LengthMismatchError,
    NoValidPairsError,
    ProvenanceMismatchError,
)
from .geometry import PointCloud, SimilarityTransform, apply_transform, _frozen
from .spatial import SpatialIndex

__all__ = [
    "LossValue",
    "LossWeights",
    "chamfer_sd",
    "one_to_one_loss",
    "pm_loss",
    "total_loss",
    "chain_to_depth",
]


@dataclass(frozen=True)
class LossValue:
    """A scalar loss plus its per-point gradient.

    grad has one row per predicted cloud entry (zeros for invalid entries),
    so it can be chained through whatever produced the cloud.
    """

    value: float
    grad: np.ndarray

    def __post_init__(self):
        value = float(self.value)
        grad = np.asarray(self.grad, dtype=np.float64)
        if not np.isfinite(value) or value < 0.0:
            raise ValueError(f"loss value must be finite and nonnegative, got {value}")
        if grad.ndim != 2 or grad.shape[1] != 3 or not np.all(np.isfinite(grad)):
            raise ValueError("grad must be a finite (N, 3) array")
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "grad", _frozen(grad))


@dataclass(frozen=True)
class LossWeights:
    """Weights for combining the render term with the geometric term."""

    lambda_pm: float = 0.005
    lambda_render: float = 1.0

    def __post_init__(self):
        if self.lambda_pm < 0.0 or self.lambda_render < 0.0:
            raise ValueError("loss weights must be nonnegative")


def chamfer_sd(pred: PointCloud, ref_index: SpatialIndex, workers: int = 1) -> LossValue:
    """Single-directional Chamfer loss from pred into the indexed reference.

    value = mean over valid predicted points of the squared distance to the
    exact nearest reference point; grad rows are 2 (p - nn(p)) / n_valid with
    the assignment held fixed. Deliberately not symmetrized: reference points
    far from every prediction contribute nothing.
    """
    vidx = pred.valid_indices()
    if len(vidx) == 0:
        raise EmptyPredictionError("predicted cloud has no valid points")
    q = pred.points[vidx]
    nn_idx, d2 = ref_index.query(q, workers=workers)
    n = len(vidx)
    value = float(np.sum(d2)) / n
    grad = np.zeros((len(pred), 3))
    grad[vidx] = (2.0 / n) * (q - ref_index.reference.points[nn_idx])
    return LossValue(value, grad)


def one_to_one_loss(pred: PointCloud, ref_aligned: PointCloud) -> LossValue:
    """Pixel-paired squared-distance loss (the 2D-style ablation baseline).

    Pairs entries by index, so it trusts the pixel correspondence instead of
    re-deriving neighbors in 3D. Only jointly valid pairs contribute.
    """
    if len(pred) != len(ref_aligned):
        raise LengthMismatchError(
            f"pred has {len(pred)} entries, reference has {len(ref_aligned)}"
        )
    mask = pred.valid & ref_aligned.valid
    n = int(np.count_nonzero(mask))
    if n == 0:
        raise NoValidPairsError("no jointly valid pairs")
    diff = pred.points[mask] - ref_aligned.points[mask]
    value = float(np.sum(np.einsum("ij,ij->i", diff, diff))) / n
    grad = np.zeros((len(pred), 3))
    grad[mask] = (2.0 / n) * diff
    return LossValue(value, grad)


def pm_loss(
    pred: PointCloud,
    pointmap: PointCloud,
    leaf_size: int = 16,
    workers: int = 1,
) -> tuple[LossValue, SimilarityTransform]:
    """Align the pointmap onto pred, then take the Chamfer loss against it.

    The similarity transform comes from the closed-form fit over the
    index-paired (jointly valid) entries, is applied to every valid pointmap
    entry, and is treated as a constant with respect to pred: the gradient is
    a fixed-target regression per evaluation. Returns the loss and the
    transform that was applied.
    """
    align = umeyama(pointmap, pred)
    aligned = apply_transform(align.transform, pointmap)
    index = SpatialIndex(aligned, leaf_size)
    return chamfer_sd(pred, index, workers=workers), align.transform


def total_loss(
    render_term: float,
    render_grad: np.ndarray,
    pm: LossValue,
    weights: LossWeights,
) -> LossValue:
    """Linear combination of an opaque render term and the geometric term."""
    render_grad = np.asarray(render_grad, dtype=np.float64)
    if render_grad.shape != pm.grad.shape:
        raise LengthMismatchError(
            f"render grad shape {render_grad.shape} != pm grad shape {pm.grad.shape}"
        )
    if not (np.isfinite(render_term) and np.all(np.isfinite(render_grad))):
        raise ValueError("render term and gradient must be finite")
    value = weights.lambda_render * float(render_term) + weights.lambda_pm * pm.value
    grad = weights.lambda_render * render_grad + weights.lambda_pm * pm.grad
    return LossValue(value, grad)


def chain_to_depth(loss, depth: DepthMap, cam: CameraModel) -> np.ndarray:
    """Chain a per-point gradient back to a per-pixel depth gradient.

    The unprojected point for pixel (u, v) is ray(u, v) * d + t with
    ray = R K^-1 (u, v, 1)^T, so dL/dd(u, v) = <grad_point, ray(u, v)>.
    Accepts a LossValue or a raw (H*W, 3) gradient slice whose rows are in
    row-major pixel order for this view. Invalid pixels get zero gradient.
    """
    grad = getattr(loss, "grad", loss)
    grad = np.asarray(grad, dtype=np.float64)
    n_px = cam.width * cam.height
    if grad.shape != (n_px, 3):
        raise ProvenanceMismatchError(
            f"gradient has shape {grad.shape}, expected ({n_px}, 3) for "
            f"{cam.width}x{cam.height}"
        )
    if (depth.height, depth.width) != (cam.height, cam.width):
        raise ProvenanceMismatchError("depth dimensions do not match camera")
    rays = pixel_rays(cam)
    out = np.einsum("ij,ij->i", grad, rays).reshape(cam.height, cam.width)
    out[~depth.valid] = 0.0
    return out
