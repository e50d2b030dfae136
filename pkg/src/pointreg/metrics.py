"""Point-cloud quality metrics: accuracy, completeness, and their average.

Accuracy measures unsquared Euclidean distances from predicted points to
their nearest ground-truth points; completeness is the same in the opposite
direction; overall is the arithmetic mean of the two, reported both as means
and medians. Note these are plain distances, unlike the squared-distance
training loss. No observability masking or outlier capping is applied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyCloudError
from .geometry import PointCloud
from .spatial import SpatialIndex

__all__ = ["CloudMetrics", "evaluate"]


@dataclass(frozen=True)
class CloudMetrics:
    acc_mean: float
    acc_median: float
    comp_mean: float
    comp_median: float
    overall_mean: float
    overall_median: float

    def as_dict(self) -> dict[str, float]:
        return {
            "acc_mean": self.acc_mean,
            "acc_median": self.acc_median,
            "comp_mean": self.comp_mean,
            "comp_median": self.comp_median,
            "overall_mean": self.overall_mean,
            "overall_median": self.overall_median,
        }


def _nn_distances(queries: PointCloud, reference: PointCloud, leaf_size: int, workers: int) -> np.ndarray:
    index = SpatialIndex(reference, leaf_size)
    _, d2 = index.query(queries.valid_points(), workers=workers)
    return np.sqrt(d2)


def evaluate(
    pred: PointCloud,
    gt: PointCloud,
    leaf_size: int = 16,
    workers: int = 1,
) -> CloudMetrics:
    """Accuracy/completeness/overall statistics between two clouds.

    The median of an even-length distance list is the mean of its two
    central values (numpy convention).
    """
    if pred.n_valid == 0 or gt.n_valid == 0:
        raise EmptyCloudError("both clouds need at least one valid point")
    d_pred_to_gt = _nn_distances(pred, gt, leaf_size, workers)
    d_gt_to_pred = _nn_distances(gt, pred, leaf_size, workers)
    acc_mean = float(np.mean(d_pred_to_gt))
    acc_median = float(np.median(d_pred_to_gt))
    comp_mean = float(np.mean(d_gt_to_pred))
    comp_median = float(np.median(d_gt_to_pred))
    return CloudMetrics(
        acc_mean=acc_mean,
        acc_median=acc_median,
        comp_mean=comp_mean,
        comp_median=comp_median,
        overall_mean=(acc_mean + comp_mean) / 2.0,
        overall_median=(acc_median + comp_median) / 2.0,
    )
