"""Point-cloud geometry toolkit.

Depth-map unprojection, closed-form similarity alignment, exact
nearest-neighbor Chamfer losses with analytic gradients, cloud quality
metrics, and a deterministic synthetic-scene harness with a toy depth
optimizer, plus file I/O (PLY, PFM, camera text) and a CLI.
"""

from .alignment import AlignmentResult, icp, umeyama
from .camera import (
    CameraModel,
    DepthMap,
    PixelProvenance,
    aggregate_views,
    project_points,
    unproject,
)
from .geometry import (
    PointCloud,
    SimilarityTransform,
    apply_transform,
    compose,
    random_rotation,
    rotation_about_axis,
    svd3,
)
from .io_formats import (
    read_camera,
    read_pfm,
    read_ply,
    write_camera,
    write_pfm,
    write_ply,
)
from .loss import (
    LossValue,
    LossWeights,
    chain_to_depth,
    chamfer_sd,
    one_to_one_loss,
    pm_loss,
    total_loss,
)
from .metrics import CloudMetrics, evaluate
from .spatial import SpatialIndex, build_index
from .synthetic import (
    MisalignBounds,
    SceneBundle,
    SceneSpec,
    TraceRow,
    generate,
    run_toy_optimization,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentResult",
    "CameraModel",
    "CloudMetrics",
    "DepthMap",
    "LossValue",
    "LossWeights",
    "MisalignBounds",
    "PixelProvenance",
    "PointCloud",
    "SceneBundle",
    "SceneSpec",
    "SimilarityTransform",
    "SpatialIndex",
    "TraceRow",
    "aggregate_views",
    "apply_transform",
    "build_index",
    "chain_to_depth",
    "chamfer_sd",
    "compose",
    "evaluate",
    "generate",
    "icp",
    "one_to_one_loss",
    "pm_loss",
    "project_points",
    "random_rotation",
    "read_camera",
    "read_pfm",
    "read_ply",
    "rotation_about_axis",
    "run_toy_optimization",
    "svd3",
    "total_loss",
    "umeyama",
    "unproject",
    "write_camera",
    "write_pfm",
    "write_ply",
]
