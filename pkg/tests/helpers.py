"""Shared test utilities: brute-force oracles and random fixtures.

The oracles deliberately stay independent of the library's indexed code
paths: plain full scans with the same float64 accumulation order
(sum of squared component differences, left to right), so exact-match
assertions against the indexed implementations are meaningful.
"""

import numpy as np

from pointreg import PointCloud, SimilarityTransform, random_rotation


def brute_nearest(queries: np.ndarray, ref: np.ndarray, chunk: int = 256):
    """Exact NN by full scan; ties go to the lowest reference index."""
    q = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
    r = np.asarray(ref, dtype=np.float64).reshape(-1, 3)
    idx = np.empty(len(q), dtype=np.int64)
    d2 = np.empty(len(q))
    for s in range(0, len(q), chunk):
        e = min(s + chunk, len(q))
        diff = q[s:e, None, :] - r[None, :, :]
        dd = np.einsum("qrj,qrj->qr", diff, diff)
        am = np.argmin(dd, axis=1)  # first occurrence wins ties
        idx[s:e] = am
        d2[s:e] = dd[np.arange(e - s), am]
    return idx, d2


def brute_chamfer(pred: PointCloud, ref: PointCloud):
    """Single-directional Chamfer value/grad by full scan."""
    vidx = pred.valid_indices()
    ref_vidx = ref.valid_indices()
    q = pred.points[vidx]
    r = ref.points[ref_vidx]
    nn_local, d2 = brute_nearest(q, r)
    n = len(vidx)
    value = float(np.sum(d2)) / n
    grad = np.zeros((len(pred), 3))
    grad[vidx] = (2.0 / n) * (q - r[nn_local])
    return value, grad


def brute_metrics(pred: PointCloud, gt: PointCloud) -> dict:
    """Accuracy/completeness statistics by double full scan."""
    _, d2_pg = brute_nearest(pred.valid_points(), gt.valid_points())
    _, d2_gp = brute_nearest(gt.valid_points(), pred.valid_points())
    d_pg = np.sqrt(d2_pg)
    d_gp = np.sqrt(d2_gp)
    acc_mean = float(np.mean(d_pg))
    acc_median = float(np.median(d_pg))
    comp_mean = float(np.mean(d_gp))
    comp_median = float(np.median(d_gp))
    return {
        "acc_mean": acc_mean,
        "acc_median": acc_median,
        "comp_mean": comp_mean,
        "comp_median": comp_median,
        "overall_mean": (acc_mean + comp_mean) / 2.0,
        "overall_median": (acc_median + comp_median) / 2.0,
    }


def random_cloud(rng: np.random.Generator, n: int, scale: float = 1.0) -> PointCloud:
    return PointCloud(scale * rng.standard_normal((n, 3)))


def random_similarity(
    rng: np.random.Generator,
    scale_range: tuple = (0.1, 10.0),
    max_translation: float = 100.0,
) -> SimilarityTransform:
    s = float(rng.uniform(*scale_range))
    R = random_rotation(rng)
    direction = rng.standard_normal(3)
    direction /= np.linalg.norm(direction)
    t = direction * rng.uniform(0.0, max_translation)
    return SimilarityTransform(s, R, t)


def transform_error(recovered: SimilarityTransform, truth: SimilarityTransform) -> float:
    """Worst relative parameter error between two transforms."""
    ds = abs(recovered.scale - truth.scale) / truth.scale
    dR = float(np.max(np.abs(recovered.rotation - truth.rotation)))
    dt = float(
        np.linalg.norm(recovered.translation - truth.translation)
        / max(np.linalg.norm(truth.translation), 1.0)
    )
    return max(ds, dR, dt)


def umeyama_objective(transform: SimilarityTransform, src: np.ndarray, dst: np.ndarray) -> float:
    resid = transform.apply_to_points(src) - dst
    return float(np.mean(np.einsum("ij,ij->i", resid, resid)))
