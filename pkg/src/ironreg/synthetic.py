"""Synthetic registration problems and evaluation metrics.

Problems follow the standard protocol: a source cloud normalized into the
[-0.5, 0.5]^3 cube, a random similarity transform (s in a given range,
uniform rotation, ||t|| bounded), isotropic Gaussian noise on the
destination points, and a fraction of destinations replaced by uniform
clutter inside a sphere of diameter s*sqrt(3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ShapeError
from .geometry import (
    CorrespondenceSet,
    SimilarityTransform,
    as_cloud,
    geodesic_error,
    quat_to_rot,
)

DEFAULT_TRANSLATION_MAX = math.sqrt(3.0) / 2.0
WEIGHT_ONE_THRESHOLD = 0.5


@dataclass
class ProblemSpec:
    n_points: int
    outlier_ratio: float
    sigma: float
    scale_range: tuple = (1.0, 5.0)
    translation_max: float = DEFAULT_TRANSLATION_MAX
    seed: int | None = None

    def __post_init__(self):
        if self.n_points < 6:
            raise ParameterError(f"n_points must be >= 6, got {self.n_points}")
        if not (0.0 <= self.outlier_ratio < 1.0):
            raise ParameterError(f"outlier_ratio must be in [0, 1), got {self.outlier_ratio}")
        if (1.0 - self.outlier_ratio) * self.n_points < 3:
            raise ParameterError("fewer than 3 inliers would remain")
        if self.sigma < 0:
            raise ParameterError(f"sigma must be >= 0, got {self.sigma}")
        lo, hi = self.scale_range
        if not (0 < lo <= hi):
            raise ParameterError(f"bad scale range [{lo}, {hi}]")
        if self.translation_max < 0:
            raise ParameterError("translation_max must be >= 0")


@dataclass
class GeneratedProblem:
    correspondences: CorrespondenceSet
    ground_truth: SimilarityTransform
    inlier_mask: np.ndarray


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation via a normalized Gaussian quaternion."""
    q = rng.normal(size=4)
    return quat_to_rot(q / np.linalg.norm(q))


def _uniform_in_ball(rng, n, radius, center):
    dirs = rng.normal(size=(n, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = radius * rng.uniform(size=n) ** (1.0 / 3.0)
    return center + dirs * radii[:, None]


def cube_normalize(cloud) -> np.ndarray:
    """Center the bounding box on the origin and scale the longest side
    to exactly 1, so the cloud fits in [-0.5, 0.5]^3."""
    pts = as_cloud(cloud)
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    extent = float((hi - lo).max())
    if extent <= 0:
        raise ShapeError("cloud has zero extent; cannot normalize")
    return (pts - (lo + hi) / 2.0) / extent


def make_problem(
    spec: ProblemSpec,
    source_cloud=None,
    clutter_center: str = "centroid",
) -> GeneratedProblem:
    """Generate a problem; deterministic for a given spec.seed.

    With a source cloud, n_points are drawn uniformly without replacement
    and cube-normalized; otherwise points are uniform in the cube.
    clutter_center picks the outlier sphere's center: the transformed
    cloud's centroid (default, hardest case) or the origin.
    """
    if clutter_center not in ("centroid", "origin"):
        raise ParameterError(f"clutter_center must be 'centroid' or 'origin', got {clutter_center!r}")
    rng = np.random.default_rng(spec.seed)
    n = spec.n_points

    if source_cloud is None:
        src = rng.uniform(-0.5, 0.5, size=(n, 3))
    else:
        cloud = as_cloud(source_cloud)
        if cloud.shape[0] < n:
            raise ParameterError(
                f"source cloud has {cloud.shape[0]} points, need {n}"
            )
        pick = rng.choice(cloud.shape[0], size=n, replace=False)
        src = cube_normalize(cloud[pick])

    lo, hi = spec.scale_range
    s = float(rng.uniform(lo, hi))
    R = random_rotation(rng)
    t = _uniform_in_ball(rng, 1, spec.translation_max, np.zeros(3))[0]
    truth = SimilarityTransform(s, R, t)

    dst = truth.apply(src) + rng.normal(0.0, spec.sigma, size=(n, 3))

    n_inliers = int(round((1.0 - spec.outlier_ratio) * n))
    n_out = n - n_inliers
    mask = np.ones(n, dtype=bool)
    if n_out > 0:
        out_idx = rng.choice(n, size=n_out, replace=False)
        center = dst.mean(axis=0) if clutter_center == "centroid" else np.zeros(3)
        dst[out_idx] = _uniform_in_ball(rng, n_out, s * math.sqrt(3.0) / 2.0, center)
        mask[out_idx] = False

    return GeneratedProblem(
        correspondences=CorrespondenceSet(src, dst),
        ground_truth=truth,
        inlier_mask=mask,
    )


@dataclass
class Metrics:
    scale_error: float
    rotation_error_deg: float
    translation_error: float
    recall_cond1: float
    recall_cond2: float
    iterations: int
    duality_gap: float
    wall_times: dict = field(default_factory=dict)


def transform_errors(estimate: SimilarityTransform, truth: SimilarityTransform):
    """(scale error, rotation error in degrees, translation error)."""
    return (
        abs(estimate.s - truth.s),
        math.degrees(geodesic_error(estimate.R, truth.R)),
        float(np.linalg.norm(estimate.t - truth.t)),
    )


def evaluate(result, problem: GeneratedProblem, weight_one_threshold: float = WEIGHT_ONE_THRESHOLD) -> Metrics:
    """Score a pipeline result against the generating ground truth.

    Recall condition 1 is the fraction of true inliers whose final weight
    is at least weight_one_threshold; condition 2 the fraction of true
    outliers whose final weight is exactly zero.
    """
    weights = np.asarray(result.inlier_weights, dtype=float).reshape(-1)
    mask = problem.inlier_mask
    if weights.shape[0] != mask.shape[0]:
        raise ShapeError(
            f"{weights.shape[0]} weights but {mask.shape[0]} correspondences"
        )
    scale_err, rot_deg, trans_err = transform_errors(
        result.transform, problem.ground_truth
    )
    n_in = int(mask.sum())
    n_out = int((~mask).sum())
    recall1 = float(np.count_nonzero(weights[mask] >= weight_one_threshold) / n_in) if n_in else 1.0
    recall2 = float(np.count_nonzero(weights[~mask] == 0.0) / n_out) if n_out else 1.0
    outcome = getattr(result, "gnc_outcome", None)
    iterations = outcome.iterations if outcome is not None else 0
    gap = outcome.solve_reports[-1].duality_gap if outcome is not None else 0.0
    return Metrics(
        scale_error=scale_err,
        rotation_error_deg=rot_deg,
        translation_error=trans_err,
        recall_cond1=recall1,
        recall_cond2=recall2,
        iterations=iterations,
        duality_gap=gap,
        wall_times=dict(getattr(result, "wall_times", {})),
    )
