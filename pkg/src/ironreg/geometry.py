"""Fixed-size 3D/4D kernels: rotations, quaternions, similarity transforms.

All functions are pure and operate on float64 numpy arrays. Points and
point clouds are row vectors: a cloud is an (N, 3) array. Quaternions are
scalar-last, (q1, q2, q3, q4) = (x, y, z, w), Hamilton convention, and are
canonicalized to q4 >= 0 wherever one is returned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateTriadError,
    DegenerateWeightsError,
    NormalizationError,
    ShapeError,
)

ROTATION_TOL = 1e-9
TRIAD_CROSS_TOL = 1e-9


def as_cloud(points) -> np.ndarray:
    """Coerce input to an (N, 3) float64 array."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1 and arr.size == 3:
        arr = arr.reshape(1, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ShapeError(f"expected an (N, 3) point array, got shape {arr.shape}")
    return arr


def is_rotation(R, tol: float = ROTATION_TOL) -> bool:
    """True when R^T R = I and det(R) = 1 within tol per entry."""
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        return False
    return (
        np.all(np.abs(R.T @ R - np.eye(3)) <= tol)
        and abs(np.linalg.det(R) - 1.0) <= tol
    )


@dataclass
class CorrespondenceSet:
    """Paired source/target points (P_i, Q_i), the registration input."""

    src: np.ndarray
    dst: np.ndarray

    def __post_init__(self):
        self.src = as_cloud(self.src)
        self.dst = as_cloud(self.dst)
        if self.src.shape[0] != self.dst.shape[0]:
            raise ShapeError(
                f"src has {self.src.shape[0]} points, dst has {self.dst.shape[0]}"
            )
        if not (np.isfinite(self.src).all() and np.isfinite(self.dst).all()):
            raise ShapeError("correspondences contain non-finite coordinates")

    def __len__(self) -> int:
        return self.src.shape[0]


@dataclass
class SimilarityTransform:
    """Scale s > 0, rotation R in SO(3), translation t, applied as sRp + t."""

    s: float
    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        self.s = float(self.s)
        self.R = np.asarray(self.R, dtype=float)
        self.t = np.asarray(self.t, dtype=float).reshape(3)
        if self.s <= 0:
            raise ShapeError(f"scale must be positive, got {self.s}")
        if not is_rotation(self.R):
            raise ShapeError("R is not a rotation matrix within tolerance")

    def apply(self, points) -> np.ndarray:
        cloud = as_cloud(points)
        return self.s * cloud @ self.R.T + self.t

    def inverse(self) -> "SimilarityTransform":
        return SimilarityTransform(
            1.0 / self.s, self.R.T, -(self.R.T @ self.t) / self.s
        )

    @classmethod
    def identity(cls) -> "SimilarityTransform":
        return cls(1.0, np.eye(3), np.zeros(3))


def apply_transform(transform: SimilarityTransform, points) -> np.ndarray:
    """Apply s*R*p + t to every point."""
    return transform.apply(points)


def weighted_centroid_demean(points, weights):
    """Weighted centroid and the demeaned cloud.

    Returns (centroid, demeaned) with centroid = sum(w_i p_i) / sum(w_i)
    and demeaned[i] = p_i - centroid, so sum(w_i * demeaned[i]) = 0.
    """
    cloud = as_cloud(points)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != cloud.shape[0]:
        raise ShapeError(f"{cloud.shape[0]} points but {w.shape[0]} weights")
    total = w.sum()
    if total <= 0.0:
        raise DegenerateWeightsError("weights sum to zero")
    centroid = (w[:, None] * cloud).sum(axis=0) / total
    return centroid, cloud - centroid


def triad_rotation(src, dst) -> np.ndarray:
    """Rotation aligning two 3-point triads.

    Builds an orthonormal frame from each triple (edge direction, plane
    normal, their cross product) and returns the frame-to-frame rotation.
    Exact for any noiseless pair of similarity-related non-colinear
    triples, independent of scale and translation.
    """
    p = as_cloud(src)
    q = as_cloud(dst)
    if p.shape != (3, 3) or q.shape != (3, 3):
        raise ShapeError("triad_rotation needs exactly 3 src and 3 dst points")
    m = _triad_frame(p, "src")
    n = _triad_frame(q, "dst")
    return n @ m.T


def _triad_frame(pts, label):
    e1 = pts[1] - pts[0]
    e2 = pts[2] - pts[0]
    n1 = np.linalg.norm(e1)
    n2 = np.linalg.norm(e2)
    if n1 < TRIAD_CROSS_TOL or n2 < TRIAD_CROSS_TOL:
        raise DegenerateTriadError(f"{label} triad has coincident points")
    a = e1 / n1
    b = e2 / n2
    c = np.cross(a, b)
    cn = np.linalg.norm(c)
    if cn < TRIAD_CROSS_TOL:
        raise DegenerateTriadError(f"{label} triad is colinear")
    c = c / cn
    return np.column_stack([a, c, np.cross(a, c)])


def quat_to_rot(q) -> np.ndarray:
    """Rotation matrix for a unit quaternion (x, y, z, w)."""
    q = _unit_quat(q)
    x, y, z, w = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def rot_to_quat(R) -> np.ndarray:
    """Unit quaternion (x, y, z, w) for a rotation matrix, with w >= 0.

    Uses the largest-pivot branch so the square root argument is always
    well away from zero.
    """
    R = np.asarray(R, dtype=float)
    if not is_rotation(R, tol=1e-6):
        raise NormalizationError("input is not a rotation matrix")
    tr = np.trace(R)
    cand = np.array([R[0, 0], R[1, 1], R[2, 2], tr])
    i = int(np.argmax(cand))
    q = np.empty(4)
    if i == 3:
        s = np.sqrt(tr + 1.0) * 2.0
        q[3] = 0.25 * s
        q[0] = (R[2, 1] - R[1, 2]) / s
        q[1] = (R[0, 2] - R[2, 0]) / s
        q[2] = (R[1, 0] - R[0, 1]) / s
    elif i == 0:
        s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        q[0] = 0.25 * s
        q[3] = (R[2, 1] - R[1, 2]) / s
        q[1] = (R[0, 1] + R[1, 0]) / s
        q[2] = (R[0, 2] + R[2, 0]) / s
    elif i == 1:
        s = np.sqrt(1.0 - R[0, 0] + R[1, 1] - R[2, 2]) * 2.0
        q[1] = 0.25 * s
        q[3] = (R[0, 2] - R[2, 0]) / s
        q[0] = (R[0, 1] + R[1, 0]) / s
        q[2] = (R[1, 2] + R[2, 1]) / s
    else:
        s = np.sqrt(1.0 - R[0, 0] - R[1, 1] + R[2, 2]) * 2.0
        q[2] = 0.25 * s
        q[3] = (R[1, 0] - R[0, 1]) / s
        q[0] = (R[0, 2] + R[2, 0]) / s
        q[1] = (R[1, 2] + R[2, 1]) / s
    q /= np.linalg.norm(q)
    return canonical_quat(q)


def canonical_quat(q) -> np.ndarray:
    """Fix the +/-q ambiguity: scalar part >= 0, lexicographic tie-break."""
    q = np.asarray(q, dtype=float).reshape(4)
    if q[3] < 0:
        return -q
    if q[3] == 0.0:
        for v in q:
            if v > 0:
                return q
            if v < 0:
                return -q
    return q


def _unit_quat(q) -> np.ndarray:
    q = np.asarray(q, dtype=float).reshape(4)
    norm = np.linalg.norm(q)
    if abs(norm - 1.0) > 1e-6:
        raise NormalizationError(f"quaternion norm {norm} is not 1 within 1e-6")
    return q / norm


def pi_matrices(v):
    """Left/right quaternion product matrices Pi1(v), Pi2(v) of a 4-vector.

    Bilinear: Pi1(v) w = Pi2(w) v for all v, w. For a unit quaternion q and
    point p, Pi2(q)^T Pi1(q) [p; 0] = [R(q) p; 0].
    """
    v1, v2, v3, v4 = np.asarray(v, dtype=float).reshape(4)
    pi1 = np.array(
        [
            [v4, -v3, v2, v1],
            [v3, v4, -v1, v2],
            [-v2, v1, v4, v3],
            [-v1, -v2, -v3, v4],
        ]
    )
    pi2 = np.array(
        [
            [v4, v3, -v2, v1],
            [-v3, v4, v1, v2],
            [v2, -v1, v4, v3],
            [-v1, -v2, -v3, v4],
        ]
    )
    return pi1, pi2


def geodesic_error(R1, R2) -> float:
    """Angle in radians between two rotations: arccos((trace(R1^T R2)-1)/2)."""
    R1 = np.asarray(R1, dtype=float)
    R2 = np.asarray(R2, dtype=float)
    c = (np.trace(R1.T @ R2) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def exp_map_so3(omega) -> np.ndarray:
    """Rodrigues' formula: rotation by angle ||omega|| about omega."""
    w = np.asarray(omega, dtype=float).reshape(3)
    theta = np.linalg.norm(w)
    K = np.array(
        [
            [0.0, -w[2], w[1]],
            [w[2], 0.0, -w[0]],
            [-w[1], w[0], 0.0],
        ]
    )
    if theta < 1e-12:
        # second-order series, avoids 0/0
        return np.eye(3) + K + 0.5 * (K @ K)
    return (
        np.eye(3)
        + (np.sin(theta) / theta) * K
        + ((1.0 - np.cos(theta)) / theta**2) * (K @ K)
    )
