"""Hypothesize-and-test baseline: minimal 3-point similarity RANSAC.

Each hypothesis solves scale (mean ratio of demeaned norms), rotation
(triad frame alignment), and translation from a random triple, then
counts correspondences within the inlier threshold. The best-consensus
model is refit on its consensus set with the weighted rotation solver.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateTriadError, NoConsensusError, ParameterError
from .geometry import CorrespondenceSet, SimilarityTransform, triad_rotation
from .rotation import solve_weighted

INLIER_THRESHOLD_SIGMA = 5.95
NORM_TOL = 1e-12


def ransac_iteration_cap(outlier_ratio: float, hard_cap: int = 30000) -> int:
    """Empirical convergence budget 4/(1 - ratio)^3, clipped to hard_cap."""
    if not (0.0 <= outlier_ratio < 1.0):
        raise ParameterError(f"outlier_ratio must be in [0, 1), got {outlier_ratio}")
    return min(int(np.ceil(4.0 / (1.0 - outlier_ratio) ** 3)), hard_cap)


def _consensus_scale(src: np.ndarray, dst: np.ndarray) -> float:
    p_dm = src - src.mean(axis=0)
    q_dm = dst - dst.mean(axis=0)
    np_ = np.linalg.norm(p_dm, axis=1)
    keep = np_ > NORM_TOL
    if not keep.any():
        return 0.0
    return float(np.mean(np.linalg.norm(q_dm[keep], axis=1) / np_[keep]))


def ransac_baseline(
    correspondences: CorrespondenceSet,
    sigma: float,
    max_iterations: int,
    seed=None,
) -> SimilarityTransform:
    """Best-consensus similarity transform within a fixed sampling budget.

    The inlier threshold is 5.95*sigma on the residual norm. Raises
    NoConsensusError when no hypothesis reaches 3 consensus members.
    """
    n = len(correspondences)
    if n < 3:
        raise ParameterError(f"need at least 3 correspondences, got {n}")
    if sigma <= 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    if max_iterations < 1:
        raise ParameterError("max_iterations must be >= 1")

    src = correspondences.src
    dst = correspondences.dst
    rng = np.random.default_rng(seed)
    threshold = INLIER_THRESHOLD_SIGMA * sigma

    best_count = 0
    best_mask = None
    samples = 0
    while samples < max_iterations:
        idx = rng.integers(0, n, size=3)
        if idx[0] == idx[1] or idx[0] == idx[2] or idx[1] == idx[2]:
            continue
        samples += 1
        p3 = src[idx]
        q3 = dst[idx]
        s = _consensus_scale(p3, q3)
        if s <= 0:
            continue
        try:
            R = triad_rotation(p3, q3)
        except DegenerateTriadError:
            continue
        t = q3.mean(axis=0) - s * R @ p3.mean(axis=0)
        residual = np.linalg.norm(s * src @ R.T + t - dst, axis=1)
        mask = residual <= threshold
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best_mask = mask

    if best_count < 3:
        raise NoConsensusError(
            f"no hypothesis reached 3 consensus members in {samples} samples",
            samples_drawn=samples,
        )

    cons_src = src[best_mask]
    cons_dst = dst[best_mask]
    s_refit = _consensus_scale(cons_src, cons_dst)
    if s_refit <= 0:
        raise NoConsensusError("consensus set is degenerate", samples_drawn=samples)
    report = solve_weighted(cons_src, cons_dst, np.ones(best_count), s_refit)
    return SimilarityTransform(s_refit, report.R_hat, report.t_hat)
