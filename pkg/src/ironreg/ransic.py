"""Scale estimation and inlier search from random 3-point samples.

Random triples of correspondences are screened by two compatibility
gates. The first gate checks, within one triple, that the per-point scale
invariants agree pairwise within the noise bound and that the per-point
translation invariants agree pairwise. Triples passing it are pooled; a
new triple that is additionally compatible (rotation trace test plus the
30 pairwise checks on the concatenated 6-point set) with at least
``x_min`` pooled triples triggers success, and the scale is re-estimated
over the union of their correspondence indices.

The sampling loop draws candidate triples in batches and applies the
scale gate vectorized; survivors are re-checked one at a time by
``first_compatibility`` so the accepted sequence is identical to a purely
sequential run with the same seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateTriadError, NoConsensusError, ParameterError
from .geometry import CorrespondenceSet, triad_rotation

NORM_TOL = 1e-12

_BATCH_START = 512
_BATCH_MAX = 262144
DEFAULT_MAX_SAMPLES = 10_000_000


@dataclass
class KnownScale:
    """Pre-check window for known-scale problems: accept a triple only if
    every per-point scale invariant falls in [lo*scale, hi*scale]."""

    scale: float
    lo: float = 0.95
    hi: float = 1.05

    def __post_init__(self):
        if self.scale <= 0:
            raise ParameterError(f"known scale must be positive, got {self.scale}")
        if not (self.lo < 1.0 < self.hi):
            raise ParameterError(
                f"scale window must straddle 1, got [{self.lo}, {self.hi}]"
            )


@dataclass
class RansicParams:
    """Noise bounds and stopping controls for the sampling loop.

    alpha bounds the per-point scale disagreement, beta the translation
    disagreement, gamma the rotation-trace agreement (near 3), x_min is
    the number of pooled compatible triples required to stop.
    """

    alpha: float
    beta: float
    gamma: float
    x_min: int = 2
    known_scale: KnownScale | None = None
    max_samples: int = DEFAULT_MAX_SAMPLES

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ParameterError("alpha and beta must be positive")
        if not (0.0 < self.gamma <= 3.0):
            raise ParameterError(f"gamma must be in (0, 3], got {self.gamma}")
        if self.x_min < 1:
            raise ParameterError(f"x_min must be >= 1, got {self.x_min}")
        if self.max_samples < 1:
            raise ParameterError("max_samples must be >= 1")


def default_ransic_params(
    sigma: float, extreme: bool = False, known_scale: KnownScale | None = None
) -> RansicParams:
    """Default bounds for Gaussian noise level sigma (midpoints of the
    working ranges); extreme=True demands one more compatible triple."""
    if sigma <= 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    return RansicParams(
        alpha=4.95 * sigma,
        beta=5.95 * sigma,
        # trace(R^T R) <= 3, so the linear rule is capped at 3
        gamma=min(297.0 * sigma, 3.0),
        x_min=3 if extreme else 2,
        known_scale=known_scale,
    )


@dataclass
class ThreePointSet:
    """A 3-correspondence sample with its local invariants."""

    indices: np.ndarray
    demeaned_src: np.ndarray
    demeaned_dst: np.ndarray
    scale_invariants: np.ndarray
    local_scale: float
    local_rotation: np.ndarray
    translation_invariants: np.ndarray


@dataclass
class RansicResult:
    scale_hat: float
    inlier_indices: np.ndarray
    samples_drawn: int
    pool_size_at_exit: int


_PAIRS3 = ((0, 1), (0, 2), (1, 2))


def first_compatibility(src3, dst3, params: RansicParams, indices=(0, 1, 2)):
    """Scale + translation compatibility of one triple.

    Returns a populated ThreePointSet when every gate passes, None
    otherwise (including degenerate triads, which the caller resamples).
    """
    p = np.asarray(src3, dtype=float).reshape(3, 3)
    q = np.asarray(dst3, dtype=float).reshape(3, 3)
    p_dm = p - p.mean(axis=0)
    q_dm = q - q.mean(axis=0)
    np_ = np.linalg.norm(p_dm, axis=1)
    if np_.min() < NORM_TOL:
        return None
    nq = np.linalg.norm(q_dm, axis=1)
    s = nq / np_

    ks = params.known_scale
    if ks is not None:
        if np.any(s < ks.lo * ks.scale) or np.any(s > ks.hi * ks.scale):
            return None

    inv_np = 1.0 / np_
    for i, j in _PAIRS3:
        if abs(s[i] - s[j]) > params.alpha * (inv_np[i] + inv_np[j]):
            return None

    # least-squares local scale, weights proportional to ||Pt_i||^2
    ups = np_**2 / params.alpha**2
    local_scale = float(np.sum(ups * s) / np.sum(ups))
    if local_scale <= 0:
        return None

    try:
        rot = triad_rotation(p_dm, q_dm / local_scale)
    except DegenerateTriadError:
        return None

    t_inv = q - local_scale * p @ rot.T
    for i, j in _PAIRS3:
        if np.linalg.norm(t_inv[i] - t_inv[j]) > 2.0 * params.beta:
            return None

    return ThreePointSet(
        indices=np.asarray(indices, dtype=np.int64).reshape(3),
        demeaned_src=p_dm,
        demeaned_dst=q_dm,
        scale_invariants=s,
        local_scale=local_scale,
        local_rotation=rot,
        translation_invariants=t_inv,
    )


def complete_compatibility(
    a: ThreePointSet,
    b: ThreePointSet,
    params: RansicParams,
    correspondences: CorrespondenceSet,
) -> bool:
    """Rotation-trace test plus 30 pairwise checks on the merged 6-point set.

    Scale invariants are recomputed under centroids of all 6 points; the
    translation invariants are each triple's own. Pairs sharing a
    correspondence index are skipped.
    """
    if np.trace(a.local_rotation.T @ b.local_rotation) < params.gamma:
        return False

    idx6 = np.concatenate([a.indices, b.indices])
    p6 = correspondences.src[idx6]
    q6 = correspondences.dst[idx6]
    p_dm = p6 - p6.mean(axis=0)
    q_dm = q6 - q6.mean(axis=0)
    np6 = np.linalg.norm(p_dm, axis=1)
    if np6.min() < NORM_TOL:
        return False
    s6 = np.linalg.norm(q_dm, axis=1) / np6
    inv_np6 = 1.0 / np6
    t6 = np.vstack([a.translation_invariants, b.translation_invariants])

    two_beta = 2.0 * params.beta
    for k in range(6):
        for m in range(k + 1, 6):
            if idx6[k] == idx6[m]:
                continue
            if abs(s6[k] - s6[m]) > params.alpha * (inv_np6[k] + inv_np6[m]):
                return False
            if np.linalg.norm(t6[k] - t6[m]) > two_beta:
                return False
    return True


def unique_index_set(index_arrays) -> np.ndarray:
    """Deduplicated, sorted union of correspondence indices."""
    return np.unique(np.concatenate([np.asarray(ix) for ix in index_arrays]))


def _has_disjoint_pair(keys) -> bool:
    """True when some two of the index sets share no correspondence.

    Consensus must rest on two disjoint 3-point sets; families of triples
    built around a shared pair can never provide that."""
    for i in range(len(keys)):
        for j in range(i + 1, len(keys)):
            if not (keys[i] & keys[j]):
                return True
    return False


def estimate_scale(correspondences: CorrespondenceSet, indices, alpha: float) -> float:
    """Weighted least-squares scale over a correspondence subset, with
    centroids recomputed over that subset."""
    idx = np.asarray(indices, dtype=np.int64)
    p = correspondences.src[idx]
    q = correspondences.dst[idx]
    p_dm = p - p.mean(axis=0)
    q_dm = q - q.mean(axis=0)
    np_ = np.linalg.norm(p_dm, axis=1)
    keep = np_ > NORM_TOL
    s = np.linalg.norm(q_dm[keep], axis=1) / np_[keep]
    ups = np_[keep] ** 2 / alpha**2
    return float(np.sum(ups * s) / np.sum(ups))


def ransic(
    correspondences: CorrespondenceSet, params: RansicParams, rng_seed
) -> RansicResult:
    """Sample triples until x_min pooled triples agree with a fresh one.

    Returns the estimated scale and the deduplicated union of the
    agreeing triples' correspondence indices. Deterministic for a given
    seed. Raises NoConsensusError when max_samples is exhausted.
    """
    n = len(correspondences)
    if n < 6:
        raise ParameterError(f"need at least 6 correspondences, got {n}")

    src = correspondences.src
    dst = correspondences.dst
    paired = np.hstack([src, dst])
    rng = np.random.default_rng(rng_seed)
    pool: list[ThreePointSet] = []
    pool_keys: list[frozenset] = []  # the pool is a set of 3-point sets, not a bag
    pool_key_index: set = set()
    pool_rots = np.empty((0, 3, 3))
    samples_drawn = 0
    batch = _BATCH_START
    ks = params.known_scale

    while samples_drawn < params.max_samples:
        idx = rng.integers(0, n, size=(batch, 3))
        valid = (
            (idx[:, 0] != idx[:, 1])
            & (idx[:, 0] != idx[:, 2])
            & (idx[:, 1] != idx[:, 2])
        )
        # vectorized necessary conditions (degenerate norms, scale window,
        # pairwise scale gate); survivors are re-checked exactly
        pq = paired[idx]
        pq = pq - pq.mean(axis=1, keepdims=True)
        p_dm = pq[:, :, :3]
        q_dm = pq[:, :, 3:]
        np2 = np.einsum("bik,bik->bi", p_dm, p_dm)
        nq2 = np.einsum("bik,bik->bi", q_dm, q_dm)
        ok = valid & (np2.min(axis=1) >= NORM_TOL**2)
        with np.errstate(divide="ignore", invalid="ignore"):
            np_ = np.sqrt(np2)
            s = np.sqrt(nq2) / np_
            inv_np = 1.0 / np_
            if ks is not None:
                ok &= (s >= ks.lo * ks.scale).all(axis=1)
                ok &= (s <= ks.hi * ks.scale).all(axis=1)
            for i, j in _PAIRS3:
                ok &= np.abs(s[:, i] - s[:, j]) <= params.alpha * (
                    inv_np[:, i] + inv_np[:, j]
                )

        sample_no = samples_drawn + np.cumsum(valid)
        budget_ok = sample_no <= params.max_samples
        for row in np.nonzero(ok & budget_ok)[0]:
            tri = idx[row]
            tps = first_compatibility(src[tri], dst[tri], params, indices=tri)
            if tps is None:
                continue
            key = frozenset(int(i) for i in tri)
            # cheap rotation-trace pre-gate over the whole pool; full second
            # gate only on survivors; a re-draw of a pooled triple is no new
            # evidence for itself
            if len(pool):
                traces = np.einsum("ij,kij->k", tps.local_rotation, pool_rots)
                candidates = np.nonzero(traces >= params.gamma)[0]
            else:
                candidates = ()
            # counted sets must agree mutually (greedy clique), not just
            # with the trigger: kills collusion among triples that share an
            # edge, where most pairwise checks are vacuous
            matches: list[ThreePointSet] = []
            for k in candidates:
                if pool_keys[k] == key:
                    continue
                if not complete_compatibility(tps, pool[k], params, correspondences):
                    continue
                if all(
                    complete_compatibility(pool[k], m, params, correspondences)
                    for m in matches
                ):
                    matches.append(pool[k])
            if len(matches) >= params.x_min and _has_disjoint_pair(
                [key] + [frozenset(int(i) for i in m.indices) for m in matches]
            ):
                inliers = unique_index_set(
                    [tps.indices] + [m.indices for m in matches]
                )
                return RansicResult(
                    scale_hat=estimate_scale(correspondences, inliers, params.alpha),
                    inlier_indices=inliers,
                    samples_drawn=int(sample_no[row]),
                    pool_size_at_exit=len(pool),
                )
            if key not in pool_key_index:
                pool_key_index.add(key)
                pool_keys.append(key)
                pool.append(tps)
                pool_rots = np.concatenate([pool_rots, tps.local_rotation[None]])

        samples_drawn = min(int(samples_drawn + valid.sum()), params.max_samples)
        batch = min(batch * 2, _BATCH_MAX)

    raise NoConsensusError(
        f"no consensus after {samples_drawn} samples (pool size {len(pool)})",
        samples_drawn=samples_drawn,
        pool_size=len(pool),
    )
