"""Known-scale weighted rotation solver with an analytic optimality certificate.

The weighted registration objective, after subtracting weighted centroids
from both clouds, is a quadratic form in the unit quaternion:

    sum_i w_i ||s R(q) Pt_i - Qt_i||^2  =  q^T C q + D,

with C a symmetric 4x4 matrix and D the weight-dependent constant. The
global minimum over the quaternion sphere is the minimum eigenpair of C,
and optimality is certified by positive semidefiniteness of C - lambda*I
together with the relative duality gap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GapError, NumericError, ParameterError, ShapeError
from .geometry import (
    as_cloud,
    canonical_quat,
    quat_to_rot,
    weighted_centroid_demean,
)

CERT_PSD_TOL = 1e-9
CERT_GAP_TOL = 1e-6
ZERO_OBJECTIVE_TOL = 1e-12


@dataclass
class QuadraticForm:
    """Symmetric quadratic form of the demeaned weighted objective."""

    c: np.ndarray
    constant_term: float
    src_centroid: np.ndarray
    dst_centroid: np.ndarray


@dataclass
class SolveReport:
    """One rotation solve: solution, bound, and certificate."""

    q_hat: np.ndarray
    R_hat: np.ndarray
    t_hat: np.ndarray
    f_star: float
    f_hat: float
    duality_gap: float
    certified: bool


def build_quadratic_form(src, dst, weights, s_hat: float) -> QuadraticForm:
    """Assemble (C, D) for given correspondences, weights, and scale.

    q^T C q + D equals the full weighted objective for every unit q.
    Zero-weight correspondences contribute nothing.
    """
    if s_hat <= 0:
        raise ParameterError(f"scale must be positive, got {s_hat}")
    p = as_cloud(src)
    q = as_cloud(dst)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if not (p.shape[0] == q.shape[0] == w.shape[0]):
        raise ShapeError("src, dst and weights must have equal length")

    p_bar, p_dm = weighted_centroid_demean(p, w)
    q_bar, q_dm = weighted_centroid_demean(q, w)

    d = float(np.sum(w * (s_hat**2 * np.sum(p_dm**2, axis=1) + np.sum(q_dm**2, axis=1))))

    # S = sum_i w_i Pt_i Qt_i^T; q^T K(S) q = sum_i w_i Qt_i . R(q) Pt_i
    s_mat = (w[:, None] * p_dm).T @ q_dm
    k = _horn_quadratic(s_mat)
    c = -2.0 * s_hat * k
    c = 0.5 * (c + c.T)
    return QuadraticForm(c, d, p_bar, q_bar)


def _horn_quadratic(s: np.ndarray) -> np.ndarray:
    trace = s[0, 0] + s[1, 1] + s[2, 2]
    return np.array(
        [
            [s[0, 0] - s[1, 1] - s[2, 2], s[0, 1] + s[1, 0], s[0, 2] + s[2, 0], s[1, 2] - s[2, 1]],
            [s[0, 1] + s[1, 0], s[1, 1] - s[0, 0] - s[2, 2], s[1, 2] + s[2, 1], s[2, 0] - s[0, 2]],
            [s[0, 2] + s[2, 0], s[1, 2] + s[2, 1], s[2, 2] - s[0, 0] - s[1, 1], s[0, 1] - s[1, 0]],
            [s[1, 2] - s[2, 1], s[2, 0] - s[0, 2], s[0, 1] - s[1, 0], trace],
        ]
    )


def objective_value(form: QuadraticForm, q) -> float:
    """Full weighted objective q^T C q + D at a unit quaternion."""
    q = np.asarray(q, dtype=float).reshape(4)
    return float(q @ form.c @ q + form.constant_term)


def solve_rotation(form: QuadraticForm):
    """Minimum eigenpair of C: the globally optimal quaternion and the
    relaxation optimum f* = lambda_min + D."""
    if not np.isfinite(form.c).all():
        raise NumericError("quadratic form contains non-finite entries")
    eigvals, eigvecs = np.linalg.eigh(form.c)
    q_hat = canonical_quat(eigvecs[:, 0])
    f_star = float(eigvals[0] + form.constant_term)
    return q_hat, f_star


def recover_translation(R_hat, form: QuadraticForm, s_hat: float) -> np.ndarray:
    """t = dst centroid - s * R * src centroid."""
    R_hat = np.asarray(R_hat, dtype=float)
    return form.dst_centroid - s_hat * R_hat @ form.src_centroid


def certify_optimality(form: QuadraticForm, q_hat, f_star: float):
    """PSD certificate and relative duality gap (f_hat - f*) / f_hat.

    The bound f* is certified when C - lambda_min*I is positive
    semidefinite (lambda_min = f* - D) and the gap is within tolerance.
    Returns (duality_gap, certified).
    """
    q_hat = np.asarray(q_hat, dtype=float).reshape(4)
    lam = f_star - form.constant_term
    eigvals = np.linalg.eigvalsh(form.c)
    psd_ok = bool(eigvals[0] - lam >= -CERT_PSD_TOL)

    raw = float(q_hat @ form.c @ q_hat)
    f_hat = raw + form.constant_term
    if abs(f_hat) <= ZERO_OBJECTIVE_TOL:
        if abs(f_hat - f_star) <= ZERO_OBJECTIVE_TOL:
            gap = 0.0
        else:
            raise GapError(
                f"objective is zero but bound is {f_star}: gap undefined"
            )
    else:
        gap = (raw - lam) / f_hat
    certified = psd_ok and abs(gap) <= CERT_GAP_TOL
    return gap, certified


def solve_weighted(src, dst, weights, s_hat: float) -> SolveReport:
    """One-call weighted solve: build, eigensolve, translation, certificate."""
    form = build_quadratic_form(src, dst, weights, s_hat)
    q_hat, f_star = solve_rotation(form)
    R_hat = quat_to_rot(q_hat)
    t_hat = recover_translation(R_hat, form, s_hat)
    gap, certified = certify_optimality(form, q_hat, f_star)
    f_hat = objective_value(form, q_hat)
    return SolveReport(q_hat, R_hat, t_hat, f_star, f_hat, gap, certified)
