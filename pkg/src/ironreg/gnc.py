"""Graduated non-convexity outlier rejection with rough trimming.

Alternates weighted rotation solves with a closed-form Leclerc weight
update while annealing the control parameter mu. The trimming variants
additionally hard-zero (permanently) any correspondence whose squared
residual exceeds a bound xi that shrinks geometrically each iteration.
Correspondences flagged by the sampling stage get their weights boosted
for the first three iterations, then follow the plain Leclerc update and
are never trimmed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import AllTrimmedError, ParameterError, ShapeError
from .geometry import CorrespondenceSet, SimilarityTransform
from .rotation import SolveReport, solve_weighted

ZERO_OBJECTIVE_GUARD = 1e-12
BOOST_ITERATIONS = 3


class GncVariant(Enum):
    RT_GNC = "rt_gnc"
    RT_GNC_STAR = "rt_gnc_star"
    GNC_LC = "gnc_lc"


@dataclass
class GncParams:
    """Annealing and trimming controls.

    r_bar is the residual threshold in destination-cloud units; when left
    None it is derived as 5.95*sigma at run time. max_it defaults to 15
    for the trimming variants and 50 for plain GNC-LC. The xi_scale_with_s2
    flag keeps the s^2 factor in the initial trim bound (the verbatim
    rule); set False to drop it.
    """

    eta: float = 1.05
    nu: float = 0.45
    big_num: float = 200.0
    max_it: int | None = None
    r_bar: float | None = None
    mu_init: float = 10.0
    conv_tol: float = 1e-3
    variant: GncVariant = GncVariant.RT_GNC
    xi_scale_with_s2: bool = True

    def __post_init__(self):
        if self.eta <= 1:
            raise ParameterError(f"eta must exceed 1, got {self.eta}")
        if not (0.0 < self.nu < 1.0):
            raise ParameterError(f"nu must be in (0, 1), got {self.nu}")
        if self.big_num < 1:
            raise ParameterError(f"big_num must be >= 1, got {self.big_num}")
        if self.r_bar is not None and self.r_bar <= 0:
            raise ParameterError(f"r_bar must be positive, got {self.r_bar}")
        if self.mu_init <= 1:
            raise ParameterError(f"mu_init must exceed 1, got {self.mu_init}")
        if self.max_it is not None and self.max_it < 1:
            raise ParameterError(f"max_it must be >= 1, got {self.max_it}")

    def resolved_max_it(self) -> int:
        if self.max_it is not None:
            return self.max_it
        return 50 if self.variant is GncVariant.GNC_LC else 15

    def resolved_r_bar(self, sigma: float | None) -> float:
        if self.r_bar is not None:
            return self.r_bar
        if sigma is None or sigma <= 0:
            raise ParameterError("r_bar unset and no positive sigma to derive it")
        return 5.95 * sigma


@dataclass
class GncState:
    """Loop state after an iteration (exposed for telemetry and tests)."""

    weights: np.ndarray
    mu: float
    xi: float
    t: int
    objective_history: list = field(default_factory=list)
    residuals: np.ndarray | None = None


@dataclass
class IterationRecord:
    """Per-iteration telemetry row for CSV logging."""

    t: int
    mu: float
    xi: float
    objective: float
    active_count: int
    duality_gap: float


@dataclass
class GncOutcome:
    transform: SimilarityTransform
    final_weights: np.ndarray
    iterations: int
    converged: bool
    solve_reports: list[SolveReport]
    telemetry: list[IterationRecord] = field(default_factory=list)


def residuals(
    transform: SimilarityTransform, correspondences: CorrespondenceSet
) -> np.ndarray:
    """Per-correspondence residual norms ||s R P_i + t - Q_i||."""
    diff = transform.apply(correspondences.src) - correspondences.dst
    return np.linalg.norm(diff, axis=1)


def leclerc_weight(r, mu: float, r_bar: float):
    """Closed-form weight update exp(-r^2 / (mu^2 rbar^2)); equals the
    argmin over (0, 1] of w*r^2 + Psi(w, mu, rbar)."""
    if mu <= 0 or r_bar <= 0:
        raise ParameterError("mu and r_bar must be positive")
    r = np.asarray(r, dtype=float)
    out = np.exp(-(r**2) / (mu**2 * r_bar**2))
    return float(out) if out.ndim == 0 else out


def outlier_process_psi(omega, mu: float, r_bar: float):
    """Outlier process mu^2 rbar^2 (w ln w - w + 1) for w in (0, 1].

    The w -> 0+ limit is mu^2 rbar^2; trimmed points must use that value
    explicitly, this function raises on w <= 0.
    """
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise ParameterError("omega must be in (0, 1]; use the limit for 0")
    out = mu**2 * r_bar**2 * (w * np.log(w) - w + 1.0)
    return float(out) if out.ndim == 0 else out


def trim_bound_update(xi: float, res: np.ndarray, nu: float) -> float:
    """Shrink the trim bound: min(xi, max r_i^2) * nu."""
    res = np.asarray(res, dtype=float)
    if res.size == 0:
        raise ShapeError("residuals are empty")
    return min(xi, float(np.max(res**2))) * nu


def rt_gnc(
    correspondences: CorrespondenceSet,
    inlier_set,
    s_hat: float,
    params: GncParams,
    sigma: float | None = None,
) -> GncOutcome:
    """Run the annealing loop at fixed scale s_hat.

    inlier_set carries the correspondence indices found by the sampling
    stage; it must be empty for the RT_GNC_STAR and GNC_LC variants.
    Stops on objective convergence, mu < 1, or the iteration cap, and
    returns the last completed solve.
    """
    if s_hat <= 0:
        raise ParameterError(f"scale must be positive, got {s_hat}")
    variant = params.variant
    n = len(correspondences)
    inlier_mask = np.zeros(n, dtype=bool)
    if inlier_set is not None and len(inlier_set) > 0:
        if variant is not GncVariant.RT_GNC:
            raise ParameterError(f"{variant.value} does not take an inlier set")
        inlier_mask[np.asarray(inlier_set, dtype=np.int64)] = True
    elif variant is GncVariant.RT_GNC:
        raise ParameterError("RT_GNC requires a non-empty inlier set")

    r_bar = params.resolved_r_bar(sigma)
    max_it = params.resolved_max_it()
    trimming = variant is not GncVariant.GNC_LC
    boosting = variant is GncVariant.RT_GNC

    weights = np.ones(n)
    weights[inlier_mask] = params.big_num
    mu = params.mu_init
    xi = math.inf
    history: list[float] = []
    reports: list[SolveReport] = []
    telemetry: list[IterationRecord] = []
    converged = False
    iterations = 0

    for t in range(1, max_it + 1):
        if weights.sum() <= 0:
            raise AllTrimmedError(f"all correspondences trimmed at iteration {t}")
        report = solve_weighted(
            correspondences.src, correspondences.dst, weights, s_hat
        )
        reports.append(report)
        f_t = report.f_hat
        history.append(f_t)
        telemetry.append(
            IterationRecord(
                t=t,
                mu=mu,
                xi=xi,
                objective=f_t,
                active_count=int(np.count_nonzero(weights)),
                duality_gap=report.duality_gap,
            )
        )
        iterations = t
        if t >= 2:
            prev = history[-2]
            if f_t < ZERO_OBJECTIVE_GUARD or abs(f_t - prev) <= params.conv_tol * abs(f_t):
                converged = True
                break

        transform = SimilarityTransform(s_hat, report.R_hat, report.t_hat)
        res = residuals(transform, correspondences)
        res2 = res**2
        if trimming and t == 1:
            xi_factor = s_hat**2 if params.xi_scale_with_s2 else 1.0
            xi = xi_factor * float(res2.max())

        new_weights = leclerc_weight(res, mu, r_bar)
        if trimming:
            dead = ~inlier_mask & ((res2 > xi) | (weights == 0))
            new_weights[dead] = 0.0
        if boosting and t + 1 <= BOOST_ITERATIONS:
            new_weights[inlier_mask] = params.big_num
        weights = new_weights

        mu = mu / params.eta
        if trimming:
            xi = trim_bound_update(xi, res, params.nu)
        if mu < 1.0:
            break

    last = reports[-1]
    return GncOutcome(
        transform=SimilarityTransform(s_hat, last.R_hat, last.t_hat),
        final_weights=weights,
        iterations=iterations,
        converged=converged,
        solve_reports=reports,
        telemetry=telemetry,
    )


def gnc_lc(
    correspondences: CorrespondenceSet,
    s_hat: float,
    params: GncParams | None = None,
    sigma: float | None = None,
) -> GncOutcome:
    """Plain graduated non-convexity with the Leclerc cost: no trimming,
    no boosting, every weight follows the closed-form update."""
    if params is None:
        params = GncParams(variant=GncVariant.GNC_LC)
    elif params.variant is not GncVariant.GNC_LC:
        raise ParameterError("gnc_lc requires params.variant == GNC_LC")
    return rt_gnc(correspondences, None, s_hat, params, sigma=sigma)
