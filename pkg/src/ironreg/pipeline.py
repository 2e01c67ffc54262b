"""End-to-end registration: sampling stage feeds the annealed solver.

Unknown-scale problems use the sampled scale estimate; known-scale
problems run the sampler with a pre-check window around the given scale
purely to find seed inliers, then fix the scale.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ParameterError, RegistrationError
from .geometry import CorrespondenceSet, SimilarityTransform
from .gnc import GncOutcome, GncParams, GncVariant, rt_gnc
from .ransic import (
    KnownScale,
    RansicParams,
    RansicResult,
    default_ransic_params,
    ransic,
)

MODE_KNOWN = "known"
MODE_UNKNOWN = "unknown"


@dataclass
class IronConfig:
    mode: str
    sigma: float
    ransic: RansicParams
    gnc: GncParams
    scale: float | None = None
    rng_seed: int | None = None

    def __post_init__(self):
        if self.mode not in (MODE_KNOWN, MODE_UNKNOWN):
            raise ParameterError(f"mode must be 'known' or 'unknown', got {self.mode!r}")
        if self.sigma <= 0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")
        if self.mode == MODE_KNOWN:
            if self.scale is None or self.scale <= 0:
                raise ParameterError("known-scale mode needs a positive scale")


@dataclass
class RegistrationResult:
    transform: SimilarityTransform
    inlier_weights: np.ndarray
    ransic_result: RansicResult
    gnc_outcome: GncOutcome
    wall_times: dict = field(default_factory=dict)


def default_config(
    sigma: float,
    mode: str = MODE_UNKNOWN,
    extreme: bool = False,
    scale: float | None = None,
    rng_seed: int | None = None,
) -> IronConfig:
    """Standard parameter set for noise level sigma."""
    if mode == MODE_KNOWN and scale is None:
        scale = 1.0
    return IronConfig(
        mode=mode,
        sigma=sigma,
        ransic=default_ransic_params(sigma, extreme=extreme),
        gnc=GncParams(),
        scale=scale,
        rng_seed=rng_seed,
    )


def iron(correspondences: CorrespondenceSet, config: IronConfig) -> RegistrationResult:
    """Run the full cascade and report the transform, final weights, and
    per-stage wall times. Deterministic for a given config.rng_seed."""
    if len(correspondences) < 6:
        raise ParameterError(
            f"need at least 6 correspondences, got {len(correspondences)}"
        )

    ransic_params = config.ransic
    if config.mode == MODE_KNOWN:
        window = ransic_params.known_scale
        ransic_params = replace(
            ransic_params,
            known_scale=KnownScale(
                scale=config.scale,
                lo=window.lo if window is not None else 0.95,
                hi=window.hi if window is not None else 1.05,
            ),
        )

    t0 = time.perf_counter()
    try:
        sampled = ransic(correspondences, ransic_params, config.rng_seed)
    except RegistrationError as err:
        err.stage = "ransic"
        raise
    t1 = time.perf_counter()

    s_hat = config.scale if config.mode == MODE_KNOWN else sampled.scale_hat
    seed_inliers = (
        sampled.inlier_indices
        if config.gnc.variant is GncVariant.RT_GNC
        else None
    )
    try:
        outcome = rt_gnc(
            correspondences, seed_inliers, s_hat, config.gnc, sigma=config.sigma
        )
    except RegistrationError as err:
        err.stage = "rt_gnc"
        raise
    t2 = time.perf_counter()

    return RegistrationResult(
        transform=outcome.transform,
        inlier_weights=outcome.final_weights,
        ransic_result=sampled,
        gnc_outcome=outcome,
        wall_times={"ransic": t1 - t0, "rt_gnc": t2 - t1, "total": t2 - t0},
    )


# declarative key=value config --------------------------------------------

_TOP_KEYS = {"mode": str, "sigma": float, "scale": float, "seed": int, "extreme": bool}
_RANSIC_KEYS = {
    "alpha": float,
    "beta": float,
    "gamma": float,
    "x_min": int,
    "max_samples": int,
    "window_lo": float,
    "window_hi": float,
}
_GNC_KEYS = {
    "eta": float,
    "nu": float,
    "big_num": float,
    "max_it": int,
    "r_bar": float,
    "mu_init": float,
    "conv_tol": float,
    "variant": str,
    "xi_scale_with_s2": bool,
}


def _coerce(raw: str, kind, key: str):
    if kind is bool:
        low = raw.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ParameterError(f"cannot parse boolean {key} = {raw!r}")
    try:
        return kind(raw)
    except ValueError as exc:
        raise ParameterError(f"cannot parse {key} = {raw!r}") from exc


def parse_config_text(text: str) -> IronConfig:
    """Parse a key = value config (one pair per line, '#' comments).

    Recognized keys: mode, sigma, scale, seed, extreme, ransic.<param>,
    gnc.<param>. Unset keys fall back to default_config for the given
    sigma/mode.
    """
    top: dict = {}
    ransic_over: dict = {}
    gnc_over: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ParameterError(f"config line {lineno} is not key = value: {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key in _TOP_KEYS:
            top[key] = _coerce(raw, _TOP_KEYS[key], key)
        elif key.startswith("ransic.") and key[7:] in _RANSIC_KEYS:
            sub = key[7:]
            ransic_over[sub] = _coerce(raw, _RANSIC_KEYS[sub], key)
        elif key.startswith("gnc.") and key[4:] in _GNC_KEYS:
            sub = key[4:]
            gnc_over[sub] = _coerce(raw, _GNC_KEYS[sub], key)
        else:
            raise ParameterError(f"unknown config key {key!r} (line {lineno})")

    if "sigma" not in top:
        raise ParameterError("config must set sigma")
    cfg = default_config(
        sigma=top["sigma"],
        mode=top.get("mode", MODE_UNKNOWN),
        extreme=top.get("extreme", False),
        scale=top.get("scale"),
        rng_seed=top.get("seed"),
    )

    window = {k: ransic_over.pop(k) for k in ("window_lo", "window_hi") if k in ransic_over}
    ransic_params = replace(cfg.ransic, **ransic_over) if ransic_over else cfg.ransic
    if window:
        base = ransic_params.known_scale or KnownScale(scale=cfg.scale or 1.0)
        ransic_params = replace(
            ransic_params,
            known_scale=KnownScale(
                scale=base.scale,
                lo=window.get("window_lo", base.lo),
                hi=window.get("window_hi", base.hi),
            ),
        )

    if "variant" in gnc_over:
        gnc_over["variant"] = GncVariant(gnc_over["variant"])
    gnc_params = replace(cfg.gnc, **gnc_over) if gnc_over else cfg.gnc
    return replace(cfg, ransic=ransic_params, gnc=gnc_params)


def load_config(path) -> IronConfig:
    """Read a declarative config file; see parse_config_text."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())
