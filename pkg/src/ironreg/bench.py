"""Monte-Carlo benchmark CLI.

Sweeps outlier ratios x solvers x seeded runs on synthetic problems (or
runs each solver once on a user-supplied correspondence file), writing:

  results.csv  one row per run, deterministic for a given seed
  timings.csv  per-stage wall times (excluded from the determinism guarantee)
  summary.csv  median/IQR per (ratio, solver) cell
  *.svg        optional line charts of error vs outlier ratio (--plots)

Solvers: iron (full cascade), iron-nostar (cascade without the seed-inlier
weight boost), rt-gnc-star / gnc-lc (rejection heuristics fed the true
scale), ransac (capped 3-point baseline).
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .baseline import ransac_baseline, ransac_iteration_cap
from .errors import RegistrationError
from .geometry import rot_to_quat
from .gnc import GncParams, GncVariant, gnc_lc, rt_gnc
from .io import load_correspondences, load_point_cloud
from .pipeline import default_config, iron, load_config
from .ransic import DEFAULT_MAX_SAMPLES
from .synthetic import ProblemSpec, evaluate, make_problem, transform_errors

SOLVERS = ("iron", "iron-nostar", "gnc-lc", "rt-gnc-star", "ransac")

RESULT_FIELDS = (
    "ratio,solver,run,n_points,sigma,mode,scale_true,status,"
    "scale_error,rotation_error_deg,translation_error,"
    "recall_cond1,recall_cond2,iterations,duality_gap,converged,ransic_samples,"
    "est_scale,est_qx,est_qy,est_qz,est_qw,est_tx,est_ty,est_tz"
).split(",")

TIMING_FIELDS = "ratio,solver,run,t_ransic,t_gnc,t_total".split(",")

SUMMARY_METRICS = (
    "scale_error",
    "rotation_error_deg",
    "translation_error",
    "recall_cond1",
    "recall_cond2",
    "iterations",
)


def derive_seed(*parts) -> int:
    ss = np.random.SeedSequence(tuple(int(p) for p in parts))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _row_to_line(row: dict, fields) -> str:
    return ",".join(_fmt(row.get(f)) for f in fields)


def _estimate_columns(transform) -> dict:
    q = rot_to_quat(transform.R)
    return {
        "est_scale": float(transform.s),
        "est_qx": float(q[0]),
        "est_qy": float(q[1]),
        "est_qz": float(q[2]),
        "est_qw": float(q[3]),
        "est_tx": float(transform.t[0]),
        "est_ty": float(transform.t[1]),
        "est_tz": float(transform.t[2]),
    }


def run_single(solver, correspondences, args, ratio, solver_seed, problem=None):
    """One solver invocation; returns (result_row, timing_row)."""
    sigma = args.sigma
    truth = problem.ground_truth if problem is not None else None
    row = {"status": "ok"}
    timing = {}
    try:
        if solver in ("iron", "iron-nostar"):
            if args.config is not None:
                config = load_config(args.config)
                config = replace(config, rng_seed=solver_seed)
            else:
                config = default_config(
                    sigma,
                    mode=args.mode,
                    extreme=args.extreme,
                    scale=args.scale if args.mode == "known" else None,
                    rng_seed=solver_seed,
                )
            if args.max_samples is not None:
                config = replace(
                    config, ransic=replace(config.ransic, max_samples=args.max_samples)
                )
            if solver == "iron-nostar":
                config = replace(
                    config, gnc=replace(config.gnc, variant=GncVariant.RT_GNC_STAR)
                )
            result = iron(correspondences, config)
            row["ransic_samples"] = result.ransic_result.samples_drawn
            row["converged"] = result.gnc_outcome.converged
            timing = result.wall_times
            if truth is not None:
                metrics = evaluate(result, problem)
                row.update(
                    scale_error=metrics.scale_error,
                    rotation_error_deg=metrics.rotation_error_deg,
                    translation_error=metrics.translation_error,
                    recall_cond1=metrics.recall_cond1,
                    recall_cond2=metrics.recall_cond2,
                    iterations=metrics.iterations,
                    duality_gap=metrics.duality_gap,
                )
            row.update(_estimate_columns(result.transform))
        elif solver in ("rt-gnc-star", "gnc-lc"):
            if truth is None:
                raise RegistrationError(
                    f"{solver} needs the true scale; only available on synthetic sweeps"
                )
            import time as _time

            t0 = _time.perf_counter()
            if solver == "gnc-lc":
                outcome = gnc_lc(correspondences, truth.s, sigma=sigma)
            else:
                outcome = rt_gnc(
                    correspondences,
                    None,
                    truth.s,
                    GncParams(variant=GncVariant.RT_GNC_STAR),
                    sigma=sigma,
                )
            timing = {"rt_gnc": _time.perf_counter() - t0}
            shim = SimpleNamespace(
                transform=outcome.transform,
                inlier_weights=outcome.final_weights,
                gnc_outcome=outcome,
                wall_times=timing,
            )
            metrics = evaluate(shim, problem)
            row.update(
                scale_error=metrics.scale_error,
                rotation_error_deg=metrics.rotation_error_deg,
                translation_error=metrics.translation_error,
                recall_cond1=metrics.recall_cond1,
                recall_cond2=metrics.recall_cond2,
                iterations=metrics.iterations,
                duality_gap=metrics.duality_gap,
                converged=outcome.converged,
            )
            row.update(_estimate_columns(outcome.transform))
        elif solver == "ransac":
            import time as _time

            cap = ransac_iteration_cap(ratio if ratio is not None else 0.0)
            t0 = _time.perf_counter()
            est = ransac_baseline(correspondences, sigma, cap, seed=solver_seed)
            timing = {"total": _time.perf_counter() - t0}
            if truth is not None:
                s_err, r_err, t_err = transform_errors(est, truth)
                row.update(
                    scale_error=s_err,
                    rotation_error_deg=r_err,
                    translation_error=t_err,
                )
            row.update(_estimate_columns(est))
        else:
            raise RegistrationError(f"unknown solver {solver!r}")
    except RegistrationError as err:
        row = {"status": type(err).__name__}
    return row, timing


def _sweep_tasks(args, ratios, solvers, source_cloud):
    for ri, ratio in enumerate(ratios):
        for run in range(args.runs):
            problem_seed = derive_seed(args.seed, 1, ri, run)
            spec = ProblemSpec(
                n_points=args.n_points,
                outlier_ratio=ratio,
                sigma=args.sigma,
                scale_range=(args.scale, args.scale)
                if args.mode == "known"
                else (1.0, 5.0),
                seed=problem_seed,
            )
            problem = make_problem(
                spec, source_cloud=source_cloud, clutter_center=args.clutter_center
            )
            for si, solver in enumerate(solvers):
                solver_seed = derive_seed(args.seed, 2, ri, run, si)
                yield (ri, si, run), ratio, solver, problem, solver_seed


def _execute(args, ratios, solvers, source_cloud):
    tasks = list(_sweep_tasks(args, ratios, solvers, source_cloud))

    def work(task):
        key, ratio, solver, problem, solver_seed = task
        row, timing = run_single(
            solver, problem.correspondences, args, ratio, solver_seed, problem=problem
        )
        base = {
            "ratio": ratio,
            "solver": solver,
            "run": key[2],
            "n_points": args.n_points,
            "sigma": args.sigma,
            "mode": args.mode,
            "scale_true": float(problem.ground_truth.s),
        }
        base.update(row)
        trow = {
            "ratio": ratio,
            "solver": solver,
            "run": key[2],
            "t_ransic": timing.get("ransic"),
            "t_gnc": timing.get("rt_gnc"),
            "t_total": timing.get("total", sum(v for v in timing.values() if v)),
        }
        return key, base, trow

    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            done = list(pool.map(work, tasks))
    else:
        done = [work(t) for t in tasks]
    done.sort(key=lambda item: item[0])
    return [d[1] for d in done], [d[2] for d in done]


def summarize(rows) -> list[dict]:
    """Median and IQR per (ratio, solver) cell over successful runs."""
    cells: dict = {}
    for row in rows:
        cells.setdefault((row["ratio"], row["solver"]), []).append(row)
    out = []
    for (ratio, solver), members in sorted(
        cells.items(), key=lambda kv: (str(kv[0][0]), kv[0][1])
    ):
        ok = [m for m in members if m["status"] == "ok"]
        summary = {
            "ratio": ratio,
            "solver": solver,
            "runs": len(members),
            "failures": len(members) - len(ok),
            "success_rate": len(ok) / len(members),
        }
        for metric in SUMMARY_METRICS:
            vals = np.array(
                [m[metric] for m in ok if m.get(metric) is not None], dtype=float
            )
            if vals.size:
                q25, q50, q75 = np.percentile(vals, [25, 50, 75])
                summary[f"median_{metric}"] = float(q50)
                summary[f"iqr_{metric}"] = float(q75 - q25)
            else:
                summary[f"median_{metric}"] = None
                summary[f"iqr_{metric}"] = None
        out.append(summary)
    return out


SUMMARY_FIELDS = ["ratio", "solver", "runs", "failures", "success_rate"] + [
    f"{stat}_{metric}" for metric in SUMMARY_METRICS for stat in ("median", "iqr")
]


def _write_csv(path: Path, fields, rows) -> None:
    lines = [",".join(fields)]
    lines += [_row_to_line(r, fields) for r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def render_plots(summary_rows, out_dir: Path) -> list[Path]:
    """Line charts (median with IQR band) of each error metric vs ratio."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    panels = [
        ("scale_error", "scale error |s_est - s|", "scale_error.svg", "log"),
        ("rotation_error_deg", "rotation error [deg]", "rotation_error.svg", "log"),
        ("translation_error", "translation error", "translation_error.svg", "log"),
        ("recall_cond1", "inlier recall (weight >= 0.5)", "recall.svg", "linear"),
        ("iterations", "iterations", "iterations.svg", "linear"),
    ]
    solvers = sorted({r["solver"] for r in summary_rows})
    written = []
    for metric, label, fname, yscale in panels:
        fig, ax = plt.subplots(figsize=(5.2, 3.6))
        drew = False
        for solver in solvers:
            cells = [
                r
                for r in summary_rows
                if r["solver"] == solver and r[f"median_{metric}"] is not None
            ]
            if not cells:
                continue
            cells.sort(key=lambda r: float(r["ratio"]))
            x = np.array([float(r["ratio"]) for r in cells])
            med = np.array([r[f"median_{metric}"] for r in cells], dtype=float)
            iqr = np.array([r[f"iqr_{metric}"] or 0.0 for r in cells], dtype=float)
            if yscale == "log":
                med = np.where(med > 0, med, np.nan)
            ax.plot(x, med, marker="o", label=solver)
            lo = med - iqr / 2
            hi = med + iqr / 2
            if yscale == "log":
                lo = np.clip(lo, np.nanmin(med) * 1e-3 if np.isfinite(np.nanmin(med)) else 1e-12, None)
            ax.fill_between(x, lo, hi, alpha=0.15)
            drew = True
        if not drew:
            plt.close(fig)
            continue
        ax.set_xlabel("outlier ratio")
        ax.set_ylabel(label)
        ax.set_yscale(yscale)
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
        target = out_dir / fname
        fig.savefig(target)
        plt.close(fig)
        written.append(target)
    return written


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ironreg-bench",
        description="Monte-Carlo registration benchmark: synthetic sweeps or "
        "a single run on a correspondence CSV.",
    )
    parser.add_argument("--out-dir", required=True, help="existing output directory")
    parser.add_argument("--mode", choices=("known", "unknown"), default="known")
    parser.add_argument("--scale", type=float, default=1.0, help="known-scale value")
    parser.add_argument("--sigma", type=float, default=0.01, help="noise std-dev")
    parser.add_argument(
        "--ratios",
        default="0.5,0.8,0.9,0.95,0.98,0.99",
        help="comma-separated outlier ratios",
    )
    parser.add_argument("--runs", type=int, default=50, help="Monte-Carlo runs per cell")
    parser.add_argument(
        "--solver",
        default="iron",
        help="comma-separated subset of: " + ",".join(SOLVERS),
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--n-points", type=int, default=1000)
    parser.add_argument("--input-ply", default=None, help="source cloud for synthesis")
    parser.add_argument(
        "--correspondences", default=None, help="run once on this CSV instead of sweeping"
    )
    parser.add_argument("--plots", action="store_true", help="render SVG charts")
    parser.add_argument(
        "--clutter-center", choices=("centroid", "origin"), default="centroid"
    )
    parser.add_argument(
        "--max-samples", type=int, default=None, help=f"sampling cap (default {DEFAULT_MAX_SAMPLES})"
    )
    parser.add_argument("--config", default=None, help="key=value pipeline config file")
    parser.add_argument("--extreme", action="store_true", help="demand one more compatible set")
    parser.add_argument("--workers", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = Path(args.out_dir)
    if not out_dir.is_dir():
        print(f"error: output directory {out_dir} does not exist", file=sys.stderr)
        return 1
    if args.seed < 0:
        print("error: --seed must be non-negative", file=sys.stderr)
        return 1
    solvers = [s.strip() for s in args.solver.split(",") if s.strip()]
    bad = [s for s in solvers if s not in SOLVERS]
    if bad or not solvers:
        print(f"error: unknown solver(s) {bad}", file=sys.stderr)
        return 1

    try:
        if args.correspondences is not None:
            corr = load_correspondences(args.correspondences)
            rows, timings = [], []
            for si, solver in enumerate(solvers):
                row, timing = run_single(
                    solver, corr, args, None, derive_seed(args.seed, 2, 0, 0, si)
                )
                base = {
                    "ratio": None,
                    "solver": solver,
                    "run": 0,
                    "n_points": len(corr),
                    "sigma": args.sigma,
                    "mode": args.mode,
                    "scale_true": None,
                }
                base.update(row)
                rows.append(base)
                timings.append(
                    {
                        "ratio": None,
                        "solver": solver,
                        "run": 0,
                        "t_ransic": timing.get("ransic"),
                        "t_gnc": timing.get("rt_gnc"),
                        "t_total": timing.get("total", sum(v for v in timing.values() if v)),
                    }
                )
            summary_rows = []
        else:
            try:
                ratios = [float(r) for r in args.ratios.split(",") if r.strip()]
            except ValueError:
                print(f"error: cannot parse --ratios {args.ratios!r}", file=sys.stderr)
                return 1
            if not ratios or any(not (0 <= r < 1) for r in ratios):
                print("error: ratios must lie in [0, 1)", file=sys.stderr)
                return 1
            source_cloud = (
                load_point_cloud(args.input_ply) if args.input_ply else None
            )
            rows, timings = _execute(args, ratios, solvers, source_cloud)
            summary_rows = summarize(rows)
    except (RegistrationError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1

    _write_csv(out_dir / "results.csv", RESULT_FIELDS, rows)
    _write_csv(out_dir / "timings.csv", TIMING_FIELDS, timings)
    if summary_rows:
        _write_csv(out_dir / "summary.csv", SUMMARY_FIELDS, summary_rows)
        if args.plots:
            render_plots(summary_rows, out_dir)
    print(f"wrote {len(rows)} rows to {out_dir / 'results.csv'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
