"""Command-line entry point: ``lml-contact {calibrate,align,bench,replay}``.

Exit codes: 0 success, 2 configuration error, 3 data/IO error,
4 invariant or assertion failure (including insufficient excitation and a
benchmark slope above the bound).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import trace as trace_io
from .bench import run_benchmark
from .config import load_config
from .errors import ExcitationError, InvalidConfigError, InvalidInputError, InvariantViolation
from .experiments import alignment_experiment, misalignment_scenarios, run_calibration, scripted_insertion
from .model_file import load_model, save_model
from .model_types import feature_map
from .quasistatic_sim import CONTACT_MODELS, misaligned_start, true_model_matrix

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INVARIANT = 4

CHANNELS = ("f_x", "f_y", "f_z", "tau_x", "tau_y", "tau_z")


def _configure(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.set("experiment", "seed", args.seed)
    if getattr(args, "contact_model", None):
        cfg.set("scene", "contact_model", args.contact_model)
    if getattr(args, "regularize_interval", None) is not None:
        cfg.set("filter", "regularize_interval", args.regularize_interval)
    return cfg


def _write_json(path: Path, doc):
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _rmse(measured: np.ndarray, predicted: np.ndarray) -> np.ndarray:
    return np.sqrt(np.mean((measured - predicted) ** 2, axis=0))


def cmd_calibrate(cfg, out: Path, steps: int | None = None) -> dict:
    scene, sensor, noise = cfg.build_scene(), cfg.build_sensor(), cfg.build_noise()
    controller, insertion = cfg.build_controller(), cfg.build_insertion()
    start = misaligned_start(scene, insertion.misalignment_pos, insertion.misalignment_rot, insertion.start_height)
    trace, state, _ = scripted_insertion(scene, sensor, start, controller, insertion.hold_depth, insertion.hold_steps)
    learner, cal, state = run_calibration(
        scene, sensor, noise, state, cfg.build_calibration(), first_step=len(trace),
        regularize_interval=cfg.filter["regularize_interval"], steps=steps,
    )
    trace.extend(cal)
    G = learner.model

    data = cal.to_array()
    W = np.array([feature_map(trace_io.row_pose(r), trace_io.row_command(r)) for r in data])
    measured = data[:, trace_io.COL["f_x"]:trace_io.COL["f_x"] + 6]
    rmse = _rmse(measured, W @ G.T)
    metrics = {
        "steps": learner.belief.step_count,
        "rmse": dict(zip(CHANNELS, rmse.tolist())),
        "violations": state.violations,
        "model_error_vs_truth": None,
    }
    if scene.contact_model == "linear":
        G_true = true_model_matrix(scene, sensor)
        metrics["model_error_vs_truth"] = float(np.linalg.norm(G - G_true) / np.linalg.norm(G_true))

    out.mkdir(parents=True, exist_ok=True)
    save_model(out / "model.json", G, learner.belief, noise)
    trace_io.write_csv(out / "calibration_trace.csv", trace.to_array())
    _write_json(out / "calibration_metrics.json", metrics)
    print(f"calibrated on {metrics['steps']} samples; terminal-model RMSE per channel:")
    for name, value in metrics["rmse"].items():
        print(f"  {name:6s} {value:.6g}")
    if metrics["model_error_vs_truth"] is not None:
        print(f"relative model error vs ground truth: {metrics['model_error_vs_truth']:.3g}")
    return metrics


def cmd_align(cfg, model_path, out: Path, controller: bool = True, scenarios: int | None = None) -> dict:
    G = load_model(model_path)
    scene, sensor, noise = cfg.build_scene(), cfg.build_sensor(), cfg.build_noise()
    ctrl = cfg.build_controller()
    if scenarios:
        cases = misalignment_scenarios(scenarios, cfg.seed)
    else:
        base = cfg.build_insertion()
        cases = [(base.misalignment_pos, base.misalignment_rot)]

    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, case in enumerate(cases):
        result = alignment_experiment(
            scene, replace(sensor, seed=sensor.seed + i), noise, ctrl, cfg.build_insertion(case),
            model=G, controller=controller,
        )
        name = "episode.csv" if len(cases) == 1 else f"episode_{i:02d}.csv"
        trace_io.write_csv(out / name, result.trace.to_array())
        rows.append({
            "misalignment_pos": list(case[0]),
            "misalignment_rot_deg": np.rad2deg(case[1]).tolist(),
            "hold_mean_fxy": result.hold_mean_fxy,
            "steady_mean_fxy": result.steady_mean_fxy,
            "reduction_ratio": result.reduction_ratio,
            "violations": result.violations,
            "trace": name,
        })
        ratio = "n/a" if result.reduction_ratio is None else f"{result.reduction_ratio:.3f}"
        print(f"scenario {i}: hold {result.hold_mean_fxy:.4f} N -> steady {result.steady_mean_fxy:.4f} N, reduction {ratio}")
    ratios = [r["reduction_ratio"] for r in rows if r["reduction_ratio"] is not None]
    metrics = {
        "controller": controller,
        "scenarios": rows,
        "hold_mean_fxy": rows[0]["hold_mean_fxy"],
        "steady_mean_fxy": rows[0]["steady_mean_fxy"],
        "reduction_ratio": rows[0]["reduction_ratio"],
        "min_reduction_ratio": min(ratios) if ratios else None,
        "max_violations": max(r["violations"] for r in rows),
    }
    _write_json(out / "metrics.json", metrics)
    return metrics


def cmd_bench(sweep, repeats: int, out: Path | None) -> dict:
    report = run_benchmark(sweep, repeats)
    print(f"{'n_w':>6s} {'median ns/step':>16s} {'factorizations':>15s}")
    for row in report["rows"]:
        print(f"{row['n_w']:6d} {row['median_ns']:16.0f} {row['factorizations']:15d}")
    if report["slope"] is None:
        print("log-log slope: n/a (single size)")
    else:
        print(f"log-log slope: {report['slope']:.3f} (bound {report['max_slope']})")
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "bench.json", report)
    return report


PHASES = {
    "scripted": trace_io.PHASE_SCRIPTED,
    "calibration": trace_io.PHASE_CALIBRATION,
    "controller": trace_io.PHASE_CONTROLLER,
}


def cmd_replay(trace_path, model_path, out_path: Path | None, phase: str | None = None) -> np.ndarray:
    G = load_model(model_path)
    data = trace_io.read_csv(trace_path)
    if phase is not None:
        data = data[data[:, trace_io.COL["phase"]] == PHASES[phase]]
    if len(data) == 0:
        raise InvalidInputError(f"{trace_path}: trace has no rows to replay")
    W = np.array([feature_map(trace_io.row_pose(r), trace_io.row_command(r)) for r in data])
    predicted = W @ G.T
    measured = data[:, trace_io.COL["f_x"]:trace_io.COL["f_x"] + 6]
    rmse = _rmse(measured, predicted)
    if out_path is not None:
        header = ["step"] + [f"{c}{suffix}" for c in CHANNELS for suffix in ("", "_pred")]
        paired = np.empty((len(data), 12))
        paired[:, 0::2] = measured
        paired[:, 1::2] = predicted
        with open(out_path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for step, row in zip(data[:, 0], paired):
                fh.write(",".join([str(int(step))] + [format(v, ".17g") for v in row]) + "\n")
    print("per-channel RMSE:")
    for name, value in zip(CHANNELS, rmse):
        print(f"  {name:6s} {value:.6g}")
    return rmse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lml-contact", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="INI configuration file")
        p.add_argument("--seed", type=int, help="override [experiment] seed")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--contact-model", choices=CONTACT_MODELS)

    p = sub.add_parser("calibrate", help="run a calibration sequence and learn the wrench model")
    common(p)
    p.add_argument("--steps", type=int, help="number of calibration samples (default duration x rate)")
    p.add_argument("--regularize-interval", type=int, help="apply adaptive regularization every N updates")

    p = sub.add_parser("align", help="scripted insertion followed by the alignment controller")
    common(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--no-controller", action="store_true", help="keep the scripted command (baseline)")
    p.add_argument("--scenarios", type=int, help="run N seeded misalignment scenarios")

    p = sub.add_parser("bench", help="time the filter step over a sweep of feature sizes")
    p.add_argument("--sweep", default="19,190,1900", help="comma separated feature sizes")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("replay", help="recompute model predictions for a recorded trace")
    p.add_argument("trace", type=Path)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--out", type=Path, help="paired measured/predicted CSV")
    p.add_argument("--phase", choices=tuple(PHASES), help="replay only rows from this phase")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "calibrate":
            if args.steps is not None and args.steps < 0:
                raise InvalidConfigError("--steps must be nonnegative")
            cmd_calibrate(_configure(args), args.out, args.steps)
        elif args.command == "align":
            cmd_align(_configure(args), args.model, args.out, not args.no_controller, args.scenarios)
        elif args.command == "bench":
            try:
                sweep = [int(v) for v in args.sweep.split(",") if v.strip()]
            except ValueError:
                raise InvalidConfigError(f"bad --sweep {args.sweep!r}") from None
            if not sweep or min(sweep) < 1:
                raise InvalidConfigError("--sweep values must be >= 1")
            report = cmd_bench(sweep, args.repeats, args.out)
            if not report["slope_ok"] or report["factorizations"]:
                print("benchmark bound violated", file=sys.stderr)
                return EXIT_INVARIANT
        elif args.command == "replay":
            cmd_replay(args.trace, args.model, args.out, args.phase)
    except InvalidConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ExcitationError, InvariantViolation) as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (InvalidInputError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
