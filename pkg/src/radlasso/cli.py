"""Command-line front end.

Subcommands: fit, single-fit, somp, bcd, cv, simulate, benchmark, segment,
frame, theory.  Every command is a pure function of (input files, flags,
seed); outputs are CSV for data and JSON for metadata, with one
"generated_at" timestamp field per JSON report.  Exit codes: 0 success,
2 usage/input error, 3 internal numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import SsaProblem, bcd_l1l2, bcd_select, somp, somp_select
from .bench import ScenarioConfig, generate, run_benchmark, scenario_design
from .frame import frame_matrix, frame_spec
from .io import read_signal_csv, segment_offsets, write_matrix_csv
from .model import grouped_design
from .solver import FitConfig, cv_select, fit_group_lasso, fit_single_channel
from .theory import check_oracle, check_proposition, estimate_phi, lambda0

DEFAULT_LOW = (1, 2, 1, 4)
DEFAULT_HIGH = (8, 9, 3, 10)


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write_json(path: Path, payload: dict) -> None:
    payload = dict(payload)
    payload["generated_at"] = _timestamp()
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fit_config(args) -> FitConfig:
    return FitConfig(
        lam=getattr(args, "lam", None),
        max_iterations=args.max_iter,
        tolerance=args.tol,
        lambda_grid_size=args.grid_size,
        lambda_min_ratio=args.min_ratio,
        cv_folds=args.folds,
        seed=args.seed,
    )


def _design_from_args(args, n: int, k: int):
    low = frame_spec(*args.low_frame, n)
    high = frame_spec(*args.high_frame, n)
    return grouped_design(frame_matrix(low), frame_matrix(high), k)


def _fit_payload(args, fit, cv_result, files: dict) -> dict:
    payload = {
        "method": fit.method if hasattr(fit, "method") else "multi-c",
        "lambda": fit.lam,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "active_alpha": fit.active_alpha.tolist(),
        "active_beta": fit.active_beta.tolist(),
        "files": files,
        "seed": args.seed,
        "version": __version__,
    }
    if not fit.converged:
        payload["warning"] = "solver did not reach tolerance within max_iter"
    if cv_result is not None:
        payload["cv"] = {
            "grid": cv_result.grid.tolist(),
            "errors": cv_result.errors.tolist(),
            "lambda_star": cv_result.lam_star,
        }
    return payload


def cmd_fit(args) -> int:
    y = read_signal_csv(args.input)
    design = _design_from_args(args, y.shape[0], y.shape[1])
    config = _fit_config(args)
    cv_result = None
    if config.lam is None:
        cv_result = cv_select(y, design, config)
        config = replace(config, lam=cv_result.lam_star)
    fit = fit_group_lasso(y, design, config)
    out = _out_dir(args)
    write_matrix_csv(out / "c_hat.csv", fit.c_hat[:, None])
    write_matrix_csv(out / "u_hat.csv", fit.u_hat)
    write_matrix_csv(out / "f_hat.csv", fit.c_hat[:, None] + fit.u_hat)
    files = {"c_hat": "c_hat.csv", "u_hat": "u_hat.csv", "f_hat": "f_hat.csv"}
    _write_json(out / "fit.json", _fit_payload(args, fit, cv_result, files))
    return 0


def cmd_single_fit(args) -> int:
    y = read_signal_csv(args.input)
    design = _design_from_args(args, y.shape[0], y.shape[1])
    fits = fit_single_channel(y, design, _fit_config(args))
    out = _out_dir(args)
    c_hat = np.column_stack([f.c_hat for f in fits])
    u_hat = np.column_stack([f.u_hat[:, 0] for f in fits])
    write_matrix_csv(out / "c_hat.csv", c_hat)
    write_matrix_csv(out / "u_hat.csv", u_hat)
    write_matrix_csv(out / "f_hat.csv", c_hat + u_hat)
    payload = {
        "method": "single-c",
        "lambda": [f.lam for f in fits],
        "iterations": [f.iterations for f in fits],
        "converged": all(f.converged for f in fits),
        "active_alpha": [f.active_alpha.tolist() for f in fits],
        "active_beta": [f.active_beta.tolist() for f in fits],
        "files": {"c_hat": "c_hat.csv", "u_hat": "u_hat.csv", "f_hat": "f_hat.csv"},
        "seed": args.seed,
        "version": __version__,
    }
    _write_json(out / "fit.json", payload)
    return 0


def _baseline_outputs(args, design, coefficients, payload) -> int:
    out = _out_dir(args)
    d1 = design.d1
    c_hat = design.psi @ coefficients[:d1]
    u_hat = design.phi @ coefficients[d1:]
    write_matrix_csv(out / "coefficients.csv", coefficients)
    write_matrix_csv(out / "c_hat.csv", c_hat)
    write_matrix_csv(out / "u_hat.csv", u_hat)
    write_matrix_csv(out / "f_hat.csv", c_hat + u_hat)
    payload["files"] = {
        "coefficients": "coefficients.csv",
        "c_hat": "c_hat.csv",
        "u_hat": "u_hat.csv",
        "f_hat": "f_hat.csv",
    }
    payload["version"] = __version__
    _write_json(out / "fit.json", payload)
    return 0


def cmd_somp(args) -> int:
    y = read_signal_csv(args.input)
    design = _design_from_args(args, y.shape[0], y.shape[1])
    problem = SsaProblem(s=y, omega=np.hstack([design.psi, design.phi]))
    if args.t is not None:
        t_star, errors = args.t, None
    else:
        t_star, errors = somp_select(problem, args.t_max, args.folds)
    result = somp(problem, t_star)
    payload = {
        "method": "somp",
        "t": t_star,
        "selected": result.selected,
        "rank_deficient": result.rank_deficient,
        "seed": args.seed,
    }
    if errors is not None:
        payload["cv"] = {"errors": errors.tolist(), "t_star": t_star}
    return _baseline_outputs(args, design, result.coefficients, payload)


def cmd_bcd(args) -> int:
    y = read_signal_csv(args.input)
    design = _design_from_args(args, y.shape[0], y.shape[1])
    problem = SsaProblem(s=y, omega=np.hstack([design.psi, design.phi]))
    if args.lam is not None:
        lam_star, grid, errors = args.lam, None, None
    else:
        lam_star, grid, errors = bcd_select(
            problem, n_folds=args.folds, grid_size=args.grid_size,
            min_ratio=args.min_ratio, tol=args.tol, max_sweeps=args.max_iter,
        )
    result = bcd_l1l2(problem, lam_star, tol=args.tol, max_sweeps=args.max_iter)
    payload = {
        "method": "bcd",
        "lambda": lam_star,
        "iterations": result.iterations,
        "converged": result.converged,
        "seed": args.seed,
    }
    if errors is not None:
        payload["cv"] = {
            "grid": grid.tolist(),
            "errors": errors.tolist(),
            "lambda_star": lam_star,
        }
    if not result.converged:
        payload["warning"] = "solver did not reach tolerance within max_iter"
    return _baseline_outputs(args, design, result.coefficients, payload)


def cmd_cv(args) -> int:
    y = read_signal_csv(args.input)
    design = _design_from_args(args, y.shape[0], y.shape[1])
    cv_result = cv_select(y, design, _fit_config(args))
    out = _out_dir(args)
    _write_json(
        out / "cv.json",
        {
            "grid": cv_result.grid.tolist(),
            "errors": cv_result.errors.tolist(),
            "lambda_star": cv_result.lam_star,
            "folds": args.folds,
            "seed": args.seed,
            "version": __version__,
        },
    )
    return 0


def _scenario_config(args) -> ScenarioConfig:
    return ScenarioConfig(
        scenario=args.scenario,
        snr=args.snr,
        n_channels=args.channels,
        n=args.n,
        seed=args.seed,
        zero_third_channel=args.zero_third_channel,
        replications=getattr(args, "replications", 1),
        fixed_signal=not getattr(args, "redraw_signal", False),
    )


def cmd_simulate(args) -> int:
    config = _scenario_config(args)
    design = scenario_design(config.n, config.n_channels)
    dataset = generate(config, design.psi, design.phi, replication=args.replication)
    out = _out_dir(args)
    write_matrix_csv(out / "y.csv", dataset.y)
    write_matrix_csv(out / "c_true.csv", dataset.c_true[:, None])
    write_matrix_csv(out / "u_true.csv", dataset.u_true)
    _write_json(
        out / "dataset.json",
        {
            "scenario": config.scenario,
            "snr": config.snr if math.isfinite(config.snr) else "inf",
            "n": config.n,
            "channels": config.n_channels,
            "seed": config.seed,
            "replication": args.replication,
            "zero_third_channel": config.zero_third_channel,
            "sigma": dataset.sigma,
            "support_alpha": dataset.support_alpha.tolist(),
            "support_beta": dataset.support_beta.tolist(),
            "files": {"y": "y.csv", "c_true": "c_true.csv", "u_true": "u_true.csv"},
            "version": __version__,
        },
    )
    return 0


def cmd_benchmark(args) -> int:
    config = _scenario_config(args)
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    fit_config = FitConfig(
        max_iterations=args.max_iter,
        tolerance=args.tol,
        lambda_grid_size=args.grid_size,
        lambda_min_ratio=args.min_ratio,
        cv_folds=args.folds,
        seed=args.seed,
    )
    result = run_benchmark(config, methods, fit_config=fit_config,
                           somp_max_atoms=args.t_max)
    out = _out_dir(args)
    with (out / "metrics.csv").open("w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["method", "channel", "indicator", "mean", "sd"]
        )
        writer.writeheader()
        writer.writerows(
            {k: row[k] for k in writer.fieldnames} for row in result.rows
        )
    with (out / "replications.csv").open("w", newline="") as fh:
        writer = csv.DictWriter(
            fh,
            fieldnames=[
                "method", "channel", "indicator", "replication", "value",
                "converged",
            ],
        )
        writer.writeheader()
        writer.writerows(result.replication_rows)
    _write_json(
        out / "manifest.json",
        {
            "scenario": config.scenario,
            "snr": config.snr if math.isfinite(config.snr) else "inf",
            "n": config.n,
            "channels": config.n_channels,
            "replications": config.replications,
            "fixed_signal": config.fixed_signal,
            "zero_third_channel": config.zero_third_channel,
            "methods": list(methods),
            "seed": config.seed,
            "not_converged": result.n_not_converged,
            "files": {
                "metrics": "metrics.csv",
                "replications": "replications.csv",
            },
            "version": __version__,
        },
    )
    return 0


def cmd_segment(args) -> int:
    y = read_signal_csv(args.input)
    offsets = segment_offsets(y.shape[0], args.window, args.stride)
    out = _out_dir(args)
    files = []
    for i, start in enumerate(offsets):
        name = f"window_{i:04d}.csv"
        write_matrix_csv(out / name, y[start : start + args.window])
        files.append(name)
    _write_json(
        out / "windows.json",
        {
            "window": args.window,
            "stride": args.stride,
            "n": int(y.shape[0]),
            "channels": int(y.shape[1]),
            "offsets": offsets,
            "files": files,
            "version": __version__,
        },
    )
    return 0


def cmd_frame(args) -> int:
    spec = frame_spec(args.p, args.q, args.s, args.J, args.n)
    dictionary = frame_matrix(spec)
    out = _out_dir(args)
    write_matrix_csv(out / "frame.csv", dictionary.matrix)
    _write_json(
        out / "frame.json",
        {
            "p": spec.p,
            "q": spec.q,
            "s": spec.s,
            "J": spec.J,
            "n": spec.n,
            "wavelet_counts": list(spec.wavelet_counts),
            "scaling_count": spec.scaling_count,
            "d": spec.total,
            "column_norms": dictionary.column_norms.tolist(),
            "files": {"matrix": "frame.csv"},
            "version": __version__,
        },
    )
    return 0


def cmd_theory(args) -> int:
    if args.action == "lambda0":
        lam_alpha, lam_beta, lam0 = lambda0(
            args.x, args.sigma, args.n, args.channels, args.d1, args.d2
        )
        payload = {
            "x": args.x,
            "sigma": args.sigma,
            "lambda0_alpha": lam_alpha,
            "lambda0_beta": lam_beta,
            "lambda0": lam0,
        }
    elif args.action == "proposition":
        report = check_proposition(
            args.which, args.n, args.channels, args.d1, args.d2,
            args.sigma, args.x, args.trials, seed=args.seed,
        )
        payload = report.to_dict()
    else:  # oracle
        config = ScenarioConfig(
            scenario=args.scenario,
            snr=args.snr,
            n_channels=args.channels,
            n=args.n,
            seed=args.seed,
        )
        design = scenario_design(config.n, config.n_channels)
        dataset = generate(config, design.psi, design.phi,
                           replication=args.replication)
        _, _, lam0 = lambda0(
            args.x, dataset.sigma, design.n, design.n_channels,
            design.d1, design.d2,
        )
        fit = fit_group_lasso(
            dataset.y, design,
            FitConfig(lam=2.0 * lam0, seed=args.seed),
        )
        groups = np.concatenate(
            [dataset.support_alpha, design.d1 + dataset.support_beta]
        )
        phi_hat = estimate_phi(design, groups, samples=args.phi_samples,
                               seed=args.seed)
        report = check_oracle(dataset, fit, design, args.x, phi_hat)
        payload = report.to_dict()
        payload["phi_estimate"] = phi_hat
        payload["lambda"] = fit.lam
    payload["version"] = __version__
    payload["generated_at"] = _timestamp()
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text)
    if args.out is not None:
        Path(args.out).write_text(text + "\n")
    return 0


def _add_common(sub, with_input=True):
    if with_input:
        sub.add_argument("--input", required=True, help="input CSV (rows = samples)")
    sub.add_argument("--out-dir", default=".", help="output directory")
    sub.add_argument("--config", default=None, help="JSON file with flag defaults")
    sub.add_argument("--seed", type=int, default=0)


def _add_frames(sub):
    sub.add_argument("--low-frame", type=int, nargs=4, default=list(DEFAULT_LOW),
                     metavar=("P", "Q", "S", "J"))
    sub.add_argument("--high-frame", type=int, nargs=4, default=list(DEFAULT_HIGH),
                     metavar=("P", "Q", "S", "J"))


def _add_solver(sub, with_lam=True):
    if with_lam:
        sub.add_argument("--lam", type=float, default=None,
                         help="penalty level; omit to select by CV")
    sub.add_argument("--grid-size", type=int, default=100)
    sub.add_argument("--min-ratio", type=float, default=1e-3)
    sub.add_argument("--folds", type=int, default=5)
    sub.add_argument("--tol", type=float, default=1e-6)
    sub.add_argument("--max-iter", type=int, default=10_000)


def _add_scenario(sub):
    sub.add_argument("--scenario", type=int, choices=(1, 2, 3), required=True)
    sub.add_argument("--snr", type=float, required=True)
    sub.add_argument("--channels", type=int, default=3)
    sub.add_argument("--n", type=int, default=256)
    sub.add_argument("--zero-third-channel", action="store_true")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="radlasso",
        description="Multichannel decomposition over rational-dilation "
        "wavelet dictionaries",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    commands = {}

    sub = subparsers.add_parser("fit", help="multichannel group-lasso fit")
    _add_common(sub)
    _add_frames(sub)
    _add_solver(sub)
    sub.set_defaults(func=cmd_fit)
    commands["fit"] = sub

    sub = subparsers.add_parser("single-fit", help="per-channel lasso fit")
    _add_common(sub)
    _add_frames(sub)
    _add_solver(sub)
    sub.set_defaults(func=cmd_single_fit)
    commands["single-fit"] = sub

    sub = subparsers.add_parser("somp", help="simultaneous OMP baseline")
    _add_common(sub)
    _add_frames(sub)
    sub.add_argument("--t", type=int, default=None, help="sparsity budget")
    sub.add_argument("--t-max", type=int, default=128)
    sub.add_argument("--folds", type=int, default=5)
    sub.set_defaults(func=cmd_somp)
    commands["somp"] = sub

    sub = subparsers.add_parser("bcd", help="l1/l2 block coordinate descent baseline")
    _add_common(sub)
    _add_frames(sub)
    _add_solver(sub)
    sub.set_defaults(func=cmd_bcd)
    commands["bcd"] = sub

    sub = subparsers.add_parser("cv", help="cross-validation curve only")
    _add_common(sub)
    _add_frames(sub)
    _add_solver(sub, with_lam=False)
    sub.set_defaults(func=cmd_cv)
    commands["cv"] = sub

    sub = subparsers.add_parser("simulate", help="draw one synthetic dataset")
    _add_common(sub, with_input=False)
    _add_scenario(sub)
    sub.add_argument("--replication", type=int, default=0)
    sub.add_argument("--redraw-signal", action="store_true",
                     help="redraw supports per replication")
    sub.set_defaults(func=cmd_simulate)
    commands["simulate"] = sub

    sub = subparsers.add_parser("benchmark", help="multi-replication benchmark")
    _add_common(sub, with_input=False)
    _add_scenario(sub)
    sub.add_argument("--replications", type=int, default=100)
    sub.add_argument("--methods", default="multi-c,single-c")
    sub.add_argument("--redraw-signal", action="store_true")
    sub.add_argument("--t-max", type=int, default=128)
    _add_solver(sub, with_lam=False)
    sub.set_defaults(func=cmd_benchmark)
    commands["benchmark"] = sub

    sub = subparsers.add_parser("segment", help="split a CSV into windows")
    _add_common(sub)
    sub.add_argument("--window", type=int, required=True)
    sub.add_argument("--stride", type=int, required=True)
    sub.set_defaults(func=cmd_segment)
    commands["segment"] = sub

    sub = subparsers.add_parser("frame", help="materialize a dictionary matrix")
    _add_common(sub, with_input=False)
    sub.add_argument("--p", type=int, required=True)
    sub.add_argument("--q", type=int, required=True)
    sub.add_argument("--s", type=int, required=True)
    sub.add_argument("--J", type=int, required=True)
    sub.add_argument("--n", type=int, required=True)
    sub.set_defaults(func=cmd_frame)
    commands["frame"] = sub

    sub = subparsers.add_parser("theory", help="theory diagnostics as JSON")
    sub.add_argument("action", choices=("lambda0", "proposition", "oracle"))
    sub.add_argument("--config", default=None)
    sub.add_argument("--out", default=None, help="also write the JSON here")
    sub.add_argument("--x", type=float, default=2.0)
    sub.add_argument("--sigma", type=float, default=1.0)
    sub.add_argument("--n", type=int, default=256)
    sub.add_argument("--channels", type=int, default=3)
    sub.add_argument("--d1", type=int, default=256)
    sub.add_argument("--d2", type=int, default=557)
    sub.add_argument("--which", type=int, choices=(1, 2, 3), default=1)
    sub.add_argument("--trials", type=int, default=10_000)
    sub.add_argument("--scenario", type=int, choices=(1, 2, 3), default=3)
    sub.add_argument("--snr", type=float, default=6.0)
    sub.add_argument("--replication", type=int, default=0)
    sub.add_argument("--phi-samples", type=int, default=200)
    sub.add_argument("--seed", type=int, default=0)
    sub.set_defaults(func=cmd_theory)
    commands["theory"] = sub

    return parser, commands


def _apply_config_file(args, argv, parser, commands):
    path = getattr(args, "config", None)
    if not path:
        return args
    try:
        overrides = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(overrides, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    sub = commands[args.command]
    valid = {action.dest for action in sub._actions}
    unknown = set(overrides) - valid
    if unknown:
        raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
    sub.set_defaults(**overrides)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser, commands = _build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_config_file(args, argv, parser, commands)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
