"""Command-line surface: scenario synthesis, single solves, and Monte Carlo sweeps.

Exit codes: 0 success, 2 usage/config errors, 1 numerical failures.  All
external files are plain text (key-value scenarios, CSV matrices/metrics,
JSON results) with angles in degrees and 1-based sensor indices.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .harness import (
    ExperimentSpec,
    overloaded_array_scenario,
    paired_sources_scenario,
    run_experiment,
    sparse_array_scenario,
    tightness_trials,
    triplet_sources_scenario,
    write_metrics_csv,
    write_tightness_csv,
)
from .model import Observation, load_scenario, make_observation, save_scenario
from .retrieval import estimate_parameters
from .solver import SolverConfig, build_problem, load_solver_config, solve

__all__ = ["main", "cli_main"]


class UsageError(Exception):
    """Bad flags or malformed config files; maps to exit code 2."""


def write_complex_csv(matrix, path):
    """One row per sensor, entries as Python complex literals."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in np.atleast_2d(matrix):
            fh.write(",".join(repr(complex(v)) for v in row) + "\n")


def read_complex_csv(path):
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([complex(tok) for tok in line.split(",")])
    return np.array(rows, dtype=complex)


def _load_scenario_checked(path):
    try:
        return load_scenario(path)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read scenario {path}: {exc}") from exc


def _parse_value_list(text):
    try:
        return [float(tok) for tok in text.replace(",", " ").split()]
    except ValueError as exc:
        raise UsageError(f"malformed value list {text!r}") from exc


def _cmd_synth(args):
    scenario = _load_scenario_checked(args.config)
    if args.seed is not None:
        scenario.seed = args.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(scenario.seed)
    obs, ens = make_observation(scenario, rng=rng)
    save_scenario(scenario, out / "scenario.cfg")
    write_complex_csv(obs.y, out / "Y.csv")
    truth = {
        "theta_deg": [float(v) for v in np.degrees(ens.theta)],
        "b": [float(v) for v in ens.b],
        "phi_rad": [[float(v) for v in row] for row in ens.phi],
        "omega_1based": [int(q) + 1 for q in obs.geometry.omega],
        "snr_db": scenario.snr_db,
        "seed": scenario.seed,
    }
    (out / "truth.json").write_text(json.dumps(truth, indent=2) + "\n", encoding="utf-8")
    print(f"wrote scenario.cfg, Y.csv, truth.json to {out}")
    return 0


def _cmd_solve(args):
    scenario = _load_scenario_checked(args.config)
    if args.seed is not None:
        scenario.seed = args.seed
    if args.data is not None:
        y = read_complex_csv(args.data)
        geom = scenario.geometry
        if y.shape != (geom.n_virtual, scenario.l):
            raise UsageError(
                f"data shape {y.shape} does not match scenario ({geom.n_virtual}, {scenario.l})")
        obs = Observation(y=y, geometry=geom, snr_db=scenario.snr_db)
    else:
        obs, _ = make_observation(scenario)
    prob = build_problem(obs, scenario.k)
    if args.solver_config is not None:
        try:
            cfg = load_solver_config(args.solver_config)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read solver config: {exc}") from exc
        if args.max_iter is not None:
            cfg.max_iter = args.max_iter
    else:
        cfg = SolverConfig.default_for(prob, max_iter=args.max_iter)
    report = solve(prob, cfg, diag_csv=args.diag)
    result = estimate_parameters(report.x_hat, report.t_hat, scenario.k)
    payload = {
        "theta_hat": [float(v) for v in np.degrees(result.theta_hat)],
        "b_hat": [float(v) for v in result.b_hat],
        "phi_hat": [[float(np.degrees(np.angle(v))) for v in row] for row in result.phi_hat],
        "fit_residual": result.fit_residual,
    }
    text = json.dumps(payload, indent=2) + "\n"
    if args.out is not None:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if not report.converged:
        print(f"warning: solver hit max_iter={cfg.max_iter} "
              f"(primal={report.final_primal:.3e}, dual={report.final_dual:.3e})",
              file=sys.stderr)
    return 0


def _experiment_from_args(args):
    scenario = _load_scenario_checked(args.config)
    sweep = args.sweep
    values = _parse_value_list(args.values) if args.values else None
    if args.snr is not None:
        sweep, values = "snr_db", _parse_value_list(args.snr)
    if args.snapshots is not None:
        sweep, values = "L", _parse_value_list(args.snapshots)
    if sweep is not None and values is None:
        raise UsageError("--sweep requires --values")
    try:
        return ExperimentSpec(
            scenario=scenario,
            trials=args.trials,
            seed=args.seed,
            sweep=sweep,
            sweep_values=tuple(values) if values else (),
            estimators=tuple(args.estimators.split(",")),
            max_iter=args.max_iter,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _write_experiment(results, out, timing):
    out = Path(out)
    paths = []
    for est, rows in results.items():
        path = out if len(results) == 1 else out.with_name(f"{out.stem}_{est}{out.suffix}")
        write_metrics_csv(rows, path, include_timing=timing)
        paths.append(str(path))
    print("wrote " + ", ".join(paths))


def _cmd_mc(args):
    spec = _experiment_from_args(args)
    results = run_experiment(spec)
    _write_experiment(results, args.out, args.timing)
    return 0


def _cmd_tightness(args):
    snr_values = _parse_value_list(args.snr) if args.snr else [20.0]
    if args.trials < 1:
        raise UsageError("trials must be >= 1")
    rows = tightness_trials(args.sensors, args.sources, args.snapshots,
                            snr_values, args.trials, args.seed, max_iter=args.max_iter)
    write_tightness_csv(rows, args.out)
    print(f"wrote {args.out}")
    return 0


_SWEEP_PRESETS = {
    # id: (scenario factory, sweep, values, estimators, default trials)
    "4": (lambda: paired_sources_scenario(snr_db=20.0, l=3),
          "separation_deg", (2.0, 4.0, 6.0, 8.0, 10.0), ("smart", "root_music"), 25),
    "5": (lambda: triplet_sources_scenario(snr_db=20.0),
          "L", (2.0, 3.0, 5.0, 9.0, 20.0), ("smart", "root_music"), 25),
    "6": (lambda: paired_sources_scenario(snr_db=20.0, l=3, pinned_phases=True),
          "snr_db", (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0), ("smart", "root_music"), 25),
    "7": (lambda: sparse_array_scenario(),
          "snr_db", (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0), ("smart",), 25),
}


def _cmd_plot_data(args):
    if args.figure == "3":
        trials = args.trials if args.trials is not None else 20
        rows = tightness_trials(15, 3, 5, [0.0, 10.0, 20.0, 30.0, 40.0],
                                trials, args.seed, max_iter=args.max_iter)
        write_tightness_csv(rows, args.out)
        print(f"wrote {args.out}")
        return 0
    factory, sweep, values, estimators, default_trials = _SWEEP_PRESETS[args.figure]
    spec = ExperimentSpec(
        scenario=factory(),
        trials=args.trials if args.trials is not None else default_trials,
        seed=args.seed,
        sweep=sweep,
        sweep_values=values,
        estimators=estimators,
        max_iter=args.max_iter,
    )
    results = run_experiment(spec)
    _write_experiment(results, args.out, args.timing)
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="smartdoa",
        description="Constant-modulus DOA estimation via structured matrix recovery.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a dataset from a scenario file")
    p.add_argument("--config", required=True, help="scenario file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("solve", help="solve one dataset and emit the estimate as JSON")
    p.add_argument("--config", required=True)
    p.add_argument("--data", default=None, help="complex CSV; synthesized when omitted")
    p.add_argument("--out", default=None, help="JSON path (stdout when omitted)")
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--solver-config", default=None)
    p.add_argument("--diag", default=None, help="per-iteration CSV dump")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("mc", help="Monte Carlo sweep; metrics CSV per estimator")
    p.add_argument("--config", required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--estimators", default="smart",
                   help="comma-separated subset of smart,root_music")
    p.add_argument("--sweep", choices=("snr_db", "L", "separation_deg", "K"), default=None)
    p.add_argument("--values", default=None, help="comma-separated sweep values")
    p.add_argument("--snr", default=None, help="shorthand for --sweep snr_db --values ...")
    p.add_argument("--snapshots", default=None, help="shorthand for --sweep L --values ...")
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--timing", action="store_true",
                   help="write measured runtimes (breaks byte-reproducibility)")
    p.set_defaults(func=_cmd_mc)

    p = sub.add_parser("tightness", help="singular-value ratio histogram data")
    p.add_argument("--out", required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--snr", default=None, help="comma-separated SNR values (default 20)")
    p.add_argument("--sensors", type=int, default=15)
    p.add_argument("--sources", type=int, default=3)
    p.add_argument("--snapshots", type=int, default=5)
    p.add_argument("--max-iter", type=int, default=None)
    p.set_defaults(func=_cmd_tightness)

    p = sub.add_parser("plot-data", help="CSV for one of the canonical benchmark sweeps")
    p.add_argument("--figure", required=True, choices=tuple("34567"),
                   help="3=rank-gap histogram, 4=vs separation, 5=vs snapshots, "
                        "6=vs SNR, 7=vs SNR on the sparse array")
    p.add_argument("--out", required=True)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--timing", action="store_true")
    p.set_defaults(func=_cmd_plot_data)

    return parser


def cli_main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ZeroDivisionError, np.linalg.LinAlgError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    raise SystemExit(cli_main())
