"""Command-line entry point.

Subcommands:

* ``collect`` -- drive the excitation experiment and persist the history
  stack (plus figures of the excitation run).
* ``run``     -- execute a station-keeping experiment; writes the
  trajectory CSV, the report JSON, and the figure set.
* ``oracle``  -- print the Riccati solution and mapped value weights as
  JSON.
* ``check``   -- stack and gain diagnostics for a persisted stack.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiment, report, riccati, sysid
from .adp import QuadraticBasis, weights_from_value_matrix
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .dynamics import N_PARAMS, STATE_DIM
from .sim import Trajectory
from .sysid import IdentifierState, RankConditionError


def _config_from_args(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else parse_config("")
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "mode", None) is not None:
        overrides["mode"] = args.mode
    return cfg.with_overrides(overrides) if overrides else cfg


def _cmd_collect(args) -> int:
    cfg = _config_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        stack, trajectory = experiment.collect(cfg)
    except RankConditionError as exc:
        print(f"collection failed: {exc}", file=sys.stderr)
        return 1
    stack_path = out / "stack.csv"
    sysid.save_stack(stack, stack_path)
    trajectory.to_csv(out / "collect_trajectory.csv")
    report.render_collect_figures(trajectory, out)
    ok, y_min = sysid.rank_condition(stack)
    print(f"stack: {len(stack)} entries -> {stack_path}")
    print(f"rank condition: {'satisfied' if ok else 'FAILED'} "
          f"(y_min={y_min:.6g}, sigma_min={stack.min_singular_value():.6g})")
    return 0


def _cmd_run(args) -> int:
    cfg = _config_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stack = None
    try:
        if cfg.mode != "linear-test":
            if not args.stack:
                print("run: --stack is required outside linear-test mode",
                      file=sys.stderr)
                return 1
            stack = sysid.load_stack(args.stack, cfg.vehicle_params())
        trajectory, controller, wall = experiment.run(cfg, stack)
    except RankConditionError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    csv_path = out / "trajectory.csv"
    trajectory.to_csv(csv_path)
    persisted = Trajectory.from_csv(csv_path)
    run_report = experiment.report_from_trajectory(persisted, wall)
    experiment.write_report(run_report, out / "report.json")
    report.render_run_figures(persisted, out,
                              theta_true=cfg["vehicle.theta"])
    print(f"trajectory: {csv_path}")
    for key in ("final_xy_norm", "final_psi_abs", "final_theta_err_norm",
                "time_to_xy_threshold", "max_abs_delta", "min_lambda_min"):
        print(f"  {key} = {run_report[key]}")
    return 0


def _cmd_oracle(args) -> int:
    cfg = _config_from_args(args)
    params = cfg.vehicle_params()
    theta = params.true_theta.as_array() if args.theta == "true" \
        else np.zeros(N_PARAMS)
    basis = QuadraticBasis()
    cost = cfg.cost_weights()
    model = riccati.linearize(params, theta)
    solution = riccati.solve_are(model, cost.Q, cost.R)
    payload = {
        "P": solution.P.tolist(),
        "K": solution.K.tolist(),
        "weights": weights_from_value_matrix(basis, solution.P).tolist(),
        "are_residual": riccati.are_residual(model, cost.Q, cost.R, solution.P),
    }
    print(json.dumps(payload, indent=2))
    return 0


def _cmd_check(args) -> int:
    cfg = _config_from_args(args)
    params = cfg.vehicle_params()
    try:
        stack = sysid.load_stack(args.stack, params)
    except RankConditionError as exc:
        print(f"stack check failed: {exc}", file=sys.stderr)
        return 1
    ok, y_min = sysid.rank_condition(stack)
    print(f"entries: {len(stack)}")
    print(f"rank condition: {'satisfied' if ok else 'FAILED'} (y_min={y_min:.6g})")
    print(f"sigma_min: {stack.min_singular_value():.6g}")
    ident = IdentifierState(
        zeta_hat=np.zeros(STATE_DIM), theta_hat=np.zeros(N_PARAMS),
        k_zeta=cfg["sysid.k_zeta"], gamma_theta=cfg["sysid.gamma_theta"],
        k_theta=cfg["sysid.k_theta"])
    if args.dbar > 0.0:
        for entry in stack.entries:
            entry.deriv_err = args.dbar
    alpha, bound = sysid.convergence_diagnostics(ident, stack)
    print(f"contraction rate alpha: {alpha:.6g}")
    print(f"ultimate bound (d_bar={stack.d_bar:.3g}): {bound:.6g}")
    gramian = stack.gramian()
    gamma = cfg["sysid.gamma_theta"]
    scaled = np.sqrt(gamma)[:, None] * gramian * np.sqrt(gamma)[None, :]
    rate_max = cfg["sysid.k_theta"] * float(np.max(np.linalg.eigvalsh(scaled)))
    print(f"fastest parameter mode x dt: {rate_max * cfg['sim.dt']:.4g} "
          "(must stay well below 2 for a stable update)")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stationkeep",
        description="Station-keeping laboratory: excitation data collection, "
                    "online learning runs, and Riccati diagnostics.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="configuration file (omit for defaults)")
    common.add_argument("--seed", type=str, default=None, help="override the seed")
    common.add_argument("--mode", default=None,
                        choices=["time-varying", "constant-current", "linear-test"],
                        help="override the experiment mode")

    p_collect = sub.add_parser("collect", parents=[common],
                               help="record excitation data and build the stack")
    p_collect.add_argument("--out", default="out", help="output directory")
    p_collect.set_defaults(func=_cmd_collect)

    p_run = sub.add_parser("run", parents=[common],
                           help="execute a station-keeping experiment")
    p_run.add_argument("--stack", help="history stack CSV from 'collect'")
    p_run.add_argument("--out", default="out", help="output directory")
    p_run.set_defaults(func=_cmd_run)

    p_oracle = sub.add_parser("oracle", parents=[common],
                              help="print the Riccati solution as JSON")
    p_oracle.add_argument("--theta", choices=["true", "zero"], default="true",
                          help="linearize with the true or the zero parameters")
    p_oracle.set_defaults(func=_cmd_oracle)

    p_check = sub.add_parser("check", parents=[common],
                             help="diagnostics for a persisted stack")
    p_check.add_argument("--stack", required=True, help="history stack CSV")
    p_check.add_argument("--dbar", type=float, default=0.0,
                         help="assumed derivative-error bound for the ultimate bound")
    p_check.set_defaults(func=_cmd_check)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
