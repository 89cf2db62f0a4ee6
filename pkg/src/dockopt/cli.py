"""Command line entry point: offline runs emitting plot-ready files.

Subcommands: ``solve`` (one duration), ``sweep`` (a list of durations), and
``check-config`` (validate and exit). Exit codes: 0 success, 1 usage or
configuration error, 2 no feasible trajectory, 3 conic solver failure.
Numeric output uses shortest round-trip float printing, so identical
configurations reproduce byte-identical files; wall-clock timings go to a
separate file excluded from that guarantee.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import quaternions as quat
from .config import ConfigError, RunConfig, load_config
from .conic import default_solver
from .driver import ScvxAbort, ScvxIterate, ScvxResult, run
from .dynamics import ImpulseSchedule, propagate_schedule, propagation_error
from .fuel import FuelReport, fuel_consumed, sweep_tf, write_sweep_table
from .problem import RendezvousProblem

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_SOLVER_FAILURE = 3

PLOT_SAMPLES_PER_INTERVAL = 50

log = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="dockopt", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "sweep", "check-config"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the YAML run configuration")
        if name != "check-config":
            p.add_argument("--output-dir", default=None, help="override the output directory")
    return parser


def _write_trajectory(path: Path, problem: RendezvousProblem, it: ScvxIterate) -> None:
    n = problem.n_intervals
    t_c = problem.vehicle.t_c
    angles = [quat.to_tait_bryan(q) for q in it.states[:, 6:10]]
    payload = {
        "t_f": problem.t_f,
        "t_c": t_c,
        "n_intervals": n,
        "nodes": {
            "t": [k * t_c for k in range(n + 1)],
            "p": it.states[:, 0:3].tolist(),
            "v": it.states[:, 3:6].tolist(),
            "q": it.states[:, 6:10].tolist(),
            "w": it.states[:, 10:13].tolist(),
            "tait_bryan_deg": [
                [np.degrees(a.roll), np.degrees(a.pitch), np.degrees(a.yaw)] for a in angles
            ],
        },
        "pulse_widths": it.schedule.widths.tolist(),
        "propagation_error": {
            "p_e": it.prop_err.p_e,
            "v_e": it.prop_err.v_e,
            "theta_e": it.prop_err.theta_e,
            "omega_e": it.prop_err.omega_e,
        },
        "cost_s": it.cost,
        "mib_satisfied": it.mib_satisfied,
    }
    path.write_text(json.dumps(payload, indent=1))


def load_trajectory(path) -> tuple[np.ndarray, ImpulseSchedule, dict]:
    """Reload an emitted trajectory file (round-trip exact floats)."""
    payload = json.loads(Path(path).read_text())
    nodes = payload["nodes"]
    states = np.hstack(
        [np.array(nodes[key]) for key in ("p", "v", "q", "w")]
    )
    schedule = ImpulseSchedule(np.array(payload["pulse_widths"]), payload["t_c"])
    return states, schedule, payload["propagation_error"]


def _write_dense(path: Path, problem: RendezvousProblem, it: ScvxIterate, cfg: RunConfig) -> None:
    _, t, x = propagate_schedule(
        problem.initial,
        it.schedule,
        problem.vehicle,
        cfg.scvx.rtol,
        cfg.scvx.atol,
        samples_per_interval=PLOT_SAMPLES_PER_INTERVAL,
    )
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["t", "px", "py", "pz", "vx", "vy", "vz", "qw", "qx", "qy", "qz", "wx", "wy", "wz"]
        )
        for ti, xi in zip(t, x):
            writer.writerow([repr(float(ti))] + [repr(float(v)) for v in xi])


def _write_iterations(path: Path, result: ScvxResult) -> None:
    fields = [
        "j", "J", "J_fuel_hat", "J_tr_hat", "J_vc_hat",
        "p_e", "v_e", "theta_e", "omega_e", "feasible", "mib_satisfied", "reset_applied",
    ]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for it in result.history:
            rec = it.log_record()
            writer.writerow(
                [repr(rec[f]) if isinstance(rec[f], float) else rec[f] for f in fields]
            )


def _write_fuel(path: Path, report: FuelReport) -> None:
    path.write_text(
        json.dumps(
            {
                "total_kg": report.total_kg,
                "target_ratio": report.target_ratio,
                "squared": report.squared,
                "per_interval_kg": report.per_interval_kg.tolist(),
                "thruster_count_timeline": report.timeline.tolist(),
            },
            indent=1,
        )
    )


def _write_timings(path: Path, result: ScvxResult) -> None:
    path.write_text(
        json.dumps(
            {
                "solver_time_total": result.solver_time_total,
                "discretize_time_total": result.discretize_time_total,
                "per_iteration": [
                    {"j": it.index, "solve": it.solve_time, "discretize": it.discretize_time}
                    for it in result.history
                ],
            },
            indent=1,
        )
    )


def _emit_run(out: Path, problem: RendezvousProblem, result: ScvxResult, cfg: RunConfig) -> None:
    out.mkdir(parents=True, exist_ok=True)
    _write_iterations(out / "iterations.csv", result)
    _write_timings(out / "timings.json", result)
    if result.best is not None:
        _write_trajectory(out / "trajectory.json", problem, result.best)
        _write_dense(out / "dense_trajectory.csv", problem, result.best, cfg)
        _write_fuel(
            out / "fuel.json",
            fuel_consumed(result.best.schedule, c1=cfg.fuel_rate, squared=cfg.fuel_squared),
        )


def _cmd_solve(cfg: RunConfig, out_dir: str | None) -> int:
    problem = cfg.problem()
    solver = default_solver(cfg.solver)
    out = Path(out_dir or cfg.output_dir)
    try:
        result = run(problem, cfg.scvx, solver)
    except ScvxAbort as exc:
        log.error("solver failure: %s", exc)
        return EXIT_SOLVER_FAILURE
    _emit_run(out, problem, result, cfg)
    if result.best is None:
        log.error("no feasible iterate within %d iterations", cfg.scvx.j_max)
        return EXIT_INFEASIBLE
    log.info(
        "%s in %d iterations, cost %.3f s, fuel %.3f kg",
        result.status,
        result.iterations,
        result.best.cost,
        fuel_consumed(result.best.schedule, c1=cfg.fuel_rate, squared=cfg.fuel_squared).total_kg,
    )
    return EXIT_OK if result.converged else EXIT_INFEASIBLE


def _cmd_sweep(cfg: RunConfig, out_dir: str | None) -> int:
    solver = default_solver(cfg.solver)
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = sweep_tf(cfg.problem, cfg.sweep, cfg.scvx, solver, c1=cfg.fuel_rate)
    write_sweep_table(rows, out / "fuel_vs_tf.csv")
    worst = EXIT_OK
    for row in rows:
        if row.result is not None:
            _emit_run(out / f"tf_{row.t_f:g}", cfg.problem(row.t_f), row.result, cfg)
        if not row.converged:
            worst = max(worst, EXIT_INFEASIBLE)
    return worst


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config)
    except (OSError, ConfigError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command == "check-config":
        print("configuration OK")
        return EXIT_OK
    if args.command == "solve":
        return _cmd_solve(cfg, args.output_dir)
    return _cmd_sweep(cfg, args.output_dir)


if __name__ == "__main__":
    sys.exit(main())
