"""Propellant accounting and trade-study sweeps over maneuver duration.

Within each control interval every pulse starts at the interval opening, so
the number of firing thrusters is a nonincreasing step function stepping
down at the sorted pulse widths; the published consumption model integrates
the rate c1 * n(t)^2 and is evaluated here in closed form over those steps.
The squared thruster count is kept as the default for fidelity to the
source model; a linear mode (rate proportional to n) is available for
sensitivity checks since physical flow rate is linear in engine count.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .conic import ConicSolver
from .driver import ScvxConfig, ScvxResult, run
from .dynamics import ImpulseSchedule
from .problem import APOLLO_FUEL_TARGET_KG, RendezvousProblem

log = logging.getLogger(__name__)

DEFAULT_RATE_KG_S = 0.168  # steady-state single-thruster consumption


@dataclass(frozen=True)
class FuelReport:
    total_kg: float
    per_interval_kg: np.ndarray
    timeline: np.ndarray  # rows (t, n_firing), one per step edge
    target_ratio: float  # total relative to the design allocation
    squared: bool

    def __post_init__(self):
        object.__setattr__(self, "per_interval_kg", np.asarray(self.per_interval_kg))
        object.__setattr__(self, "timeline", np.asarray(self.timeline))


def fuel_consumed(
    schedule: ImpulseSchedule,
    c1: float = DEFAULT_RATE_KG_S,
    squared: bool = True,
    target_kg: float = APOLLO_FUEL_TARGET_KG,
) -> FuelReport:
    """Closed-form step integral of the thruster-count consumption model."""
    if c1 <= 0.0:
        raise ValueError("consumption rate must be positive")
    per_interval = np.zeros(schedule.n_intervals)
    timeline = []
    for k in range(schedule.n_intervals):
        row = schedule.widths[k]
        edges = np.unique(np.concatenate([[0.0], row[row > 0.0], [schedule.t_c]]))
        fuel = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            n_on = int(np.count_nonzero(row >= b))
            rate = n_on * n_on if squared else n_on
            fuel += c1 * rate * (b - a)
            timeline.append((k * schedule.t_c + a, n_on))
        per_interval[k] = fuel
    total = float(per_interval.sum())
    return FuelReport(
        total_kg=total,
        per_interval_kg=per_interval,
        timeline=np.array(timeline) if timeline else np.empty((0, 2)),
        target_ratio=total / target_kg,
        squared=squared,
    )


@dataclass
class SweepRow:
    t_f: float
    fuel_kg: float | None
    iterations: int
    solve_time: float
    converged: bool
    error: str = ""
    report: FuelReport | None = None
    result: ScvxResult | None = None


def sweep_tf(
    make_problem: Callable[[float], RendezvousProblem],
    tf_list,
    config: ScvxConfig | None = None,
    solver: ConicSolver | None = None,
    c1: float = DEFAULT_RATE_KG_S,
) -> list[SweepRow]:
    """Independent runs for each duration; failures do not stop the sweep."""
    rows = []
    for t_f in sorted(tf_list):
        t0 = time.perf_counter()
        try:
            result = run(make_problem(t_f), config, solver)
        except Exception as exc:  # per-row isolation
            log.warning("sweep row t_f=%s failed: %s", t_f, exc)
            rows.append(
                SweepRow(t_f, None, 0, time.perf_counter() - t0, False, error=str(exc))
            )
            continue
        report = (
            fuel_consumed(result.best.schedule, c1=c1) if result.best is not None else None
        )
        rows.append(
            SweepRow(
                t_f=t_f,
                fuel_kg=report.total_kg if report else None,
                iterations=result.iterations,
                solve_time=result.solver_time_total,
                converged=result.converged,
                error="" if result.best is not None else result.status,
                report=report,
                result=result,
            )
        )
    return rows


def write_sweep_table(rows: list[SweepRow], path) -> None:
    """Delimited text table of fuel use versus maneuver duration."""
    with open(path, "w") as fh:
        fh.write("t_f_s,fuel_kg,iterations,solve_time_s,converged,error\n")
        for row in rows:
            fuel = "" if row.fuel_kg is None else repr(row.fuel_kg)
            fh.write(
                f"{row.t_f!r},{fuel},{row.iterations},{row.solve_time!r},"
                f"{int(row.converged)},{row.error}\n"
            )
