"""Canonical conic program form and interior-point solver backends.

A program is

    minimize    c' z + c0
    subject to  A_eq z = b_eq
                h - G z in K

with K a product of a nonnegative orthant block followed by second-order
cone blocks, in the order listed in ``cones``. Any interior-point SOCP
implementation can be plugged in through the ``ConicSolver`` protocol;
bundled backends wrap Clarabel (default) and CVXOPT's conelp. The solver
choice can be forced through the DOCKOPT_SOLVER environment variable.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
import scipy.sparse as sp

NONNEG = "nonneg"
SOC = "soc"

OPTIMAL = "optimal"
NEAR_OPTIMAL = "near_optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
FAILED = "failed"


@dataclass
class ConicProgram:
    c: np.ndarray
    c0: float
    a_eq: sp.csc_matrix
    b_eq: np.ndarray
    g: sp.csc_matrix
    h: np.ndarray
    cones: list[tuple[str, int]]
    variables: dict[str, slice] = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return self.c.size

    def validate(self) -> None:
        if self.a_eq.shape != (self.b_eq.size, self.n_vars):
            raise ValueError("equality block shape mismatch")
        total = sum(dim for _, dim in self.cones)
        if self.g.shape != (self.h.size, self.n_vars) or total != self.h.size:
            raise ValueError("cone block dimensions inconsistent with G/h")
        for kind, dim in self.cones:
            if kind not in (NONNEG, SOC) or dim <= 0:
                raise ValueError(f"bad cone block ({kind}, {dim})")


@dataclass
class SolverResult:
    status: str
    x: np.ndarray | None
    objective: float | None
    solve_time: float
    raw_status: str = ""


class ConicSolver(Protocol):
    name: str

    def solve(self, program: ConicProgram) -> SolverResult: ...


class ClarabelSolver:
    """Interior-point backend via Clarabel."""

    name = "clarabel"

    _STATUS = {
        "Solved": OPTIMAL,
        "AlmostSolved": NEAR_OPTIMAL,
        "PrimalInfeasible": INFEASIBLE,
        "AlmostPrimalInfeasible": INFEASIBLE,
        "DualInfeasible": UNBOUNDED,
        "AlmostDualInfeasible": UNBOUNDED,
    }

    # MaxIterations still carries a usable primal point when the residuals
    # are this small; accept it with the reduced-accuracy flag.
    _RESIDUAL_ACCEPT = 1e-7

    def __init__(self, **settings):
        import clarabel  # deferred so other backends work without it

        self._clarabel = clarabel
        self._settings = {"max_iter": 500, **settings}

    def solve(self, program: ConicProgram) -> SolverResult:
        cl = self._clarabel
        program.validate()
        n = program.n_vars
        a_all = sp.vstack([program.a_eq, program.g], format="csc")
        b_all = np.concatenate([program.b_eq, program.h])
        cones = [cl.ZeroConeT(program.b_eq.size)] if program.b_eq.size else []
        for kind, dim in program.cones:
            cones.append(cl.NonnegativeConeT(dim) if kind == NONNEG else cl.SecondOrderConeT(dim))
        settings = cl.DefaultSettings()
        settings.verbose = False
        for key, value in self._settings.items():
            setattr(settings, key, value)
        solver = cl.DefaultSolver(sp.csc_matrix((n, n)), program.c, a_all, b_all, cones, settings)
        sol = solver.solve()
        raw = str(sol.status).rsplit(".", 1)[-1]
        status = self._STATUS.get(raw, FAILED)
        if (
            status == FAILED
            and raw in ("MaxIterations", "InsufficientProgress")
            and max(sol.r_prim, sol.r_dual) < self._RESIDUAL_ACCEPT
        ):
            status = NEAR_OPTIMAL
        x = np.asarray(sol.x) if status in (OPTIMAL, NEAR_OPTIMAL) else None
        obj = float(sol.obj_val) + program.c0 if x is not None else None
        return SolverResult(status, x, obj, float(sol.solve_time), raw)


class CvxoptSolver:
    """Interior-point backend via CVXOPT conelp."""

    name = "cvxopt"

    def __init__(self, **options):
        import cvxopt
        import cvxopt.solvers

        self._cvxopt = cvxopt
        self._options = {"show_progress": False, **options}

    def solve(self, program: ConicProgram) -> SolverResult:
        cvxopt = self._cvxopt
        program.validate()
        dims = {"l": 0, "q": [], "s": []}
        for kind, dim in program.cones:
            if kind == NONNEG:
                dims["l"] += dim
            else:
                dims["q"].append(dim)
        g = program.g.tocoo()
        G = cvxopt.spmatrix(g.data, g.row.tolist(), g.col.tolist(), size=g.shape)
        a = program.a_eq.tocoo()
        A = cvxopt.spmatrix(a.data, a.row.tolist(), a.col.tolist(), size=a.shape)
        t0 = time.perf_counter()
        sol = cvxopt.solvers.conelp(
            cvxopt.matrix(program.c),
            G,
            cvxopt.matrix(program.h),
            dims,
            A,
            cvxopt.matrix(program.b_eq),
            options=self._options,
        )
        elapsed = time.perf_counter() - t0
        raw = sol["status"]
        if raw == "optimal":
            status = OPTIMAL
        elif raw == "primal infeasible":
            status = INFEASIBLE
        elif raw == "dual infeasible":
            status = UNBOUNDED
        elif raw == "unknown" and sol["x"] is not None:
            status = NEAR_OPTIMAL
        else:
            status = FAILED
        x = np.array(sol["x"]).ravel() if status in (OPTIMAL, NEAR_OPTIMAL) else None
        obj = float(program.c @ x + program.c0) if x is not None else None
        return SolverResult(status, x, obj, elapsed, raw)


def default_solver(name: str | None = None) -> ConicSolver:
    """Instantiate a backend; DOCKOPT_SOLVER overrides, Clarabel preferred."""
    name = name or os.environ.get("DOCKOPT_SOLVER", "")
    candidates = [name] if name else ["clarabel", "cvxopt"]
    errors = {}
    for cand in candidates:
        try:
            if cand == "clarabel":
                return ClarabelSolver()
            if cand == "cvxopt":
                return CvxoptSolver()
            raise ValueError(f"unknown solver '{cand}'")
        except ImportError as exc:
            errors[cand] = exc
    raise RuntimeError(f"no conic solver available: {errors}")


def write_program(program: ConicProgram, path) -> None:
    """Dump the program as plain sparse text for external verification.

    Format: one header line per section, then COO triplets ``row col value``
    (matrices) or ``index value`` (vectors), all zero-based.
    """
    with open(path, "w") as fh:
        fh.write(f"conic-program n={program.n_vars} c0={program.c0!r}\n")
        fh.write(f"cones {' '.join(f'{k}:{d}' for k, d in program.cones)}\n")
        for label, vec in (("c", program.c), ("b_eq", program.b_eq), ("h", program.h)):
            fh.write(f"vector {label} {vec.size}\n")
            for i, val in enumerate(vec):
                if val != 0.0:
                    fh.write(f"{i} {val!r}\n")
        for label, mat in (("A_eq", program.a_eq), ("G", program.g)):
            coo = mat.tocoo()
            fh.write(f"matrix {label} {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
            for i, j, val in zip(coo.row, coo.col, coo.data):
                fh.write(f"{i} {j} {val!r}\n")
