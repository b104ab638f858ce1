"""Optional bridge to cvxpy, used only to cross-check the embedded solver.

Requires the ``crosscheck`` extra.  Takes the same :class:`ConicProgram` and
returns a :class:`SolveResult` with only the primal side filled in.
"""

from __future__ import annotations

import math

import numpy as np

from .conic import FREE, NONNEG, PSD, SOC, ConicProgram, smat
from .errors import ConfigError
from .ipm import Residuals, SolveResult, Status

_STATUS = {
    "optimal": Status.OPTIMAL,
    "optimal_inaccurate": Status.NUMERICAL,
    "infeasible": Status.PRIMAL_INFEASIBLE,
    "infeasible_inaccurate": Status.PRIMAL_INFEASIBLE,
    "unbounded": Status.DUAL_INFEASIBLE,
    "unbounded_inaccurate": Status.DUAL_INFEASIBLE,
}


def available() -> bool:
    try:
        import cvxpy  # noqa: F401
    except ImportError:
        return False
    return True


def solve_cvxpy(program: ConicProgram, solver: str | None = None) -> SolveResult:
    try:
        import cvxpy as cp
    except ImportError as exc:
        raise ConfigError("cvxpy is not installed; install the 'crosscheck' extra") from exc
    v = cp.Variable(program.nvar)
    cons = []
    if program.b.size:
        cons.append(program.A @ v == program.b)
    for bl, sl in zip(program.blocks, program.block_slices()):
        part = v[sl]
        if bl.kind == NONNEG:
            cons.append(part >= 0)
        elif bl.kind == SOC:
            cons.append(cp.SOC(part[0], part[1:]))
        elif bl.kind == PSD:
            d = bl.size
            # rebuild the symmetric matrix from its scaled vectorization
            M = sum(part[k] * smat(np.eye(bl.dim)[k]) for k in range(bl.dim))
            S = cp.Variable((d, d), symmetric=True)
            cons += [S == M, S >> 0]
        elif bl.kind != FREE:
            raise ConfigError(f"unsupported cone {bl.kind}")
    prob = cp.Problem(cp.Minimize(program.c @ v + program.offset), cons)
    prob.solve(solver=solver)
    status = _STATUS.get(prob.status, Status.NUMERICAL)
    x = np.full(program.nvar, np.nan) if v.value is None else np.asarray(v.value, dtype=float)
    value = float(prob.value) if prob.value is not None and math.isfinite(prob.value) else math.nan
    return SolveResult(status, value, math.nan, x, np.zeros(0), np.zeros(0),
                       Residuals(math.nan, math.nan, math.nan), 0, {"solver": prob.solver_stats.solver_name})
