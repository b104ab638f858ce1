"""Brute-force global minimization of ``q`` over the intersection of balls.

Used as ground truth at desk scale.  ``Grid`` scans a lattice over the
bounding box of the first ball and polishes the best lattice points;
``Multistart`` runs projected gradient from random feasible starts.
Both report an upper bound on the true minimum.
"""

from __future__ import annotations

import enum
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .instance import BallQcqpInstance, ball_residuals, evaluate_q

FEAS_TOL = 1e-10
GRID_MAX_N = 4
MULTISTART_MAX_N = 10
DEFAULT_GRID_BUDGET = 5_000_000
DEFAULT_STARTS = 64
POLISH_COUNT = 10
_CHUNK = 1 << 18


class OracleMethod(str, enum.Enum):
    GRID = "grid"
    MULTISTART = "multistart"


@dataclass(frozen=True)
class OracleResult:
    best_x: np.ndarray
    best_value: float
    evaluations: int
    method: OracleMethod
    flagged: bool = False

    def to_dict(self) -> dict:
        return {
            "best_x": self.best_x.tolist(),
            "best_value": self.best_value,
            "evaluations": self.evaluations,
            "method": self.method.value,
            "flagged": self.flagged,
        }


def _ball_project(x, c, r):
    d = x - c
    nd = np.linalg.norm(d)
    if nd <= r:
        return x
    return c + (r / nd) * d


def _witness(inst: BallQcqpInstance):
    if inst.witness is not None and np.all(ball_residuals(inst, inst.witness) > 0):
        return np.array(inst.witness)
    return None


def _pull_inside(x, inst: BallQcqpInstance):
    # move toward an interior point until every residual clears the floor
    w = _witness(inst)
    if w is None:
        return None
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if np.all(ball_residuals(inst, x + mid * (w - x)) >= 0):
            hi = mid
        else:
            lo = mid
    return x + hi * (w - x)


def _sphere_meet_nearest(y, centers, radii):
    """Nearest point to ``y`` on the intersection of the given spheres, or None."""
    c1, r1 = centers[0], radii[0]
    if len(centers) == 1:
        d = y - c1
        nd = np.linalg.norm(d)
        if nd == 0:
            return None
        return c1 + (r1 / nd) * d
    L = 2.0 * (centers[1:] - c1)
    e = radii[0] ** 2 - radii[1:] ** 2 + np.sum(centers[1:] ** 2, axis=1) - c1 @ c1
    G = L @ L.T
    if np.linalg.cond(G) > 1e12:
        return None
    h = c1 - L.T @ np.linalg.solve(G, L @ c1 - e)
    rho2 = r1**2 - np.sum((h - c1) ** 2)
    if rho2 < 0:
        return None
    u = y - L.T @ np.linalg.solve(G, L @ y - e) - h
    nu = np.linalg.norm(u)
    if nu <= 1e-14 * (1.0 + np.linalg.norm(y)):
        return h if rho2 <= 1e-24 else None
    return h + math.sqrt(rho2) * u / nu


def _active_set_projection(y, inst: BallQcqpInstance):
    """Exact projection by enumerating active sets and checking KKT conditions."""
    scale = 1.0 + np.linalg.norm(y)
    for k in range(1, min(inst.m, inst.n) + 1):
        for S in itertools.combinations(range(inst.m), k):
            S = list(S)
            p = _sphere_meet_nearest(y, inst.centers[S], inst.radii[S])
            if p is None or np.any(ball_residuals(inst, p) < -FEAS_TOL):
                continue
            # y - p = sum_i lam_i (p - c_i) with lam >= 0
            M = (p[None, :] - inst.centers[S]).T
            lam, *_ = np.linalg.lstsq(M, y - p, rcond=None)
            if np.linalg.norm(M @ lam - (y - p)) <= 1e-9 * scale and np.all(lam >= -1e-10):
                return p
    return None


def project_feasible(x0, inst: BallQcqpInstance, max_sweeps: int = 500) -> np.ndarray:
    """Nearest-point projection onto the feasible set.

    Points already feasible are returned unchanged.  The projection is found
    exactly by testing each small set of active spheres against the KKT
    conditions; when that fails (degenerate geometry) Dykstra's cyclic scheme
    takes over.  The output has every ball residual at least ``-1e-10``; a
    last nudge toward the instance witness removes leftover roundoff.
    """
    x = np.array(x0, dtype=float).ravel()
    if x.shape != (inst.n,):
        raise ConfigError(f"point has length {x.size}, instance has n={inst.n}")
    if np.all(ball_residuals(inst, x) >= -FEAS_TOL):
        return x
    p = _active_set_projection(x, inst)
    if p is not None:
        return p
    m = inst.m
    incr = np.zeros((m, inst.n))
    for _ in range(max_sweeps):
        prev = x
        for i in range(m):
            y = x + incr[i]
            x_new = _ball_project(y, inst.centers[i], inst.radii[i])
            incr[i] = y - x_new
            x = x_new
        if np.linalg.norm(x - prev) <= 1e-14 * (1.0 + np.linalg.norm(x)):
            break
    if np.all(ball_residuals(inst, x) >= -FEAS_TOL):
        return x
    # Dykstra converges but may stall just outside when balls barely meet
    for _ in range(max_sweeps):
        for i in range(m):
            x = _ball_project(x, inst.centers[i], inst.radii[i])
        if np.all(ball_residuals(inst, x) >= -FEAS_TOL):
            return x
    pulled = _pull_inside(x, inst)
    if pulled is not None and np.all(ball_residuals(inst, pulled) >= -FEAS_TOL):
        return pulled
    raise NumericalError(f"projection did not reach the feasible set in {max_sweeps} sweeps")


def _grad(inst: BallQcqpInstance, x):
    return 2.0 * (inst.A @ x + inst.b)


def _polish(x, inst: BallQcqpInstance, tol: float = 1e-9, max_iter: int = 500):
    """Projected gradient with backtracking; returns ``(x, evaluations, converged)``.

    Stops at projected-gradient norm ``tol``, or once the objective has not
    moved beyond roundoff for 20 iterations (flat directions near a singular
    Lagrangian Hessian make the iterates creep without changing ``q``).
    """
    x = project_feasible(x, inst)
    f = evaluate_q(inst, x)
    evals = 1
    step = 1.0
    stalled = 0
    for _ in range(max_iter):
        g = _grad(inst, x)
        while True:
            x_new = project_feasible(x - step * g, inst)
            f_new = evaluate_q(inst, x_new)
            evals += 1
            d = x_new - x
            if f_new <= f + g @ d + np.dot(d, d) / (2.0 * step) or step < 1e-14:
                break
            step *= 0.5
        moved = float(np.linalg.norm(d))
        stalled = stalled + 1 if f - f_new <= 1e-15 * (1.0 + abs(f)) else 0
        if f_new <= f:
            x, f = x_new, f_new
        if moved / step <= tol or moved <= 1e-15 or stalled >= 20:
            return x, evals, True
        step = min(1.0, 2.0 * step)
    return x, evals, False


def _pick(candidates):
    """Best ``(value, x)``; near-equal values resolved by the smallest ``x``."""
    best_v = min(v for v, _ in candidates)
    band = 1e-12 * (1.0 + abs(best_v))
    tied = [(tuple(x), v, x) for v, x in candidates if v <= best_v + band]
    tied.sort(key=lambda t: t[0])
    return tied[0][1], tied[0][2]


def _grid(inst: BallQcqpInstance, budget: int):
    n = inst.n
    c, r = inst.centers[0], inst.radii[0]
    wanted = int(math.ceil(2.0 / 1e-3)) + 1
    per_axis = min(wanted, max(2, int(math.floor(budget ** (1.0 / n) + 1e-9))))
    flagged = per_axis < wanted
    axes = [np.linspace(c[k] - r, c[k] + r, per_axis) for k in range(n)]
    total = per_axis**n
    keep_v = np.empty(0)
    keep_x = np.empty((0, n))
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total))
        X = np.empty((idx.size, n))
        rem = idx
        for k in range(n - 1, -1, -1):
            X[:, k] = axes[k][rem % per_axis]
            rem = rem // per_axis
        ok = np.ones(idx.size, dtype=bool)
        for i in range(inst.m):
            diff = X - inst.centers[i]
            ok &= inst.radii[i] ** 2 - np.einsum("ij,ij->i", diff, diff) >= 0
        X = X[ok]
        if X.shape[0] == 0:
            continue
        vals = np.einsum("ij,jk,ik->i", X, inst.A, X) + 2.0 * X @ inst.b + inst.c0
        keep_v = np.concatenate([keep_v, vals])
        keep_x = np.vstack([keep_x, X])
        if keep_v.size > POLISH_COUNT:
            sel = np.argsort(keep_v, kind="stable")[:POLISH_COUNT]
            keep_v, keep_x = keep_v[sel], keep_x[sel]
    starts = list(keep_x)
    w = _witness(inst)
    if not starts:
        # lattice too coarse to hit a thin feasible set
        flagged = True
        starts = [w if w is not None else project_feasible(c, inst)]
    return starts, total, flagged


def _multistart_starts(inst: BallQcqpInstance, count: int, seed):
    rng = np.random.default_rng(seed)
    c, r = inst.centers[0], inst.radii[0]
    starts = []
    for _ in range(count):
        u = rng.normal(size=inst.n)
        u *= r * rng.uniform() ** (1.0 / inst.n) / np.linalg.norm(u)
        starts.append(project_feasible(c + u, inst))
    return starts


def global_min(inst: BallQcqpInstance, budget: int | None = None, seed=0,
               method=OracleMethod.GRID, jobs: int = 1) -> OracleResult:
    """Global minimum of ``q`` over the feasible set by brute force.

    ``budget`` caps the number of lattice points (Grid) or the number of
    starts (Multistart).  The lattice spacing is ``1e-3 * r_1`` unless the
    budget forces it coarser, in which case the result is flagged.
    """
    method = OracleMethod(method)
    n = inst.n
    if method is OracleMethod.GRID:
        if n > GRID_MAX_N:
            raise ConfigError(f"grid oracle needs n <= {GRID_MAX_N}, got {n}")
        budget = DEFAULT_GRID_BUDGET if budget is None else int(budget)
        if budget < 1:
            raise ConfigError("budget must be positive")
        starts, evaluations, flagged = _grid(inst, budget)
        lattice_best = [(evaluate_q(inst, x), np.array(x)) for x in starts]
    else:
        if n > MULTISTART_MAX_N:
            raise ConfigError(f"multistart oracle needs n <= {MULTISTART_MAX_N}, got {n}")
        budget = DEFAULT_STARTS if budget is None else int(budget)
        if budget < 1:
            raise ConfigError("budget must be positive")
        starts = _multistart_starts(inst, budget, seed)
        evaluations, flagged = 0, False
        lattice_best = []

    def run(x):
        return _polish(x, inst)

    if jobs > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            polished = list(pool.map(run, starts))
    else:
        polished = [run(x) for x in starts]
    candidates = list(lattice_best)
    for x, evals, converged in polished:
        evaluations += evals
        flagged |= not converged
        candidates.append((evaluate_q(inst, x), x))
    value, x = _pick(candidates)
    return OracleResult(best_x=np.array(x), best_value=float(value), evaluations=int(evaluations),
                        method=method, flagged=bool(flagged))
