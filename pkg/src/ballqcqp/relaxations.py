"""Conic relaxations of a ball-constrained QCQP.

Every builder returns a :class:`BuiltRelaxation` holding the canonical
program and enough structure to decode a solution vector back into the
lifted matrix (``Z`` or ``Y = [[X, x], [x', 1]]``) or the moment vector.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import polys
from .conic import (Canonical, ConicModel, Free, Nonneg, Psd, Soc, linear_map_matrix,
                    program_violation, svec)
from .errors import ConfigError, SizeError
from .instance import BallQcqpInstance
from .ipm import SolveResult, SolverSettings, solve
from .liftmaps import (d_vectors, kron_map, lift_matrix, moment_blocks, p_matrix, q_matrix,
                       zhen_map)
from .matcone import SocConvention

MOMENT_MAX_N = 10


class RelaxationKind(str, enum.Enum):
    SHOR = "shor"
    SHOR_KRON = "shor-kron"
    SHOR_ZHEN = "shor-zhen"
    BURER = "burer"
    EXACT_M2 = "exact-m2"
    MOMENT2 = "moment2"


@dataclass(frozen=True, eq=False)
class BuiltRelaxation:
    kind: RelaxationKind
    inst: BallQcqpInstance
    canonical: Canonical
    var: object  # the main model variable (Var)
    extras: dict = field(default_factory=dict)

    @property
    def program(self):
        return self.canonical.program

    def decode(self, v) -> dict:
        """Read the lifted variables off a full program vector."""
        n = self.inst.n
        if self.kind is RelaxationKind.MOMENT2:
            y = self.canonical.variable(v, self.var)
            X, x = moment_to_shor(y, n)
            return {"y": y, "X": X, "x": x, "Z": moment_to_lifted(y, n)}
        M = self.canonical.variable(v, self.var)
        if self.kind in (RelaxationKind.BURER, RelaxationKind.EXACT_M2):
            return {"Z": M, "X": M[:n, :n].copy(), "x": M[:n, n + 1].copy()}
        X, x, _ = moment_blocks(M)
        return {"Y": M, "X": X.copy(), "x": x.copy()}

    def model_vector_at(self, xbar) -> np.ndarray:
        """Model variables at the rank-one (Dirac) lift of a point."""
        xbar = np.asarray(xbar, dtype=float)
        n = self.inst.n
        if self.kind is RelaxationKind.MOMENT2:
            return polys.evaluate_moments(xbar, n, 4)
        if self.kind in (RelaxationKind.BURER, RelaxationKind.EXACT_M2):
            return svec(lift_matrix(xbar))
        w = np.append(xbar, 1.0)
        return svec(np.outer(w, w))

    def vector_at(self, xbar) -> np.ndarray:
        return self.canonical.complete(self.model_vector_at(xbar))

    def violation_at(self, xbar):
        """``(equality residual, worst cone margin, objective)`` at the lift of ``xbar``."""
        v = self.vector_at(xbar)
        eq, margin = program_violation(self.program, v)
        return eq, margin, float(self.program.c @ v + self.program.offset)

    def lifted_objective(self, decoded: dict) -> float:
        inst = self.inst
        return float(np.sum(inst.A * decoded["X"]) + 2 * inst.b @ decoded["x"] + inst.c0)


def _objective_matrix_z(inst: BallQcqpInstance) -> np.ndarray:
    n = inst.n
    M = np.zeros((n + 2, n + 2))
    M[:n, :n] = inst.A
    M[:n, n + 1] = M[n + 1, :n] = inst.b
    return M


def build_shor(inst: BallQcqpInstance, with_kron: bool = False, with_zhen: bool = False,
               include_linear_rlt: bool = False) -> BuiltRelaxation:
    """Shor SDP with the trace form of every ball constraint.

    ``include_linear_rlt`` adds, for each pair of balls, the linearization of
    ``(x - c_i)'(x - c_j) <= r_i r_j``.
    """
    n, m = inst.n, inst.m
    model = ConicModel()
    Y = model.add_variable(Psd(n + 1))
    model.add_eq(model.entry(Y, n, n)[None, :], [1.0])
    C, r = inst.centers, inst.radii
    for i in range(m):
        M = np.zeros((n + 1, n + 1))
        M[:n, :n] = np.eye(n)
        M[:n, n] = M[n, :n] = -C[i]
        model.add_cone(-model.inner(Y, M)[None, :], [r[i] ** 2 - C[i] @ C[i]], Nonneg(1), f"trace{i}")
    if include_linear_rlt:
        for i in range(m):
            for j in range(i + 1, m):
                M = np.zeros((n + 1, n + 1))
                M[:n, :n] = np.eye(n)
                M[:n, n] = M[n, :n] = -0.5 * (C[i] + C[j])
                model.add_cone(-model.inner(Y, M)[None, :], [r[i] * r[j] - C[i] @ C[j]], Nonneg(1),
                               f"rlt{i}{j}")
    for flag, fmap, size in ((with_kron, kron_map, (n + 1) ** 2), (with_zhen, zhen_map, 2 * n)):
        if not flag:
            continue
        for i in range(m):
            for j in range(i + 1, m):
                L = linear_map_matrix(lambda S, i=i, j=j: fmap(*moment_blocks(S)[:2], inst, i, j,
                                                               x0=S[n, n]), n + 1)
                F = model.zeros(L.shape[0])
                F[:, Y.slice] = L
                model.add_psd(F, np.zeros((size, size)), f"{fmap.__name__}{i}{j}")
    obj = np.zeros((n + 1, n + 1))
    obj[:n, :n] = inst.A
    obj[:n, n] = obj[n, :n] = inst.b
    model.set_objective(model.inner(Y, obj), inst.c0)
    kind = (RelaxationKind.SHOR_KRON if with_kron and not with_zhen
            else RelaxationKind.SHOR_ZHEN if with_zhen and not with_kron
            else RelaxationKind.SHOR)
    return BuiltRelaxation(kind, inst, model.canonicalize(), Y,
                           {"with_kron": with_kron, "with_zhen": with_zhen,
                            "include_linear_rlt": include_linear_rlt})


def _burer_model(inst: BallQcqpInstance, exact_m2: bool, trace_section: bool = False):
    n, m = inst.n, inst.m
    Q, P, D = q_matrix(n), p_matrix(n), d_vectors(inst)
    model = ConicModel()
    Z = model.add_variable(Psd(n + 2))
    if exact_m2:
        model.add_cone(model.inner(Z, Q)[None, :], [0.0], Nonneg(1), "Q")
    else:
        model.add_eq(model.inner(Z, Q)[None, :], [0.0])
    if trace_section:
        model.add_eq(model.inner(Z, np.eye(n + 2))[None, :], [1.0])
    else:
        model.add_eq(model.entry(Z, n + 1, n + 1)[None, :], [1.0])
    for i in range(m):
        L = linear_map_matrix(lambda S, i=i: P @ S @ D[i], n + 2, out_kind="vec")
        F = model.zeros(n + 2)
        F[:, Z.slice] = L
        model.add_cone(F, np.zeros(n + 2), Soc(n + 2, SocConvention.LAST), f"socrlt{i}")
    for i in range(m):
        for j in range(i, m):
            row = model.inner(Z, 0.5 * (np.outer(D[i], D[j]) + np.outer(D[j], D[i])))
            if exact_m2 and i != j:
                model.add_eq(row[None, :], [0.0])
            else:
                model.add_cone(row[None, :], [0.0], Nonneg(1), f"rlt{i}{j}")
    model.set_objective(model.inner(Z, _objective_matrix_z(inst)), inst.c0)
    return model, Z


def build_burer(inst: BallQcqpInstance) -> BuiltRelaxation:
    if inst.m < 2:
        raise ConfigError("the lifted relaxation needs m >= 2")
    model, Z = _burer_model(inst, exact_m2=False)
    return BuiltRelaxation(RelaxationKind.BURER, inst, model.canonicalize(), Z)


def build_exact_m2(inst: BallQcqpInstance) -> BuiltRelaxation:
    if inst.m != 2:
        raise ConfigError(f"the two-ball exact relaxation needs m = 2, got m = {inst.m}")
    model, Z = _burer_model(inst, exact_m2=True)
    return BuiltRelaxation(RelaxationKind.EXACT_M2, inst, model.canonicalize(), Z)


def build_cone_section(inst: BallQcqpInstance, C) -> BuiltRelaxation:
    """Minimize ``<C, Z>`` over the lifted cone cut by ``tr Z = 1``.

    Used to hunt extreme rays: for a generic ``C`` the minimizer is unique and
    spans an extreme ray of the cone.  Unlike the ``Z[n+1, n+1] = 1`` slice,
    this section meets every ray.
    """
    if inst.m < 2:
        raise ConfigError("the lifted relaxation needs m >= 2")
    model, Z = _burer_model(inst, exact_m2=False, trace_section=True)
    model.set_objective(model.inner(Z, np.asarray(C, dtype=float)))
    return BuiltRelaxation(RelaxationKind.BURER, inst, model.canonicalize(), Z, {"section": "trace"})


def build_moment2(inst: BallQcqpInstance, max_n: int = MOMENT_MAX_N) -> BuiltRelaxation:
    """Second level of the moment hierarchy with pairwise products of the ball constraints."""
    n, m = inst.n, inst.m
    if n > max_n:
        raise SizeError(f"moment relaxation capped at n <= {max_n}, got n = {n}")
    mons = polys.monomials(n, 4)
    index = polys.monomial_index(n, 4)
    N = len(mons)
    model = ConicModel()
    y = model.add_variable(Free(N))
    one = polys.constant(n, 1.0)
    model.add_eq(polys.riesz_row(one, index, N)[None, :], [1.0])

    def localizing(weight: dict, basis) -> np.ndarray:
        rows_, cols_ = np.triu_indices(len(basis))
        out = np.zeros((rows_.size, N))
        for k, (a, b) in enumerate(zip(rows_, cols_)):
            prod = polys.mul(weight, {tuple(u + v for u, v in zip(basis[a], basis[b])): 1.0})
            out[k] = polys.riesz_row(prod, index, N) * (1.0 if a == b else np.sqrt(2.0))
        return out

    basis2 = polys.monomials(n, 2)
    basis1 = polys.monomials(n, 1)
    model.add_psd(localizing(one, basis2), np.zeros((len(basis2), len(basis2))), "M2")
    g = [polys.ball_poly(inst.centers[i], inst.radii[i]) for i in range(m)]
    for i in range(m):
        model.add_psd(localizing(g[i], basis1), np.zeros((n + 1, n + 1)), f"loc{i}")
    for i in range(m):
        for j in range(i, m):
            row = polys.riesz_row(polys.mul(g[i], g[j]), index, N)
            model.add_cone(row[None, :], [0.0], Nonneg(1), f"gg{i}{j}")
    qpoly = polys.quadratic_poly(inst.A, inst.b, 0.0)
    model.set_objective(polys.riesz_row(qpoly, index, N), inst.c0)
    return BuiltRelaxation(RelaxationKind.MOMENT2, inst, model.canonicalize(), y,
                           {"monomials": mons})


def moment_to_shor(y, n: int):
    index = polys.monomial_index(n, 4)
    X = np.array([[y[index[polys.mono(n, k, l)]] for l in range(n)] for k in range(n)])
    x = np.array([y[index[polys.mono(n, k)]] for k in range(n)])
    return X, x


def moment_to_lifted(y, n: int) -> np.ndarray:
    """Lifted matrix indexed by ``(x_1..x_n, ||x||^2, 1)`` built from pseudomoments."""
    index = polys.monomial_index(n, 4)
    N = len(index)
    basis = [{polys.mono(n, k): 1.0} for k in range(n)]
    basis.append(polys.sum_squares_poly(n))
    basis.append(polys.constant(n, 1.0))
    Z = np.zeros((n + 2, n + 2))
    for a in range(n + 2):
        for b in range(a, n + 2):
            Z[a, b] = Z[b, a] = polys.riesz_row(polys.mul(basis[a], basis[b]), index, N) @ y
    return Z


def build(inst: BallQcqpInstance, kind, include_linear_rlt: bool = False) -> BuiltRelaxation:
    kind = RelaxationKind(kind)
    if kind is RelaxationKind.SHOR:
        return build_shor(inst, include_linear_rlt=include_linear_rlt)
    if kind is RelaxationKind.SHOR_KRON:
        return build_shor(inst, with_kron=True, include_linear_rlt=include_linear_rlt)
    if kind is RelaxationKind.SHOR_ZHEN:
        return build_shor(inst, with_zhen=True, include_linear_rlt=include_linear_rlt)
    if kind is RelaxationKind.BURER:
        return build_burer(inst)
    if kind is RelaxationKind.EXACT_M2:
        return build_exact_m2(inst)
    return build_moment2(inst)


def solve_relaxation(built: BuiltRelaxation, settings: SolverSettings | None = None):
    """Solve and decode; returns ``(SolveResult, decoded dict or None)``."""
    res: SolveResult = solve(built.canonical.ineq, settings)
    if not np.all(np.isfinite(res.primal)):
        return res, None
    return res, built.decode(built.canonical.complete(res.primal))
