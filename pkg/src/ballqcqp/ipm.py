"""Primal-dual interior-point solver for conic programs.

Works on the inequality form (:class:`~ballqcqp.conic.IneqProgram`)

    primal:  min c'x   s.t. G x + s = h, A x = b, s in K
    dual:    max -h'z - b'y   s.t. G'z + A'y + c = 0, z in K

through a homogeneous self-dual embedding with Nesterov-Todd scaling and
Mehrotra predictor-corrector steps.  Newton systems are reduced to the free
variables, ``[[Gs'Gs, A'], [A, 0]]`` with ``Gs = W G``, factored densely and
refined against the full scaled system.  Standard-form
:class:`~ballqcqp.conic.ConicProgram` input is converted on entry.  Nothing
is randomized, so repeated solves are bitwise identical.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .conic import FREE, NONNEG, PSD, SOC, ConicProgram, IneqProgram, smat, svec
from .errors import ShapeError


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    PRIMAL_INFEASIBLE = "PrimalInfeasible"
    DUAL_INFEASIBLE = "DualInfeasible"
    ITER_LIMIT = "IterLimit"
    NUMERICAL = "Numerical"


@dataclass(frozen=True)
class SolverSettings:
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    max_iter: int = 200
    step_fraction: float = 0.99
    regularization: float = 1e-13
    refine_steps: int = 3


@dataclass(frozen=True)
class Residuals:
    primal_feas: float
    dual_feas: float
    gap: float


@dataclass(frozen=True, eq=False)
class SolveResult:
    """Solution in the caller's form.

    For a standard-form program ``primal`` is the full vector, ``dual`` the
    equality multipliers ``y`` of ``max b'y``, and ``dual_slack`` is
    ``c - A'y``.  For inequality form ``primal`` is ``x``, ``dual`` the
    equality multipliers, ``dual_slack`` the cone multipliers ``z`` and
    ``slack`` the cone slack ``s``.
    """

    status: Status
    primal_value: float
    dual_value: float
    primal: np.ndarray
    dual: np.ndarray
    dual_slack: np.ndarray
    residuals: Residuals
    iterations: int
    info: dict = field(default_factory=dict)
    slack: np.ndarray | None = None

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


# ---------------------------------------------------------------- cone blocks
#
# Each block exposes, after ``scale(x, z)``: dense matrices ``Wm`` and
# ``Winvm`` of the NT scaling (W x = W^{-T} z = lam), the scaled point
# ``lam``, the Jordan product ``prod``, ``div`` (solve lam o u = r) and
# ``max_step``.

class _Nonneg:
    def __init__(self, sl, k):
        self.sl, self.k = sl, k
        self.e = np.ones(k)

    def scale(self, x, z):
        d = np.sqrt(x / z)
        self.Wm = np.diag(1.0 / d)
        self.Winvm = np.diag(d)
        self.lam = np.sqrt(x * z)

    @staticmethod
    def prod(a, b):
        return a * b

    def div(self, r):
        return r / self.lam

    @staticmethod
    def max_step(x, dx):
        neg = dx < 0
        if not np.any(neg):
            return math.inf
        return float(np.min(-x[neg] / dx[neg]))


class _Soc:
    def __init__(self, sl, k):
        self.sl, self.k = sl, k
        self.e = np.zeros(k)
        self.e[0] = 1.0
        self.J = np.ones(k)
        self.J[1:] = -1.0

    @staticmethod
    def _jnorm(u):
        return math.sqrt(max(u[0] ** 2 - u[1:] @ u[1:], 1e-300))

    def scale(self, x, z):
        J = self.J
        nx, nz = self._jnorm(x), self._jnorm(z)
        xb, zb = x / nx, z / nz
        gamma = math.sqrt(max((1.0 + xb @ zb) / 2.0, 1e-300))
        wb = (J * xb + zb) / (2.0 * gamma)
        beta = math.sqrt(nz / nx)
        v = (wb + self.e) / math.sqrt(2.0 * (wb[0] + 1.0))
        Jv = J * v
        self.Wm = beta * (2.0 * np.outer(v, v) - np.diag(J))
        self.Winvm = (2.0 * np.outer(Jv, Jv) - np.diag(J)) / beta
        self.lam = self.Wm @ x

    @staticmethod
    def prod(a, b):
        out = a[0] * b[1:] + b[0] * a[1:]
        return np.concatenate([[a @ b], out])

    def div(self, r):
        lam = self.lam
        l0, l1 = lam[0], lam[1:]
        det = l0 * l0 - l1 @ l1
        u0 = (l0 * r[0] - l1 @ r[1:]) / det
        return np.concatenate([[u0], (r[1:] - u0 * l1) / l0])

    @staticmethod
    def max_step(x, dx):
        # largest a with x + a dx in the cone: J-quadratic root and first-coordinate sign
        J = np.ones_like(x)
        J[1:] = -1.0
        a = dx @ (J * dx)
        b = 2.0 * (x @ (J * dx))
        c = x @ (J * x)
        roots = []
        if abs(a) < 1e-300:
            if b < 0:
                roots.append(-c / b)
        else:
            disc = b * b - 4 * a * c
            if disc >= 0:
                sq = math.sqrt(disc)
                q = -0.5 * (b + math.copysign(sq, b))
                for r in (q / a, c / q if q != 0 else math.inf):
                    if r > 0:
                        roots.append(r)
        if dx[0] < 0:
            roots.append(-x[0] / dx[0])
        return min(roots) if roots else math.inf


def congruence_matrix(T) -> np.ndarray:
    """Matrix of ``svec(U) -> svec(T U T')``."""
    d = T.shape[0]
    rows, cols = np.triu_indices(d)
    sa = np.where(rows == cols, 1.0, math.sqrt(2.0))
    f = np.where(rows == cols, 0.5, 1.0 / math.sqrt(2.0))
    Tar = T[np.ix_(rows, rows)]
    Tbc = T[np.ix_(cols, cols)]
    Tac = T[np.ix_(rows, cols)]
    Tbr = T[np.ix_(cols, rows)]
    return sa[:, None] * f[None, :] * (Tar * Tbc + Tac * Tbr)


class _Psd:
    def __init__(self, sl, d):
        self.sl, self.d = sl, d
        self.e = svec(np.eye(d))

    def scale(self, x, z):
        Ls = _chol(smat(x))
        Lz = _chol(smat(z))
        _, lam, Vt = np.linalg.svd(Lz.T @ Ls)
        self.lvals = lam
        R = Ls @ Vt.T / np.sqrt(lam)
        Rinv = (np.sqrt(lam)[:, None] * Vt) @ sla.solve_triangular(Ls, np.eye(self.d), lower=True)
        self.Wm = congruence_matrix(Rinv)
        self.Winvm = congruence_matrix(R)
        self.lam = svec(np.diag(lam))

    @staticmethod
    def prod(a, b):
        A, B = smat(a), smat(b)
        return svec(0.5 * (A @ B + B @ A))

    def div(self, r):
        lam = self.lvals
        return svec(2.0 * smat(r) / (lam[:, None] + lam[None, :]))

    @staticmethod
    def max_step(x, dx):
        X = smat(x)
        L = _chol(X)
        Li = sla.solve_triangular(L, np.eye(L.shape[0]), lower=True)
        M = Li @ smat(dx) @ Li.T
        lo = np.linalg.eigvalsh(0.5 * (M + M.T))[0]
        return -1.0 / lo if lo < 0 else math.inf


def _chol(X):
    try:
        return np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        lam, V = np.linalg.eigh(0.5 * (X + X.T))
        lam = np.maximum(lam, 1e-300)
        _, R = np.linalg.qr((V * np.sqrt(lam)).T)
        L = R.T
        return L * np.sign(np.diag(L))


# ---------------------------------------------------------------- presolve

def _presolve(A, b):
    """Drop linearly dependent equality rows (kept rows stay in original order)."""
    if A.shape[0] == 0:
        return np.arange(0), True
    _, R, piv = sla.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(A.shape) * np.finfo(float).eps * (diag[0] if diag.size else 0.0) * 10
    rank = int(np.sum(diag > tol))
    keep = np.sort(piv[:rank])
    if rank == A.shape[0]:
        return keep, True
    Ak, bk = A[keep], b[keep]
    y, *_ = np.linalg.lstsq(Ak.T, A.T, rcond=None)
    consistent = np.linalg.norm(y.T @ bk - b) <= 1e-9 * (1 + np.linalg.norm(b))
    return keep, consistent


# ---------------------------------------------------------------- main loop

def solve(program, settings: SolverSettings | None = None) -> SolveResult:
    """Solve a :class:`ConicProgram` or :class:`IneqProgram`."""
    if isinstance(program, ConicProgram):
        res = _solve_ineq(IneqProgram.from_standard(program), settings)
        return _to_standard(program, res)
    if isinstance(program, IneqProgram):
        return _solve_ineq(program, settings)
    raise ShapeError(f"cannot solve object of type {type(program).__name__}")


def _to_standard(program: ConicProgram, res: SolveResult) -> SolveResult:
    y = -res.dual
    zfull = program.c - program.A.T @ y if np.all(np.isfinite(y)) else np.full(program.nvar, np.nan)
    dual_value = res.dual_value
    return SolveResult(res.status, res.primal_value, dual_value, res.primal, y, zfull,
                       res.residuals, res.iterations, res.info)


def _make_blocks(cones, slices):
    blocks, nu = [], 0
    for k, sl in zip(cones, slices):
        nu += k.degree
        if k.kind == NONNEG:
            blocks.append(_Nonneg(sl, k.size))
        elif k.kind == SOC:
            blocks.append(_Soc(sl, k.size))
        elif k.kind == PSD:
            blocks.append(_Psd(sl, k.size))
        else:
            raise ShapeError(f"unsupported cone kind {k.kind!r}")
    return blocks, nu


def _solve_ineq(prog: IneqProgram, settings: SolverSettings | None) -> SolveResult:
    settings = settings or SolverSettings()
    c, G, h, A0, b0 = prog.c, prog.G, prog.h, prog.A, prog.b
    nx, ms = c.size, h.size

    keep, consistent = _presolve(A0, b0)
    if not consistent:
        keep = np.arange(A0.shape[0])
    A, b = A0[keep], b0[keep]
    rscale = np.linalg.norm(A, axis=1)
    rscale[rscale == 0] = 1.0
    A = A / rscale[:, None]
    b = b / rscale
    p = A.shape[0]

    blocks, nu = _make_blocks(prog.cones, prog.cone_slices())
    e = np.zeros(ms)
    for blk in blocks:
        e[blk.sl] = blk.e

    x = np.zeros(nx)
    y = np.zeros(p)
    s = e.copy()
    z = e.copy()
    tau = kappa = 1.0

    hnorm = max(1.0, np.linalg.norm(h), np.linalg.norm(b0))
    cnorm = max(1.0, np.linalg.norm(c))

    def jordan(a, bb):
        out = np.zeros(ms)
        for blk in blocks:
            out[blk.sl] = blk.prod(a[blk.sl], bb[blk.sl])
        return out

    def max_step(sv, dsv, zv, dzv, tv, dtv, kv, dkv):
        alpha = math.inf
        for blk in blocks:
            alpha = min(alpha, blk.max_step(sv[blk.sl], dsv[blk.sl]), blk.max_step(zv[blk.sl], dzv[blk.sl]))
        if dtv < 0:
            alpha = min(alpha, -tv / dtv)
        if dkv < 0:
            alpha = min(alpha, -kv / dkv)
        return alpha

    def unscaled(xv, yv, sv, zv, tv):
        xh, sh, zh = xv / tv, sv / tv, zv / tv
        yfull = np.zeros(b0.size)
        yfull[keep] = (yv / rscale) / tv
        pres = max(np.linalg.norm(G @ xh + sh - h), np.linalg.norm(A0 @ xh - b0)) / hnorm
        dres = np.linalg.norm(G.T @ zh + A0.T @ yfull + c) / cnorm
        pcost = c @ xh
        dcost = -h @ zh - b0 @ yfull
        return xh, yfull, sh, zh, pres, dres, pcost, dcost

    status = Status.ITER_LIMIT
    best = None
    info = {}
    it = 0
    cur = None
    for it in range(settings.max_iter + 1):
        rx = A.T @ y + G.T @ z + c * tau
        ry = -A @ x + b * tau
        rz = s + G @ x - h * tau
        rt = kappa + c @ x + b @ y + h @ z

        xh, yfull, sh, zh, pres, dres, pcost, dcost = unscaled(x, y, s, z, tau)
        gap_abs = float(sh @ zh)
        relgap = abs(pcost - dcost) / max(1.0, min(abs(pcost), abs(dcost)))
        cur = (xh, yfull, sh, zh, pres, dres, pcost, dcost, gap_abs)
        if all(np.isfinite([pres, dres, pcost, dcost])):
            score = max(pres, dres, min(abs(gap_abs) / (1 + abs(pcost)), relgap))
            if best is None or score <= best[0]:
                best = (score, cur, it)
        if (pres <= settings.feas_tol and dres <= settings.feas_tol
                and (abs(gap_abs) <= settings.gap_tol * (1 + abs(pcost)) or relgap <= settings.gap_tol)):
            status = Status.OPTIMAL
            break
        hz_by = h @ z + b @ y
        if hz_by < 0:
            if np.linalg.norm(G.T @ z + A.T @ y) / (-hz_by) <= settings.feas_tol * cnorm / max(1.0, tau):
                status = Status.PRIMAL_INFEASIBLE
                info["certificate"] = "dual ray (z, y) / -(h'z + b'y)"
                break
        cx = c @ x
        if cx < 0:
            ray_res = max(np.linalg.norm(G @ x + s), np.linalg.norm(A @ x))
            if ray_res / (-cx) <= settings.feas_tol * hnorm / max(1.0, tau):
                status = Status.DUAL_INFEASIBLE
                info["certificate"] = "primal ray x / -c'x"
                break
        if it == settings.max_iter:
            break

        try:
            for blk in blocks:
                blk.scale(s[blk.sl], z[blk.sl])
        except (np.linalg.LinAlgError, ValueError, FloatingPointError) as exc:
            status = Status.NUMERICAL
            info["error"] = f"scaling failed: {exc}"
            break
        lam = np.zeros(ms)
        for blk in blocks:
            lam[blk.sl] = blk.lam
        mu = (s @ z + tau * kappa) / (nu + 1)

        # [W G; A] = QR, so R'R = G'W'WG + A'A.  The A'A term is harmless
        # (A dx is known) and keeps R nonsingular when some variables appear
        # only in equalities.  Working through R avoids forming G'W'WG.
        Gs = np.empty_like(G)
        for blk in blocks:
            Gs[blk.sl] = blk.Wm @ G[blk.sl]
        try:
            with np.errstate(all="raise"):
                Qg, Rg = sla.qr(np.vstack([Gs, A]), mode="economic", check_finite=True)
                rdiag = np.abs(np.diag(Rg))
                floor = settings.regularization * max(1.0, float(rdiag.max()) if rdiag.size else 1.0)
                if rdiag.size and rdiag.min() < floor:
                    # rank-deficient W G: lift R's diagonal (regularized normal equations)
                    Rg = np.linalg.cholesky(Rg.T @ Rg + floor ** 2 * np.eye(nx)).T
                    Qg = None
                B = sla.solve_triangular(Rg, A.T, trans="T").T if p else np.zeros((0, nx))
                S = B @ B.T
                S[np.diag_indices(p)] += settings.regularization * max(1.0, float(np.max(np.diag(S))) if p else 1.0)
                Sc = sla.cho_factor(S) if p else None
        except (ValueError, FloatingPointError, sla.LinAlgError, np.linalg.LinAlgError) as exc:
            status = Status.NUMERICAL
            info["error"] = f"KKT factorization failed: {exc}"
            break

        def kkt_solve(r1, r2, r3):
            """Solve A'dy + Gs'dzt = r1, A dx = r2, Gs dx - dzt = r3 (dzt = W^{-T} dz)."""
            def reduced(q1, q2, q3):
                if Qg is not None:
                    base = Qg.T @ np.concatenate([q3, q2]) + sla.solve_triangular(Rg, q1, trans="T")
                else:
                    base = sla.solve_triangular(Rg, q1 + Gs.T @ q3 + A.T @ q2, trans="T")
                if p:
                    dy_ = sla.cho_solve(Sc, B @ base - q2)
                    u = base - B.T @ dy_
                else:
                    dy_ = np.zeros(0)
                    u = base
                dx_ = sla.solve_triangular(Rg, u)
                return dx_, dy_, Gs @ dx_ - q3
            dx_, dy_, dzt_ = reduced(r1, r2, r3)
            for _ in range(settings.refine_steps):
                e1 = r1 - (A.T @ dy_ + Gs.T @ dzt_)
                e2 = r2 - A @ dx_
                e3 = r3 - (Gs @ dx_ - dzt_)
                c1, c2, c3 = reduced(e1, e2, e3)
                dx_, dy_, dzt_ = dx_ + c1, dy_ + c2, dzt_ + c3
            return dx_, dy_, dzt_

        def winv_t(v):
            out = np.empty(ms)
            for blk in blocks:
                out[blk.sl] = blk.Winvm.T @ v[blk.sl]
            return out

        def w_apply(v):
            out = np.empty(ms)
            for blk in blocks:
                out[blk.sl] = blk.Wm @ v[blk.sl]
            return out

        # dtau = 1 direction: rhs (-c, b, h)
        x1, y1, zt1 = kkt_solve(-c, b, w_apply(h))
        z1 = np.empty(ms)
        for blk in blocks:
            z1[blk.sl] = blk.Wm.T @ zt1[blk.sl]
        denom = -kappa / tau + c @ x1 + b @ y1 + h @ z1

        def direction(eta, rc, rtc):
            lrc = np.zeros(ms)
            for blk in blocks:
                lrc[blk.sl] = blk.div(rc[blk.sl])
            # G dx - W^{-1}W^{-T} dz = -eta rz - W^{-1} lrc + h dtau, scaled by W
            r3 = w_apply(-eta * rz) - lrc
            x2, y2, zt2 = kkt_solve(-eta * rx, eta * ry, r3)
            z2 = np.empty(ms)
            for blk in blocks:
                z2[blk.sl] = blk.Wm.T @ zt2[blk.sl]
            dtau = (-eta * rt - rtc / tau - c @ x2 - b @ y2 - h @ z2) / denom
            dx = x2 + dtau * x1
            dy = y2 + dtau * y1
            dz = z2 + dtau * z1
            dzt = zt2 + dtau * zt1  # W^{-T} dz
            ds = -eta * rz + h * dtau - G @ dx
            dst = lrc - dzt  # W ds
            dkappa = (rtc - kappa * dtau) / tau
            return dx, dy, ds, dz, dtau, dkappa, dst, dzt

        # predictor
        rc = -jordan(lam, lam)
        dx, dy, ds, dz, dtau, dkappa, dst, dzt = direction(1.0, rc, -tau * kappa)
        a_aff = min(1.0, max_step(s, ds, z, dz, tau, dtau, kappa, dkappa))
        mu_aff = ((s + a_aff * ds) @ (z + a_aff * dz) + (tau + a_aff * dtau) * (kappa + a_aff * dkappa)) / (nu + 1)
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3

        # corrector
        rc = sigma * mu * e - jordan(lam, lam) - jordan(dst, dzt)
        rtc = sigma * mu - tau * kappa - dtau * dkappa
        dx, dy, ds, dz, dtau, dkappa, _, _ = direction(1.0 - sigma, rc, rtc)
        alpha = max_step(s, ds, z, dz, tau, dtau, kappa, dkappa)
        alpha = min(1.0, settings.step_fraction * alpha)
        if not np.isfinite(alpha) or alpha < 1e-12 or not np.all(np.isfinite(dx)):
            status = Status.NUMERICAL
            info["error"] = f"step length collapsed ({alpha})"
            break
        x = x + alpha * dx
        y = y + alpha * dy
        s = s + alpha * ds
        z = z + alpha * dz
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkappa

    if status is Status.OPTIMAL:
        xh, yfull, sh, zh, pres, dres, pcost, dcost, gap_abs = cur
    elif status is Status.PRIMAL_INFEASIBLE:
        scale = -(h @ z + b @ y)
        yfull = np.zeros(b0.size)
        yfull[keep] = (y / rscale) / scale
        xh, sh, zh = np.full(nx, np.nan), np.full(ms, np.nan), z / scale
        pres = dres = gap_abs = math.nan
        pcost, dcost = math.inf, math.inf
    elif status is Status.DUAL_INFEASIBLE:
        scale = -(c @ x)
        xh, sh = x / scale, s / scale
        yfull, zh = np.full(b0.size, np.nan), np.full(ms, np.nan)
        pres = dres = gap_abs = math.nan
        pcost, dcost = -math.inf, -math.inf
    else:
        xh, yfull, sh, zh, pres, dres, pcost, dcost, gap_abs = best[1] if best else cur
        info["best_iterate"] = best[2] if best else it
    info.update(tau=float(tau), kappa=float(kappa))
    return SolveResult(
        status=status,
        primal_value=float(pcost + prog.offset),
        dual_value=float(dcost + prog.offset),
        primal=xh,
        dual=yfull,
        dual_slack=zh,
        residuals=Residuals(float(pres), float(dres), float(gap_abs)),
        iterations=it,
        info=info,
        slack=sh,
    )
