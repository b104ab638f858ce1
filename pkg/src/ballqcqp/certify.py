"""Numerical certificates for the structural results about the lifted cone.

Every check returns a :class:`CertReport` whose ``worst_margin`` is the
smallest signed margin among the inequalities it tested, normalized as stated
in ``details``.  A report passes iff ``worst_margin >= -tol``.  When an input
does not satisfy a check's hypothesis the report has status
``precondition-failed`` and does not pass.

Nothing here trusts a solver: memberships are re-evaluated by
eigendecomposition and norms.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DecompositionNotFound, PreconditionFailed, ShapeError
from .instance import BallQcqpInstance, ball_residuals
from .liftmaps import (arrow, d_vectors, implied_psd_block, kron_map, lift_point, p_matrix,
                       project, q_matrix, split_kron_vector, zhen_map)
from .matcone import SocConvention, as_sym, kron, min_eig, soc_margin, spectral

PASS = "pass"
FAIL = "fail"
PRECONDITION_FAILED = "precondition-failed"

RANK_THRESHOLD = 1e-6


@dataclass(frozen=True)
class CertReport:
    name: str
    passed: bool
    worst_margin: float
    details: str = ""
    status: str = ""

    def __post_init__(self):
        if not self.status:
            object.__setattr__(self, "status", PASS if self.passed else FAIL)

    def to_dict(self) -> dict:
        wm = self.worst_margin
        return {"name": self.name, "pass": bool(self.passed),
                "worst_margin": wm if math.isfinite(wm) else str(wm),
                "details": self.details, "status": self.status}


def reports_to_json(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=1) + "\n"


def _report(name, margin, tol, details=""):
    margin = float(margin)
    return CertReport(name, bool(margin >= -tol), margin, f"tol={tol!r}; {details}".rstrip("; "))


def _precondition(name, margin, why):
    return CertReport(name, False, float(margin), why, PRECONDITION_FAILED)


@dataclass(frozen=True, eq=False)
class DecompositionCertificate:
    """Atoms ``alpha_k * w_k w_k'`` with ``w_k = lift_point(x_k)``; atom 0 is the interior one."""

    weights: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        p = np.atleast_2d(np.asarray(self.points, dtype=float))
        if w.size != p.shape[0]:
            raise ShapeError(f"{w.size} weights for {p.shape[0]} points")
        if w.size < 2:
            raise ShapeError("a decomposition certificate needs at least two atoms")
        if not np.all(w > 0):
            raise ShapeError("certificate weights must be strictly positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "points", p)

    @property
    def count(self) -> int:
        return self.weights.size

    def matrix(self) -> np.ndarray:
        W = np.array([lift_point(x) for x in self.points])
        return (W.T * self.weights) @ W


# ---------------------------------------------------------------- cone membership

def numerical_rank(Z, threshold: float = RANK_THRESHOLD) -> int:
    lam, _ = spectral(Z)
    if lam[0] <= 0:
        return 0
    return int(np.sum(lam > threshold * lam[0]))


def burer_margins(Z, inst: BallQcqpInstance, balls=None, homogenized: bool = True) -> dict:
    """Signed margins of ``Z`` for each constraint family of the lifted relaxation.

    Keys: ``psd`` (min eigenvalue), ``q`` (``-|<Q, Z>|``), ``soc`` (worst
    second-order-cone margin of ``P Z d_i``), ``rlt`` (min ``d_i' Z d_j``) and,
    if ``homogenized``, ``homog`` (``-|Z[-1, -1] - 1|``).  ``balls`` restricts
    to a subset of ball indices.
    """
    Z = as_sym(Z)
    n = inst.n
    if Z.shape != (n + 2, n + 2):
        raise ShapeError(f"lifted matrix must be {(n + 2, n + 2)}, got {Z.shape}")
    balls = list(range(inst.m)) if balls is None else list(balls)
    D = d_vectors(inst)[balls]
    P, Q = p_matrix(n), q_matrix(n)
    out = {
        "psd": min_eig(Z),
        "q": -abs(float(np.sum(Q * Z))),
        "soc": min(soc_margin(P @ Z @ d, SocConvention.LAST) for d in D),
        "rlt": float(np.min((D @ Z @ D.T)[np.triu_indices(len(balls))])),
    }
    if homogenized:
        out["homog"] = -abs(float(Z[-1, -1]) - 1.0)
    return out


def _fmt(margins: dict) -> str:
    return ", ".join(f"{k}={v:.3e}" for k, v in margins.items())


def burer_membership(Z, inst: BallQcqpInstance, tol: float = 1e-6, balls=None,
                     homogenized: bool = True) -> CertReport:
    margins = burer_margins(Z, inst, balls, homogenized)
    return _report("burer-membership", min(margins.values()), tol, _fmt(margins))


# ---------------------------------------------------------------- Q / P relation

def fact_qp_check(w, tol: float = 1e-9) -> CertReport:
    """``w'Qw >= 0`` iff ``Pw`` lies in the second-order cone or its negative.

    Both sides are sorted into negative / boundary / positive with tolerance
    ``tol``.  The cone side uses the margin ``|v_last| - ||v_rest||`` with
    tolerance ``tol * max(1, |v_last| + ||v_rest||)`` so that the two
    classifications are comparable.  On agreement the margin is the smaller
    of the two magnitudes (0 on the boundary); on disagreement it is minus the
    larger one.
    """
    w = np.asarray(w, dtype=float).ravel()
    if w.size < 3 or not np.all(np.isfinite(w)):
        raise ShapeError("w must be a finite vector of length n + 2 >= 3")
    n = w.size - 2
    qa = float(w @ q_matrix(n) @ w)
    v = p_matrix(n) @ w
    rest = float(np.linalg.norm(v[:-1]))
    sm = abs(v[-1]) - rest
    stol = tol * max(1.0, abs(v[-1]) + rest)

    def cat(val, t):
        return 0 if abs(val) <= t else (1 if val > 0 else -1)

    cq, cs = cat(qa, tol), cat(sm, stol)
    if cq == cs:
        margin = 0.0 if cq == 0 else min(abs(qa), abs(sm))
    else:
        margin = -max(abs(qa), abs(sm), 2 * tol)
    return _report("fact-qp", margin, tol, f"wQw={qa:.6e}, cone margin={sm:.6e}")


# ---------------------------------------------------------------- rank-one lifts

def rank_one_feasibility(x, inst: BallQcqpInstance, tol: float = 1e-9) -> CertReport:
    """``x`` in the feasible set iff its rank-one lift is in the lifted cone slice."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != inst.n:
        raise ShapeError(f"x must have length {inst.n}")
    in_s = float(np.min(ball_residuals(inst, x)))
    w = lift_point(x)
    margins = burer_margins(np.outer(w, w), inst)
    member = min(margins.values())
    if (in_s >= -tol) == (member >= -tol):
        margin = min(abs(in_s), abs(member))
    else:
        margin = -max(abs(in_s), abs(member))
    return _report("rank-one", margin, tol, f"ball residual={in_s:.6e}; " + _fmt(margins))


# ---------------------------------------------------------------- domination

def _pair_precondition(name, Z, inst, i, j, tol, homogenized):
    margins = burer_margins(Z, inst, balls=(i, j), homogenized=homogenized)
    worst = min(margins.values())
    if worst < -tol:
        return _precondition(name, worst, "Z not in the pair cone within tol: " + _fmt(margins))
    return None


def kron_domination(Z, inst: BallQcqpInstance, i: int, j: int, tol: float = 1e-6) -> CertReport:
    """Kronecker-RLT matrix of the projection of ``Z`` is PSD.

    Margin: ``min_eig(K) / (1 + ||K||_F)``.  The map is evaluated with
    ``x0 = Z[-1, -1]``, which equals the affine version on the slice.
    """
    Z = as_sym(Z)
    bad = _pair_precondition("kron-dom", Z, inst, i, j, tol, homogenized=False)
    if bad:
        return bad
    X, x = project(Z)
    K = kron_map(X, x, inst, i, j, x0=Z[-1, -1])
    scale = 1.0 + np.linalg.norm(K)
    me = min_eig(K)
    return _report("kron-dom", me / scale, tol, f"pair=({i},{j}), min_eig={me:.6e}, scale={scale:.6e}")


def zhen_domination(Z, inst: BallQcqpInstance, i: int, j: int, tol: float = 1e-6) -> CertReport:
    Z = as_sym(Z)
    bad = _pair_precondition("zhen-dom", Z, inst, i, j, tol, homogenized=True)
    if bad:
        return bad
    X, x = project(Z)
    M = zhen_map(X, x, inst, i, j)
    scale = 1.0 + np.linalg.norm(M)
    me = min_eig(M)
    return _report("zhen-dom", me / scale, tol, f"pair=({i},{j}), min_eig={me:.6e}, scale={scale:.6e}")


def implied_psd_check(Z, inst: BallQcqpInstance, i: int, j: int, tol: float = 1e-6) -> CertReport:
    """The ``2n x 2n`` matrix of linearized ``(x - c_i, x - c_j)`` products is PSD."""
    Z = as_sym(Z)
    bad = _pair_precondition("implied-psd", Z, inst, i, j, tol, homogenized=True)
    if bad:
        return bad
    X, x = project(Z)
    M = implied_psd_block(X, x, inst, i, j)
    scale = 1.0 + np.linalg.norm(M)
    me = min_eig(M)
    return _report("implied-psd", me / scale, tol, f"pair=({i},{j}), min_eig={me:.6e}")


def socrlt_components(Z, inst: BallQcqpInstance, i: int, tol: float = 1e-6):
    """``(xi, beta, delta, report)`` for ball ``i``.

    With ``u = xi + 2 delta x`` the cone constraint on ``P Z d_i`` reads
    ``beta >= 0``, ``delta >= 0`` and ``||u||^2 <= 4 beta delta``.  The third
    margin is ``(4 beta delta - ||u||^2) / (1 + |beta| + |delta|)``.
    """
    Z = as_sym(Z)
    n = inst.n
    homog = abs(Z[-1, -1] - 1.0)
    X, x = Z[:n, :n], Z[:n, n + 1]
    ztx, ztt, t = Z[:n, n], Z[n, n], Z[n, n + 1]
    c, r = inst.centers[i], inst.radii[i]
    k = r * r - c @ c
    delta = float(2 * x @ c - t + k)
    beta = float(2 * ztx @ c - ztt + t * k)
    xi = 4 * X @ c - 4 * x * (x @ c) - 2 * ztx + 2 * t * x
    if homog > tol:
        return xi, beta, delta, _precondition("socrlt", -homog, "Z[-1, -1] != 1")
    u = xi + 2 * delta * x
    quad = (4 * beta * delta - u @ u) / (1 + abs(beta) + abs(delta))
    rep = _report("socrlt", min(beta, delta, quad), tol,
                  f"ball={i}, beta={beta:.6e}, delta={delta:.6e}, quad={quad:.6e}")
    return xi, beta, delta, rep


def trace_rlt_check(Z, inst: BallQcqpInstance, i: int, tol: float = 1e-6) -> CertReport:
    """Trace and matrix forms of the squared ball constraint for the projection of ``Z``."""
    Z = as_sym(Z)
    n = inst.n
    pre = {
        "homog": -abs(Z[-1, -1] - 1.0),
        "psd": min_eig(Z),
        "q": -abs(float(np.sum(q_matrix(n) * Z))),
    }
    if min(pre.values()) < -tol:
        return _precondition("trace-rlt", min(pre.values()), "precondition: " + _fmt(pre))
    X, x = project(Z)
    c, r = inst.centers[i], inst.radii[i]
    M = X - np.outer(x, c) - np.outer(c, x) + np.outer(c, c)
    tr_margin = float(r * r - np.trace(M))
    eig_margin = min_eig(r * r * np.eye(n) - M)
    return _report("trace-rlt", min(tr_margin, eig_margin), tol,
                   f"ball={i}, trace margin={tr_margin:.6e}, eig margin={eig_margin:.6e}")


# ---------------------------------------------------------------- Kronecker lemmas

def kron_linearity(points, weights, inst: BallQcqpInstance, i: int, j: int,
                   tol: float = 1e-10) -> CertReport:
    """The Kronecker map of ``(sum a x x', sum a x)`` equals the weighted sum of rank-one Kroneckers.

    The map is taken homogeneous in ``x0 = sum a``, so the identity holds for
    weights of any sign and any total.  Margin: ``-||LHS - RHS||_F / (1 + ||LHS||_F)``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    a = np.asarray(weights, dtype=float).ravel()
    if pts.shape != (a.size, inst.n):
        raise ShapeError(f"points must be ({a.size}, {inst.n})")
    X = (pts.T * a) @ pts
    x = a @ pts
    lhs = kron_map(X, x, inst, i, j, x0=float(a.sum()))
    rhs = np.zeros_like(lhs)
    ci, cj = inst.centers[i], inst.centers[j]
    ri, rj = inst.radii[i], inst.radii[j]
    for ak, xk in zip(a, pts):
        rhs += ak * kron(arrow(xk, cj, rj), arrow(xk, ci, ri))
    gap = float(np.linalg.norm(lhs - rhs))
    rel = gap / (1.0 + np.linalg.norm(lhs))
    return _report("kron-linearity", -rel, tol, f"pair=({i},{j}), gap={gap:.3e}")


def compare_kron_inequality(x, V, inst: BallQcqpInstance, i: int, j: int,
                            tol: float = 1e-8, sphere_tol: float = 1e-9) -> CertReport:
    """Lower bound of the Kronecker quadratic form by the ball-``j`` slack.

    Hypothesis: ``x`` on sphere ``i`` (within ``sphere_tol``) or strictly inside
    both balls.  Margin: ``(LHS - RHS) / (1 + |LHS| + |RHS|)``.
    """
    x = np.asarray(x, dtype=float).ravel()
    n = inst.n
    ci, cj = inst.centers[i], inst.centers[j]
    ri, rj = inst.radii[i], inst.radii[j]
    di = float(np.linalg.norm(x - ci))
    dj = float(np.linalg.norm(x - cj))
    on_sphere = abs(di - ri) <= sphere_tol * max(1.0, ri)
    interior = di < ri and dj < rj
    if not (on_sphere or interior):
        return _precondition("compare-kron", -abs(di - ri),
                             f"x neither on sphere {i} nor inside both balls")
    V = np.asarray(V, dtype=float).ravel()
    vs, bs = split_kron_vector(V, n)
    lhs = float(V @ kron(arrow(x, cj, rj), arrow(x, ci, ri)) @ V)
    u = ri * vs[n] + bs[n] * (x - ci)
    rhs = (rj * rj - dj * dj) * float(u @ u) / (ri * rj)
    margin = (lhs - rhs) / (1.0 + abs(lhs) + abs(rhs))
    branch = "sphere" if on_sphere else "interior"
    return _report("compare-kron", margin, tol, f"branch={branch}, lhs={lhs:.6e}, rhs={rhs:.6e}")


# ---------------------------------------------------------------- decomposition

def _require_two_balls(inst):
    if inst.m != 2:
        raise PreconditionFailed(f"decomposition checks need m = 2, got m = {inst.m}")


def verify_decomposition(Zbar, cert: DecompositionCertificate, inst: BallQcqpInstance,
                         tol: float = 1e-8, rank_threshold: float = RANK_THRESHOLD) -> CertReport:
    """Check a certificate against the structure of a non-rank-one extreme ray.

    Conditions and their margins: (a) ``-||Zbar - sum||_F / ||Zbar||_F``;
    (b) ``min_k g_k(x_1) - 2 tol`` so that passing means residuals ``>= tol``;
    (c) ``-max_{i>=2} | ||x_i - c_1|| - r_1 |``; (d) ``-|cone margin of P Zbar d_2|``
    relative to ``1 + ||P Zbar d_2||``; (e) ``0`` if the atom count equals the
    numerical rank, else ``-1``.
    """
    name = "decomp"
    if inst.m != 2:
        return _precondition(name, -math.inf, f"needs m = 2, got m = {inst.m}")
    Zbar = as_sym(Zbar)
    rank = numerical_rank(Zbar, rank_threshold)
    if rank < 2:
        return _precondition(name, -math.inf, f"the structure applies to rank > 1, got rank {rank}")
    if cert.points.shape[1] != inst.n:
        raise ShapeError("certificate points have the wrong dimension")
    c1, r1 = inst.centers[0], inst.radii[0]
    scale = max(np.linalg.norm(Zbar), np.finfo(float).tiny)
    m_a = -float(np.linalg.norm(Zbar - cert.matrix())) / scale
    m_b = float(np.min(ball_residuals(inst, cert.points[0]))) - 2 * tol
    m_c = -float(np.max(np.abs(np.linalg.norm(cert.points[1:] - c1, axis=1) - r1)))
    v = p_matrix(inst.n) @ Zbar @ d_vectors(inst)[1]
    m_d = -abs(soc_margin(v, SocConvention.LAST)) / (1.0 + np.linalg.norm(v))
    m_e = 0.0 if cert.count == rank else -1.0
    margins = {"a": m_a, "b": m_b, "c": m_c, "d": m_d, "e": m_e}
    return _report(name, min(margins.values()), tol, f"rank={rank}, atoms={cert.count}, " + _fmt(margins))


def _zero_diagonal_basis(G) -> np.ndarray:
    """Orthogonal ``U`` with ``diag(U' G U) = 0`` for a traceless symmetric ``G``.

    Repeatedly rotates a pair of coordinates with diagonal entries of
    opposite sign until one of them vanishes; each rotation retires one
    coordinate, so at most ``k - 1`` rotations are needed.
    """
    G = as_sym(G)
    k = G.shape[0]
    U = np.eye(k)
    active = list(range(k))
    scale = max(1.0, float(np.max(np.abs(G))))
    for _ in range(k - 1):
        M = U.T @ G @ U
        diag = np.array([M[a, a] for a in active])
        if np.all(np.abs(diag) <= 1e-15 * scale):
            break
        ia = active[int(np.argmax(diag))]
        ib = active[int(np.argmin(diag))]
        a, b, c = M[ia, ia], M[ia, ib], M[ib, ib]
        if a <= 0 or c >= 0:
            # one sign only: zero already up to round-off
            break
        # new e_ia = cos e_ia + sin e_ib with a + 2 b tan + c tan^2 = 0
        q = -(b + math.copysign(math.sqrt(b * b - a * c), b))
        tan = a / q
        cs = 1.0 / math.sqrt(1.0 + tan * tan)
        sn = tan * cs
        R = np.eye(k)
        R[ia, ia], R[ib, ia] = cs, sn
        R[ia, ib], R[ib, ib] = -sn, cs
        U = U @ R
        active.remove(ia)
    return U


def decompose_extreme_ray(Zbar, inst: BallQcqpInstance, tol: float = 1e-8, restarts: int = 20,
                          seed: int = 0, membership_tol: float = 1e-6,
                          rank_threshold: float = RANK_THRESHOLD) -> DecompositionCertificate:
    """Write an extreme ray as a sum of rank-one lifts, one interior and the rest on sphere 1.

    The interior atom is forced: it is proportional to ``Zbar d_1``.  The
    remainder annihilates ``d_1`` and is split into lifted atoms by choosing
    an orthonormal factor basis in which the quadratic form ``Q`` has zero
    diagonal.  Random initial bases are tried when an atom has a vanishing
    last coordinate.  Every candidate is re-validated with
    :func:`verify_decomposition`; if none validates, raises
    :class:`DecompositionNotFound`.
    """
    _require_two_balls(inst)
    Zbar = as_sym(Zbar)
    n = inst.n
    margins = burer_margins(Zbar, inst, homogenized=False)
    scale = max(1.0, float(np.linalg.norm(Zbar)))
    if min(margins.values()) < -membership_tol * scale:
        raise PreconditionFailed("input is not in the lifted cone: " + _fmt(margins))
    lam, V = spectral(Zbar)
    rank = int(np.sum(lam > rank_threshold * lam[0])) if lam[0] > 0 else 0
    if rank < 2:
        raise PreconditionFailed(f"the structure applies to rank > 1, got rank {rank}")
    Zr = (V[:, :rank] * lam[:rank]) @ V[:, :rank].T
    d1 = d_vectors(inst)[0]
    u = Zr @ d1
    if abs(u[-1]) <= 1e-12 * np.linalg.norm(u):
        raise DecompositionNotFound("Zbar d_1 has no homogenizing component")
    w1 = u / u[-1]
    g1 = float(d1 @ w1)
    if g1 <= 0:
        raise DecompositionNotFound("the candidate interior atom is not inside ball 1")
    alpha1 = float(u[-1]) / g1
    if alpha1 <= 0:
        raise DecompositionNotFound("negative weight for the interior atom")
    R = Zr - alpha1 * np.outer(w1, w1)
    mu, Vr = spectral(R)
    k = rank - 1
    if mu[k - 1] <= 0:
        raise DecompositionNotFound("remainder is not PSD of the expected rank")
    B = Vr[:, :k] * np.sqrt(mu[:k])
    G = B.T @ q_matrix(n) @ B
    rng = np.random.default_rng(seed)
    last_report = None
    for attempt in range(max(1, restarts)):
        U0 = np.eye(k) if attempt == 0 else np.linalg.qr(rng.standard_normal((k, k)))[0]
        U = U0 @ _zero_diagonal_basis(U0.T @ G @ U0)
        cols = B @ U
        last = cols[-1]
        if np.any(np.abs(last) <= 1e-9 * np.linalg.norm(cols, axis=0)):
            continue
        weights = np.concatenate([[alpha1], last ** 2])
        points = np.vstack([w1[:n], (cols[:n] / last).T])
        cert = DecompositionCertificate(weights, points)
        last_report = verify_decomposition(Zbar, cert, inst, tol, rank_threshold)
        if last_report.passed:
            return cert
    why = last_report.details if last_report else "every basis had an atom at infinity"
    raise DecompositionNotFound(f"no validated decomposition after {restarts} bases ({why})")


def _range_basis(Z, rank_threshold):
    lam, V = spectral(Z)
    if lam[0] <= 0:
        return V[:, :0], V
    r = int(np.sum(lam > rank_threshold * lam[0]))
    return V[:, :r], V[:, r:]


def face_dimension(Z, inst: BallQcqpInstance, tol: float = 1e-6,
                   rank_threshold: float = RANK_THRESHOLD) -> int:
    """Dimension of the smallest face of the lifted cone containing ``Z``.

    Counts symmetric directions ``D = V S V'`` (``V`` spans the range of
    ``Z``) along which ``Z +- eps D`` stays in the cone to first order: the
    ``Q`` equality, every active product ``d_i' Z d_j = 0`` and, for a
    boundary ``P Z d_i``, ``P D d_i`` parallel to it (the cone is strictly
    convex).  ``Z`` spans an extreme ray iff the result is 1.
    """
    Z = as_sym(Z)
    n = inst.n
    V, _ = _range_basis(Z, rank_threshold)
    r = V.shape[1]
    if r == 0:
        return 0
    rows_, cols_ = np.triu_indices(r)
    basis = []
    for a, b in zip(rows_, cols_):
        E = np.zeros((r, r))
        E[a, b] = E[b, a] = 1.0 if a == b else 1.0 / math.sqrt(2.0)
        basis.append(V @ E @ V.T)
    basis = np.array(basis)  # (k, n+2, n+2)
    k = len(basis)
    P, Q, D = p_matrix(n), q_matrix(n), d_vectors(inst)
    zscale = max(1.0, float(np.linalg.norm(Z)))
    blocks = [np.einsum("kab,ab->k", basis, Q)[None, :]]
    extra = []
    for i, d in enumerate(D):
        v = P @ Z @ d
        nv = float(np.linalg.norm(v))
        img = np.einsum("ab,kbc,c->ak", P, basis, d)  # (n+2, k)
        if nv <= tol * zscale:
            blocks.append(img)
        elif abs(soc_margin(v, SocConvention.LAST)) <= tol * nv:
            extra.append((len(blocks), v / nv))
            blocks.append(img)
    m = len(D)
    for i in range(m):
        for j in range(i, m):
            if abs(D[i] @ Z @ D[j]) <= tol * zscale * max(1.0, np.linalg.norm(D[i]) * np.linalg.norm(D[j])):
                blocks.append(np.einsum("a,kab,b->k", D[i], basis, D[j])[None, :])
    ncols = k + len(extra)
    A = np.zeros((sum(b.shape[0] for b in blocks), ncols))
    row = 0
    for bi, b in enumerate(blocks):
        A[row:row + b.shape[0], :k] = b
        for col, (which, unit) in enumerate(extra):
            if which == bi:
                A[row:row + b.shape[0], k + col] = -unit
        row += b.shape[0]
    sv = np.linalg.svd(A, compute_uv=False) if A.size else np.zeros(0)
    svmax = sv[0] if sv.size else 0.0
    rank_a = int(np.sum(sv > 1e-7 * max(svmax, 1.0)))
    return ncols - rank_a


def exposing_functional(Z, inst: BallQcqpInstance, tol: float = 1e-6,
                        rank_threshold: float = RANK_THRESHOLD) -> np.ndarray:
    """A matrix ``S`` in the dual cone with ``<S, Z> = 0``.

    Sum of unit normals of the constraints active at ``Z``: the projector onto
    its kernel, ``sym(P' s d_i')`` for each boundary ``P Z d_i`` with ``s`` the
    reflected boundary ray, and ``sym(d_i d_j')`` for each vanishing product.
    """
    Z = as_sym(Z)
    n = inst.n
    _, N = _range_basis(Z, rank_threshold)
    S = N @ N.T
    P, D = p_matrix(n), d_vectors(inst)
    zscale = max(1.0, float(np.linalg.norm(Z)))
    J = -np.ones(n + 2)
    J[-1] = 1.0
    for d in D:
        v = P @ Z @ d
        nv = float(np.linalg.norm(v))
        if nv <= tol * zscale:
            s = np.zeros(n + 2)
            s[-1] = 1.0
        elif abs(soc_margin(v, SocConvention.LAST)) <= tol * nv:
            s = J * v / nv
        else:
            continue
        G = np.outer(P.T @ s, d)
        S += (G + G.T) / (2 * np.linalg.norm(G))
    m = len(D)
    for i in range(m):
        for j in range(i, m):
            if abs(D[i] @ Z @ D[j]) <= tol * zscale:
                G = np.outer(D[i], D[j])
                S += (G + G.T) / (2 * np.linalg.norm(G))
    return S


def hunt_extreme_ray(inst: BallQcqpInstance, rng, eps: float = 1e-3, settings=None):
    """Minimize a random functional over the trace section of the lifted cone.

    The functional is ``S / ||S|| + eps R`` with ``R`` a random unit symmetric
    matrix and ``S`` exposing the face of a random mixed-sign structured
    point (:func:`synthetic_certificate`); uniformly random functionals
    almost surely land on rank-one rays.  Returns ``(Z, result)`` with ``Z``
    of unit trace, or ``(None, result)`` if the solve failed.
    """
    from .relaxations import build_cone_section, solve_relaxation

    seed_Z, _ = synthetic_certificate(inst, rng, rank=3)
    S = exposing_functional(seed_Z, inst)
    n = inst.n
    R = as_sym(rng.standard_normal((n + 2, n + 2)))
    C = S / np.linalg.norm(S) + eps * R / np.linalg.norm(R)
    res, dec = solve_relaxation(build_cone_section(inst, C), settings)
    if not res.ok or dec is None:
        return None, res
    return dec["Z"], res


def m_matrix_check(cert: DecompositionCertificate, inst: BallQcqpInstance,
                   tol: float = 1e-8) -> CertReport:
    """PSD-ness of the ``(n+1) x (n+1)`` matrix weighted by ball-2 slacks of the atoms.

    Precondition: ``P Zbar d_2`` in the cone for the reconstructed ``Zbar``.
    Margins: the sum gate, the product gate and ``min_eig(M)``, each divided by
    ``1 + ||M||_F``.
    """
    name = "m-matrix"
    if inst.m != 2:
        return _precondition(name, -math.inf, f"needs m = 2, got m = {inst.m}")
    Zbar = cert.matrix()
    v = p_matrix(inst.n) @ Zbar @ d_vectors(inst)[1]
    cm = soc_margin(v, SocConvention.LAST)
    if cm < -tol * (1.0 + np.linalg.norm(v)):
        return _precondition(name, cm, "P Zbar d_2 is outside the cone")
    c2, r2 = inst.centers[1], inst.radii[1]
    pts = cert.points
    eta = r2 * r2 - np.sum((pts - c2) ** 2, axis=1)
    ae = cert.weights * eta
    s0 = float(ae.sum())
    s1 = ae @ pts
    s2 = float(ae @ np.sum(pts * pts, axis=1))
    n = inst.n
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = s0 * np.eye(n)
    M[:n, n] = M[n, :n] = s1
    M[n, n] = s2
    scale = 1.0 + np.linalg.norm(M)
    gates = {
        "sum": (s0 + s2) / scale,
        "product": (s0 * s2 - s1 @ s1) / scale ** 2,
        "eig": min_eig(M) / scale,
    }
    signs = "mixed" if np.any(eta < 0) and np.any(eta > 0) else "uniform"
    return _report(name, min(gates.values()), tol, f"eta signs {signs}, " + _fmt(gates))


def synthetic_certificate(inst: BallQcqpInstance, rng, rank: int = 2, max_tries: int = 200):
    """A certificate with the extreme-ray structure, for round-trip tests.

    Rank 2: the sphere atom sits on both spheres, so ``P Zbar d_2`` is on the
    boundary.  Rank 3: two atoms on sphere 1 with ball-2 slacks of opposite
    sign, and the third weight solved so that ``P Zbar d_2`` is on the
    boundary.  Returns ``(Zbar, cert)``; raises :class:`PreconditionFailed`
    when the balls admit no such configuration (``n < 2`` or nested spheres).
    """
    if inst.m != 2 or inst.n < 2:
        raise PreconditionFailed("synthetic certificates need m = 2 and n >= 2")
    if rank not in (2, 3):
        raise ShapeError("rank must be 2 or 3")
    c1, c2 = inst.centers
    r1, r2 = inst.radii
    n = inst.n
    D = float(np.linalg.norm(c2 - c1))
    axis = (c2 - c1) / D if D > 0 else np.eye(n)[0]

    def sphere1_point():
        z = rng.standard_normal(n)
        return c1 + r1 * z / np.linalg.norm(z)

    def interior_point():
        for _ in range(1000):
            x = inst.witness + rng.uniform(-1, 1, n) * min(r1, r2)
            if np.min(ball_residuals(inst, x)) > 1e-3:
                return x
        raise PreconditionFailed("could not sample a point inside both balls")

    x1 = interior_point()
    a1 = float(rng.uniform(0.5, 2.0))
    if rank == 2:
        a = (D * D + r1 * r1 - r2 * r2) / (2 * D) if D > 0 else math.nan
        h2 = r1 * r1 - a * a
        if not h2 > 1e-6:
            raise PreconditionFailed("the two spheres do not meet")
        z = rng.standard_normal(n)
        z -= (z @ axis) * axis
        x2 = c1 + a * axis + math.sqrt(h2) * z / np.linalg.norm(z)
        cert = DecompositionCertificate([a1, float(rng.uniform(0.5, 2.0))], [x1, x2])
        return cert.matrix(), cert
    P = p_matrix(n)
    Jd = np.ones(n + 2)
    Jd[:-1] = -1.0
    for _ in range(max_tries):
        x2, x3 = sphere1_point(), sphere1_point()
        e2 = r2 * r2 - float(np.sum((x2 - c2) ** 2))
        e3 = r2 * r2 - float(np.sum((x3 - c2) ** 2))
        if e2 < e3:
            x2, x3, e2, e3 = x3, x2, e3, e2
        if not (e2 > 1e-3 and e3 < -1e-3):
            continue
        e1 = r2 * r2 - float(np.sum((x1 - c2) ** 2))
        a2 = float(rng.uniform(0.5, 2.0))
        base = a1 * e1 * (P @ lift_point(x1)) + a2 * e2 * (P @ lift_point(x2))
        p3 = e3 * (P @ lift_point(x3))
        # (base + t p3)' J (base + t p3) = 0 is linear in t: p3 is a boundary ray, p3' J p3 = 0
        qb, qc = 2 * base @ (Jd * p3), base @ (Jd * base)
        if abs(qb) < 1e-12:
            continue
        a3 = -qc / qb
        if a3 > 1e-3 and (base + a3 * p3)[-1] > 0:
            cert = DecompositionCertificate([a1, a2, a3], [x1, x2, x3])
            return cert.matrix(), cert
    raise PreconditionFailed("no mixed-sign configuration found")


# ---------------------------------------------------------------- moments

def moment_implies_burer(y, inst: BallQcqpInstance, tol: float = 1e-6) -> CertReport:
    """Pseudomoments feasible for the level-2 moment relaxation give a lifted-cone point."""
    from .relaxations import build_moment2, moment_to_lifted
    from .conic import program_violation

    y = np.asarray(y, dtype=float).ravel()
    built = build_moment2(inst)
    eq, cone = program_violation(built.program, built.canonical.complete(y))
    if eq > tol or cone < -tol:
        return _precondition("moment-implies", min(-eq, cone),
                             f"moments infeasible: eq residual={eq:.3e}, cone margin={cone:.3e}")
    Z = moment_to_lifted(y, inst.n)
    margins = burer_margins(Z, inst)
    return _report("moment-implies", min(margins.values()), tol, _fmt(margins))
