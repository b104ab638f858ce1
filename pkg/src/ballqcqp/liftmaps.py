"""Linear and affine maps on the lifted space.

Lifted vectors are ordered ``w = (x_1..x_n, t, x0)`` where ``t`` models
``||x||^2`` and ``x0`` is the homogenizing coordinate.  Ball indices are
0-based throughout the package.

The Kronecker and Zhen maps take an optional ``x0``.  With ``x0 = 1`` they are
the usual affine maps of ``(X, x)``; with ``x0 = Z[n+1, n+1]`` they are the
homogeneous (linear) maps of the moment matrix ``[[X, x], [x', x0]]``, which is
what lets conic combinations with arbitrary total weight commute with them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .instance import BallQcqpInstance
from .matcone import as_sym


@dataclass(frozen=True, eq=False)
class StructureMatrices:
    Q: np.ndarray
    P: np.ndarray
    d: np.ndarray  # (m, n+2), row i is d^i


def q_matrix(n: int) -> np.ndarray:
    Q = np.zeros((n + 2, n + 2))
    Q[:n, :n] = -2.0 * np.eye(n)
    Q[n, n + 1] = Q[n + 1, n] = 1.0
    return Q


def p_matrix(n: int) -> np.ndarray:
    P = np.zeros((n + 2, n + 2))
    P[:n, :n] = 2.0 * np.eye(n)
    P[n:, n:] = [[1.0, -1.0], [1.0, 1.0]]
    return P


def d_vectors(inst: BallQcqpInstance) -> np.ndarray:
    c = inst.centers
    return np.column_stack([2.0 * c, -np.ones(inst.m), inst.radii**2 - np.sum(c * c, axis=1)])


def structure_matrices(inst: BallQcqpInstance) -> StructureMatrices:
    return StructureMatrices(Q=q_matrix(inst.n), P=p_matrix(inst.n), d=d_vectors(inst))


def lift_point(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    return np.concatenate([x, [x @ x, 1.0]])


def lift_matrix(x) -> np.ndarray:
    w = lift_point(x)
    return np.outer(w, w)


def project(Z):
    """``(X, x)``: the leading ``n x n`` block and the first ``n`` entries of the last column."""
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[0] - 2
    if n < 1 or Z.shape != (n + 2, n + 2):
        raise ShapeError(f"lifted matrix must be square of size >= 3, got {Z.shape}")
    return Z[:n, :n].copy(), Z[:n, n + 1].copy()


def arrow(x, c, r, x0: float = 1.0) -> np.ndarray:
    """Arrow matrix ``[[r I, x - c], [(x - c)', r]]``, PSD iff ``||x - c|| <= r``."""
    x = np.asarray(x, dtype=float).ravel()
    c = np.asarray(c, dtype=float).ravel()
    if x.shape != c.shape:
        raise ShapeError("x and c must have the same length")
    n = x.size
    out = r * x0 * np.eye(n + 1)
    out[:n, n] = out[n, :n] = x - x0 * c
    return out


def _check_pair(inst: BallQcqpInstance, i: int, j: int):
    for k in (i, j):
        if not 0 <= k < inst.m:
            raise IndexError(f"ball index {k} out of range for m={inst.m}")
    if i == j:
        raise IndexError("the pair maps need two distinct balls")


def _check_xX(inst, X, x):
    n = inst.n
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    x = np.asarray(x, dtype=float).ravel()
    if X.shape != (n, n) or x.shape != (n,):
        raise ShapeError(f"expected X of shape ({n}, {n}) and x of length {n}")
    return X, x


def kron_map(X, x, inst: BallQcqpInstance, i: int, j: int, x0: float = 1.0) -> np.ndarray:
    """Kronecker-RLT matrix for balls ``i`` and ``j``.

    At a rank-one point ``X = x x'`` this equals
    ``kron(arrow(x, c_j, r_j), arrow(x, c_i, r_i))``; products ``x_k x_l`` are
    replaced by ``X[k, l]``.  Block ``(k, l)`` has size ``n + 1``.
    """
    _check_pair(inst, i, j)
    X, x = _check_xX(inst, X, x)
    n = inst.n
    ci, cj = inst.centers[i], inst.centers[j]
    ri, rj = inst.radii[i], inst.radii[j]
    s = n + 1
    K = np.zeros((s * s, s * s))
    diag_block = rj * arrow(x, ci, ri, x0)
    for k in range(s):
        K[k * s:(k + 1) * s, k * s:(k + 1) * s] = diag_block
    last = n * s
    for k in range(n):
        scal = (x[k] - cj[k] * x0) * ri
        col = X[:, k] - x[k] * ci - cj[k] * x + cj[k] * ci * x0
        H = scal * np.eye(s)
        H[:n, n] = H[n, :n] = col
        K[k * s:(k + 1) * s, last:last + s] = H
        K[last:last + s, k * s:(k + 1) * s] = H
    return K


def zhen_cross(X, x, inst: BallQcqpInstance, i: int, j: int, x0: float = 1.0) -> np.ndarray:
    """Linearization of ``(x - c_i)(x - c_j)'``."""
    X, x = _check_xX(inst, X, x)
    ci, cj = inst.centers[i], inst.centers[j]
    return X - np.outer(x, cj) - np.outer(ci, x) + x0 * np.outer(ci, cj)


def zhen_map(X, x, inst: BallQcqpInstance, i: int, j: int, x0: float = 1.0) -> np.ndarray:
    _check_pair(inst, i, j)
    n = inst.n
    B = zhen_cross(X, x, inst, i, j, x0)
    out = np.zeros((2 * n, 2 * n))
    out[:n, :n] = inst.radii[i] ** 2 * x0 * np.eye(n)
    out[n:, n:] = inst.radii[j] ** 2 * x0 * np.eye(n)
    out[:n, n:] = B
    out[n:, :n] = B.T
    return out


def implied_psd_block(X, x, inst: BallQcqpInstance, i: int, j: int, x0: float = 1.0) -> np.ndarray:
    """The ``2n x 2n`` matrix of linearized products of ``(x - c_i, x - c_j)``."""
    n = inst.n
    out = np.zeros((2 * n, 2 * n))
    out[:n, :n] = zhen_cross(X, x, inst, i, i, x0)
    out[:n, n:] = zhen_cross(X, x, inst, i, j, x0)
    out[n:, :n] = zhen_cross(X, x, inst, j, i, x0)
    out[n:, n:] = zhen_cross(X, x, inst, j, j, x0)
    return as_sym(out)


def split_kron_vector(V, n: int):
    """Split ``V`` of length ``(n+1)^2`` into blocks ``(v^k, b_k)``, ``k = 0..n``."""
    V = np.asarray(V, dtype=float).ravel()
    if V.size != (n + 1) ** 2:
        raise ShapeError(f"vector must have length {(n + 1) ** 2}, got {V.size}")
    blocks = V.reshape(n + 1, n + 1)
    return blocks[:, :n], blocks[:, n]


def moment_blocks(Y):
    """``(X, x, x0)`` from a moment matrix ``[[X, x], [x', x0]]``."""
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[0] - 1
    return Y[:n, :n], Y[:n, n], Y[n, n]
