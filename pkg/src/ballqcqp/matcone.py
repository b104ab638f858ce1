"""Dense symmetric-matrix and cone primitives.

Symmetric matrices are plain ``numpy`` arrays; :func:`as_sym` is the single
entry point that validates and symmetrizes them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ShapeError, SizeError

MAX_KRON_DIM = 10_000


@dataclass(frozen=True)
class ConeTol:
    """Absolute plus relative tolerance; the allowance is ``abs + rel*scale``."""

    abs: float = 1e-8
    rel: float = 1e-8

    def __post_init__(self):
        for name in ("abs", "rel"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"ConeTol.{name} must be finite and nonnegative, got {v}")

    def allowance(self, scale: float) -> float:
        return self.abs + self.rel * scale


DEFAULT_TOL = ConeTol()


class SocConvention(enum.Enum):
    """Which coordinate of a second-order-cone vector carries the norm bound."""

    LAST = "last"
    FIRST = "first"


def as_sym(A) -> np.ndarray:
    """Return ``A`` as a finite, exactly symmetric float array."""
    A = np.array(A, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return 0.5 * (A + A.T)


def spectral(A):
    """Eigen-decomposition with eigenvalues in descending order.

    Returns ``(lam, V)`` with ``A = V @ diag(lam) @ V.T``.
    """
    A = as_sym(A)
    try:
        lam, V = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition did not converge: {exc}") from exc
    lam = lam[::-1]
    V = V[:, ::-1]
    resid = np.linalg.norm(V * lam @ V.T - A)
    if resid > 1e-10 * (1.0 + np.linalg.norm(A)):
        raise NumericalError(f"eigendecomposition reconstruction residual {resid:.3e}")
    return lam, V


def min_eig(A) -> float:
    A = as_sym(A)
    if A.shape[0] == 0:
        return 0.0
    return float(np.linalg.eigvalsh(A)[0])


def psd_check(A, tol: ConeTol = DEFAULT_TOL):
    """Return ``(is_psd, min_eig)``; tolerance scales with the Frobenius norm."""
    A = as_sym(A)
    lam = spectral(A)[0]
    lo = float(lam[-1]) if lam.size else 0.0
    return lo >= -tol.allowance(np.linalg.norm(A)), lo


def kron(A, B) -> np.ndarray:
    A = as_sym(A)
    B = as_sym(B)
    dim = A.shape[0] * B.shape[0]
    if dim > MAX_KRON_DIM:
        raise SizeError(f"Kronecker product of dimension {dim} exceeds {MAX_KRON_DIM}")
    return as_sym(np.kron(A, B))


def soc_margin(v, convention: SocConvention = SocConvention.LAST) -> float:
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        raise ShapeError("second-order-cone vector must be nonempty")
    if convention is SocConvention.LAST:
        return float(v[-1] - np.linalg.norm(v[:-1]))
    return float(v[0] - np.linalg.norm(v[1:]))


def soc_contains(v, convention: SocConvention = SocConvention.LAST, tol: ConeTol = DEFAULT_TOL):
    """Second-order-cone membership.

    ``margin`` is the bound coordinate minus the norm of the rest, so it is
    zero on the boundary and scales linearly with ``v``.
    """
    margin = soc_margin(v, convention)
    return margin >= -tol.allowance(np.linalg.norm(v)), margin
