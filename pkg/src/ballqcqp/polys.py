"""Sparse polynomials as ``{exponent tuple: coefficient}`` dicts and monomial bases."""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def monomials(n: int, degree: int) -> tuple:
    """Exponents of total degree ``<= degree``, graded, then lexicographic with x1 first."""
    out = []
    for deg in range(degree + 1):
        level = [e for e in itertools.product(range(deg, -1, -1), repeat=n) if sum(e) == deg]
        out.extend(sorted(level, reverse=True))
    return tuple(out)


@lru_cache(maxsize=None)
def monomial_index(n: int, degree: int) -> dict:
    return {e: k for k, e in enumerate(monomials(n, degree))}


def mono(n: int, *vars_) -> tuple:
    e = [0] * n
    for v in vars_:
        e[v] += 1
    return tuple(e)


def add(p: dict, q: dict, scale: float = 1.0) -> dict:
    out = dict(p)
    for e, c in q.items():
        out[e] = out.get(e, 0.0) + scale * c
    return out


def mul(p: dict, q: dict) -> dict:
    out: dict = {}
    for e1, c1 in p.items():
        for e2, c2 in q.items():
            e = tuple(a + b for a, b in zip(e1, e2))
            out[e] = out.get(e, 0.0) + c1 * c2
    return out


def constant(n: int, c: float) -> dict:
    return {(0,) * n: float(c)}


def ball_poly(center, radius) -> dict:
    """``r^2 - ||x - c||^2``."""
    c = np.asarray(center, dtype=float)
    n = c.size
    p = constant(n, radius**2 - c @ c)
    for k in range(n):
        p[mono(n, k)] = 2.0 * c[k]
        p[mono(n, k, k)] = p.get(mono(n, k, k), 0.0) - 1.0
    return p


def quadratic_poly(A, b, c0) -> dict:
    """``x'Ax + 2b'x + c0``."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    p = constant(n, c0)
    for k in range(n):
        p[mono(n, k)] = p.get(mono(n, k), 0.0) + 2.0 * b[k]
        for l in range(n):
            e = mono(n, k, l)
            p[e] = p.get(e, 0.0) + A[k, l]
    return p


def sum_squares_poly(n: int) -> dict:
    return {mono(n, k, k): 1.0 for k in range(n)}


def riesz_row(p: dict, index: dict, size: int) -> np.ndarray:
    """Coefficients of the linear functional ``y -> M(p)`` on the moment vector."""
    row = np.zeros(size)
    for e, c in p.items():
        if c != 0.0:
            row[index[e]] += c
    return row


def evaluate_moments(x, n: int, degree: int) -> np.ndarray:
    """Moments of the Dirac measure at ``x``: ``y_alpha = x**alpha``."""
    x = np.asarray(x, dtype=float)
    return np.array([np.prod(x ** np.array(e)) for e in monomials(n, degree)])


def box_moments(lo, hi, degree: int) -> np.ndarray:
    """Moments of the uniform probability measure on the box ``[lo, hi]``."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.size
    k = np.arange(degree + 1)
    # one-dimensional moments E[x^k] = (hi^{k+1} - lo^{k+1}) / ((k+1)(hi - lo))
    one_d = (hi[:, None] ** (k + 1) - lo[:, None] ** (k + 1)) / ((k + 1) * (hi - lo)[:, None])
    return np.array([np.prod([one_d[v, e[v]] for v in range(n)]) for e in monomials(n, degree)])
