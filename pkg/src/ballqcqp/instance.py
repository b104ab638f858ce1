"""Ball-constrained QCQP instances: data model, generator and JSON files.

An instance is ``min q(x)`` over the intersection of ``m`` Euclidean balls,
with ``q(x) = x'Ax + 2b'x + c0``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, SchemaError, ShapeError
from .matcone import DEFAULT_TOL, ConeTol


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BallQcqpInstance:
    centers: np.ndarray  # (m, n)
    radii: np.ndarray  # (m,)
    A: np.ndarray  # (n, n) symmetric
    b: np.ndarray  # (n,)
    c0: float = 0.0
    witness: np.ndarray | None = None

    def __post_init__(self):
        centers = np.array(self.centers, dtype=float)
        if centers.ndim == 1:
            centers = centers.reshape(-1, 1)
        if centers.ndim != 2:
            raise ShapeError("centers must be an (m, n) array")
        m, n = centers.shape
        radii = np.array(self.radii, dtype=float).ravel()
        A = np.array(self.A, dtype=float)
        if A.ndim == 0:
            A = A.reshape(1, 1)
        b = np.array(self.b, dtype=float).ravel()
        if n < 1:
            raise ShapeError("dimension n must be positive")
        if m < 2:
            raise ConfigError(f"at least two balls are required, got m={m}")
        if radii.shape != (m,):
            raise ShapeError(f"radii must have length m={m}")
        if A.shape != (n, n) or b.shape != (n,):
            raise ShapeError(f"objective must have A of shape ({n}, {n}) and b of length {n}")
        if np.any(radii <= 0):
            raise SchemaError("radii must be positive")
        for arr in (centers, radii, A, b):
            if not np.all(np.isfinite(arr)):
                raise SchemaError("instance data must be finite")
        if not math.isfinite(float(self.c0)):
            raise SchemaError("c0 must be finite")
        if not np.array_equal(A, A.T):
            A = 0.5 * (A + A.T)
        object.__setattr__(self, "centers", _frozen(centers))
        object.__setattr__(self, "radii", _frozen(radii))
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "b", _frozen(b))
        object.__setattr__(self, "c0", float(self.c0))
        if self.witness is not None:
            w = np.array(self.witness, dtype=float).ravel()
            if w.shape != (n,):
                raise ShapeError(f"witness must have length n={n}")
            object.__setattr__(self, "witness", _frozen(w))

    @property
    def n(self) -> int:
        return self.centers.shape[1]

    @property
    def m(self) -> int:
        return self.centers.shape[0]

    def __eq__(self, other):
        if not isinstance(other, BallQcqpInstance):
            return NotImplemented
        same_w = (self.witness is None and other.witness is None) or (
            self.witness is not None
            and other.witness is not None
            and np.array_equal(self.witness, other.witness)
        )
        return (
            np.array_equal(self.centers, other.centers)
            and np.array_equal(self.radii, other.radii)
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.b, other.b)
            and self.c0 == other.c0
            and same_w
        )

    __hash__ = None

    def to_dict(self) -> dict:
        d = {
            "n": self.n,
            "m": self.m,
            "centers": self.centers.tolist(),
            "radii": self.radii.tolist(),
            "objective": {"A": self.A.tolist(), "b": self.b.tolist(), "c0": self.c0},
        }
        if self.witness is not None:
            d["witness"] = self.witness.tolist()
        return d


def _check_x(inst: BallQcqpInstance, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.shape != (inst.n,):
        raise ShapeError(f"point has length {x.size}, instance has n={inst.n}")
    return x


def evaluate_q(inst: BallQcqpInstance, x) -> float:
    x = _check_x(inst, x)
    return float(x @ inst.A @ x + 2.0 * inst.b @ x + inst.c0)


def ball_residuals(inst: BallQcqpInstance, x) -> np.ndarray:
    """``r_i^2 - ||x - c_i||^2`` for every ball."""
    x = _check_x(inst, x)
    diff = x[None, :] - inst.centers
    return inst.radii**2 - np.einsum("ij,ij->i", diff, diff)


def contains(inst: BallQcqpInstance, x, tol: ConeTol = DEFAULT_TOL):
    res = ball_residuals(inst, x)
    return bool(np.all(res >= -tol.abs)), res


def generate(seed, n: int, m: int, spread: float = 1.0, radius_range=(0.5, 1.5)) -> BallQcqpInstance:
    """Random instance whose feasible set has a recorded strict-interior point.

    The witness is drawn uniformly from ``[-spread, spread]^n``; each center
    lies within ``0.9 * r_i`` of it, so every ball contains the witness with
    residual at least ``0.19 * r_i**2``.
    """
    lo, hi = (float(v) for v in radius_range)
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    if m < 2:
        raise ConfigError(f"m must be >= 2, got {m}")
    if not (0 < lo <= hi) or not math.isfinite(hi):
        raise ConfigError(f"radius range must satisfy 0 < lo <= hi, got {radius_range}")
    if not (spread >= 0 and math.isfinite(spread)):
        raise ConfigError(f"spread must be finite and nonnegative, got {spread}")
    rng = np.random.default_rng(seed)
    witness = rng.uniform(-spread, spread, size=n)
    radii = rng.uniform(lo, hi, size=m)
    directions = rng.normal(size=(m, n))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    dist = 0.9 * radii * rng.uniform(0.0, 1.0, size=m)
    centers = witness[None, :] + dist[:, None] * directions
    M = rng.uniform(-1.0, 1.0, size=(n, n))
    A = np.triu(M) + np.triu(M, 1).T
    b = rng.uniform(-1.0, 1.0, size=n)
    c0 = float(rng.uniform(-1.0, 1.0))
    return BallQcqpInstance(centers=centers, radii=radii, A=A, b=b, c0=c0, witness=witness)


def from_dict(d: dict) -> BallQcqpInstance:
    if not isinstance(d, dict):
        raise SchemaError("instance file must contain a JSON object")
    for key in ("n", "m", "centers", "radii", "objective"):
        if key not in d:
            raise SchemaError(f"missing field {key!r}")
    obj = d["objective"]
    if not isinstance(obj, dict):
        raise SchemaError("field 'objective' must be an object")
    for key in ("A", "b", "c0"):
        if key not in obj:
            raise SchemaError(f"missing field 'objective.{key}'")
    try:
        n, m = int(d["n"]), int(d["m"])
        centers = np.array(d["centers"], dtype=float)
        radii = np.array(d["radii"], dtype=float)
        A = np.array(obj["A"], dtype=float)
        b = np.array(obj["b"], dtype=float)
        c0 = float(obj["c0"])
        witness = None if d.get("witness") is None else np.array(d["witness"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"non-numeric instance data: {exc}") from exc
    if centers.shape != (m, n):
        raise SchemaError(f"field 'centers' must have shape ({m}, {n}), got {centers.shape}")
    if radii.shape != (m,):
        raise SchemaError(f"field 'radii' must have length {m}")
    if np.any(radii <= 0):
        raise SchemaError("radii must be positive")
    if A.shape != (n, n):
        raise SchemaError(f"field 'objective.A' must have shape ({n}, {n})")
    if not np.array_equal(A, A.T):
        raise SchemaError("field 'objective.A' must be symmetric")
    if b.shape != (n,):
        raise SchemaError(f"field 'objective.b' must have length {n}")
    try:
        return BallQcqpInstance(centers=centers, radii=radii, A=A, b=b, c0=c0, witness=witness)
    except (ShapeError, ConfigError) as exc:
        raise SchemaError(str(exc)) from exc


def dumps(inst: BallQcqpInstance) -> str:
    # json writes floats with repr(), the shortest string that round-trips
    return json.dumps(inst.to_dict(), indent=1) + "\n"


def save(inst: BallQcqpInstance, path) -> None:
    Path(path).write_text(dumps(inst), encoding="utf-8")


def load(path) -> BallQcqpInstance:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    return from_dict(data)


def example_e1() -> BallQcqpInstance:
    """``min -x^2`` over ``[0, 1] = B(0, 1) ∩ B(1, 1)``; optimum ``-1`` at ``x = 1``."""
    return BallQcqpInstance(centers=[[0.0], [1.0]], radii=[1.0, 1.0], A=[[-1.0]], b=[0.0], c0=0.0,
                            witness=[0.5])
