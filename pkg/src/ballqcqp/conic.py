"""Standard-form conic programs and the affine modelling layer that feeds them.

A :class:`ConicProgram` is ``min c'v + offset  s.t.  A v = b,  v in K`` where
``K`` is a product of free, nonnegative, second-order (first coordinate
bounds the rest) and PSD blocks.  PSD blocks are stored as ``svec`` vectors.

Builders work with :class:`ConicModel`: declare variable blocks, then add
equalities and affine cone constraints ``F v + g in K``.  ``canonicalize``
turns each cone constraint into a slack block.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError
from .matcone import SocConvention

SQRT2 = math.sqrt(2.0)

FREE, NONNEG, SOC, PSD = "free", "nonneg", "soc", "psd"


@dataclass(frozen=True)
class Cone:
    kind: str
    size: int  # matrix order for PSD, vector length otherwise
    convention: SocConvention = SocConvention.FIRST

    @property
    def dim(self) -> int:
        if self.kind == PSD:
            return self.size * (self.size + 1) // 2
        return self.size

    @property
    def degree(self) -> int:
        if self.kind == FREE:
            return 0
        if self.kind == SOC:
            return 1
        return self.size


def Free(k):
    return Cone(FREE, k)


def Nonneg(k):
    return Cone(NONNEG, k)


def Soc(k, convention=SocConvention.FIRST):
    return Cone(SOC, k, convention)


def Psd(d):
    return Cone(PSD, d)


# ---------------------------------------------------------------- svec / smat

_TRIU_CACHE: dict[int, tuple] = {}


def _triu(d):
    if d not in _TRIU_CACHE:
        rows, cols = np.triu_indices(d)
        scale = np.where(rows == cols, 1.0, SQRT2)
        _TRIU_CACHE[d] = (rows, cols, scale)
    return _TRIU_CACHE[d]


def svec(A) -> np.ndarray:
    """Scaled upper-triangle vectorization, row-major; off-diagonals times sqrt(2)."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError(f"svec needs a square matrix, got shape {A.shape}")
    rows, cols, scale = _triu(A.shape[0])
    return A[rows, cols] * scale


def svec_dim(p: int) -> int:
    d = int(round((math.sqrt(8 * p + 1) - 1) / 2))
    if d * (d + 1) // 2 != p:
        raise ShapeError(f"length {p} is not a triangular number")
    return d


def smat(v) -> np.ndarray:
    v = np.asarray(v, dtype=float).ravel()
    d = svec_dim(v.size)
    rows, cols, scale = _triu(d)
    A = np.zeros((d, d))
    A[rows, cols] = v / scale
    A[cols, rows] = v / scale
    return A


def svec_entry_coeffs(d: int, i: int, j: int) -> tuple[int, float]:
    """Position and weight ``w`` such that ``Z[i, j] = w * svec(Z)[pos]``."""
    if i > j:
        i, j = j, i
    pos = i * d - i * (i - 1) // 2 + (j - i)
    return pos, (1.0 if i == j else 1.0 / SQRT2)


def linear_map_matrix(f, d_in: int, out_kind: str = PSD) -> np.ndarray:
    """Matrix of a linear map from ``svec`` space of order ``d_in``.

    ``f`` takes a symmetric ``d_in x d_in`` matrix and returns either a
    symmetric matrix (``out_kind == PSD``, output in svec) or a vector.
    """
    p = d_in * (d_in + 1) // 2
    cols = []
    for k in range(p):
        e = np.zeros(p)
        e[k] = 1.0
        out = f(smat(e))
        cols.append(svec(out) if out_kind == PSD else np.asarray(out, dtype=float).ravel())
    return np.column_stack(cols)


# ---------------------------------------------------------------- IR

@dataclass(frozen=True, eq=False)
class ConicProgram:
    blocks: tuple
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        nvar = sum(bl.dim for bl in self.blocks)
        if self.c.shape != (nvar,):
            raise ShapeError(f"objective length {self.c.shape} != flattened dimension {nvar}")
        if self.A.shape != (self.b.size, nvar):
            raise ShapeError(f"equality matrix shape {self.A.shape} inconsistent with ({self.b.size}, {nvar})")

    @property
    def nvar(self) -> int:
        return self.c.size

    def block_slices(self):
        out, start = [], 0
        for bl in self.blocks:
            out.append(slice(start, start + bl.dim))
            start += bl.dim
        return out


@dataclass(frozen=True, eq=False)
class IneqProgram:
    """``min c'x + offset  s.t.  G x + s = h,  A x = b,  s in K``, ``x`` free.

    ``cones`` partitions the rows of ``G``; SOC blocks use the first-coordinate
    convention.  This is the form the interior-point solver works in, since
    its Newton systems only involve the (usually few) free variables.
    """

    c: np.ndarray
    G: np.ndarray
    h: np.ndarray
    A: np.ndarray
    b: np.ndarray
    cones: tuple
    offset: float = 0.0

    def __post_init__(self):
        nx = self.c.size
        m = sum(k.dim for k in self.cones)
        if self.G.shape != (m, nx) or self.h.shape != (m,):
            raise ShapeError(f"cone rows: G {self.G.shape}, h {self.h.shape}, cones total {m}")
        if self.A.shape != (self.b.size, nx):
            raise ShapeError(f"equality matrix shape {self.A.shape} inconsistent with ({self.b.size}, {nx})")
        for k in self.cones:
            if k.kind == FREE:
                raise ShapeError("inequality form has no free cone rows")
            if k.kind == SOC and k.convention is not SocConvention.FIRST:
                raise ShapeError("SOC rows must use the first-coordinate convention")

    def cone_slices(self):
        out, start = [], 0
        for k in self.cones:
            out.append(slice(start, start + k.dim))
            start += k.dim
        return out

    @classmethod
    def from_standard(cls, program: "ConicProgram") -> "IneqProgram":
        """``x in K`` becomes ``-x + s = 0``; free blocks carry no rows."""
        rows, cones = [], []
        for bl, sl in zip(program.blocks, program.block_slices()):
            if bl.kind == FREE:
                continue
            rows.append(-np.eye(program.nvar)[sl])
            cones.append(bl)
        G = np.vstack(rows) if rows else np.zeros((0, program.nvar))
        return cls(program.c, G, np.zeros(G.shape[0]), program.A, program.b, tuple(cones), program.offset)


@dataclass(frozen=True)
class Var:
    """A declared variable block: its cone and its slice in the model vector."""

    index: int
    start: int
    cone: Cone

    @property
    def slice(self) -> slice:
        return slice(self.start, self.start + self.cone.dim)

    @property
    def dim(self) -> int:
        return self.cone.dim


@dataclass
class ConicModel:
    """Incremental builder; declare all variables before adding constraints."""

    variables: list = field(default_factory=list)
    eq_rows: list = field(default_factory=list)
    eq_rhs: list = field(default_factory=list)
    cone_cons: list = field(default_factory=list)
    c: np.ndarray | None = None
    offset: float = 0.0
    _frozen: bool = False

    @property
    def nvar(self) -> int:
        return sum(v.dim for v in self.variables)

    def add_variable(self, cone: Cone) -> Var:
        if self._frozen:
            raise RuntimeError("variables must be declared before constraints")
        var = Var(len(self.variables), self.nvar, cone)
        self.variables.append(var)
        return var

    def zeros(self, rows: int | None = None) -> np.ndarray:
        return np.zeros(self.nvar) if rows is None else np.zeros((rows, self.nvar))

    def entry(self, var: Var, i: int, j: int) -> np.ndarray:
        """Row selecting ``Z[i, j]`` of a PSD variable."""
        row = self.zeros()
        pos, w = svec_entry_coeffs(var.cone.size, i, j)
        row[var.start + pos] = w
        return row

    def inner(self, var: Var, M) -> np.ndarray:
        """Row for ``<M, Z>`` with ``Z`` a PSD variable."""
        row = self.zeros()
        row[var.slice] = svec(np.asarray(M, dtype=float))
        return row

    def add_eq(self, F, g) -> None:
        self._frozen = True
        F = np.atleast_2d(np.asarray(F, dtype=float))
        g = np.atleast_1d(np.asarray(g, dtype=float))
        if F.shape != (g.size, self.nvar):
            raise ShapeError(f"equality block {F.shape} inconsistent with rhs {g.size} and nvar {self.nvar}")
        self.eq_rows.append(F)
        self.eq_rhs.append(g)

    def add_cone(self, F, g, cone: Cone, tag: str = "") -> int:
        """Constraint ``F v + g in cone``; returns its index for decoding."""
        self._frozen = True
        F = np.atleast_2d(np.asarray(F, dtype=float))
        g = np.atleast_1d(np.asarray(g, dtype=float))
        if F.shape != (cone.dim, self.nvar) or g.shape != (cone.dim,):
            raise ShapeError(f"cone constraint of dim {cone.dim} got F {F.shape}, g {g.shape}")
        self.cone_cons.append((F, g, cone, tag))
        return len(self.cone_cons) - 1

    def add_psd(self, Fmat, g_mat, tag: str = "") -> int:
        """``sum_k v_k F_k + G >= 0`` given the svec-form matrix ``Fmat`` and matrix ``G``."""
        g = svec(g_mat)
        return self.add_cone(Fmat, g, Psd(np.asarray(g_mat).shape[0]), tag)

    def set_objective(self, c, offset: float = 0.0) -> None:
        c = np.asarray(c, dtype=float).ravel()
        if c.shape != (self.nvar,):
            raise ShapeError("objective length must equal the number of model variables")
        self.c = c
        self.offset = float(offset)

    def canonicalize(self) -> "Canonical":
        nv = self.nvar
        blocks = [v.cone for v in self.variables]
        for cone in blocks:
            if cone.kind == SOC and cone.convention is not SocConvention.FIRST:
                raise ShapeError("SOC variable blocks must use the first-coordinate convention")
        slack_slices = []
        ns = sum(cone.dim for _, _, cone, _ in self.cone_cons)
        rows, rhs = [], []
        for F, g in zip(self.eq_rows, self.eq_rhs):
            rows.append(np.hstack([F, np.zeros((F.shape[0], ns))]))
            rhs.append(g)
        start = nv
        for F, g, cone, _ in self.cone_cons:
            k = cone.dim
            if cone.kind == SOC and cone.convention is SocConvention.LAST:
                perm = np.r_[k - 1, 0:k - 1]
                F, g = F[perm], g[perm]
                cone = Soc(k)
            block = np.zeros((k, nv + ns))
            block[:, :nv] = F
            block[:, start:start + k] = -np.eye(k)
            rows.append(block)
            rhs.append(-g)
            blocks.append(cone)
            slack_slices.append(slice(start, start + k))
            start += k
        A = np.vstack(rows) if rows else np.zeros((0, nv + ns))
        b = np.concatenate(rhs) if rhs else np.zeros(0)
        c = np.concatenate([self.c if self.c is not None else np.zeros(nv), np.zeros(ns)])
        prog = ConicProgram(blocks=tuple(blocks), c=c, A=A, b=b, offset=self.offset)

        grows, hs, icones = [], [], []
        for v in self.variables:
            if v.cone.kind == FREE:
                continue
            grows.append(-np.eye(nv)[v.slice])
            hs.append(np.zeros(v.dim))
            icones.append(v.cone)
        for F, g, cone, _ in self.cone_cons:
            if cone.kind == SOC and cone.convention is SocConvention.LAST:
                perm = np.r_[cone.dim - 1, 0:cone.dim - 1]
                F, g, cone = F[perm], g[perm], Soc(cone.dim)
            grows.append(-F)
            hs.append(g)
            icones.append(cone)
        eqA = np.vstack(self.eq_rows) if self.eq_rows else np.zeros((0, nv))
        eqb = np.concatenate(self.eq_rhs) if self.eq_rhs else np.zeros(0)
        ineq = IneqProgram(
            c=self.c if self.c is not None else np.zeros(nv),
            G=np.vstack(grows) if grows else np.zeros((0, nv)),
            h=np.concatenate(hs) if hs else np.zeros(0),
            A=eqA, b=eqb, cones=tuple(icones), offset=self.offset)
        return Canonical(prog, [v.slice for v in self.variables], slack_slices,
                         [cone for _, _, cone, _ in self.cone_cons],
                         [(F, g) for F, g, _, _ in self.cone_cons], nv, ineq)


@dataclass(frozen=True, eq=False)
class Canonical:
    """A canonicalized program plus the slices needed to decode its solutions.

    Slack values of LAST-convention SOC constraints are permuted back so that
    :meth:`slack` returns ``F v + g`` in the caller's coordinate order.
    """

    program: ConicProgram
    var_slices: list
    slack_slices: list
    slack_cones: list
    cone_data: list
    n_model: int
    ineq: IneqProgram | None = None

    def variable(self, v, var: Var) -> np.ndarray:
        x = np.asarray(v)[self.var_slices[var.index]]
        return smat(x) if var.cone.kind == PSD else x.copy()

    def slack(self, v, k: int) -> np.ndarray:
        s = np.asarray(v)[self.slack_slices[k]].copy()
        cone = self.slack_cones[k]
        if cone.kind == SOC and cone.convention is SocConvention.LAST:
            s = np.r_[s[1:], s[0]]
        return s


    def complete(self, v_model) -> np.ndarray:
        """Full program vector from model variables, slacks set to ``F v + g``."""
        v_model = np.asarray(v_model, dtype=float)
        out = np.zeros(self.program.nvar)
        out[:self.n_model] = v_model
        for sl, cone, (F, g) in zip(self.slack_slices, self.slack_cones, self.cone_data):
            s = F @ v_model + g
            if cone.kind == SOC and cone.convention is SocConvention.LAST:
                s = np.r_[s[-1], s[:-1]]
            out[sl] = s
        return out


def cone_margin(cone: Cone, v) -> float:
    """Signed distance-like margin of ``v`` in a cone (first-coordinate SOC)."""
    v = np.asarray(v, dtype=float)
    if cone.kind == FREE:
        return math.inf
    if cone.kind == NONNEG:
        return float(np.min(v)) if v.size else math.inf
    if cone.kind == SOC:
        return float(v[0] - np.linalg.norm(v[1:]))
    return float(np.linalg.eigvalsh(smat(v))[0])


def program_violation(program: ConicProgram, v) -> tuple[float, float]:
    """``(equality residual inf-norm, worst cone margin)`` at the vector ``v``."""
    v = np.asarray(v, dtype=float)
    eq = float(np.max(np.abs(program.A @ v - program.b))) if program.b.size else 0.0
    worst = math.inf
    for bl, sl in zip(program.blocks, program.block_slices()):
        worst = min(worst, cone_margin(bl, v[sl]))
    return eq, worst


def dump(program: ConicProgram) -> str:
    """Plain-text listing for cross-solver debugging.

    Lines: ``blocks K``, then one ``<kind> <size>`` line per block, ``c``
    followed by ``index value`` pairs, ``offset value``, ``A rows cols nnz``
    and ``row col value`` triplets, then ``b`` with one value per line.
    """
    out = io.StringIO()
    out.write(f"blocks {len(program.blocks)}\n")
    for bl in program.blocks:
        out.write(f"{bl.kind} {bl.size}\n")
    nz = np.flatnonzero(program.c)
    out.write(f"c {nz.size}\n")
    for k in nz:
        out.write(f"{k} {float(program.c[k])!r}\n")
    out.write(f"offset {float(program.offset)!r}\n")
    r, cidx = np.nonzero(program.A)
    out.write(f"A {program.A.shape[0]} {program.A.shape[1]} {r.size}\n")
    for i, j in zip(r, cidx):
        out.write(f"{i} {j} {float(program.A[i, j])!r}\n")
    out.write(f"b {program.b.size}\n")
    for v in program.b:
        out.write(f"{float(v)!r}\n")
    return out.getvalue()


def load_dump(text: str) -> ConicProgram:
    lines = iter(text.splitlines())
    nblocks = int(next(lines).split()[1])
    blocks = []
    for _ in range(nblocks):
        kind, size = next(lines).split()
        blocks.append(Cone(kind, int(size)))
    nvar = sum(bl.dim for bl in blocks)
    c = np.zeros(nvar)
    for _ in range(int(next(lines).split()[1])):
        k, v = next(lines).split()
        c[int(k)] = float(v)
    offset = float(next(lines).split()[1])
    _, rows, cols, nnz = next(lines).split()
    A = np.zeros((int(rows), int(cols)))
    for _ in range(int(nnz)):
        i, j, v = next(lines).split()
        A[int(i), int(j)] = float(v)
    nb = int(next(lines).split()[1])
    b = np.array([float(next(lines)) for _ in range(nb)])
    return ConicProgram(tuple(blocks), c, A, b, offset)
