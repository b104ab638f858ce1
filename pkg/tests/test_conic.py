import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ballqcqp.conic import (ConicModel, Free, Nonneg, Psd, Soc, dump, load_dump, program_violation,
                            smat, svec)
from ballqcqp.errors import ShapeError
from ballqcqp.matcone import SocConvention


def test_svec_examples():
    assert np.array_equal(svec(np.eye(2)), [1, 0, 1])
    assert np.allclose(svec([[0, 1], [1, 0]]), [0, np.sqrt(2), 0])


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 7), st.integers(0, 2**32 - 1))
def test_svec_roundtrip_and_isometry(d, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(d, d))
    A += A.T
    B = rng.normal(size=(d, d))
    B += B.T
    assert np.allclose(smat(svec(A)), A, rtol=0, atol=1e-14 * (1 + np.abs(A).max()))
    assert svec(A) @ svec(B) == pytest.approx(np.sum(A * B), rel=1e-12, abs=1e-12)


def test_smat_rejects_non_triangular_length():
    with pytest.raises(ShapeError):
        smat(np.zeros(4))


def test_canonicalize_soc_slack():
    # P Z d in L^3 for n = 1, written as a cone constraint on three affine rows
    model = ConicModel()
    Z = model.add_variable(Psd(3))
    F = model.zeros(3)
    F[:, Z.slice] = np.random.default_rng(0).normal(size=(3, Z.dim))
    k = model.add_cone(F, np.zeros(3), Soc(3, SocConvention.LAST))
    can = model.canonicalize()
    kinds = [b.kind for b in can.program.blocks]
    assert kinds.count("soc") == 1
    assert can.program.A.shape[0] == 3
    assert k == 0


def test_canonicalize_scalar_inequality_and_equalities():
    model = ConicModel()
    y = model.add_variable(Free(2))
    model.add_cone(np.array([[1.0, 1.0]]), [-1.0], Nonneg(1))
    model.set_objective([1.0, 1.0])
    can = model.canonicalize()
    assert [b.kind for b in can.program.blocks].count("nonneg") == 1

    model = ConicModel()
    y = model.add_variable(Free(2))
    model.add_eq(np.eye(2), [1.0, 2.0])
    can = model.canonicalize()
    assert all(b.kind == "free" for b in can.program.blocks)
    assert y.dim == 2


def test_dump_roundtrip():
    from ballqcqp.instance import example_e1
    from ballqcqp.relaxations import build
    prog = build(example_e1(), "burer").program
    text = dump(prog)
    back = load_dump(text)
    assert dump(back) == text
    assert np.array_equal(back.c, prog.c)
    assert np.array_equal(back.A, prog.A)


def test_program_violation_at_lift(e1):
    from ballqcqp.relaxations import build
    built = build(e1, "burer")
    eq, margin = program_violation(built.program, built.vector_at([0.5]))
    assert eq <= 1e-12 and margin >= -1e-12
