import numpy as np
import pytest

from ballqcqp.conic import ConicProgram, Free, IneqProgram, Nonneg, Psd, Soc, svec
from ballqcqp.instance import generate
from ballqcqp.ipm import SolverSettings, Status, solve
from ballqcqp.relaxations import RelaxationKind, build, solve_relaxation


def _prog(blocks, c, A, b):
    return ConicProgram(tuple(blocks), np.asarray(c, float), np.atleast_2d(np.asarray(A, float)),
                        np.asarray(b, float))


def test_zero_objective_over_nonneg():
    res = solve(_prog([Nonneg(1)], [0.0], np.zeros((0, 1)), np.zeros(0)))
    assert res.status is Status.OPTIMAL
    assert res.primal_value == pytest.approx(0, abs=1e-8)


def test_scalar_lower_bound():
    # min x s.t. x - s = 1, s >= 0
    res = solve(_prog([Free(1), Nonneg(1)], [1.0, 0.0], [[1.0, -1.0]], [1.0]))
    assert res.status is Status.OPTIMAL
    assert res.primal_value == pytest.approx(1, abs=1e-7)


def test_soc_distance():
    # min t s.t. (t, u) in L^3, u = (1, 2)
    res = solve(_prog([Soc(3)], [1.0, 0, 0], [[0, 1.0, 0], [0, 0, 1.0]], [1.0, 2.0]))
    assert res.status is Status.OPTIMAL
    assert res.primal_value == pytest.approx(np.sqrt(5), abs=1e-7)


@pytest.mark.parametrize("d", [2, 4, 7])
def test_sdp_min_eigenvalue(d, rng):
    C = rng.normal(size=(d, d))
    C += C.T
    res = solve(_prog([Psd(d)], svec(C), svec(np.eye(d))[None, :], [1.0]))
    assert res.status is Status.OPTIMAL
    assert res.primal_value == pytest.approx(np.linalg.eigvalsh(C)[0], abs=1e-7)


def test_infeasible_and_unbounded():
    # x >= 0 and x = -1
    res = solve(_prog([Nonneg(1)], [1.0], [[1.0]], [-1.0]))
    assert res.status is Status.PRIMAL_INFEASIBLE
    # min -x over x >= 0
    res = solve(_prog([Nonneg(1)], [-1.0], np.zeros((0, 1)), np.zeros(0)))
    assert res.status is Status.DUAL_INFEASIBLE


def test_iteration_cap_reported():
    inst = generate(3, 3, 3)
    res, _ = solve_relaxation(build(inst, "burer"), SolverSettings(max_iter=2))
    assert res.status is Status.ITER_LIMIT


def test_exact_m2_e1(e1):
    res, dec = solve_relaxation(build(e1, RelaxationKind.EXACT_M2))
    assert res.status is Status.OPTIMAL
    assert res.primal_value == pytest.approx(-1, abs=1e-5)


@pytest.mark.parametrize("kind", list(RelaxationKind))
def test_weak_duality_and_determinism(kind):
    inst = generate(7, 2, 2)
    built = build(inst, kind)
    a, _ = solve_relaxation(built)
    b, _ = solve_relaxation(build(inst, kind))
    assert a.status is Status.OPTIMAL
    assert a.primal_value >= a.dual_value - 1e-8 * (1 + abs(a.primal_value))
    assert a.primal.tobytes() == b.primal.tobytes()
    assert a.primal_value == b.primal_value


def test_standard_and_inequality_paths_agree():
    inst = generate(4, 2, 2)
    for kind in RelaxationKind:
        built = build(inst, kind)
        via_ineq = solve(built.canonical.ineq)
        via_std = solve(built.program)
        assert via_std.status is Status.OPTIMAL
        assert via_std.primal_value == pytest.approx(via_ineq.primal_value, abs=1e-6)


def test_ineq_program_rejects_free_rows():
    from ballqcqp.errors import ShapeError
    with pytest.raises(ShapeError):
        IneqProgram(np.zeros(1), np.zeros((1, 1)), np.zeros(1), np.zeros((0, 1)), np.zeros(0), (Free(1),))
