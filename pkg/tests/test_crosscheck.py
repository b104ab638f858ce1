import pytest

from ballqcqp.external import available, solve_cvxpy
from ballqcqp.instance import example_e1, generate
from ballqcqp.ipm import Status
from ballqcqp.relaxations import RelaxationKind, build, solve_relaxation

pytestmark = pytest.mark.skipif(not available(), reason="cvxpy not installed")


@pytest.mark.parametrize("kind", list(RelaxationKind))
def test_embedded_solver_matches_cvxpy(kind):
    for inst in (example_e1(), generate(6, 2, 2)):
        built = build(inst, kind)
        ours, _ = solve_relaxation(built)
        ref = solve_cvxpy(built.program)
        assert ours.status is Status.OPTIMAL
        if ref.status is Status.OPTIMAL:
            assert ours.primal_value == pytest.approx(ref.primal_value, abs=1e-5 * (1 + abs(ref.primal_value)))
