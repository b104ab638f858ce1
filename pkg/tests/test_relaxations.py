import numpy as np
import pytest

from ballqcqp.errors import ConfigError, SizeError
from ballqcqp.instance import BallQcqpInstance, generate
from ballqcqp.ipm import Status
from ballqcqp.relaxations import (RelaxationKind, build, build_moment2, moment_to_lifted,
                                  solve_relaxation)
from ballqcqp.polys import evaluate_moments
from ballqcqp.liftmaps import lift_matrix


def _value(inst, kind, **kw):
    res, dec = solve_relaxation(build(inst, kind, **kw))
    assert res.status is Status.OPTIMAL, (kind, res.status)
    return res.primal_value, dec


def test_shor_lower_bounds_e1(e1):
    v, _ = _value(e1, "shor")
    assert v <= -1 + 1e-6
    vk, _ = _value(e1, "shor-kron")
    assert vk >= v - 1e-6


def test_exact_m2_value_and_decode(e1):
    v, dec = _value(e1, "exact-m2")
    assert v == pytest.approx(-1, abs=1e-5)
    assert set(dec) == {"Z", "X", "x"}
    assert dec["Z"][-1, -1] == pytest.approx(1, abs=1e-8)


def test_exact_m2_needs_two_balls():
    with pytest.raises(ConfigError):
        build(generate(1, 2, 3), "exact-m2")


def test_moment2_size_cap():
    with pytest.raises(SizeError):
        build_moment2(generate(1, 3, 2), max_n=2)


@pytest.mark.parametrize("kind", [k for k in RelaxationKind if k is not RelaxationKind.EXACT_M2])
def test_dirac_lift_feasible(kind):
    inst = generate(21, 3, 2)
    built = build(inst, kind)
    for x in (inst.witness, inst.witness + 0.1 * inst.radii.min() * np.ones(3) / 3):
        eq, margin, obj = built.violation_at(x)
        assert eq <= 1e-9 and margin >= -1e-9
        from ballqcqp.instance import evaluate_q
        assert obj == pytest.approx(evaluate_q(inst, x), abs=1e-9)


def test_moment_to_lifted_dirac(rng):
    x = rng.normal(size=3)
    assert np.allclose(moment_to_lifted(evaluate_moments(x, 3, 4), 3), lift_matrix(x))


def test_linear_rlt_tightens_shor():
    inst = generate(2, 2, 3)
    plain, _ = _value(inst, "shor")
    rlt, _ = _value(inst, "shor", include_linear_rlt=True)
    assert rlt >= plain - 1e-6


def test_chain_on_small_instances():
    for seed in (1, 2, 3):
        inst = generate(seed, 2, 2)
        v = {k: _value(inst, k)[0] for k in RelaxationKind}
        tol = 1e-5 * (1 + abs(v["moment2"]))
        assert v["shor"] <= v["shor-kron"] + tol
        assert v["shor-kron"] <= v["burer"] + tol
        assert v["shor-zhen"] <= v["burer"] + tol
        assert v["burer"] <= v["moment2"] + tol
        assert v["burer"] == pytest.approx(v["exact-m2"], abs=1e-4 * (1 + abs(v["burer"])))


def test_exact_m2_contains_sphere_lifts_only(e1):
    built = build(e1, "exact-m2")
    for x in (0.0, 1.0):
        eq, margin, _ = built.violation_at([x])
        assert eq <= 1e-12 and margin >= -1e-12
    eq, _, _ = built.violation_at([0.5])
    assert eq == pytest.approx(0.5625)


def test_burer_rank_one_z_on_segment(e1):
    # ball intersection on E1 is [0, 1]; endpoints are on spheres
    built = build(e1, "burer")
    for x in (0.0, 1.0, 0.3):
        eq, margin, _ = built.violation_at([x])
        assert eq <= 1e-12 and margin >= -1e-12


def test_instance_with_coincident_centres():
    inst = BallQcqpInstance(centers=[[0.0, 0.0], [0.0, 0.0]], radii=[1.0, 2.0], A=-np.eye(2), b=[0, 0])
    v, _ = _value(inst, "burer")
    assert v == pytest.approx(-1, abs=1e-5)
