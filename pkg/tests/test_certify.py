import numpy as np
import pytest

from ballqcqp.certify import (PRECONDITION_FAILED, DecompositionCertificate, burer_margins,
                              compare_kron_inequality, decompose_extreme_ray, exposing_functional,
                              face_dimension, fact_qp_check, hunt_extreme_ray, implied_psd_check,
                              kron_domination, kron_linearity, m_matrix_check, moment_implies_burer,
                              numerical_rank, rank_one_feasibility, reports_to_json, socrlt_components,
                              synthetic_certificate, trace_rlt_check, verify_decomposition,
                              zhen_domination)
from ballqcqp.errors import PreconditionFailed
from ballqcqp.instance import BallQcqpInstance, generate
from ballqcqp.liftmaps import lift_matrix, lift_point
from ballqcqp.polys import box_moments, evaluate_moments
from ballqcqp.relaxations import build, solve_relaxation


@pytest.mark.parametrize("w", [(1, 2, 1), (1, 1, 1), (1, 0, 0)])
def test_fact_qp_examples(w):
    assert fact_qp_check(w).passed


def test_fact_qp_random(rng):
    for n in range(1, 6):
        for _ in range(500):
            assert fact_qp_check(rng.uniform(-1, 1, n + 2)).passed


@pytest.mark.parametrize("x,boundary", [(0.5, False), (2.0, False), (0.0, True)])
def test_rank_one_feasibility_e1(e1, x, boundary):
    rep = rank_one_feasibility([x], e1)
    assert rep.passed
    if boundary:
        m = burer_margins(lift_matrix([x]), e1)
        assert min(m.values()) == pytest.approx(0, abs=1e-12)


def test_kron_dom_rank_one_and_burer_optimum(inst_733):
    assert kron_domination(lift_matrix(inst_733.witness), inst_733, 0, 1).passed
    res, dec = solve_relaxation(build(inst_733, "burer"))
    for i, j in ((0, 1), (0, 2), (1, 2)):
        assert kron_domination(dec["Z"], inst_733, i, j).passed


def test_kron_dom_precondition(e1):
    # x = 2 is outside ball 1, so (d1)'Z(d1) is fine but cone membership breaks
    Z = lift_matrix([2.0])
    Z[0, 2] = Z[2, 0] = -5.0
    rep = kron_domination(Z, e1, 0, 1)
    assert rep.status == PRECONDITION_FAILED and not rep.passed


def test_zhen_dom_interior_and_scaled(e1):
    Z = lift_matrix([0.5])
    rep = zhen_domination(Z, e1, 0, 1)
    assert rep.passed and rep.worst_margin > 0
    rep = zhen_domination(2 * Z, e1, 0, 1)
    assert rep.status == PRECONDITION_FAILED
    assert implied_psd_check(Z, e1, 0, 1).passed


def test_socrlt_e1(e1):
    Z = lift_matrix([0.5])
    xi, beta, delta, rep = socrlt_components(Z, e1, 0)
    assert delta == pytest.approx(0.75) and beta == pytest.approx(0.1875)
    assert np.allclose(xi, 0)
    assert 4 * beta * delta == pytest.approx(np.sum((xi + 2 * delta * 0.5) ** 2))
    assert rep.passed
    _, _, delta2, rep2 = socrlt_components(Z, e1, 1)
    assert delta2 == pytest.approx(0.75) and rep2.passed
    _, _, delta3, rep3 = socrlt_components(lift_matrix([2.0]), e1, 0)
    assert delta3 < 0 and not rep3.passed


def test_trace_rlt(e1):
    assert trace_rlt_check(lift_matrix([0.5]), e1, 0).passed
    Z = lift_matrix([0.5])
    Z[1, 2] = Z[2, 1] = 0.5
    assert trace_rlt_check(Z, e1, 0).status == PRECONDITION_FAILED


def test_kron_linearity_examples(e1, rng):
    assert kron_linearity([[0.3]], [1.0], e1, 0, 1).passed
    assert kron_linearity([[0.2], [0.9]], [0.3, 0.7], e1, 0, 1, tol=1e-12).passed
    assert kron_linearity([[0.2], [0.9]], [1.0, -1.0], e1, 0, 1, tol=1e-12).passed
    inst = generate(4, 3, 3)
    assert kron_linearity(rng.normal(size=(5, 3)), rng.normal(size=5), inst, 2, 0).passed


def test_compare_kron_examples(e1, rng):
    rep = compare_kron_inequality([0.5], [0, 0, 1, 0], e1, 0, 1)
    assert rep.passed and "lhs=1.0" in rep.details and "rhs=7.5" in rep.details
    assert compare_kron_inequality([0.5], np.zeros(4), e1, 0, 1).passed
    for _ in range(500):
        assert compare_kron_inequality([0.0], rng.normal(size=4), e1, 1, 0).passed
    assert compare_kron_inequality([3.0], np.ones(4), e1, 0, 1).status == PRECONDITION_FAILED


def test_moment_implies(rng):
    inst = generate(8, 2, 2)
    assert moment_implies_burer(evaluate_moments(inst.witness, 2, 4), inst).passed
    h = 0.05 * inst.radii.min()
    y = box_moments(inst.witness - h, inst.witness + h, 4)
    assert moment_implies_burer(y, inst).passed
    res, dec = solve_relaxation(build(inst, "moment2"))
    assert moment_implies_burer(dec["y"], inst).passed


# ---------------------------------------------------------------- decomposition

def _two_ball(seed=3, n=3):
    return BallQcqpInstance(centers=[np.zeros(n), np.r_[1.0, np.zeros(n - 1)]], radii=[1.0, 1.2],
                            A=np.eye(n), b=np.zeros(n), witness=np.r_[0.5, np.zeros(n - 1)])


def test_synthetic_rank2_roundtrip(rng):
    inst = _two_ball()
    for _ in range(10):
        Z, cert = synthetic_certificate(inst, rng, rank=2)
        found = decompose_extreme_ray(Z, inst)
        assert verify_decomposition(Z, found, inst).passed
        assert np.linalg.norm(found.matrix() - Z) <= 1e-8 * np.linalg.norm(Z)
        order = np.argsort(found.weights)
        ref = np.argsort(cert.weights)
        assert np.allclose(found.weights[0], cert.weights[0])
        assert np.allclose(np.sort(found.weights), np.sort(cert.weights))
        assert m_matrix_check(found, inst).passed


def test_rank3_certificate_is_extreme_and_mixed(rng):
    inst = _two_ball()
    Z, cert = synthetic_certificate(inst, rng, rank=3)
    assert numerical_rank(Z) == 3
    assert face_dimension(Z, inst) == 1
    rep = m_matrix_check(decompose_extreme_ray(Z, inst), inst)
    assert rep.passed and "mixed" in rep.details


def test_rank2_certificate_face_is_two_dimensional(rng):
    inst = _two_ball()
    Z, _ = synthetic_certificate(inst, rng, rank=2)
    assert face_dimension(Z, inst) == 2


def test_decompose_rejects_rank_one(e1):
    with pytest.raises(PreconditionFailed):
        decompose_extreme_ray(lift_matrix([0.5]), e1)
    rep = verify_decomposition(lift_matrix([0.5]), DecompositionCertificate([1, 1], [[0.5], [0.5]]), e1)
    assert rep.status == PRECONDITION_FAILED


def test_verify_flags_interior_sphere_atom(rng):
    inst = _two_ball()
    Z, cert = synthetic_certificate(inst, rng, rank=2)
    bad = DecompositionCertificate(cert.weights, [cert.points[0], 0.5 * cert.points[1] + 0.25])
    rep = verify_decomposition(bad.matrix(), bad, inst)
    assert not rep.passed and "c=" in rep.details


def test_m_matrix_uniform_sign():
    inst = _two_ball()
    cert = DecompositionCertificate([1.0, 2.0], [[0.5, 0, 0], [0.6, 0.1, 0]])
    rep = m_matrix_check(cert, inst)
    assert rep.passed and "uniform" in rep.details


def test_hunt_finds_validated_ray():
    inst = _two_ball()
    rng = np.random.default_rng(0)
    for _ in range(5):
        Z, res = hunt_extreme_ray(inst, rng)
        if Z is not None and numerical_rank(Z) >= 2 and face_dimension(Z, inst) == 1:
            cert = decompose_extreme_ray(Z, inst, tol=1e-6)
            assert verify_decomposition(Z, cert, inst, tol=1e-6).passed
            return
    pytest.fail("no rank >= 2 extreme ray in five hunts")


def test_exposing_functional_vanishes_on_seed(rng):
    inst = _two_ball()
    Z, _ = synthetic_certificate(inst, rng, rank=3)
    S = exposing_functional(Z, inst)
    assert abs(np.sum(S * Z)) <= 1e-9 * np.linalg.norm(S) * np.linalg.norm(Z)


def test_reports_json_roundtrip(e1):
    import json
    doc = json.loads(reports_to_json([fact_qp_check([1, 2, 1]), rank_one_feasibility([0.5], e1)]))
    assert [d["name"] for d in doc] == ["fact-qp", "rank-one"]
    assert all(d["pass"] for d in doc)
