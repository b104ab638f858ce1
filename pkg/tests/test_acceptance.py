"""Acceptance criteria 1-10, one test each.

Each test prints (and records for the terminal summary) a single PASS/FAIL
line with the worst observed margin, so ``pytest tests/test_acceptance.py -v``
doubles as the acceptance report.
"""

import math
import time

import numpy as np
import pytest

from ballqcqp import certify
from ballqcqp.harness import (NOT_FOUND, battery_instance, compare_instance, compare_kron_samples,
                              dirac_violations, hunted_rays, run_relaxation, synthetic_roundtrips,
                              two_ball_instance)
from ballqcqp.instance import ball_residuals, example_e1, generate
from ballqcqp.liftmaps import kron_map, project, zhen_map
from ballqcqp.matcone import min_eig
from ballqcqp.oracle import global_min
from ballqcqp.relaxations import RelaxationKind

from conftest import record

BATTERY = range(1, 101)


@pytest.fixture(scope="module")
def burer_battery():
    """Burer optimum for every battery instance, solved once for criteria 1 and 2."""
    out = {}
    for s in BATTERY:
        inst = battery_instance(s)
        run = run_relaxation(inst, RelaxationKind.BURER)
        out[s] = (inst, run)
    return out


@pytest.fixture(scope="module")
def compare_rows():
    """Comparison rows over E1, 12 two-ball and 12 three-ball instances with n in 1..3."""
    insts = [("e1", example_e1())]
    insts += [(f"m2-{s}", two_ball_instance(s)) for s in range(1, 13)]
    insts += [(f"m3-{s}", generate(s, 1 + (s - 1) % 3, 3)) for s in range(1, 13)]
    return [compare_instance(name, inst) for name, inst in insts]


def test_criterion_01_kron_domination(burer_battery):
    worst, bad = math.inf, []
    for s, (inst, run) in burer_battery.items():
        assert run.ok, f"seed {s}: {run.status}"
        X, x = project(run.decoded["Z"])
        for i in range(inst.m):
            for j in range(i + 1, inst.m):
                K = kron_map(X, x, inst, i, j)
                margin = min_eig(K) / (1.0 + np.linalg.norm(K))
                worst = min(worst, margin)
                if margin < -1e-6:
                    bad.append((s, i, j, margin))
    ok = not bad
    record(1, ok, f"Kronecker matrices PSD on 100 Burer optima, worst min_eig/(1+|K|_F) = {worst:.3e}")
    assert ok, bad


def test_criterion_02_zhen_redundancy(burer_battery):
    worst_z, worst_db, bad = math.inf, math.inf, []
    for s, (inst, run) in burer_battery.items():
        assert run.ok
        Z = run.decoded["Z"]
        X, x = project(Z)
        for i in range(inst.m):
            for j in range(i + 1, inst.m):
                M = zhen_map(X, x, inst, i, j)
                margin = min_eig(M) / (1.0 + np.linalg.norm(M))
                worst_z = min(worst_z, margin)
                if margin < -1e-6:
                    bad.append(("zhen", s, i, j, margin))
            _, beta, delta, _ = certify.socrlt_components(Z, inst, i)
            worst_db = min(worst_db, beta, delta)
            if min(beta, delta) < -1e-6:
                bad.append(("delta/beta", s, i, beta, delta))
    ok = not bad
    record(2, ok, f"Zhen matrices PSD, worst normalized min_eig = {worst_z:.3e}; "
                  f"min(delta, beta) = {worst_db:.3e}")
    assert ok, bad


def test_criterion_03_two_ball_exactness():
    t0 = time.perf_counter()
    worst, bad = 0.0, []
    for s in range(1, 31):
        inst = two_ball_instance(s)
        run = run_relaxation(inst, RelaxationKind.EXACT_M2)
        orc = global_min(inst)
        assert run.ok, f"seed {s}: {run.status}"
        err = abs(run.value - orc.best_value) / (1.0 + abs(orc.best_value))
        worst = max(worst, err)
        if err > 1e-4:
            bad.append((s, run.value, orc.best_value))
    secs = time.perf_counter() - t0
    ok = not bad
    record(3, ok, f"ExactM2 vs grid oracle on 30 instances, worst |gap|/(1+|oracle|) = {worst:.3e} "
                  f"({secs:.0f} s)")
    assert ok, bad


def test_criterion_04_relaxation_chain(compare_rows):
    bad, worst = [], -math.inf
    for row in compare_rows:
        v, o = row.values, row.oracle
        scale = 1.0 + abs(o)
        steps = [
            (v["shor"] - 1e-5 * scale, v["shor-kron"]),
            (v["shor-kron"], v["burer"] + 1e-5 * scale),
            (v["burer"] + 1e-5 * scale, v["moment2"] + 2e-5 * scale),
            (v["moment2"] + 2e-5 * scale, o + 3e-5 * scale),
            # Burer also dominates the Zhen-strengthened Shor bound
            (v["shor-zhen"], v["burer"] + 1e-5 * scale),
        ]
        for k, (lo, hi) in enumerate(steps):
            worst = max(worst, (lo - hi) / scale)
            if not lo <= hi:
                bad.append((row.instance_id, k, lo, hi))
    ok = not bad
    record(4, ok, f"Shor <= ShorKron <= Burer <= Moment2 <= oracle on {len(compare_rows)} rows, "
                  f"worst violation {worst:.3e} (negative = slack)")
    assert ok, bad


def test_criterion_05_fact_equivalence():
    rng = np.random.default_rng(2024)
    fails, worst = 0, math.inf
    for n in range(1, 6):
        for w in rng.uniform(-1.0, 1.0, size=(10_000, n + 2)):
            rep = certify.fact_qp_check(w, tol=1e-9)
            worst = min(worst, rep.worst_margin)
            fails += not rep.passed
    ok = fails == 0
    record(5, ok, f"w'Qw >= 0 iff Pw in L or -L: 50000 samples, {fails} failures")
    assert ok


def test_criterion_06_kron_linearity():
    rng = np.random.default_rng(6)
    worst, fails = 0.0, 0
    for t in range(1000):
        inst = battery_instance(1 + t % 100)
        k = int(rng.integers(1, 6))
        pts = inst.centers[0] + rng.normal(size=(k, inst.n))
        w = rng.uniform(0.0, 1.0, k)
        i, j = sorted(rng.choice(inst.m, size=2, replace=False))
        rep = certify.kron_linearity(pts, w, inst, int(i), int(j), tol=1e-10)
        worst = max(worst, -rep.worst_margin)
        fails += not rep.passed
    ok = fails == 0
    record(6, ok, f"Kronecker map linear on 1000 conic combinations, worst relative gap {worst:.3e}")
    assert ok


def test_criterion_07_compare_kron():
    rng = np.random.default_rng(7)
    summary, ok = [], True
    for branch in ("sphere", "interior"):
        reps = []
        per = 10_000 // 50
        for s in range(1, 51):
            inst = battery_instance(s)
            i, j = sorted(rng.choice(inst.m, size=2, replace=False))
            pair = (int(i), int(j)) if rng.uniform() < 0.5 else (int(j), int(i))
            reps += compare_kron_samples(inst, *pair, per, rng, branch)
        fails = sum(not r.passed for r in reps)
        worst = min(r.worst_margin for r in reps)
        ok &= fails == 0 and len(reps) == 10_000
        summary.append(f"{branch}: {len(reps)} pairs, {fails} violations, worst {worst:.3e}")
    record(7, ok, "; ".join(summary))
    assert ok


def test_criterion_08_decomposition():
    syn = synthetic_roundtrips(50, seed=1, rank=2, tol=1e-8)
    syn_ok = all(o.report.passed and o.reconstruction <= 1e-8 for o in syn) and len(syn) == 50
    worst_rec = max(o.reconstruction for o in syn)
    hunt = hunted_rays(10, seed=1)
    validated = [o for o in hunt if o.cert is not None]
    not_found = [o for o in hunt if o.report.status == NOT_FOUND]
    hunt_ok = len(hunt) >= 10 and all(o.report.passed for o in validated)
    hunt_ok &= len(validated) + len(not_found) == len(hunt)
    mm = [certify.m_matrix_check(o.cert, o.inst, tol=1e-8 if o.source == "synthetic" else 1e-6)
          for o in syn + validated if o.report.passed]
    mm_ok = all(r.passed for r in mm)
    ok = syn_ok and hunt_ok and mm_ok
    ranks = sorted({o.rank for o in hunt})
    record(8, ok, f"50 synthetic rank-2 round trips (worst reconstruction {worst_rec:.1e}); "
                  f"{len(hunt)} hunted rays of rank {ranks}: {len(validated)} validated, "
                  f"{len(not_found)} not found; {len(mm)} M-matrix checks")
    assert ok


def test_criterion_09_moment_implication():
    worst, bad = math.inf, []
    for s in range(1, 31):
        inst = two_ball_instance(s) if s % 2 else battery_instance(s)
        run = run_relaxation(inst, RelaxationKind.MOMENT2)
        assert run.ok, f"seed {s}: {run.status}"
        rep = certify.moment_implies_burer(run.decoded["y"], inst, tol=1e-6)
        worst = min(worst, rep.worst_margin)
        if not rep.passed:
            bad.append((s, rep.details))
    ok = not bad
    record(9, ok, f"30 Moment2 optima map into the lifted cone, worst margin {worst:.3e}")
    assert ok, bad


def test_criterion_10_solver_sanity():
    rng = np.random.default_rng(10)
    worst_dual, worst_dirac, bad, solves = -math.inf, 0.0, [], 0
    for s in BATTERY:
        inst = battery_instance(s)
        for kind in RelaxationKind:
            if kind is RelaxationKind.EXACT_M2 and inst.m != 2:
                continue
            a = run_relaxation(inst, kind)
            b = run_relaxation(inst, kind)
            solves += 1
            if not a.ok:
                bad.append((s, kind.value, a.status))
                continue
            d = (a.dual_value - a.value) / (1.0 + abs(a.value))
            worst_dual = max(worst_dual, d)
            if d > 1e-8:
                bad.append((s, kind.value, "weak duality", d))
            same = a.value == b.value and all(
                np.asarray(a.decoded[k]).tobytes() == np.asarray(b.decoded[k]).tobytes()
                for k in a.decoded)
            if not same:
                bad.append((s, kind.value, "re-solve differs"))
        # a random point inside the largest ball around the witness that fits in every ball
        clearance = np.min(inst.radii - np.linalg.norm(inst.centers - inst.witness, axis=1))
        u = rng.normal(size=inst.n)
        x = inst.witness + 0.9 * clearance * rng.uniform() * u / np.linalg.norm(u)
        assert np.all(ball_residuals(inst, x) > 0)
        for kind, v in dirac_violations(inst, x).items():
            worst_dirac = max(worst_dirac, v)
            if v > 1e-8:
                bad.append((s, kind.value, "dirac", v))
    ok = not bad
    record(10, ok, f"{solves} solves: worst (dual - primal)/(1+|p|) = {worst_dual:.3e}, bitwise re-solve, "
                   f"worst Dirac-lift violation {worst_dirac:.3e}")
    assert ok, bad[:10]
