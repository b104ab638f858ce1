"""Batch drivers behind the command line: relaxation runs, comparison rows and
the certification batteries.

Every battery takes a :class:`BatteryConfig` and returns a list of
:class:`~ballqcqp.certify.CertReport`.  Randomness comes only from the seed in
the config, and work fanned out over instances is reassembled in input order,
so identical configs give identical reports.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import certify
from .certify import CertReport
from .errors import BallQcqpError, ConfigError, DecompositionNotFound, PreconditionFailed
from .instance import BallQcqpInstance, ball_residuals, generate
from .ipm import SolverSettings, Status
from .oracle import GRID_MAX_N, OracleMethod, global_min
from .relaxations import RelaxationKind, build, solve_relaxation

CSV_VERSION = "ballqcqp-compare v1"
NOT_FOUND = "decomposition-not-found"
HUNT_TARGET = 10

COMPARE_KINDS = (
    RelaxationKind.SHOR,
    RelaxationKind.SHOR_KRON,
    RelaxationKind.SHOR_ZHEN,
    RelaxationKind.BURER,
    RelaxationKind.MOMENT2,
    RelaxationKind.EXACT_M2,
)


def battery_instance(seed: int) -> BallQcqpInstance:
    """Instance used by the batteries: ``n`` cycles through 2..5, ``m`` through 2..4."""
    k = int(seed) - 1
    return generate(seed, 2 + k % 4, 2 + (k // 4) % 3)


def two_ball_instance(seed: int, dims=(1, 2, 3)) -> BallQcqpInstance:
    return generate(seed, dims[(int(seed) - 1) % len(dims)], 2)


def parallel_map(fn, items, jobs: int = 1) -> list:
    """``[fn(x) for x in items]``, optionally on a thread pool; order preserved."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- relaxation runs

@dataclass
class RelaxationRun:
    kind: RelaxationKind
    status: str
    value: float
    dual_value: float
    millis: float
    iterations: int = 0
    decoded: dict | None = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == Status.OPTIMAL.value


def run_relaxation(inst: BallQcqpInstance, kind, settings: SolverSettings | None = None) -> RelaxationRun:
    kind = RelaxationKind(kind)
    t0 = time.perf_counter()
    try:
        built = build(inst, kind)
        res, dec = solve_relaxation(built, settings)
    except BallQcqpError as exc:
        ms = 1e3 * (time.perf_counter() - t0)
        return RelaxationRun(kind, "Error", math.nan, math.nan, ms, message=str(exc))
    ms = 1e3 * (time.perf_counter() - t0)
    value = res.primal_value if res.ok else math.nan
    dual = res.dual_value if res.ok else math.nan
    return RelaxationRun(kind, res.status.value, value, dual, ms, res.iterations, dec)


# ---------------------------------------------------------------- batteries

@dataclass(frozen=True)
class BatteryConfig:
    trials: int = 1000
    instances: int = 20
    seed: int = 1
    settings: SolverSettings = field(default_factory=SolverSettings)
    jobs: int = 1


def aggregate(name: str, reports, label: str = "") -> CertReport:
    """One report summarizing many: passes iff all pass, margin is the worst."""
    reports = list(reports)
    if not reports:
        return CertReport(name, True, math.inf, f"{label}; no trials".lstrip("; "))
    fails = [r for r in reports if not r.passed]
    worst = min(reports, key=lambda r: r.worst_margin)
    details = f"{label}; trials={len(reports)}, failures={len(fails)}, worst: {worst.details}"
    status = ""
    if fails and all(r.status == certify.PRECONDITION_FAILED for r in fails):
        status = certify.PRECONDITION_FAILED
    return CertReport(name, not fails, worst.worst_margin, details.lstrip("; "), status)


def _burer_solution(inst, settings):
    run = run_relaxation(inst, RelaxationKind.BURER, settings)
    if not run.ok:
        return None, CertReport("burer-solve", False, -math.inf,
                                f"solver status {run.status} {run.message}".strip())
    return run.decoded["Z"], None


def battery_fact_qp(cfg: BatteryConfig, dims=(1, 2, 3, 4, 5)) -> list:
    rng = np.random.default_rng(cfg.seed)
    out = []
    for n in dims:
        W = rng.uniform(-1.0, 1.0, size=(cfg.trials, n + 2))
        out.append(aggregate("fact-qp", (certify.fact_qp_check(w) for w in W), f"n={n}"))
    return out


def battery_rank_one(cfg: BatteryConfig) -> list:
    rng = np.random.default_rng(cfg.seed)
    out = []
    for s in range(cfg.seed, cfg.seed + cfg.instances):
        inst = battery_instance(s)
        c, r = inst.centers[0], inst.radii[0]
        X = c + rng.uniform(-1.5 * r, 1.5 * r, size=(cfg.trials, inst.n))
        out.append(aggregate("rank-one", (certify.rank_one_feasibility(x, inst) for x in X),
                             f"instance={s}"))
    return out


def _per_burer_solution(cfg: BatteryConfig, name: str, check) -> list:
    def one(s):
        inst = battery_instance(s)
        Z, err = _burer_solution(inst, cfg.settings)
        if err is not None:
            return CertReport(name, False, -math.inf, f"instance={s}; {err.details}")
        return aggregate(name, check(Z, inst), f"instance={s}")

    return parallel_map(one, range(cfg.seed, cfg.seed + cfg.instances), cfg.jobs)


def _pairs(inst):
    return [(i, j) for i in range(inst.m) for j in range(i + 1, inst.m)]


def battery_kron_dom(cfg: BatteryConfig) -> list:
    return _per_burer_solution(cfg, "kron-dom", lambda Z, inst: [
        certify.kron_domination(Z, inst, i, j) for i, j in _pairs(inst)])


def battery_zhen_dom(cfg: BatteryConfig) -> list:
    return _per_burer_solution(cfg, "zhen-dom", lambda Z, inst: [
        certify.zhen_domination(Z, inst, i, j) for i, j in _pairs(inst)]
        + [certify.implied_psd_check(Z, inst, i, j) for i, j in _pairs(inst)])


def battery_socrlt(cfg: BatteryConfig) -> list:
    return _per_burer_solution(cfg, "socrlt", lambda Z, inst: [
        certify.socrlt_components(Z, inst, i)[3] for i in range(inst.m)])


def battery_trace_rlt(cfg: BatteryConfig) -> list:
    return _per_burer_solution(cfg, "trace-rlt", lambda Z, inst: [
        certify.trace_rlt_check(Z, inst, i) for i in range(inst.m)])


def battery_kron_linearity(cfg: BatteryConfig) -> list:
    rng = np.random.default_rng(cfg.seed)
    out = []
    for s in range(cfg.seed, cfg.seed + cfg.instances):
        inst = battery_instance(s)
        reps = []
        for _ in range(cfg.trials):
            k = int(rng.integers(1, 5))
            pts = inst.centers[0] + rng.normal(size=(k, inst.n))
            # half conic, half signed combinations
            w = rng.uniform(0.1, 1.0, k) if rng.uniform() < 0.5 else rng.normal(size=k)
            i, j = _pairs(inst)[int(rng.integers(len(_pairs(inst))))]
            reps.append(certify.kron_linearity(pts, w, inst, i, j))
        out.append(aggregate("kron-linearity", reps, f"instance={s}"))
    return out


def _interior_sample(inst, i, j, rng):
    c, r = inst.centers[i], inst.radii[i]
    for _ in range(10_000):
        u = rng.normal(size=inst.n)
        x = c + r * rng.uniform() ** (1.0 / inst.n) * u / np.linalg.norm(u)
        res = ball_residuals(inst, x)
        if res[i] > 0 and res[j] > 0:
            return x
    return None


def compare_kron_samples(inst, i, j, trials, rng, branch):
    """Reports for ``trials`` random ``(x, V)`` pairs in one hypothesis branch."""
    n = inst.n
    reps = []
    for _ in range(trials):
        if branch == "sphere":
            u = rng.normal(size=n)
            x = inst.centers[i] + inst.radii[i] * u / np.linalg.norm(u)
        else:
            x = _interior_sample(inst, i, j, rng)
            if x is None:
                reps.append(CertReport("compare-kron", False, -math.inf,
                                       "could not sample a point inside both balls",
                                       certify.PRECONDITION_FAILED))
                continue
        V = rng.normal(size=(n + 1) ** 2)
        reps.append(certify.compare_kron_inequality(x, V, inst, i, j))
    return reps


def battery_compare_kron(cfg: BatteryConfig) -> list:
    rng = np.random.default_rng(cfg.seed)
    out = []
    for s in range(cfg.seed, cfg.seed + cfg.instances):
        inst = battery_instance(s)
        for branch in ("sphere", "interior"):
            reps = []
            for i, j in _pairs(inst):
                reps += compare_kron_samples(inst, i, j, max(1, cfg.trials // len(_pairs(inst))),
                                             rng, branch)
            out.append(aggregate("compare-kron", reps, f"instance={s}, branch={branch}"))
    return out


def battery_moment_implies(cfg: BatteryConfig) -> list:
    def one(s):
        inst = two_ball_instance(s) if s % 2 else battery_instance(s)
        run = run_relaxation(inst, RelaxationKind.MOMENT2, cfg.settings)
        if not run.ok:
            return CertReport("moment-implies", False, -math.inf,
                              f"instance={s}; solver status {run.status}")
        rep = certify.moment_implies_burer(run.decoded["y"], inst)
        return CertReport(rep.name, rep.passed, rep.worst_margin, f"instance={s}; {rep.details}",
                          rep.status)

    return parallel_map(one, range(cfg.seed, cfg.seed + cfg.instances), cfg.jobs)


@dataclass
class DecompOutcome:
    """One decomposition attempt and the certificate it produced, if any."""

    source: str
    seed: int
    rank: int
    report: CertReport
    cert: certify.DecompositionCertificate | None = None
    inst: BallQcqpInstance | None = None
    reconstruction: float = math.nan
    face_dim: int | None = None


def synthetic_roundtrips(count: int, seed: int, rank: int = 2, tol: float = 1e-8) -> list:
    """Construct, decompose and verify ``count`` synthetic certificates."""
    rng = np.random.default_rng(seed)
    out = []
    s = seed
    while len(out) < count:
        inst = two_ball_instance(s, dims=(2, 3, 4))
        s += 1
        try:
            Zbar, _ = certify.synthetic_certificate(inst, rng, rank=rank)
        except PreconditionFailed:
            continue
        try:
            cert = certify.decompose_extreme_ray(Zbar, inst, tol=tol)
        except DecompositionNotFound as exc:
            rep = CertReport("decomp", False, -math.inf, f"synthetic seed={s - 1}: {exc}")
            out.append(DecompOutcome("synthetic", s - 1, certify.numerical_rank(Zbar), rep, None, inst))
            continue
        rep = certify.verify_decomposition(Zbar, cert, inst, tol=tol)
        err = float(np.linalg.norm(Zbar - cert.matrix()) / np.linalg.norm(Zbar))
        out.append(DecompOutcome("synthetic", s - 1, certify.numerical_rank(Zbar), rep, cert, inst, err))
    return out


def hunted_rays(target: int, seed: int, settings: SolverSettings | None = None,
                max_attempts: int | None = None, tol: float = 1e-6) -> list:
    """Solve trace-section problems until ``target`` rank >= 2 optima are found.

    Each rank >= 2 optimum is decomposed.  A certificate is reported with its
    verification; a failed search is reported with status
    ``decomposition-not-found``.  Rank-one optima are not reported.
    """
    rng = np.random.default_rng(seed)
    max_attempts = 5 * target if max_attempts is None else max_attempts
    out = []
    s = seed
    for _ in range(max_attempts):
        if len(out) >= target:
            break
        inst = two_ball_instance(s, dims=(2, 3, 4))
        s += 1
        try:
            Z, res = certify.hunt_extreme_ray(inst, rng, settings=settings)
        except PreconditionFailed:
            continue
        if Z is None:
            continue
        rank = certify.numerical_rank(Z)
        if rank < 2:
            continue
        fd = certify.face_dimension(Z, inst)
        try:
            cert = certify.decompose_extreme_ray(Z, inst, tol=tol)
        except (DecompositionNotFound, PreconditionFailed) as exc:
            rep = CertReport("decomp", True, 0.0,
                             f"hunt seed={s - 1}, rank={rank}, face dim={fd}: {exc}", NOT_FOUND)
            out.append(DecompOutcome("hunt", s - 1, rank, rep, None, inst, face_dim=fd))
            continue
        rep = certify.verify_decomposition(Z, cert, inst, tol=tol)
        err = float(np.linalg.norm(Z - cert.matrix()) / np.linalg.norm(Z))
        out.append(DecompOutcome("hunt", s - 1, rank, rep, cert, inst, err, fd))
    return out


def _tagged(rep: CertReport, tag: str) -> CertReport:
    return CertReport(rep.name, rep.passed, rep.worst_margin, f"{tag}; {rep.details}", rep.status)


def battery_decomp(cfg: BatteryConfig) -> list:
    syn = synthetic_roundtrips(cfg.instances, cfg.seed)
    hunt = hunted_rays(min(HUNT_TARGET, cfg.instances), cfg.seed, cfg.settings)
    out = [_tagged(o.report, f"synthetic seed={o.seed}") for o in syn]
    out += [o.report if o.report.status == NOT_FOUND else _tagged(o.report, f"hunt seed={o.seed}")
            for o in hunt]
    return out


def battery_m_matrix(cfg: BatteryConfig) -> list:
    outcomes = synthetic_roundtrips(cfg.instances, cfg.seed)
    outcomes += synthetic_roundtrips(cfg.instances, cfg.seed, rank=3)
    outcomes += hunted_rays(min(HUNT_TARGET, cfg.instances), cfg.seed, cfg.settings)
    out = []
    for o in outcomes:
        if o.cert is None or not o.report.passed:
            continue
        tol = 1e-8 if o.source == "synthetic" else 1e-6
        out.append(_tagged(certify.m_matrix_check(o.cert, o.inst, tol=tol),
                           f"{o.source} seed={o.seed}, rank={o.rank}"))
    return out


CHECKS = {
    "fact-qp": battery_fact_qp,
    "rank-one": battery_rank_one,
    "kron-dom": battery_kron_dom,
    "zhen-dom": battery_zhen_dom,
    "socrlt": battery_socrlt,
    "trace-rlt": battery_trace_rlt,
    "decomp": battery_decomp,
    "m-matrix": battery_m_matrix,
    "compare-kron": battery_compare_kron,
    "kron-linearity": battery_kron_linearity,
    "moment-implies": battery_moment_implies,
}


def run_checks(name: str, cfg: BatteryConfig) -> list:
    if name == "all":
        out = []
        for fn in CHECKS.values():
            out += fn(cfg)
        return out
    if name not in CHECKS:
        raise ConfigError(f"unknown check {name!r}; choose from {', '.join(CHECKS)} or 'all'")
    return CHECKS[name](cfg)


# ---------------------------------------------------------------- comparison table

@dataclass
class CompareRow:
    instance_id: str
    n: int
    m: int
    oracle: float
    oracle_flagged: bool
    values: dict
    gaps: dict
    cert_pass_counts: dict
    solve_times: dict


def gap(oracle: float, value: float) -> float:
    return (oracle - value) / (1.0 + abs(oracle))


def _row_certs(Z, inst) -> dict:
    counts = {}
    groups = {
        "kron-dom": [certify.kron_domination(Z, inst, i, j) for i, j in _pairs(inst)],
        "zhen-dom": [certify.zhen_domination(Z, inst, i, j) for i, j in _pairs(inst)],
        "socrlt": [certify.socrlt_components(Z, inst, i)[3] for i in range(inst.m)],
        "trace-rlt": [certify.trace_rlt_check(Z, inst, i) for i in range(inst.m)],
    }
    for name, reps in groups.items():
        counts[name] = (sum(r.passed for r in reps), len(reps))
    return counts


def compare_instance(instance_id: str, inst: BallQcqpInstance, settings: SolverSettings | None = None,
                     oracle_budget: int | None = None, seed: int = 0) -> CompareRow:
    kinds = [k for k in COMPARE_KINDS if k is not RelaxationKind.EXACT_M2 or inst.m == 2]
    values, times, certs = {}, {}, {}
    for kind in kinds:
        run = run_relaxation(inst, kind, settings)
        values[kind] = run.value
        times[kind] = run.millis
        if kind is RelaxationKind.BURER and run.ok:
            certs = _row_certs(run.decoded["Z"], inst)
    method = OracleMethod.GRID if inst.n <= GRID_MAX_N else OracleMethod.MULTISTART
    try:
        orc = global_min(inst, budget=oracle_budget, seed=seed, method=method)
        oracle, flagged = orc.best_value, orc.flagged
    except BallQcqpError:
        oracle, flagged = math.nan, True
    gaps = {k: gap(oracle, v) for k, v in values.items()}
    return CompareRow(instance_id, inst.n, inst.m, oracle, flagged, values, gaps, certs, times)


def _num(v) -> str:
    return "NA" if v is None or not math.isfinite(v) else format(float(v), ".17g")


def rows_to_csv(rows, timings: bool = False) -> str:
    """CSV text: version comment, header, one line per row, then a mean-gap footer."""
    kinds = [k for k in COMPARE_KINDS if any(k in r.values for r in rows)]
    cert_names = ["kron-dom", "zhen-dom", "socrlt", "trace-rlt"]
    header = ["instance_id", "n", "m", "oracle", "oracle_flagged"]
    header += [f"value_{k.value}" for k in kinds] + [f"gap_{k.value}" for k in kinds]
    header += [f"pass_{c}" for c in cert_names]
    if timings:
        header += [f"ms_{k.value}" for k in kinds]
    buf = io.StringIO()
    buf.write(f"# {CSV_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        line = [r.instance_id, r.n, r.m, _num(r.oracle), int(r.oracle_flagged)]
        line += [_num(r.values.get(k)) if k in r.values else "" for k in kinds]
        line += [_num(r.gaps.get(k)) if k in r.gaps else "" for k in kinds]
        for c in cert_names:
            line.append(f"{r.cert_pass_counts[c][0]}/{r.cert_pass_counts[c][1]}"
                        if c in r.cert_pass_counts else "NA")
        if timings:
            line += [_num(r.solve_times.get(k)) if k in r.solve_times else "" for k in kinds]
        w.writerow(line)
    footer = ["mean", "", "", "", ""] + [""] * len(kinds)
    for k in kinds:
        vals = [r.gaps[k] for r in rows if k in r.gaps and math.isfinite(r.gaps[k])]
        footer.append(_num(sum(vals) / len(vals)) if vals else "NA")
    footer += [""] * len(cert_names)
    if timings:
        footer += [""] * len(kinds)
    w.writerow(footer)
    return buf.getvalue()


def linear_rlt_measurement(inst: BallQcqpInstance, settings: SolverSettings | None = None) -> dict:
    """Shor with pairwise linear RLT cuts against the lifted bound; measured, not asserted.

    ``excess`` is ``value(Shor + RLT) - value(Burer)``; a positive value would mean
    the cuts are not implied by the lifted cone on this instance.
    """
    res, _ = solve_relaxation(build(inst, RelaxationKind.SHOR, include_linear_rlt=True), settings)
    shor_rlt = res.primal_value if res.ok else math.nan
    burer = run_relaxation(inst, RelaxationKind.BURER, settings).value
    return {"shor_rlt": shor_rlt, "burer": burer, "excess": shor_rlt - burer}


# ---------------------------------------------------------------- solver sanity

def boundary_point(inst: BallQcqpInstance, x) -> np.ndarray:
    """Where the ray from the witness through ``x`` leaves the feasible set."""
    w = np.asarray(inst.witness, dtype=float)
    u = np.asarray(x, dtype=float) - w
    if not np.any(u):
        u = np.eye(inst.n)[0]
    # largest s with ||w + s u - c_i|| <= r_i for every ball
    a = u @ u
    s = math.inf
    for c, r in zip(inst.centers, inst.radii):
        e = w - c
        bq, cq = e @ u, e @ e - r * r
        s = min(s, (-bq + math.sqrt(bq * bq - a * cq)) / a)
    return w + s * u


def dirac_violations(inst: BallQcqpInstance, x) -> dict:
    """Worst violation of the rank-one lift of ``x`` for every applicable relaxation.

    The two-ball exact relaxation only contains lifts of points on one of the
    spheres, so it is checked at :func:`boundary_point` of ``x`` instead.
    """
    out = {}
    for kind in RelaxationKind:
        if kind is RelaxationKind.EXACT_M2 and inst.m != 2:
            continue
        built = build(inst, kind)
        at = boundary_point(inst, x) if kind is RelaxationKind.EXACT_M2 else x
        eq, margin, _ = built.violation_at(at)
        out[kind] = max(eq, -margin)
    return out
