"""Command-line entry point ``bqr``.

Subcommands: ``gen``, ``solve``, ``compare``, ``verify``, ``oracle``.
Settings resolve as flags, then ``BQR_*`` environment variables, then defaults.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .certify import reports_to_json
from .errors import BallQcqpError, ConfigError
from .harness import (CHECKS, BatteryConfig, compare_instance, parallel_map, rows_to_csv,
                      run_checks, run_relaxation)
from .instance import generate, load, save
from .ipm import SolverSettings
from .oracle import OracleMethod, global_min
from .relaxations import RelaxationKind

DEFAULTS = {"seed": 1, "jobs": 1, "tol_feas": 1e-8, "tol_gap": 1e-8}


def _env_int(name):
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"environment variable {name} must be an integer, got {raw!r}") from exc


def resolve(args) -> dict:
    """Merge flags, environment and defaults."""
    out = dict(DEFAULTS)
    env = {"seed": _env_int("BQR_SEED"), "jobs": _env_int("BQR_JOBS")}
    for key, val in env.items():
        if val is not None:
            out[key] = val
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            out[key] = val
    if out["jobs"] < 1:
        raise ConfigError(f"jobs must be >= 1, got {out['jobs']}")
    for key in ("tol_feas", "tol_gap"):
        if not (out[key] > 0 and math.isfinite(out[key])):
            raise ConfigError(f"{key.replace('_', '-')} must be positive")
    return out


def _settings(cfg) -> SolverSettings:
    return SolverSettings(feas_tol=cfg["tol_feas"], gap_tol=cfg["tol_gap"])


def _common(p):
    p.add_argument("--seed", type=int, default=None, help="base seed (env BQR_SEED)")
    p.add_argument("--tol-feas", type=float, default=None, dest="tol_feas")
    p.add_argument("--tol-gap", type=float, default=None, dest="tol_gap")
    p.add_argument("--jobs", type=int, default=None, help="parallel workers (env BQR_JOBS)")
    p.add_argument("--out", default=None, help="output file or directory")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bqr", description="Relaxations of ball-constrained QCQPs.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate random instances")
    _common(p)
    p.add_argument("-n", type=int, default=3)
    p.add_argument("-m", type=int, default=2)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--prefix", default="inst")

    p = sub.add_parser("solve", help="solve one relaxation of an instance")
    _common(p)
    p.add_argument("instance")
    p.add_argument("--relax", default="burer",
                   help="one of " + ", ".join(k.value for k in RelaxationKind))

    p = sub.add_parser("compare", help="bound comparison table across relaxations")
    _common(p)
    p.add_argument("instances", nargs="*", help="instance files (default: generate --count)")
    p.add_argument("-n", type=int, default=2)
    p.add_argument("-m", type=int, default=2)
    p.add_argument("--count", type=int, default=5)
    p.add_argument("--oracle-budget", type=int, default=None, dest="oracle_budget")
    p.add_argument("--timings", action="store_true", help="add solve-time columns (not reproducible)")

    p = sub.add_parser("verify", help="run certification batteries")
    _common(p)
    p.add_argument("--check", default="all", help="one of " + ", ".join(CHECKS) + " or all")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--instances", type=int, default=20)

    p = sub.add_parser("oracle", help="brute-force global minimum of an instance")
    _common(p)
    p.add_argument("instance")
    p.add_argument("--method", default="grid", help="grid or multistart")
    p.add_argument("--budget", type=int, default=None)
    return ap


def _write(text: str, out, default_name=None):
    path = out if out is not None else default_name
    if path is None:
        sys.stdout.write(text)
        return None
    Path(path).write_text(text, encoding="utf-8")
    return path


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def cmd_gen(args, cfg) -> int:
    if args.m < 2:
        raise ConfigError(f"m must be >= 2, got {args.m}")
    if args.n < 1:
        raise ConfigError(f"n must be >= 1, got {args.n}")
    if args.count < 1:
        raise ConfigError(f"count must be >= 1, got {args.count}")
    outdir = Path(args.out or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    for s in range(cfg["seed"], cfg["seed"] + args.count):
        path = outdir / f"{args.prefix}_{s}.json"
        save(generate(s, args.n, args.m), path)
        print(path)
    return 0


def cmd_solve(args, cfg) -> int:
    try:
        kind = RelaxationKind(args.relax)
    except ValueError as exc:
        raise ConfigError(f"unknown relaxation {args.relax!r}") from exc
    inst = load(args.instance)
    if kind is RelaxationKind.EXACT_M2 and inst.m != 2:
        raise ConfigError(f"exact-m2 needs exactly two balls, instance has m={inst.m}")
    run = run_relaxation(inst, kind, _settings(cfg))
    doc = {
        "instance": str(args.instance),
        "relaxation": kind.value,
        "status": run.status,
        "value": _jsonable(run.value),
        "dual_value": _jsonable(run.dual_value),
        "iterations": run.iterations,
        "solution": {k: _jsonable(v) for k, v in (run.decoded or {}).items()},
    }
    if run.message:
        doc["message"] = run.message
    default = Path(args.instance).with_suffix("").as_posix() + f"_{kind.value}.json"
    path = _write(json.dumps(doc, indent=1) + "\n", args.out, default)
    print(f"{kind.value} {run.status} value={run.value:.10g} iterations={run.iterations} -> {path}")
    if not run.ok:
        print(f"error: solver finished with status {run.status} {run.message}".rstrip(), file=sys.stderr)
        return 1
    return 0


def cmd_compare(args, cfg) -> int:
    if args.instances:
        items = [(Path(p).stem, load(p)) for p in args.instances]
    else:
        if args.m < 2:
            raise ConfigError(f"m must be >= 2, got {args.m}")
        items = [(f"seed{s}", generate(s, args.n, args.m))
                 for s in range(cfg["seed"], cfg["seed"] + args.count)]
    settings = _settings(cfg)

    def one(item):
        name, inst = item
        return compare_instance(name, inst, settings, args.oracle_budget, cfg["seed"])

    rows = parallel_map(one, items, cfg["jobs"])
    text = rows_to_csv(rows, timings=args.timings)
    path = _write(text, args.out)
    if path:
        print(f"wrote {len(rows)} rows -> {path}")
    return 0


def cmd_verify(args, cfg) -> int:
    if args.check != "all" and args.check not in CHECKS:
        raise ConfigError(f"unknown check {args.check!r}; choose from {', '.join(CHECKS)} or all")
    if args.trials < 1 or args.instances < 1:
        raise ConfigError("trials and instances must be positive")
    bc = BatteryConfig(trials=args.trials, instances=args.instances, seed=cfg["seed"],
                       settings=_settings(cfg), jobs=cfg["jobs"])
    reports = run_checks(args.check, bc)
    failed = [r for r in reports if not r.passed]
    _write(reports_to_json(reports), args.out, None if args.out else os.devnull)
    for r in failed:
        print(f"FAIL {r.name}: {r.details}", file=sys.stderr)
    print(f"{args.check}: {len(reports) - len(failed)}/{len(reports)} reports passed")
    return 0 if not failed else 1


def cmd_oracle(args, cfg) -> int:
    try:
        method = OracleMethod(args.method)
    except ValueError as exc:
        raise ConfigError(f"unknown oracle method {args.method!r}") from exc
    inst = load(args.instance)
    res = global_min(inst, budget=args.budget, seed=cfg["seed"], method=method, jobs=cfg["jobs"])
    _write(json.dumps(res.to_dict(), indent=1) + "\n", args.out, None if args.out else os.devnull)
    flag = " (flagged)" if res.flagged else ""
    print(f"{method.value} best_value={res.best_value!r} evaluations={res.evaluations}{flag}")
    return 0


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "compare": cmd_compare, "verify": cmd_verify,
            "oracle": cmd_oracle}


def run(argv=None) -> int:
    """Parse and dispatch; library errors propagate."""
    args = _parser().parse_args(argv)
    cfg = resolve(args)
    return COMMANDS[args.command](args, cfg)


def main(argv=None) -> int:
    try:
        return run(argv)
    except (BallQcqpError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
