"""Command-line entry point.

    fracburgers solve CONFIG [--seed S] [--threads T] [--out DIR] [--gnuplot] [--no-figures]
    fracburgers diagnose RUN_ID NAME [key=value ...]
    fracburgers barrier PROBLEM_CONFIG
    fracburgers constants LAMBDA N C0 PHI
    fracburgers report RUN_ID
    fracburgers list DIR

Exit codes: 0 success, 2 validation error, 3 numerical abort, 4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import jsonschema

from . import __version__
from .config import ConfigError, parse_config
from .diagnostic import DiagnosticReport

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

BARRIER_SCHEMA = {
    "type": "object",
    "required": ["problem"],
    "additionalProperties": False,
    "properties": {
        "problem": {"enum": ["b1", "b3", "b2"]},
        "N": {"enum": [1, 2]},
        "resolutions": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 2},
        "resolution": {"type": "number", "exclusiveMinimum": 0},
        "k0": {"type": "integer", "minimum": 0},
        "lambda": {"type": "number"},
        "X": {"type": "number"},
        "method": {"enum": ["direct", "sor"]},
    },
}


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _params(pairs) -> dict:
    out = {}
    for item in pairs:
        if "=" not in item:
            raise ConfigError(f"params: expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k] = _parse_value(v)
    return out


def _run_dir(args, run_id: str) -> Path:
    from .runner import output_root

    d = output_root(None, args.out) / run_id
    if not (d / "record.json").exists():
        raise FileNotFoundError(f"no run {run_id!r} under {d.parent}")
    return d


def cmd_solve(args) -> int:
    from .runner import run_experiment

    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.threads is not None:
        cfg = replace(cfg, threads=args.threads)
    record = run_experiment(cfg, args.out, figures=not args.no_figures, gnuplot=args.gnuplot)
    print(f"run {record.run_id}: {record.status}")
    for rep in record.diagnostics:
        print(rep.line())
    return EXIT_OK if record.ok else EXIT_NUMERICAL


def cmd_diagnose(args) -> int:
    from .records import load_record
    from .report import emit_report
    from .runner import DIAGNOSTICS, run_diagnostic

    if args.name not in DIAGNOSTICS:
        raise ConfigError(f"diagnostic: unknown {args.name!r}; choose from {sorted(DIAGNOSTICS)}")
    params = _params(args.params)
    run_dir = _run_dir(args, args.run_id)
    rec = load_record(run_dir, with_trajectory=True)
    if rec.trajectory is None:
        raise FileNotFoundError(f"run {args.run_id} has no snapshots")
    rep = run_diagnostic(rec.trajectory, args.name, params)
    rec.diagnostics = [r for r in rec.diagnostics if r.name != rep.name] + [rep]
    emit_report(rec, run_dir, figures=False)
    print(rep.line())
    return EXIT_OK


def cmd_barrier(args) -> int:
    from . import barriers

    try:
        problem_cfg = json.loads(Path(args.problem).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"<root>: not valid JSON ({exc})") from None
    try:
        jsonschema.validate(problem_cfg, BARRIER_SCHEMA)
    except jsonschema.ValidationError as err:
        path = ".".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {err.message}") from None
    method = problem_cfg.get("method", "direct")
    kind = problem_cfg["problem"]
    if kind == "b1":
        rep = barriers.lambda_refinement(problem_cfg.get("N", 1), tuple(problem_cfg.get("resolutions", (4, 8, 16))), method)
    elif kind == "b3":
        lam = float(problem_cfg.get("lambda", 0.25))
        k0 = int(problem_cfg.get("k0", 1))
        value = barriers.lambda_star_estimate(k0, lam, problem_cfg.get("resolution", 256), problem_cfg.get("N", 1), method)
        upper = min(1.0, lam) / 2 ** (k0 + 1)
        rep = DiagnosticReport("lambda_star", 0 < value < upper,
                               {"lambda_star": value, "upper_bracket": upper, "lambda": lam, "k0": k0},
                               notes="lambda* must lie in (0, min(1, lambda)/2^(k0+1))")
    else:
        rep = barriers.strip_bound_check(float(problem_cfg.get("X", 8.0)), problem_cfg.get("resolution", 32), method)
    print(json.dumps(rep.to_dict(), indent=2))
    print(rep.line())
    return EXIT_OK


def cmd_constants(args) -> int:
    from .degiorgi import degiorgi_constants

    c = degiorgi_constants(args.lam, args.N, args.C0, args.Phi, K_verify=args.K,
                           C_energy=args.C_energy, C_tilde=args.C_tilde)
    out = {"lambda": c.lam, "N": c.N, "C0": c.C0, "Phi": c.Phi, "delta": c.delta,
           "M": c.M_rec, "eps0_bound": c.eps0_bound, "P1_l2": c.P1_l2,
           "C_N_sobolev": c.C_N_sobolev, "K_verify": c.K_verify, "checks": c.checks,
           "note": "eps0 is conditional on the supplied C_energy and C_tilde"}
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_report(args) -> int:
    from .records import load_record
    from .report import emit_report, summary_text

    run_dir = _run_dir(args, args.run_id)
    rec = load_record(run_dir, with_trajectory=True)
    emit_report(rec, run_dir, figures=not args.no_figures, gnuplot=args.gnuplot)
    sys.stdout.write(summary_text(rec))
    return EXIT_OK


def cmd_list(args) -> int:
    from .records import list_runs

    rows = list_runs(args.dir)
    print("id,date,digest,status")
    for r in rows:
        print(f"{r['id']},{r['date']},{r['digest']},{r['status']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracburgers", description="Fractional Burgers solver and diagnostics")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out")
    p.add_argument("--gnuplot", action="store_true", help="also write a gnuplot script")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("diagnose", help="run one diagnostic on a stored run")
    p.add_argument("run_id")
    p.add_argument("name")
    p.add_argument("params", nargs="*", help="key=value (values parsed as JSON when possible)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("barrier", help="solve a barrier problem from a JSON file")
    p.add_argument("problem")
    p.set_defaults(func=cmd_barrier)

    p = sub.add_parser("constants", help="admissible delta, M and eps0")
    p.add_argument("lam", type=float)
    p.add_argument("N", type=int)
    p.add_argument("C0", type=float)
    p.add_argument("Phi", type=float)
    p.add_argument("--K", type=int, default=64)
    p.add_argument("--C-energy", dest="C_energy", type=float, default=1.0)
    p.add_argument("--C-tilde", dest="C_tilde", type=float, default=1.0)
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("report", help="re-emit the report files of a stored run")
    p.add_argument("run_id")
    p.add_argument("--out")
    p.add_argument("--gnuplot", action="store_true")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("list", help="list runs under a directory")
    p.add_argument("dir")
    p.set_defaults(func=cmd_list)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    try:
        return args.func(args)
    except (ConfigError, jsonschema.ValidationError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FloatingPointError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
