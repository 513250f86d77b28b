"""Command-line front end: scenario files in, report files out.

Exit status: 0 completed, 2 completed with a boundary verdict, 1 input
error, 3 solver error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from pathlib import Path

from .core import LP_TOL
from .errors import ConsistencyError, InputError, SolverError
from .montecarlo import default_threads
from .scenario import ScenarioError, execute, scenario_hash, schedule

EXIT_OK, EXIT_INPUT, EXIT_BOUNDARY, EXIT_SOLVER = 0, 1, 2, 3


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _dump(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _load(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ScenarioError("--scenario", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError("--scenario", f"invalid JSON: {exc}") from None


def _floats(text: str | None, flag: str):
    if text is None:
        return None
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ScenarioError(flag, f"expected comma-separated reals, got {text!r}") from None


def _error_report(sc, exc, status) -> dict:
    return {
        "tool": {"name": "emerge"},
        "scenario_sha256": scenario_hash(sc) if isinstance(sc, dict) else None,
        "verdict": "error",
        "exit_status": status,
        "error": {"type": type(exc).__name__, "message": str(exc)},
    }


def _finish(out: Path, report: dict, table) -> int:
    _atomic_write(out / "report.json", _dump(report))
    if table:
        _atomic_write(out / "report.csv", _csv(table))
    return EXIT_BOUNDARY if report.get("verdict") == "boundary" else EXIT_OK


def _guarded(args, body) -> int:
    out = Path(args.out)
    sc = None
    try:
        sc = _load(args.scenario)
        report, table = body(sc)
        return _finish(out, report, table)
    except (SolverError, ConsistencyError) as exc:
        err, status = exc, EXIT_SOLVER
    except InputError as exc:
        err, status = exc, EXIT_INPUT
    print(f"emerge: {err}", file=sys.stderr)
    try:
        _atomic_write(out / "report.json", _dump(_error_report(sc, err, status)))
    except OSError:
        pass
    return status


def cmd_run(args) -> int:
    return _guarded(
        args, lambda sc: execute(sc, tol=args.tol, seed=args.seed, reps=args.reps)
    )


def cmd_schedule(args) -> int:
    def body(sc):
        eps = _floats(args.epsilons, "--epsilons")
        ths = _floats(args.thetas, "--thetas")
        eps = eps if eps is not None else sc.get("epsilons", [])
        ths = ths if ths is not None else sc.get("thetas", [])
        return schedule(sc, eps, ths, tol=args.tol, threads=default_threads())

    return _guarded(args, body)


def cmd_oracle_check(args) -> int:
    def body(sc):
        sc = dict(sc, kind="oracle-check")
        return execute(sc, tol=args.tol)

    return _guarded(args, body)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="emerge", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--scenario", required=True, metavar="PATH")
        sp.add_argument("--out", required=True, metavar="DIR")
        sp.add_argument("--tol", type=float, default=LP_TOL, help="LP verdict tolerance")

    run = sub.add_parser("run", help="execute one scenario")
    common(run)
    run.add_argument("--seed", type=int, default=None, metavar="U64")
    run.add_argument("--reps", type=int, default=None, metavar="N")
    run.set_defaults(func=cmd_run)

    sch = sub.add_parser("schedule", help="tabulate dominating weights over an (epsilon, theta) ladder")
    common(sch)
    sch.add_argument("--epsilons", default=None, help="comma-separated, e.g. 0.1,0.01,0.001")
    sch.add_argument("--thetas", default=None, help="comma-separated, e.g. 2,4,8")
    sch.set_defaults(func=cmd_schedule)

    orc = sub.add_parser("oracle-check", help="compare the LP against brute-force enumeration")
    common(orc)
    orc.set_defaults(func=cmd_oracle_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)
