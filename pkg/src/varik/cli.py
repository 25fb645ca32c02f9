"""Command-line front end: ``varik run``, ``varik list`` and ``varik schema``.

Exit codes: 0 when every threshold holds, 2 when a threshold fails (the
report is still written), 1 on any error.  ``VARIK_THREADS`` caps the
threads of the numerical libraries.
"""

from __future__ import annotations

import argparse
import contextlib
import io
import json
import math
import os
import sys
import time
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .problemfile import SCHEMA, Problem, ProblemError, load_problem, parse_problem, read_builtin_text
from .tasks import TaskResult, run_task

__all__ = ["main", "run", "list_builtins", "report_for"]


def list_builtins() -> list:
    """Names of the bundled problem files."""
    root = resources.files("varik") / "problems"
    return sorted(p.name[: -len(".toml")] for p in root.iterdir() if p.name.endswith(".toml"))


def _json_value(v):
    if isinstance(v, dict):
        return {str(k): _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else None
    if isinstance(v, (complex, np.complexfloating)):
        return _json_value(abs(v))
    return v


def _verdict(metrics: dict, thresholds: dict) -> tuple:
    """(pass, failures); every threshold bounds the metric of the same name from above."""
    missing = [k for k in thresholds if k not in metrics]
    if missing:
        raise ProblemError(
            [f"task/thresholds: unknown metric {k!r} (metrics: {', '.join(sorted(metrics))})" for k in missing]
        )
    failures = []
    for k, bound in thresholds.items():
        v = metrics[k]
        if not (isinstance(v, (int, float)) and v <= bound):
            failures.append(f"{k} = {v!r} exceeds {bound!r}")
    return not failures, failures


def report_for(prob: Problem, result: TaskResult, elapsed_ms: Optional[float]) -> dict:
    st = prob.data["structure"]
    structure = {"kind": st["kind"], "name": st.get("name", st["kind"]), "n": st["n"]}
    if "k" in st:
        structure["k"] = st["k"]
    metrics = _json_value(result.metrics)
    thresholds = _json_value(prob.thresholds)
    ok, failures = _verdict(metrics, thresholds)
    rep = {
        "task": prob.task_name,
        "structure": structure,
        "metrics": metrics,
        "thresholds": thresholds,
        "pass": ok,
        "timing_ms": None if elapsed_ms is None else round(elapsed_ms, 3),
    }
    if result.notes:
        rep["notes"] = _json_value(result.notes)
    if failures:
        rep["failures"] = failures
    return rep


def format_csv(header: Sequence[str], rows: np.ndarray) -> str:
    """'.' decimals, '\\n' line endings, 17 significant digits."""
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for r in np.asarray(rows, float):
        buf.write(",".join(format(float(v), ".17g") for v in r) + "\n")
    return buf.getvalue()


def _dump(rep: dict) -> str:
    return json.dumps(rep, indent=2, allow_nan=False) + "\n"


@contextlib.contextmanager
def _thread_cap():
    raw = os.environ.get("VARIK_THREADS")
    if not raw:
        yield
        return
    try:
        n = int(raw)
        if n < 1:
            raise ValueError
    except ValueError:
        raise ProblemError([f"VARIK_THREADS: expected a positive integer, got {raw!r}"]) from None
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=n):
        yield


def _resolve(path: str) -> Optional[str]:
    if not Path(path).exists():
        text = read_builtin_text(path)
        if text is not None:
            return text
    return None


def run(path: str, overrides: Sequence[str] = (), out=None) -> int:
    """Run one problem file (or bundled problem name); returns the exit code."""
    out = out or sys.stdout
    try:
        builtin = _resolve(path)
        prob = parse_problem(builtin, path, overrides) if builtin is not None else load_problem(path, overrides)
        t0 = time.perf_counter()
        with _thread_cap():
            result = run_task(prob)
        elapsed = (time.perf_counter() - t0) * 1e3 if prob.output.get("include_timing", False) else None
        rep = report_for(prob, result, elapsed)
    except ProblemError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as exc:  # any failure of the numerics is an error exit
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1

    text = _dump(rep)
    dest = prob.output.get("path")
    fmt = prob.output.get("format", "json")
    try:
        if dest and fmt == "csv":
            if result.rows is None:
                print(f"error: task {prob.task_name} produces no table for CSV output", file=sys.stderr)
                return 1
            Path(dest).write_text(format_csv(result.header, result.rows), encoding="utf-8", newline="\n")
        elif dest:
            Path(dest).write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        print(f"error: {dest}: {exc.strerror or exc}", file=sys.stderr)
        return 1
    out.write(text)
    return 0 if rep["pass"] else 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="varik", description="Homogeneous variational structures: checks, integrals, extremals.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a problem file or a bundled problem by name")
    r.add_argument("file")
    r.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override an existing key by dotted path, e.g. numerics.solver.rk4_steps=500")
    sub.add_parser("list", help="list bundled problems")
    sub.add_parser("schema", help="print the problem-file JSON schema")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for name in list_builtins():
            print(name)
        return 0
    if args.command == "schema":
        print(json.dumps(SCHEMA, indent=2))
        return 0
    return run(args.file, args.overrides)


if __name__ == "__main__":
    sys.exit(main())
