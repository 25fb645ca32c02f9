"""Small helpers shared by the structure modules."""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from . import scalarcalc as sc
from .exterior import _det

EPS = 1e-300

EVAL_ERRORS = (sc.DomainError, sc.JetError, ZeroDivisionError, FloatingPointError, OverflowError)


class SampleEvaluationError(ValueError):
    """An evaluation failed at a specific sample point."""

    def __init__(self, sample, names: Optional[Sequence[str]], cause: Exception):
        self.sample = np.asarray(sample)
        self.cause = cause
        if names is not None:
            where = ", ".join(f"{n}={v:.6g}" for n, v in zip(names, np.ravel(self.sample)))
        else:
            where = np.array2string(self.sample, precision=6)
        super().__init__(f"evaluation failed at sample ({where}): {cause}")


class ChartError(ValueError):
    pass


def columns(points: np.ndarray) -> list:
    return [points[:, i] for i in range(points.shape[1])]


def on_samples(fn: Callable, points: np.ndarray, names: Optional[Sequence[str]] = None):
    """Evaluate ``fn(columns)`` on all samples at once; on failure, name the first bad sample."""
    try:
        with np.errstate(divide="raise", invalid="raise", over="raise"):
            return fn(columns(points))
    except EVAL_ERRORS as exc:
        first = exc
        for row in points:
            try:
                with np.errstate(divide="raise", invalid="raise", over="raise"):
                    fn(columns(row[None, :]))
            except EVAL_ERRORS as inner:
                raise SampleEvaluationError(row, names, inner) from inner
        raise first


def rel_residual(diff, scale) -> float:
    """max |diff| / (|scale| + EPS) over a batch, as a float."""
    d = np.abs(np.asarray(diff))
    s = np.abs(np.asarray(scale))
    if d.size == 0:
        return 0.0
    return float(np.max(d / (s + EPS)))


def solve_small(A: Sequence[Sequence], b: Sequence) -> list:
    """Solve A x = b by Cramer's rule; entries may be arrays or jets (n <= 4)."""
    n = len(b)
    det = _det([list(r) for r in A])
    out = []
    for j in range(n):
        Mj = [[b[i] if c == j else A[i][c] for c in range(n)] for i in range(n)]
        out.append(_det(Mj) / det)
    return out


def max_abs(values) -> float:
    vals = [np.max(np.abs(np.asarray(sc.value_of(v)))) for v in values]
    return float(max(vals)) if vals else 0.0
