"""Parameterized curves and k-patches that can be evaluated on jets.

Everything downstream (lifts, residuals, pullbacks) differentiates a curve by
evaluating it on a Taylor jet of the parameter, so a curve here is anything
with ``evaluate(t)`` that accepts floats, numpy arrays and :class:`Jet` s.
"""

from __future__ import annotations

import math
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import scalarcalc as sc
from .lagexpr import LagrangianExpr, parse
from .scalarcalc import Jet

__all__ = ["Curve", "Patch", "PiecewiseCurve", "TabulatedCurve", "as_jets", "curve_derivatives"]


def as_jets(values: Sequence, like: Jet) -> list:
    """Promote plain values to constant jets shaped like ``like``."""
    out = []
    for v in values:
        if isinstance(v, Jet):
            out.append(v)
        else:
            v = np.broadcast_to(np.asarray(v, dtype=np.result_type(np.asarray(v).dtype, float)), like.batch_shape)
            out.append(Jet.constant(v, like.p, like.d))
    return out


class Patch:
    """A map from a closed k-rectangle into an n-dimensional chart.

    Args:
        components: n callables taking the list of k parameters, or
            expression strings over ``params``.
        rect: k pairs ``(lo, hi)``.
        params: parameter names used by string components.
        env: constants for string components.
    """

    def __init__(
        self,
        components: Sequence,
        rect: Sequence,
        params: Sequence[str] = ("t1", "t2"),
        env: Optional[Mapping] = None,
        kind="real",
    ):
        self.rect = tuple((float(lo), float(hi)) for lo, hi in rect)
        self.k = len(self.rect)
        self.params = tuple(params)[: self.k] if len(params) >= self.k else tuple(params)
        self.env = dict(env or {})
        fns = []
        self.exprs = []
        for c in components:
            if isinstance(c, str):
                e = parse(c, list(self.params), kind, constants=self.env.keys())
                self.exprs.append(e)
                fns.append(e.bind(self.env))
            elif isinstance(c, LagrangianExpr):
                self.exprs.append(c)
                fns.append(c.bind(self.env))
            elif callable(c):
                fns.append(c)
            else:
                const = c
                fns.append(lambda t, _c=const: _c)
        self._fns = fns
        self.n = len(fns)

    def evaluate(self, t: Sequence) -> list:
        if len(t) != self.k:
            raise ValueError(f"patch takes {self.k} parameters, got {len(t)}")
        return [f(list(t)) for f in self._fns]

    __call__ = evaluate

    def jets(self, t: Sequence, order: int) -> list:
        """Components as jets in the k parameters around the point ``t``."""
        seeds = sc.jet_lift(t, np.eye(self.k), order) if order <= sc.MAX_ORDER else None
        if seeds is None:
            raise ValueError(f"order {order} exceeds {sc.MAX_ORDER}")
        return as_jets(self.evaluate(seeds), seeds[0])

    def reparameterize(self, phi: Callable, rect: Sequence) -> "Patch":
        """The patch s -> self(phi(s)) over ``rect``; ``phi`` maps k parameters to k parameters."""
        base = self

        def comp(i):
            return lambda s: base.evaluate(list(phi(list(s))))[i]

        return Patch([comp(i) for i in range(self.n)], rect)


class Curve(Patch):
    """A one-parameter patch; components may be expression strings in ``t``."""

    def __init__(self, components: Sequence, interval: Sequence, param: str = "t", env=None, kind="real"):
        super().__init__(
            [self._wrap(c) for c in components],
            [tuple(interval)],
            (param,),
            env,
            kind,
        )
        self.interval = self.rect[0]

    @staticmethod
    def _wrap(c):
        if isinstance(c, str) or isinstance(c, LagrangianExpr) or not callable(c):
            return c
        return lambda t, _f=c: _f(t[0])

    def at(self, t) -> list:
        """Components at a scalar, array or jet parameter value."""
        return [f([t]) for f in self._fns]

    def jets(self, t, order: int) -> list:
        tj = Jet.variable(t, 0, 1, order)
        return as_jets(self.at(tj), tj)

    def derivatives(self, t, order: int) -> np.ndarray:
        """Array (order + 1, n, ...) of d^j x / dt^j at ``t``."""
        js = self.jets(t, order)
        return np.array([[j.c[r] * math.factorial(r) for j in js] for r in range(order + 1)])

    def reparameterize(self, phi: Callable, interval: Sequence) -> "Curve":
        """The curve s -> self(phi(s)); ``phi`` must be jet-evaluable."""
        base = self
        return Curve([(lambda s, i=i: base.at(phi(s))[i]) for i in range(self.n)], interval)


class TabulatedCurve(Curve):
    """Piecewise quintic Hermite interpolant through (x, x', x'') samples.

    The interpolant is C^2 and jet-evaluable; derivatives of order <= 2 at
    the knots are reproduced exactly.  Knots are exposed as ``breakpoints``
    so quadrature rules can avoid straddling them.
    """

    def __init__(self, t: np.ndarray, x: np.ndarray, dx: np.ndarray, ddx: np.ndarray):
        t = np.asarray(t, float)
        x, dx, ddx = (np.asarray(a, float) for a in (x, dx, ddx))
        if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
            raise ValueError("knots must be strictly increasing with at least two entries")
        self.t, self.x, self.dx, self.ddx = t, x, dx, ddx
        h = np.diff(t)[:, None]
        a0 = x[:-1]
        a1 = h * dx[:-1]
        a2 = 0.5 * h**2 * ddx[:-1]
        P = x[1:] - (a0 + a1 + a2)
        Q = h * dx[1:] - (a1 + 2 * a2)
        R = h**2 * ddx[1:] - 2 * a2
        a3 = 10 * P - 4 * Q + 0.5 * R
        a4 = -15 * P + 7 * Q - R
        a5 = 6 * P - 3 * Q + 0.5 * R
        self._coef = np.stack([a0, a1, a2, a3, a4, a5])  # (6, intervals, n)
        self._h = h[:, 0]
        n = x.shape[1]
        self.rect = ((float(t[0]), float(t[-1])),)
        self.interval = self.rect[0]
        self.k = 1
        self.n = n
        self.params = ("t",)
        self.env = {}
        self.exprs = []
        self._fns = [lambda tt, i=i: self._component(tt[0], i) for i in range(n)]

    @property
    def breakpoints(self) -> np.ndarray:
        return self.t

    def knot_states(self) -> tuple:
        """(x, x') at the knots, each shaped (knots, n)."""
        return self.x, self.dx

    def _locate(self, t):
        tv = np.real(sc.value_of(t))
        idx = np.clip(np.searchsorted(self.t, tv, side="right") - 1, 0, len(self._h) - 1)
        return idx

    def _component(self, t, i: int):
        idx = self._locate(t)
        u = (t - self.t[idx]) / self._h[idx]
        c = self._coef[:, idx, i]
        acc = c[5]
        for r in range(4, -1, -1):
            acc = acc * u + c[r]
        return acc

    def at(self, t) -> list:
        return [self._component(t, i) for i in range(self.n)]


class PiecewiseCurve(Curve):
    """Tabulated pieces joined end to end under one continuous parameter.

    Piece ``i`` covers ``[offsets[i], offsets[i] + length_i]`` and is evaluated
    at its own parameter shifted by ``starts[i] - offsets[i]``.  The
    parameterization may have a derivative jump at a junction; the image is
    continuous.
    """

    def __init__(self, pieces: Sequence[TabulatedCurve]):
        if not pieces:
            raise ValueError("need at least one piece")
        self.pieces = list(pieces)
        self.n = self.pieces[0].n
        offsets = [0.0]
        for pc in self.pieces[:-1]:
            lo, hi = pc.interval
            offsets.append(offsets[-1] + (hi - lo))
        self.offsets = np.array(offsets) + self.pieces[0].interval[0]
        self.shifts = np.array([pc.interval[0] for pc in self.pieces]) - self.offsets
        last = self.pieces[-1].interval
        self.rect = ((float(self.offsets[0]), float(self.offsets[-1] + last[1] - last[0])),)
        self.interval = self.rect[0]
        self.k = 1
        self.params = ("t",)
        self.env = {}
        self.exprs = []
        self._fns = [lambda tt, i=i: self.at(tt[0])[i] for i in range(self.n)]

    @property
    def breakpoints(self) -> np.ndarray:
        pts = [pc.t - sh for pc, sh in zip(self.pieces, self.shifts)]
        return np.unique(np.concatenate(pts))

    def _piece_index(self, t):
        tv = np.real(sc.value_of(t))
        return np.clip(np.searchsorted(self.offsets, tv, side="right") - 1, 0, len(self.pieces) - 1)

    def at(self, t) -> list:
        idx = self._piece_index(t)
        if np.ndim(idx) == 0:
            i = int(idx)
            return self.pieces[i].at(t + self.shifts[i])
        out = None
        for i, pc in enumerate(self.pieces):
            mask = idx == i
            if not np.any(mask):
                continue
            vals = pc.at(t + self.shifts[i])
            w = mask.astype(float)
            part = [v * w for v in vals]
            out = part if out is None else [a + b for a, b in zip(out, part)]
        return out

    def knot_states(self) -> tuple:
        """(x, x') at every knot of every piece, each shaped (knots, n); derivatives are per piece."""
        return (
            np.concatenate([pc.x for pc in self.pieces]),
            np.concatenate([pc.dx for pc in self.pieces]),
        )


def curve_derivatives(c: Curve, t, r: int) -> list:
    """[x, x', ..., x^(r)] at ``t``; each entry lists the n components.

    ``t`` may itself be a jet (e.g. a seeded quadrature parameter), in which
    case the derivatives come back as jets of the same shape.
    """
    p, d = sc._base_signature([t])
    ext_t = sc.seeded([t], [[1.0]], r)[0]
    vals = c.at(ext_t)
    return [[sc._extract(v, p, d, 1, (j,)) for v in vals] for j in range(r + 1)]
