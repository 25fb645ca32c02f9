"""Boundary-value problems for first-order extremals by gauge fixing and shooting.

The EL system of a homogeneous F is degenerate along the velocity, so one
base coordinate is promoted to the curve parameter (the gauge).  The rows of
the EL system for the remaining coordinates then form a regular second-order
ODE, integrated here with classical RK4 and shot onto the far endpoint.

A problem may use a schedule of gauges.  Each segment may also run its gauge
coordinate along the profile ``x^g = direction * u**power`` instead of
``x^g = u``; this resolves extremals that leave a singular point (for the
brachistochrone ``y = u**2`` keeps the cusp smooth).  A segment hands over to
the next one once ``|dx^next / dx^g|`` reaches its ``switch_slope``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import scalarcalc as sc
from ._common import EVAL_ERRORS
from .exterior import NonConvergent
from .finsler import FinslerStructure, el_residual
from .paths import Curve, PiecewiseCurve, TabulatedCurve

__all__ = [
    "SingularHessian",
    "GaugeSpec",
    "BvpProblem",
    "BvpResult",
    "reduced_acceleration",
    "integrate_ivp",
    "solve_bvp",
    "conserved_along",
    "BRACHISTOCHRONE_F",
    "brachistochrone_structure",
    "brachistochrone_problem",
    "cycloid",
    "cycloid_curve",
    "cycloid_distance",
    "cycloid_travel_time",
    "hausdorff_distance",
]


class SingularHessian(ArithmeticError):
    """The fibre Hessian restricted to the non-gauge velocities is (nearly) singular."""


@dataclass(frozen=True)
class GaugeSpec:
    """Which coordinate parameterizes a segment, and how.

    Attributes:
        gauge_index: base coordinate used as the parameter.
        admissible_check: smallest accepted ratio of the restricted Hessian's
            smallest singular value to the full fibre Hessian's Frobenius norm.
        power: profile exponent; the coordinate runs as ``direction * u**power``.
        direction: +1 or -1; 0 picks the sign from the segment's endpoints.
        switch_slope: hand over to the next gauge once ``|dx^next/dx^g|`` reaches this.
    """

    gauge_index: int
    admissible_check: float = 1e-10
    power: int = 1
    direction: int = 0
    switch_slope: float = 1.0

    def __post_init__(self):
        if self.gauge_index < 0:
            raise ValueError("gauge_index must be non-negative")
        if self.power < 1:
            raise ValueError("power must be a positive integer")
        if self.direction not in (-1, 0, 1):
            raise ValueError("direction must be -1, 0 or 1")
        if not self.admissible_check > 0:
            raise ValueError("admissible_check must be positive")


@dataclass
class BvpProblem:
    structure: FinslerStructure
    gauge: Union[GaugeSpec, Sequence[GaugeSpec]]
    start: Sequence[float]
    end: Sequence[float]
    rk4_steps: int = 2000
    shoot_tol: float = 1e-10
    max_iters: int = 60
    slope_guess: Optional[Sequence[float]] = None
    verify_samples: int = 100
    verify_tol: float = 1e-6

    def __post_init__(self):
        n = self.structure.n
        self.start = [float(v) for v in self.start]
        self.end = [float(v) for v in self.end]
        if len(self.start) != n or len(self.end) != n:
            raise ValueError(f"start and end need {n} coordinates")
        sched = (self.gauge,) if isinstance(self.gauge, GaugeSpec) else tuple(self.gauge)
        if not sched:
            raise ValueError("empty gauge schedule")
        for gs in sched:
            if gs.gauge_index >= n:
                raise ValueError(f"gauge index {gs.gauge_index} out of range for n={n}")
        self.schedule = sched
        first, last = sched[0].gauge_index, sched[-1].gauge_index
        if self.start[last] == self.end[last]:
            raise ValueError("start and end must differ in the gauge coordinate")
        if self.start[first] == self.end[first]:
            raise ValueError("start and end must differ in the first gauge coordinate")
        if self.rk4_steps < 1 or self.max_iters < 1:
            raise ValueError("rk4_steps and max_iters must be positive")

    def direction(self, i: int) -> int:
        gs = self.schedule[i]
        if gs.direction:
            return gs.direction
        g = gs.gauge_index
        return 1 if self.end[g] > self.start[g] else -1


@dataclass
class BvpResult:
    curve: Curve
    iterations: int
    endpoint_miss: float
    initial_slope: np.ndarray
    el_residual_max: float
    verified: bool
    segments: list = field(default_factory=list)

    @property
    def diagnostics(self) -> dict:
        return {
            "iterations": self.iterations,
            "endpoint_miss": self.endpoint_miss,
            "el_residual_max": self.el_residual_max,
            "verified": self.verified,
            "segments": len(self.segments),
        }


# ---------------------------------------------------------------------------
# reduced dynamics


def _accel(s: FinslerStructure, g: int, x, xd, gauge_accel, threshold: float):
    """Full acceleration vector, a mask of states failing the conditioning check, and the check ratio.

    The ratio compares the smallest singular value of the restricted Hessian
    with the Frobenius norm of the full fibre Hessian.
    """
    n = s.n
    point = list(x) + list(xd)
    _, _, H = sc.hessian(s.f, point)
    J = [i for i in range(n) if i != g]
    b = []
    for i in J:
        bi = sum(H[i][n + r] * xd[r] for r in range(n)) - sum(H[v][n + i] * xd[v] for v in range(n))
        b.append(bi - H[n + i][n + g] * gauge_accel)
    with np.errstate(all="ignore"):
        scale = np.sqrt(sum(np.abs(H[n + i][n + j]) ** 2 for i in range(n) for j in range(n)))
        acc = [None] * n
        if len(J) == 1:
            i = J[0]
            G = H[n + i][n + i]
            ratio = np.abs(G) / scale
            bad = ~(ratio >= threshold) | ~np.isfinite(b[0])
            acc[i] = np.where(bad, np.nan, b[0] / np.where(bad, 1.0, G))
        else:
            batch = np.broadcast_shapes(*[np.shape(v) for v in b])
            G = np.moveaxis(np.array([[np.broadcast_to(H[n + i][n + j], batch) for j in J] for i in J]), (0, 1), (-2, -1))
            bv = np.moveaxis(np.array([np.broadcast_to(v, batch) for v in b]), 0, -1)
            ratio = np.linalg.svd(G, compute_uv=False)[..., -1] / scale
            bad = ~(ratio >= threshold) | ~np.all(np.isfinite(bv), axis=-1)
            Gs = np.where(bad[..., None, None], np.eye(len(J)), G)
            sol = np.linalg.solve(Gs, bv[..., None])[..., 0]
            for r, i in enumerate(J):
                acc[i] = np.where(bad, np.nan, sol[..., r])
    acc[g] = np.broadcast_to(np.asarray(gauge_accel, float), np.shape(ratio)).copy()
    return acc, bad, ratio


def reduced_acceleration(s: FinslerStructure, gauge: GaugeSpec, x: Sequence, xd: Sequence, gauge_accel=0.0) -> list:
    """Accelerations of all coordinates with the gauge coordinate's fixed.

    Solves ``F_{y^i y^j} xdd^j = F_{x^i y^r} xd^r - F_{x^v y^i} xd^v - F_{y^i y^g} xdd^g``
    over non-gauge ``i, j``; ``xd[g]`` is normally 1 and ``xdd^g = gauge_accel``.

    Raises:
        SingularHessian: the restricted Hessian fails the conditioning check.
    """
    g = gauge.gauge_index
    acc, bad, ratio = _accel(s, g, x, xd, gauge_accel, gauge.admissible_check)
    if np.any(bad):
        worst = float(np.nanmin(ratio)) if np.any(np.isfinite(ratio)) else float("nan")
        raise SingularHessian(
            f"restricted fibre Hessian for gauge x{g} is singular or undefined (conditioning ratio {worst:.3e})"
        )
    return [a if np.ndim(a) else float(a) for a in acc]


# ---------------------------------------------------------------------------
# marching


class _Segment:
    def __init__(self, gauge: GaugeSpec, direction: int):
        self.g = gauge.gauge_index
        self.p = gauge.power
        self.d = direction
        self.gauge = gauge

    def coord(self, u):
        return self.d * u**self.p

    def vel(self, u):
        return self.d * self.p * u ** (self.p - 1)

    def acc(self, u):
        return self.d * self.p * (self.p - 1) * u ** (self.p - 2) if self.p > 1 else np.zeros_like(u)

    def param(self, xg):
        with np.errstate(invalid="ignore"):
            return (self.d * xg) ** (1.0 / self.p) if self.p > 1 else self.d * xg


def _rhs(s, seg: _Segment, u, X, V):
    """d/du of (X, V) where X, V are full lists with the gauge entries implied by u."""
    X = list(X)
    V = list(V)
    X[seg.g] = seg.coord(u)
    V[seg.g] = seg.vel(u)
    ga = seg.acc(u)
    try:
        acc, _, _ = _accel(s, seg.g, X, V, ga, seg.gauge.admissible_check)
    except EVAL_ERRORS:
        # one bad candidate must not sink the batch; evaluate one by one
        B = np.shape(X[0])[0]
        acc = [np.full(B, np.nan) for _ in X]
        for b in range(B):
            pick = lambda v: np.asarray(v)[b : b + 1] if np.ndim(v) else v
            try:
                ab, _, _ = _accel(s, seg.g, [pick(x) for x in X], [pick(v) for v in V], pick(ga), seg.gauge.admissible_check)
            except EVAL_ERRORS:
                continue
            for i in range(len(X)):
                acc[i][b] = np.asarray(ab[i]).reshape(-1)[0]
    return V, acc


def _rk4_step(s, seg, u, X, V, h, k1=None):
    n = len(X)
    a1 = k1 if k1 is not None else _rhs(s, seg, u, X, V)
    X2 = [X[i] + 0.5 * h * a1[0][i] for i in range(n)]
    V2 = [V[i] + 0.5 * h * a1[1][i] for i in range(n)]
    a2 = _rhs(s, seg, u + 0.5 * h, X2, V2)
    X3 = [X[i] + 0.5 * h * a2[0][i] for i in range(n)]
    V3 = [V[i] + 0.5 * h * a2[1][i] for i in range(n)]
    a3 = _rhs(s, seg, u + 0.5 * h, X3, V3)
    X4 = [X[i] + h * a3[0][i] for i in range(n)]
    V4 = [V[i] + h * a3[1][i] for i in range(n)]
    a4 = _rhs(s, seg, u + h, X4, V4)
    Xn = [X[i] + h / 6.0 * (a1[0][i] + 2 * a2[0][i] + 2 * a3[0][i] + a4[0][i]) for i in range(n)]
    Vn = [V[i] + h / 6.0 * (a1[1][i] + 2 * a2[1][i] + 2 * a3[1][i] + a4[1][i]) for i in range(n)]
    un = u + h
    Xn[seg.g] = seg.coord(un)
    Vn[seg.g] = seg.vel(un)
    return un, Xn, Vn


_GRADE = 0.004
_COARSE = 4


def _steps(seg: _Segment, u0, u1, count: int, graded: bool, grade: float = _GRADE) -> list:
    """Step sizes from u0 to u1: ``count`` uniform steps, preceded by a geometric run when graded.

    With a power profile the reduced system has a 1/u coefficient, so steps
    near a small starting u must stay a small fraction of u.
    """
    h = (u1 - u0) / count
    if not graded or seg.p == 1 or np.ndim(u0) or not u0 > 0:
        return [h] * count
    out = []
    u = u0
    while grade * u < h and u < u1:
        out.append(grade * u)
        u += grade * u
    rest = max(int(math.ceil((u1 - u) / h)), 1)
    return out + [(u1 - u) / rest] * rest


def _march(prob: BvpProblem, v0: np.ndarray, record: bool = False, coarse: bool = False):
    """Integrate a batch of initial non-gauge velocities (shape (B, m)) through the schedule.

    Returns the endpoint miss (B, m), NaN where a trajectory failed, and, if
    ``record``, a list of per-segment knot tables for the first trajectory.
    A ``coarse`` march uses fewer, larger steps; it is meant for sign scans.
    """
    s = prob.structure
    n = s.n
    B = v0.shape[0]
    segs = [_Segment(gs, prob.direction(i)) for i, gs in enumerate(prob.schedule)]
    seg = segs[0]
    J = [i for i in range(n) if i != seg.g]
    X = [np.full(B, prob.start[i]) for i in range(n)]
    u = np.full(B, seg.param(prob.start[seg.g]))
    V = [None] * n
    for r, i in enumerate(J):
        V[i] = v0[:, r].astype(float).copy()
    V[seg.g] = seg.vel(u)
    tables = []
    alive = np.ones(B, bool)
    count = max(prob.rk4_steps // _COARSE, 16) if coarse else prob.rk4_steps
    grade = _GRADE * _COARSE if coarse else _GRADE
    with np.errstate(all="ignore"):
        for si, seg in enumerate(segs):
            final = si == len(segs) - 1
            rows = []
            if final:
                wend = seg.param(prob.end[seg.g])
                hs = _steps(seg, u[0] if si == 0 else u, wend, count, si == 0, grade)
                alive &= hs[0] > 0
                k1 = _rhs(s, seg, u, X, V)
                for h in hs:
                    if record:
                        rows.append((u.copy(), [x.copy() for x in X], [v.copy() for v in V], [a.copy() for a in k1[1]]))
                    u, X, V = _rk4_step(s, seg, u, X, V, h, k1)
                    k1 = _rhs(s, seg, u, X, V)
                    if not record and not np.any(alive & np.all([np.isfinite(w) for w in X + V], axis=0)):
                        break
                if record:
                    rows.append((u.copy(), [x.copy() for x in X], [v.copy() for v in V], [a.copy() for a in k1[1]]))
            else:
                nxt = segs[si + 1]
                ulim = seg.param(prob.end[seg.g])
                hs = _steps(seg, u[0] if si == 0 else u, ulim, count, si == 0, grade)
                alive &= hs[0] > 0
                switched = np.zeros(B, bool)
                k1 = _rhs(s, seg, u, X, V)
                # each trajectory stops stepping once it has switched
                for h in hs:
                    if record:
                        rows.append((u.copy(), [x.copy() for x in X], [v.copy() for v in V], [a.copy() for a in k1[1]]))
                    un, Xn, Vn = _rk4_step(s, seg, u, X, V, h, k1)
                    keep = ~switched
                    u = np.where(keep, un, u)
                    X = [np.where(keep, a, b) for a, b in zip(Xn, X)]
                    V = [np.where(keep, a, b) for a, b in zip(Vn, V)]
                    k1 = _rhs(s, seg, u, X, V)
                    ratio = np.abs(V[nxt.g]) / np.abs(V[seg.g])
                    switched |= ratio >= seg.gauge.switch_slope
                    alive &= np.isfinite(u) & np.all([np.isfinite(v) for v in V], axis=0)
                    if record and switched[0]:
                        rows.append((u.copy(), [x.copy() for x in X], [v.copy() for v in V], [a.copy() for a in k1[1]]))
                        break
                    if np.all(switched | ~alive):
                        break
                alive &= switched
                # change of parameter to the next gauge
                w = nxt.param(X[nxt.g])
                dw_du = V[nxt.g] / nxt.vel(w)
                V = [v / dw_du for v in V]
                u = w
                V[nxt.g] = nxt.vel(u)
            if record:
                tables.append(rows)
        miss = np.stack([X[i] - prob.end[i] for i in range(n) if i != segs[-1].g], axis=-1)
    miss[~alive] = np.nan
    miss[~np.all(np.isfinite(miss), axis=-1)] = np.nan
    return (miss, tables) if record else miss


def _table_curve(rows, seg_index: int) -> TabulatedCurve:
    u = np.array([r[0][0] for r in rows])
    X = np.array([[x[0] for x in r[1]] for r in rows])
    V = np.array([[v[0] for v in r[2]] for r in rows])
    A = np.array([[a[0] for a in r[3]] for r in rows])
    return TabulatedCurve(u, X, V, A)


def integrate_ivp(
    s: FinslerStructure, gauge: GaugeSpec, start: Sequence[float], velocity: Sequence[float], end_value: float, steps: int
) -> TabulatedCurve:
    """RK4 from ``start`` with non-gauge velocities ``velocity`` until the gauge coordinate reaches ``end_value``."""
    end = list(start)
    end[gauge.gauge_index] = end_value
    prob = BvpProblem(s, gauge, start, end, rk4_steps=steps)
    miss, tables = _march(prob, np.asarray(velocity, float)[None, :], record=True)
    if not np.all(np.isfinite(miss)):
        raise NonConvergent("trajectory left the admissible region")
    return _table_curve(tables[0], 0)


# ---------------------------------------------------------------------------
# shooting


def _chord_guess(prob: BvpProblem) -> np.ndarray:
    seg = _Segment(prob.schedule[0], prob.direction(0))
    g = seg.g
    u0 = seg.param(prob.start[g])
    span = prob.end[g] - prob.start[g]
    dg = seg.vel(u0)
    return np.array([(prob.end[i] - prob.start[i]) / span * dg for i in range(prob.structure.n) if i != g])


def _norm(miss: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        return np.where(np.all(np.isfinite(miss), axis=-1), np.max(np.abs(miss), axis=-1), np.inf)


def _with_jacobian(prob: BvpProblem, points: np.ndarray):
    """Misses at ``points`` (P, m) and their finite-difference Jacobians, from one batched march."""
    P, m = points.shape
    steps = 1e-6 * np.where(points != 0, np.abs(points), 1.0)
    cands = np.repeat(points[:, None, :], m + 1, axis=1)
    cands[:, 1:, :] += steps[:, :, None] * np.eye(m)[None]
    G = _march(prob, cands.reshape(-1, m)).reshape(P, m + 1, m)
    J = np.swapaxes(G[:, 1:, :] - G[:, :1, :], 1, 2) / steps[:, None, :]
    return G[:, 0, :], J


def _newton(prob: BvpProblem, v: np.ndarray, budget: int):
    """Damped Newton with finite-difference Jacobians.

    Each iteration is a single march: every line-search trial carries its
    own Jacobian stencil, so the accepted trial needs no second pass.
    """
    it = 0
    G, J = _with_jacobian(prob, v[None, :])
    G, J = G[0], J[0]
    while it < budget:
        g0 = _norm(G[None, :])[0]
        if g0 <= prob.shoot_tol:
            return v, G, it, True
        if not np.all(np.isfinite(G)) or not np.all(np.isfinite(J)):
            return v, G, it, False
        try:
            delta = -np.linalg.solve(J, G)
        except np.linalg.LinAlgError:
            return v, G, it, False
        lams = 0.5 ** np.arange(8)
        trial = v[None, :] + lams[:, None] * delta[None, :]
        Gt, Jt = _with_jacobian(prob, trial)
        ok = np.nonzero(_norm(Gt) < g0)[0]
        it += 1
        if ok.size == 0:
            return v, G, it, False
        k = ok[0]
        v, G, J = trial[k], Gt[k], Jt[k]
    return v, G, it, _norm(G[None, :])[0] <= prob.shoot_tol


_HANDOVER = 1e-4


def _bracket_1d(prob: BvpProblem, guess: float, budget: int):
    """Scan slopes geometrically, then multisect a bracket of the endpoint miss.

    Failed trajectories count as the opposite sign of their valid neighbour.
    When a valid scan point has failures on both sides, a finite-difference
    derivative there decides which side holds the root.  Returns once the
    miss is below ``_HANDOVER`` so Newton can finish.
    """
    sign = 1.0 if guess >= 0 else -1.0
    mag = abs(guess) if guess != 0 else 1.0
    grid = np.sort(np.concatenate([[0.0], sign * mag * 10.0 ** (np.arange(-56, 57) / 4)]))
    Gs = _march(prob, grid[:, None], coarse=True)[:, 0]
    valid = np.isfinite(Gs)
    if not np.any(valid):
        raise NonConvergent("no admissible trajectory found while scanning initial slopes")
    it = 1
    lo = None
    for i in range(len(grid) - 1):
        if valid[i] and valid[i + 1] and np.sign(Gs[i]) != np.sign(Gs[i + 1]):
            lo = i
            break
    if lo is None:
        j = int(np.argmin(np.where(valid, np.abs(Gs), np.inf)))
        step = 1e-6 * (abs(grid[j]) if grid[j] != 0 else 1.0)
        gp = _march(prob, np.array([[grid[j] + step]]), coarse=True)[0, 0]
        it += 1
        slope = (gp - Gs[j]) / step
        if not np.isfinite(slope) or slope == 0:
            return np.array([grid[j]]), np.array([Gs[j]]), it
        lo = j if -Gs[j] / slope > 0 else j - 1
        if lo < 0 or lo + 1 >= len(grid):
            return np.array([grid[j]]), np.array([Gs[j]]), it
    a, b = grid[lo], grid[lo + 1]
    ga, gb = Gs[lo], Gs[lo + 1]
    ref = np.sign(ga) if np.isfinite(ga) else -np.sign(gb)

    def signed(vals):
        out = np.sign(vals)
        out[~np.isfinite(vals)] = -ref
        return out

    best_v, best_g = (a, ga) if np.isfinite(ga) and (not np.isfinite(gb) or abs(ga) <= abs(gb)) else (b, gb)
    while it < budget and not abs(best_g) <= _HANDOVER:
        it += 1
        if a > 0 and b > 0 or a < 0 and b < 0:
            pts = np.geomspace(a, b, 18)[1:-1]
        else:
            pts = np.linspace(a, b, 18)[1:-1]
        Gp = _march(prob, pts[:, None], coarse=True)[:, 0]
        fin = np.isfinite(Gp)
        if np.any(fin):
            j = int(np.argmin(np.where(fin, np.abs(Gp), np.inf)))
            if not abs(Gp[j]) >= abs(best_g):
                best_v, best_g = pts[j], Gp[j]
        xs = np.concatenate([[a], pts, [b]])
        sg = np.concatenate([[ref], signed(Gp), [-ref]])
        k = np.nonzero(sg[:-1] != sg[1:])[0]
        if k.size == 0:
            break
        k = int(k[0])
        a, b = xs[k], xs[k + 1]
        if abs(b - a) <= 1e-15 * max(abs(a), abs(b)):
            break
    return np.array([best_v]), np.array([best_g]), it


def solve_bvp(prob: BvpProblem) -> BvpResult:
    """Shoot on the initial non-gauge velocities until the far endpoint is hit.

    Raises:
        NonConvergent: the shooting iteration did not reach ``shoot_tol``.
        SingularHessian: the gauge is degenerate at the start point.
    """
    s = prob.structure
    n = s.n
    g0 = prob.schedule[0].gauge_index
    seg0 = _Segment(prob.schedule[0], prob.direction(0))
    x0 = list(prob.start)
    xd0 = [1.0] * n
    xd0[g0] = seg0.vel(seg0.param(prob.start[g0]))
    guess = np.asarray(prob.slope_guess, float) if prob.slope_guess is not None else _chord_guess(prob)
    for r, i in enumerate([i for i in range(n) if i != g0]):
        xd0[i] = guess[r]
    reduced_acceleration(s, prob.schedule[0], x0, xd0, seg0.acc(seg0.param(prob.start[g0])))

    v, G, it, ok = _newton(prob, guess.copy(), prob.max_iters)
    if not ok and guess.size == 1:
        v, G, it2 = _bracket_1d(prob, float(guess[0]), prob.max_iters - it)
        it += it2
        if np.all(np.isfinite(G)) and _norm(G[None, :])[0] > prob.shoot_tol:
            v, G, it3, ok = _newton(prob, v, max(prob.max_iters - it, 1))
            it += it3
    miss = float(_norm(G[None, :])[0])
    if not miss <= prob.shoot_tol:
        raise NonConvergent(f"shooting stopped after {it} iterations with endpoint miss {miss:.3e}")

    _, tables = _march(prob, v[None, :], record=True)
    pieces = [_table_curve(rows, i) for i, rows in enumerate(tables)]
    curve = pieces[0] if len(pieces) == 1 else PiecewiseCurve(pieces)
    lo, hi = curve.interval
    ts = np.linspace(lo, hi, prob.verify_samples)
    with np.errstate(all="ignore"):
        R = el_residual(s, curve, ts)
    el_max = float(np.max(np.abs(np.array([np.asarray(r) for r in R]))))
    verified = el_max <= prob.verify_tol
    if not verified:
        warnings.warn(f"solved curve has EL residual {el_max:.3e} above {prob.verify_tol:.1e}", RuntimeWarning)
    return BvpResult(curve, it, miss, v, el_max, verified, pieces)


def conserved_along(result: Union[BvpResult, Curve], f: Callable) -> dict:
    """Drift of ``f(x, x')`` over the knots of a solved curve.

    ``f`` must be invariant under rescaling x' (as Noether currents of a
    homogeneous F are), because pieces of a scheduled solution use
    different parameters.
    """
    curve = result.curve if isinstance(result, BvpResult) else result
    X, V = curve.knot_states()
    vals = np.asarray(f([X[:, i] for i in range(X.shape[1])] + [V[:, i] for i in range(V.shape[1])]))
    vals = np.broadcast_to(vals, (X.shape[0],))
    drift = np.abs(vals - vals[0])
    return {"max_drift": float(np.max(drift)), "initial": float(np.real(vals[0])), "knots": int(X.shape[0])}


# ---------------------------------------------------------------------------
# brachistochrone

BRACHISTOCHRONE_F = "sqrt((y0^2 + y1^2)/(2*g*x1))"


def brachistochrone_structure(g: float = 1.0) -> FinslerStructure:
    """Travel time density for a bead falling along +x1 from rest at x1 = 0."""
    box = ((-2.0, 2.0), (0.05, 3.0), (-2.0, 2.0), (-2.0, 2.0))
    return FinslerStructure.from_text(BRACHISTOCHRONE_F, 2, {"g": g}, box=box, exclusion="y0_nonzero", name="brachistochrone")


def cycloid(theta, y_pi: float = 2.0):
    a = 0.5 * y_pi
    return a * (theta - np.sin(theta)), a * (1.0 - np.cos(theta))


def cycloid_curve(theta0: float, theta1: float, y_pi: float = 2.0) -> Curve:
    a = 0.5 * y_pi
    return Curve(["a*(th - sin(th))", "a*(1 - cos(th))"], (theta0, theta1), param="th", env={"a": a})


def brachistochrone_problem(
    y_pi: float = 2.0, g: float = 1.0, delta: float = 1e-4, rk4_steps: int = 500, **kw
) -> BvpProblem:
    """From the cycloid point at angle ``delta`` to the bottom (pi y_pi / 2, y_pi).

    The first segment runs x1 = u**2 so the curve is smooth at the near-cusp
    start; it hands over to the horizontal coordinate at 45 degrees.
    """
    start = cycloid(delta, y_pi)
    end = (math.pi * y_pi / 2.0, y_pi)
    sched = [GaugeSpec(1, power=2, direction=1), GaugeSpec(0, direction=1)]
    return BvpProblem(brachistochrone_structure(g), sched, start, end, rk4_steps=rk4_steps, **kw)


def _dense_points(curve: Curve, per_knot: int = 4) -> np.ndarray:
    bp = np.asarray(getattr(curve, "breakpoints", np.linspace(*curve.interval, 201)))
    ts = np.unique(np.concatenate([np.linspace(a, b, per_knot, endpoint=False) for a, b in zip(bp[:-1], bp[1:])] + [bp[-1:]]))
    return np.stack([np.asarray(v) for v in curve.at(ts)], axis=-1)


def cycloid_distance(curve_or_points, y_pi: float = 2.0) -> float:
    """Largest distance from the curve (or an (N, 2) array of points) to the cycloid."""
    P = curve_or_points if isinstance(curve_or_points, np.ndarray) else _dense_points(curve_or_points)
    a = 0.5 * y_pi
    px, py = P[:, 0], P[:, 1]
    th = np.arccos(np.clip(1.0 - py / a, -1.0, 1.0))
    for _ in range(30):
        cx, cy = cycloid(th, y_pi)
        dx, dy = a * (1 - np.cos(th)), a * np.sin(th)
        ddx, ddy = a * np.sin(th), a * np.cos(th)
        grad = (cx - px) * dx + (cy - py) * dy
        hess = dx * dx + dy * dy + (cx - px) * ddx + (cy - py) * ddy
        step = np.where(hess > 0, grad / np.where(hess > 0, hess, 1.0), 0.0)
        th = np.clip(th - step, 0.0, 2 * math.pi)
    cx, cy = cycloid(th, y_pi)
    return float(np.max(np.hypot(cx - px, cy - py)))


def cycloid_travel_time(y_pi: float = 2.0, g: float = 1.0, theta0: float = 0.0, theta1: float = math.pi) -> float:
    """Closed form: the time density is constant sqrt(a/g) in the rolling angle."""
    return (theta1 - theta0) * math.sqrt(0.5 * y_pi / g)


def _to_polyline(P: np.ndarray, Q: np.ndarray, tree) -> np.ndarray:
    """Distance from each row of P to the polyline through the rows of Q."""
    _, idx = tree.query(P)
    best = np.full(len(P), np.inf)
    for off in (-1, 0):
        i = np.clip(idx + off, 0, len(Q) - 2)
        a, b = Q[i], Q[i + 1]
        ab = b - a
        w = np.clip(np.sum((P - a) * ab, axis=1) / np.maximum(np.sum(ab * ab, axis=1), 1e-300), 0.0, 1.0)
        best = np.minimum(best, np.linalg.norm(P - a - w[:, None] * ab, axis=1))
    return best


def hausdorff_distance(P: np.ndarray, Q: np.ndarray) -> float:
    """Symmetric Hausdorff distance between the polylines through the rows of P and of Q."""
    from scipy.spatial import cKDTree

    P = np.asarray(P, float)
    Q = np.asarray(Q, float)
    d1 = _to_polyline(P, Q, cKDTree(Q))
    d2 = _to_polyline(Q, P, cKDTree(P))
    return float(max(d1.max(), d2.max()))
