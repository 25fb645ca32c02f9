"""Task runners behind ``varik run``.

Each runner takes a validated :class:`Problem` and returns a
:class:`TaskResult`: named metrics plus optional table rows (a residual
grid or a solved curve).  Pass/fail is decided afterwards from the
problem's thresholds, all of which are upper bounds on metrics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kawafield as kf
from . import kawafield2 as kf2
from . import kawamech as km
from . import lagexpr as lx
from . import finsler as fs
from .extremal import BvpProblem, GaugeSpec, cycloid_distance, cycloid_travel_time, solve_bvp
from .paths import curve_derivatives
from .problemfile import Problem, ProblemError

__all__ = ["TaskResult", "run_task", "RUNNERS"]


@dataclass
class TaskResult:
    metrics: dict
    header: Optional[list] = None
    rows: Optional[np.ndarray] = None
    notes: dict = field(default_factory=dict)


def _residual_metrics(d: dict) -> dict:
    """Scalar entries of a residual report, plus their maximum as ``max_residual``."""
    out = {k: v for k, v in d.items() if isinstance(v, (int, float, np.floating, np.integer))}
    res = [float(v) for k, v in out.items() if k != "samples"]
    out["max_residual"] = max(res) if res else 0.0
    return out


def _spec(prob: Problem, s):
    count, seed = prob.sampling
    return s.sample_spec(count, seed)


def _lambdas(prob: Problem) -> tuple:
    return tuple(prob.task.get("lambdas", (0.5, 2.0, math.pi)))


def _homogeneity(prob: Problem, s) -> dict:
    spec, lams = _spec(prob, s), _lambdas(prob)
    kind = prob.kind
    if kind == "finsler":
        return fs.check_homogeneity(s, spec, lams)
    if kind == "kawamech":
        return km.check_zermelo(s, spec, lams)
    if kind == "areal":
        return kf.check_homogeneity_field(s, spec, lams)
    return kf2.check_homogeneity_field2(s, spec, lams, seed=prob.sampling[1])


def check_homogeneity(prob: Problem) -> TaskResult:
    return TaskResult(_residual_metrics(_homogeneity(prob, prob.structure())))


def lift_conventional(prob: Problem) -> TaskResult:
    s = prob.structure()
    density = s.F if prob.kind == "finsler" else s.K
    m = _residual_metrics(_homogeneity(prob, s))
    return TaskResult(m, notes={"expression": lx.to_text(density.ast), "coordinates": list(s.names)})


def _measure(prob: Problem, s) -> Callable:
    q, cc = prob.quadrature(), prob.cross_check
    return {
        "finsler": lambda g: fs.finsler_length(s, g, q, cc),
        "kawamech": lambda g: km.fk_length(s, g, q, cc),
        "areal": lambda g: kf.kawaguchi_area(s, g, q, cc),
        "areal2": lambda g: kf2.kawaguchi2_area(s, g, q, cc),
    }[prob.kind]


def _with_expected(prob: Problem, name: str, value) -> dict:
    value = complex(value) if np.iscomplexobj(value) else float(value)
    m = {name: value if isinstance(value, float) else abs(value)}
    if "expected" in prob.task:
        exp = float(prob.task["expected"])
        m["abs_error"] = abs(value - exp)
        m["rel_error"] = abs(value - exp) / max(abs(exp), 1e-300)
    return m


def length(prob: Problem) -> TaskResult:
    s = prob.structure()
    return TaskResult(_with_expected(prob, "length", _measure(prob, s)(prob.curve())))


def area(prob: Problem) -> TaskResult:
    s = prob.structure()
    return TaskResult(_with_expected(prob, "area", _measure(prob, s)(prob.patch())))


def _sample_count(prob: Problem, default: int) -> int:
    return int(prob.task.get("samples", prob.output.get("grid", default)))


def _columns(name: str, vals: list, complex_: bool):
    """Column names and arrays; complex values split into real and imaginary parts."""
    header, cols = [], []
    for i, v in enumerate(vals):
        v = np.asarray(v)
        if complex_:
            header += [f"{name}{i}_re", f"{name}{i}_im"]
            cols += [np.real(v), np.imag(v)]
        else:
            header.append(f"{name}{i}")
            cols.append(np.real(v))
    return header, cols


def el_residual(prob: Problem) -> TaskResult:
    s = prob.structure()
    if prob.kind in ("finsler", "kawamech"):
        c = prob.curve()
        ts = np.linspace(*c.interval, _sample_count(prob, 100))
        fn = fs.el_residual if prob.kind == "finsler" else km.el2_residual
        R = [np.broadcast_to(np.asarray(r), ts.shape) for r in fn(s, c, ts)]
        grid = [ts]
        pnames = ["t"]
    else:
        p = prob.patch()
        g = _sample_count(prob, 20)
        axes = [np.linspace(lo, hi, g) for lo, hi in p.rect]
        mesh = [a.ravel() for a in np.meshgrid(*axes, indexing="ij")]
        R = [np.broadcast_to(np.asarray(r), mesh[0].shape) for r in kf.el_field_residual(s, p, mesh)]
        grid = mesh
        pnames = list(p.params)
    cplx = any(np.iscomplexobj(r) for r in R)
    comp = [float(np.max(np.abs(r))) for r in R]
    hr, cols = _columns("R", R, cplx)
    metrics = {"max_residual": max(comp), "points": int(grid[0].size)}
    for i, v in enumerate(comp):
        metrics[f"max_abs_R{i}"] = v
    return TaskResult(metrics, pnames + hr, np.column_stack(grid + cols))


def _param_fn(exprs, names, env: Optional[dict] = None) -> Callable:
    env = dict(env or {})
    fns = [lx.parse(e, list(names), constants=env.keys()).bind(env) for e in exprs]
    return lambda s: [f(list(s)) for f in fns]


def invariance_test(prob: Problem) -> TaskResult:
    s = prob.structure()
    measure = _measure(prob, s)
    exprs = prob.task["reparam"]
    if prob.kind in ("finsler", "kawamech"):
        g = prob.curve()
        if len(exprs) != 1:
            raise ProblemError(["task: reparam for a curve takes one expression in s"])
        dom = prob.task.get("domain", [list(g.interval)])[0]
        phi = _param_fn(exprs, ["s"])
        h = g.reparameterize(lambda v: phi([v])[0], dom)
    else:
        g = prob.patch()
        k = g.k
        if len(exprs) != k:
            raise ProblemError([f"task: reparam for a {k}-patch takes {k} expressions in s1..s{k}"])
        dom = prob.task.get("domain", [list(r) for r in g.rect])
        h = g.reparameterize(_param_fn(exprs, [f"s{a}" for a in range(1, k + 1)]), dom)
    a, b = measure(g), measure(h)
    diff = abs(a - b)
    return TaskResult(
        {
            "original": float(np.real(a)),
            "reparameterized": float(np.real(b)),
            "abs_diff": float(diff),
            "rel_diff": float(diff / max(abs(a), abs(b), 1e-300)),
        }
    )


def _generator(prob: Problem) -> fs.NoetherSpec:
    env = dict(prob.data["structure"].get("constants", {}))
    return fs.NoetherSpec(list(prob.task["generator"]), env)


def noether(prob: Problem) -> TaskResult:
    s = prob.structure()
    u = _generator(prob)
    if prob.kind == "areal":
        p = prob.patch()
        rect = prob.task.get("rect", [list(r) for r in p.rect])
        val = kf.noether_conservation(s, u, p, rect, prob.quadrature())
        return TaskResult({"conservation_integral": float(abs(val))})
    c = prob.curve()
    ts = np.linspace(*c.interval, _sample_count(prob, 100))
    if prob.kind == "finsler":
        d = curve_derivatives(c, ts, 1)
        f = fs.noether_current(s, u)(d[0] + d[1])
    else:
        f = km.noether2_current(s, u).along(c, ts)
    f = np.broadcast_to(np.asarray(f), ts.shape)
    drift = np.abs(f - f[0])
    return TaskResult(
        {"max_drift": float(np.max(drift)), "initial": float(np.real(f[0]))},
        ["t", "current"],
        np.column_stack([ts, np.real(f)]),
    )


def _schedule(task: dict):
    g = task["gauge"]
    base = {"admissible_check": task["admissible_check"]} if "admissible_check" in task else {}
    if isinstance(g, int):
        return GaugeSpec(g, **base)
    out = []
    for e in g:
        kw = dict(base)
        for key in ("power", "direction", "switch_slope", "admissible_check"):
            if key in e:
                kw[key] = e[key]
        out.append(GaugeSpec(e["index"], **kw))
    return out


def solve(prob: Problem) -> TaskResult:
    s = prob.structure()
    task = prob.task
    solver = prob.section("numerics", "solver")
    kw = {k: solver[k] for k in ("rk4_steps", "shoot_tol", "max_iters", "verify_samples", "verify_tol") if k in solver}
    if "slope_guess" in task:
        kw["slope_guess"] = task["slope_guess"]
    bvp = BvpProblem(s, _schedule(task), task["start"], task["end"], **kw)
    res = solve_bvp(bvp)
    curve = res.curve
    metrics = dict(res.diagnostics)
    metrics["length"] = fs.finsler_length(s, curve, prob.quadrature(), cross_check=False)
    if task.get("compare", "none") == "cycloid":
        y_pi = float(task.get("y_pi", 2.0))
        g = float(prob.data["structure"].get("constants", {}).get("g", 1.0))
        metrics["cycloid_distance"] = cycloid_distance(curve, y_pi)
        a = 0.5 * y_pi
        theta0 = math.acos(min(max(1.0 - bvp.start[1] / a, -1.0), 1.0))
        theta1 = math.acos(min(max(1.0 - bvp.end[1] / a, -1.0), 1.0))
        exact = cycloid_travel_time(y_pi, g, theta0, theta1)
        metrics["cycloid_time_rel_error"] = abs(metrics["length"] - exact) / exact
    ts = np.asarray(curve.breakpoints)
    X = [np.asarray(x) for x in curve.at(ts)]
    header = ["t"] + [f"x{i}" for i in range(s.n)]
    return TaskResult(metrics, header, np.column_stack([ts] + X))


def chart_test(prob: Problem) -> TaskResult:
    s = prob.structure()
    spec = _spec(prob, s)
    exprs = prob.task["map"]
    if len(exprs) != s.n:
        raise ProblemError([f"task: map needs {s.n} expressions, got {len(exprs)}"])
    env = dict(prob.data["structure"].get("constants", {}))
    if prob.kind == "finsler":
        return TaskResult(dict(fs.chart_transition_test(s, exprs, spec, env)))
    psi = _param_fn(exprs, s.names[: s.n], env)
    return TaskResult(dict(kf2.transition_discrepancy(s, psi, spec, prob.sampling[1])))


RUNNERS = {
    "check-homogeneity": check_homogeneity,
    "length": length,
    "area": area,
    "el-residual": el_residual,
    "invariance-test": invariance_test,
    "noether": noether,
    "solve-bvp": solve,
    "lift-conventional": lift_conventional,
    "chart-test": chart_test,
}


def run_task(prob: Problem) -> TaskResult:
    return RUNNERS[prob.task_name](prob)
