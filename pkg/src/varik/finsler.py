"""First-order parameter-invariant mechanics on a tangent-bundle chart.

A Finsler structure is a density ``F(x, y)`` on the chart ``(x^mu, y^mu)``
that is positively homogeneous of degree one in the velocities ``y``.  Its
integral along the tangent lift of a curve does not depend on the
parameterization, and the same holds for everything built from it here: the
Hilbert 1-form ``(dF/dy^mu) dx^mu``, the Euler-Lagrange residual, and Noether
currents.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from . import exterior as ext
from . import lagexpr as lx
from . import scalarcalc as sc
from ._common import ChartError, on_samples, rel_residual, solve_small
from .exterior import DifferentialForm, QuadratureSpec
from .lagexpr import BinOp, CoordSignature, LagrangianExpr, Var
from .paths import Curve, as_jets
from .scalarcalc import Jet, SampleSpec

__all__ = [
    "FinslerStructure",
    "NoetherSpec",
    "NoetherCurrent",
    "ConsistencyError",
    "check_homogeneity",
    "hilbert_form",
    "el_form",
    "el_form_correction",
    "tangent_lift",
    "finsler_length",
    "length_via_form",
    "el_residual",
    "noether_current",
    "lift_conventional",
    "conventional_names",
    "cartan_restrict",
    "chart_transition_test",
    "invert_map",
]


class ConsistencyError(RuntimeError):
    """Two independent computations of the same quantity disagree."""


@dataclass
class FinslerStructure:
    """A density ``F`` over the chart ``(x^0..x^{n-1}, y^0..y^{n-1})``.

    Attributes:
        n: base dimension.
        F: the density, an expression over ``sig.names``.
        env: values of named constants.
        box: sampling box per chart coordinate (admissible region).
        exclusion: sampling exclusion predicate, e.g. ``"y0_nonzero"``.
    """

    n: int
    F: LagrangianExpr
    env: dict = field(default_factory=dict)
    box: Optional[tuple] = None
    exclusion: Optional[str] = None
    sig: Optional[CoordSignature] = None
    name: str = "finsler"

    def __post_init__(self):
        if self.sig is None:
            self.sig = CoordSignature.mechanics(self.n)
        if tuple(self.F.var_names) != self.sig.names:
            raise ValueError("density must be an expression over the structure's chart coordinates")
        if self.box is None:
            self.box = tuple((-2.0, 2.0) for _ in range(2 * self.n))
        self.f = self.F.bind(self.env)

    @classmethod
    def from_text(
        cls,
        text: str,
        n: int,
        env: Optional[Mapping] = None,
        labels: Optional[Sequence[str]] = None,
        **kw,
    ) -> "FinslerStructure":
        sig = CoordSignature.mechanics(n, 1, labels)
        env = dict(env or {})
        return cls(n, lx.parse(text, sig, constants=env.keys()), env, sig=sig, **kw)

    @property
    def names(self) -> tuple:
        return self.sig.names

    @property
    def x_idx(self) -> list:
        return list(range(self.n))

    @property
    def y_idx(self) -> list:
        return list(range(self.n, 2 * self.n))

    def sample_spec(self, count: int = 200, seed: int = 0) -> SampleSpec:
        return SampleSpec(seed, count, self.box, self.exclusion, self.names)

    def __call__(self, values):
        return self.f(values)

    def dF_dy(self, values) -> list:
        return sc.gradient(self.f, values, self.y_idx)


# ---------------------------------------------------------------------------
# homogeneity


def check_homogeneity(
    s: FinslerStructure,
    spec: Optional[SampleSpec] = None,
    lambdas: Sequence[float] = (0.5, 2.0, np.pi),
    absolute: bool = False,
) -> dict:
    """Relative residuals of F(x, lam y) = lam F(x, y) and of the Euler relation.

    Residuals are measured against ``max(|F|, sum_mu |y^mu dF/dy^mu|)`` so that
    samples where ``F`` nearly cancels do not inflate them; without
    cancellation this is just ``|F|``.
    """
    if any(not lam > 0 for lam in lambdas):
        raise ValueError("scaling factors must be positive")
    spec = spec or s.sample_spec()
    pts = sc.sample_points(spec)
    n = s.n

    def base(cols):
        F0 = s.f(cols)
        g = sc.gradient(s.f, cols, s.y_idx)
        terms = [g[i] * cols[n + i] for i in range(n)]
        return F0, terms

    F0, terms = on_samples(base, pts, s.names)
    euler = sum(terms)
    scale = np.maximum(np.abs(F0), sum(np.abs(t) for t in terms))
    res_euler = rel_residual(euler - F0, scale)
    res_scaling = 0.0
    lams = list(lambdas) + ([-lam for lam in lambdas] if absolute else [])
    for lam in lams:
        scaled = pts.copy()
        scaled[:, n:] *= lam
        Fl = on_samples(s.f, scaled, s.names)
        expect = abs(lam) * F0
        res_scaling = max(res_scaling, rel_residual(Fl - expect, abs(lam) * scale))
    # fibre Hessian annihilates y: sum_nu F_{y^mu y^nu} y^nu = 0
    def hess(cols):
        _, _, H = sc.hessian(s.f, cols, s.y_idx)
        return [sum(H[i][j] * cols[n + j] for j in range(n)) for i in range(n)], [
            sum(np.abs(H[i][j] * cols[n + j]) for j in range(n)) for i in range(n)
        ]

    hv, hs = on_samples(hess, pts, s.names)
    res_hess = max(rel_residual(hv[i], np.maximum(hs[i], np.abs(F0))) for i in range(n))
    return {
        "max_rel_residual_scaling": res_scaling,
        "max_rel_residual_euler": res_euler,
        "max_rel_residual_fibre_hessian": res_hess,
        "samples": int(pts.shape[0]),
    }


# ---------------------------------------------------------------------------
# forms


def hilbert_form(s: FinslerStructure) -> DifferentialForm:
    """(dF/dy^mu) dx^mu on the 2n-dimensional chart."""

    def ev(values):
        g = sc.gradient(s.f, values, s.y_idx)
        return {(mu,): g[mu] for mu in range(s.n)}

    return DifferentialForm(2 * s.n, 1, evaluator=ev, names=s.names)


def el_form(s: FinslerStructure) -> DifferentialForm:
    """The Euler-Lagrange 2-form (F_{x^mu y^rho} dx^mu + d F_{y^rho}) ^ dx^rho.

    Built from one Hessian evaluation of ``F`` (independently of the nested
    differentiation used by :func:`exterior.exterior_derivative`).
    """
    n = s.n
    m = 2 * n

    def ev(values):
        _, _, H = sc.hessian(s.f, values)
        out = {}

        def add(i, j, v):
            sgn = ext.perm_sign((i, j))
            if sgn == 0:
                return
            key = (min(i, j), max(i, j))
            term = v if sgn > 0 else -v
            out[key] = out[key] + term if key in out else term

        for rho in range(n):
            for mu in range(n):
                add(mu, rho, H[mu][n + rho])  # F_{x^mu y^rho} dx^mu ^ dx^rho
            for c in range(m):
                add(c, rho, H[n + rho][c])  # d(F_{y^rho}) ^ dx^rho
        return out

    return DifferentialForm(m, 2, evaluator=ev, names=s.names)


def el_form_correction(s: FinslerStructure) -> DifferentialForm:
    """F_{x^mu y^nu} dx^mu ^ dx^nu, the gap between the EL form and d of the Hilbert form."""
    n = s.n

    def ev(values):
        _, _, H = sc.hessian(s.f, values)
        out = {}
        for mu in range(n):
            for nu in range(n):
                if mu == nu:
                    continue
                key = (min(mu, nu), max(mu, nu))
                v = H[mu][n + nu] if mu < nu else -H[mu][n + nu]
                out[key] = out[key] + v if key in out else v
        return out

    return DifferentialForm(2 * n, 2, evaluator=ev, names=s.names)


# ---------------------------------------------------------------------------
# lifts and integrals


def tangent_lift(c: Curve) -> Callable:
    """The map t -> (x(t), x'(t)), usable as a pullback map."""

    def lift(t: Sequence) -> list:
        x, J = ext.jacobian(lambda tt: c.at(tt[0]), t)
        return list(x) + [row[0] for row in J]

    return lift


def _lift_values(c: Curve, t):
    js = c.jets(t, 1)
    return [j.c[0] for j in js] + [j.c[1] for j in js]


def _breaks(c: Curve):
    bp = getattr(c, "breakpoints", None)
    return None if bp is None else [bp]


def finsler_length(
    s: FinslerStructure,
    c: Curve,
    q: QuadratureSpec = QuadratureSpec(),
    cross_check: bool = True,
) -> float:
    """Integral of F along the tangent lift of ``c``.

    With ``cross_check`` the Hilbert form is integrated too and the two must
    agree within twice the quadrature tolerance.
    """
    direct = ext.quad_rect(lambda ts: s.f(_lift_values(c, ts[0])), [c.interval], q, _breaks(c))
    if cross_check:
        via_form = length_via_form(s, c, q)
        if abs(direct - via_form) > 2 * max(q.refine_rtol * max(abs(direct), abs(via_form)), q.refine_atol):
            raise ConsistencyError(f"length {direct!r} disagrees with the Hilbert-form integral {via_form!r}")
    return float(np.real_if_close(direct))


def length_via_form(s: FinslerStructure, c: Curve, q: QuadratureSpec = QuadratureSpec()) -> float:
    return ext.integrate(hilbert_form(s), tangent_lift(c), [c.interval], q, breakpoints=_breaks(c))


def el_residual(s: FinslerStructure, c: Curve, t) -> list:
    """R_mu(t) = F_{x^mu y^rho} x'^rho - d/dt (F_{y^mu} along the lift).

    The time derivative comes from composing F's velocity gradient with the
    curve's second-order jet and shifting.
    """
    n = s.n
    tj = Jet.variable(t, 0, 1, 2)
    X = as_jets(c.at(tj), tj)
    vals = [j.truncate(1) for j in X] + [j.shift(0) for j in X]
    g = sc.gradient(s.f, vals, s.y_idx)
    dg = [gj.shift(0).c[0] if isinstance(gj, Jet) else 0.0 for gj in g]
    point = [v.c[0] for v in vals]
    mixed = _mixed_xy(s.f, point, n)
    ydot = point[n:]
    return [sum(mixed[mu][rho] * ydot[rho] for rho in range(n)) - dg[mu] for mu in range(n)]


def _mixed_xy(f: Callable, point, n: int):
    """Matrix F_{x^mu y^rho} at a plain (possibly batched) point."""
    out = []
    for mu in range(n):
        dfx = sc.partial(f, mu)
        out.append(sc.gradient(dfx, point, list(range(n, 2 * n))))
    return out


# ---------------------------------------------------------------------------
# Noether


@dataclass
class NoetherSpec:
    """A generator u^mu(x): expression strings over the base coordinates, or callables."""

    generator: Sequence
    env: dict = field(default_factory=dict)

    def functions(self, base_names: Sequence[str]) -> list:
        out = []
        for u in self.generator:
            if isinstance(u, str):
                out.append(lx.parse(u, list(base_names), constants=self.env.keys()).bind(self.env))
            elif isinstance(u, LagrangianExpr):
                out.append(u.bind(self.env))
            elif callable(u):
                out.append(u)
            else:
                out.append(lambda x, _c=float(u): _c)
        return out


class NoetherCurrent:
    """f(x, y) = u^rho(x) dF/dy^rho for a generator u."""

    def __init__(self, s: FinslerStructure, u: NoetherSpec):
        if len(u.generator) != s.n:
            raise ValueError(f"generator has {len(u.generator)} components, structure needs {s.n}")
        self.s = s
        self.u = u.functions(s.names[: s.n])

    def __call__(self, values):
        n = self.s.n
        g = sc.gradient(self.s.f, values, self.s.y_idx)
        x = list(values[:n])
        return sum(g[r] * self.u[r](x) for r in range(n))

    def prolonged_field(self) -> Callable:
        """Y = u^mu d/dx^mu + (du^mu/dx^nu) y^nu d/dy^mu."""
        n = self.s.n

        def Y(values):
            x = list(values[:n])
            comps = [u(x) for u in self.u]
            lifted = []
            for mu in range(n):
                du = sc.gradient(self.u[mu], x)
                lifted.append(sum(du[nu] * values[n + nu] for nu in range(n)))
            return comps + lifted

        return Y

    def symmetry_test(self, spec: Optional[SampleSpec] = None) -> float:
        """max |coefficient of L_Y (Hilbert form)| over samples; ~0 for a symmetry."""
        spec = spec or self.s.sample_spec(50)
        pts = sc.sample_points(spec)
        form = ext.lie_derivative(hilbert_form(self.s), self.prolonged_field())
        coeffs = on_samples(form, pts, self.s.names)
        vals = [np.max(np.abs(v)) for v in coeffs.values()]
        return float(max(vals)) if vals else 0.0


def noether_current(s: FinslerStructure, u: NoetherSpec) -> NoetherCurrent:
    return NoetherCurrent(s, u)


# ---------------------------------------------------------------------------
# conventional Lagrangians


def conventional_names(m: int, order: int = 1) -> list:
    """Coordinate names of a time-dependent Lagrangian: t, q1..qm, qd1..qdm (, qdd1..qddm)."""
    names = ["t"] + [f"q{i}" for i in range(1, m + 1)] + [f"qd{i}" for i in range(1, m + 1)]
    if order >= 2:
        names += [f"qdd{i}" for i in range(1, m + 1)]
    return names


def lift_conventional(
    L: Union[LagrangianExpr, str],
    m: Optional[int] = None,
    env: Optional[Mapping] = None,
    **kw,
) -> FinslerStructure:
    """Homogeneous density F(x, y) = L(x^0, x^i, y^i / y^0) y^0 on an (m+1)-dimensional chart.

    ``L`` is an expression over ``(t, q1..qm, qd1..qdm)`` (or text in those names).
    """
    env = dict(env or {})
    if isinstance(L, str):
        if m is None:
            raise ValueError("give m when L is text")
        L = lx.parse(L, conventional_names(m), constants=env.keys())
    names = L.var_names
    if m is None:
        m = (len(names) - 1) // 2
    if len(names) != 2 * m + 1:
        raise ValueError(f"L must depend on 1 + 2*{m} variables (t, q, qdot)")
    n = m + 1
    sig = CoordSignature.mechanics(n)
    xs, ys = sig.base_names, sig.block("y")
    mapping = {names[0]: Var(xs[0])}
    for i in range(1, m + 1):
        mapping[names[i]] = Var(xs[i])
        mapping[names[m + i]] = BinOp("/", Var(ys[i]), Var(ys[0]))
    ast = BinOp("*", lx.substitute(L.ast, mapping), Var(ys[0]))
    kw.setdefault("exclusion", "y0_nonzero")
    return FinslerStructure(n, LagrangianExpr(ast, sig.names, L.kind), env, sig=sig, **kw)


def cartan_restrict(s: FinslerStructure) -> DifferentialForm:
    """The Hilbert form restricted to y^0 = 1, on the chart (t, q^i, qdot^i).

    Coefficients: dt gets F_{y^0}(t, q, 1, qdot); dq^i gets F_{y^i}(t, q, 1, qdot).
    """
    n = s.n
    m = n - 1

    def ev(values):
        point = list(values[: n]) + [1.0] + list(values[n:])
        g = sc.gradient(s.f, point, s.y_idx)
        return {(mu,): g[mu] for mu in range(n)}

    return DifferentialForm(2 * m + 1, 1, evaluator=ev, names=conventional_names(m))


# ---------------------------------------------------------------------------
# chart transitions


def invert_map(phi: Callable, target: Sequence, guess: Sequence, iters: int = 60, tol: float = 1e-14) -> list:
    """Solve phi(x) = target by Newton's method; works with jet targets.

    Newton converges on jet coefficients as well as values, so the result is
    the Taylor expansion of the inverse map composed with ``target``.
    """
    n = len(target)
    like = next((v for v in target if isinstance(v, Jet)), None)
    x = as_jets(guess, like) if like is not None else [np.asarray(g, float) for g in guess]
    for _ in range(iters):
        val, J = ext.jacobian(phi, x)
        r = [val[i] - target[i] for i in range(n)]
        dx = solve_small(J, r)
        x = [x[i] - dx[i] for i in range(n)]
        size = max(np.max(np.abs(d.c if isinstance(d, Jet) else np.asarray(d))) for d in dx)
        scale = max(np.max(np.abs(v.c if isinstance(v, Jet) else np.asarray(v))) for v in x) + 1.0
        if size <= tol * scale:
            break
    return x


def chart_transition_test(
    s: FinslerStructure,
    phi: Sequence,
    spec: Optional[SampleSpec] = None,
    env: Optional[Mapping] = None,
    times: Sequence[float] = (0.0, 0.05, 0.1),
) -> dict:
    """Compare Hilbert-form densities in two charts along shared test curves.

    ``phi`` gives the new coordinates as functions of the old base
    coordinates.  The structure in the new chart is built by substitution,
    F~(x~, y~) = F(phi^{-1}(x~), (D phi)^{-1} y~), with the inverse evaluated
    by Newton iteration (also on jets), and its Hilbert form is computed
    from scratch by differentiation in the new coordinates.  Test curves
    are x(t) = x0 + t y0 + t^2 w through each sample.
    """
    n = s.n
    env = dict(env or {})
    fns = NoetherSpec(list(phi), env).functions(s.names[:n])

    def phi_map(x):
        return [f(list(x)) for f in fns]

    spec = spec or s.sample_spec(50)
    pts = sc.sample_points(spec)
    x0, y0 = pts[:, :n].T, pts[:, n:].T
    w = 0.1 * np.cos(np.arange(1, n + 1))[:, None]
    _, J0 = ext.jacobian(phi_map, list(x0))
    det = ext._det([list(r) for r in J0])
    if np.any(np.abs(det) < 1e-12):
        bad = int(np.argmin(np.abs(det)))
        raise ChartError(f"transition map has a singular Jacobian at sample {pts[bad]}")

    worst = 0.0
    worst_rel = 0.0
    for tau in times:
        def curve(t):
            return [x0[i] + t * y0[i] + t * t * w[i] for i in range(n)]

        # original chart
        tj = Jet.variable(np.full(pts.shape[0], tau), 0, 1, 1)
        X = as_jets(curve(tj), tj)
        lift = [j.c[0] for j in X] + [j.c[1] for j in X]
        g = sc.gradient(s.f, lift, s.y_idx)
        d1 = sum(g[i] * lift[n + i] for i in range(n))

        # new chart
        Xb = as_jets(phi_map(X), tj)
        liftb = [j.c[0] for j in Xb] + [j.c[1] for j in Xb]
        guess = [j.c[0] for j in X]

        def Fbar(vals, guess=guess):
            xb, yb = vals[:n], vals[n:]
            x = invert_map(phi_map, xb, guess)
            _, J = ext.jacobian(phi_map, x)
            y = solve_small(J, yb)
            return s.f(list(x) + list(y))

        gb = sc.gradient(Fbar, liftb, list(range(n, 2 * n)))
        d2 = sum(gb[i] * liftb[n + i] for i in range(n))
        diff = np.abs(d1 - d2)
        worst = max(worst, float(np.max(diff)))
        worst_rel = max(worst_rel, rel_residual(diff, d1))
    return {"max_discrepancy": worst, "max_rel_discrepancy": worst_rel, "samples": int(pts.shape[0])}
