"""Second-order parameter-invariant mechanics on the chart (x, y, z) of T^2 M.

A density ``K(x, y, z)`` gives a parameterization-independent length of the
second-order lift ``(x, x', x'')`` of a curve exactly when it satisfies the
Zermelo conditions

    y^mu K_{y^mu} + 2 z^mu K_{z^mu} = K,      y^mu K_{z^mu} = 0,

equivalently ``K(x, lam y, lam^2 z + rho y) = lam K(x, y, z)`` for lam > 0.
Total derivatives along curves are realized by shifting Taylor jets of the
curve parameter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from . import exterior as ext
from . import lagexpr as lx
from . import scalarcalc as sc
from ._common import on_samples, rel_residual
from .exterior import DifferentialForm, QuadratureSpec
from .finsler import ConsistencyError, NoetherSpec, conventional_names
from .lagexpr import BinOp, CoordSignature, LagrangianExpr, Var
from .paths import Curve, as_jets, curve_derivatives
from .scalarcalc import Jet, SampleSpec

__all__ = [
    "KawaMechStructure",
    "check_zermelo",
    "lift2",
    "second_order_lift",
    "fk_form",
    "fk_length",
    "el2_residual",
    "Noether2Current",
    "noether2_current",
    "lift2_conventional",
    "theta_k_restrict",
    "prolonged_generator",
    "variation_identity",
]


@dataclass
class KawaMechStructure:
    """A density ``K`` over ``(x^0.., y^0.., z^0..)``; see :class:`finsler.FinslerStructure`."""

    n: int
    K: LagrangianExpr
    env: dict = field(default_factory=dict)
    box: Optional[tuple] = None
    exclusion: Optional[str] = None
    sig: Optional[CoordSignature] = None
    name: str = "kawamech"

    def __post_init__(self):
        if self.sig is None:
            self.sig = CoordSignature.mechanics(self.n, 2)
        if tuple(self.K.var_names) != self.sig.names:
            raise ValueError("density must be an expression over the structure's chart coordinates")
        if self.box is None:
            self.box = tuple((-2.0, 2.0) for _ in range(3 * self.n))
        self.f = self.K.bind(self.env)

    @classmethod
    def from_text(cls, text: str, n: int, env: Optional[Mapping] = None, labels=None, **kw):
        sig = CoordSignature.mechanics(n, 2, labels)
        env = dict(env or {})
        return cls(n, lx.parse(text, sig, constants=env.keys()), env, sig=sig, **kw)

    @property
    def names(self) -> tuple:
        return self.sig.names

    @property
    def y_idx(self) -> list:
        return list(range(self.n, 2 * self.n))

    @property
    def z_idx(self) -> list:
        return list(range(2 * self.n, 3 * self.n))

    def sample_spec(self, count: int = 200, seed: int = 0) -> SampleSpec:
        return SampleSpec(seed, count, self.box, self.exclusion, self.names)

    def __call__(self, values):
        return self.f(values)


# ---------------------------------------------------------------------------
# homogeneity


def check_zermelo(
    s: KawaMechStructure,
    spec: Optional[SampleSpec] = None,
    lambdas: Sequence[float] = (0.5, 2.0, np.pi),
    rhos: Sequence[float] = (-1.0, 0.0, 3.0),
) -> dict:
    """Residuals of the scaling law, both Zermelo identities and their derivatives.

    All residuals are relative to ``max(|K|, sum |y K_y| + sum |2 z K_z|)``.
    The derived family differentiates the two identities once more (by x,
    y and z) and is checked with the full Hessian of ``K``.
    """
    if any(not lam > 0 for lam in lambdas):
        raise ValueError("scaling factors must be positive")
    spec = spec or s.sample_spec()
    pts = sc.sample_points(spec)
    n = s.n
    X, Y, Z = list(range(n)), s.y_idx, s.z_idx

    def base(cols):
        val, g, H = sc.hessian(s.f, cols)
        return val, g, H

    K0, g, H = on_samples(base, pts, s.names)
    y = [pts[:, n + i] for i in range(n)]
    z = [pts[:, 2 * n + i] for i in range(n)]
    tA = [g[Y[i]] * y[i] for i in range(n)] + [2 * g[Z[i]] * z[i] for i in range(n)]
    tB = [g[Z[i]] * y[i] for i in range(n)]
    scale = np.maximum(np.abs(K0), sum(np.abs(t) for t in tA))
    res_A = rel_residual(sum(tA) - K0, scale)
    res_B = rel_residual(sum(tB), scale)

    res_scaling = 0.0
    for lam in lambdas:
        for rho in rhos:
            moved = pts.copy()
            moved[:, 2 * n :] = lam**2 * pts[:, 2 * n :] + rho * pts[:, n : 2 * n]
            moved[:, n : 2 * n] = lam * pts[:, n : 2 * n]
            Kl = on_samples(s.f, moved, s.names)
            res_scaling = max(res_scaling, rel_residual(Kl - lam * K0, lam * scale))

    # derived identities, one per free index rho
    derived = 0.0
    for r in range(n):
        ids = [
            (sum(H[X[r]][Y[m]] * y[m] + 2 * H[X[r]][Z[m]] * z[m] for m in range(n)) - g[X[r]],
             sum(np.abs(H[X[r]][Y[m]] * y[m]) + np.abs(2 * H[X[r]][Z[m]] * z[m]) for m in range(n)) + np.abs(g[X[r]])),
            (sum(H[Y[r]][Y[m]] * y[m] + 2 * H[Y[r]][Z[m]] * z[m] for m in range(n)),
             sum(np.abs(H[Y[r]][Y[m]] * y[m]) + np.abs(2 * H[Y[r]][Z[m]] * z[m]) for m in range(n))),
            (sum(H[Y[r]][Z[m]] * y[m] for m in range(n)) + g[Z[r]],
             sum(np.abs(H[Y[r]][Z[m]] * y[m]) for m in range(n)) + np.abs(g[Z[r]])),
            (sum(H[Z[r]][Z[m]] * y[m] for m in range(n)),
             sum(np.abs(H[Z[r]][Z[m]] * y[m]) for m in range(n)) + np.abs(g[Z[r]])),
        ]
        for diff, sc_ in ids:
            derived = max(derived, rel_residual(diff, np.maximum(sc_, scale)))
    return {
        "res_scaling": res_scaling,
        "res_A": res_A,
        "res_B": res_B,
        "res_derived": derived,
        "samples": int(pts.shape[0]),
    }


# ---------------------------------------------------------------------------
# lifts, forms, lengths


def lift2(c: Curve, t) -> list:
    """(x, dx/dt, d^2x/dt^2) at ``t`` as a flat list of 3n values."""
    d = curve_derivatives(c, t, 2)
    return d[0] + d[1] + d[2]


def second_order_lift(c: Curve) -> Callable:
    """The map t -> (x, x', x''), usable as a pullback map."""
    return lambda t: lift2(c, t[0])


def fk_form(s: KawaMechStructure) -> DifferentialForm:
    """K_{y^mu} dx^mu + 2 K_{z^mu} dy^mu on the 3n-dimensional chart."""
    n = s.n

    def ev(values):
        g = sc.gradient(s.f, values, s.y_idx + s.z_idx)
        out = {(mu,): g[mu] for mu in range(n)}
        out.update({(n + mu,): 2 * g[n + mu] for mu in range(n)})
        return out

    return DifferentialForm(3 * n, 1, evaluator=ev, names=s.names)


def _breaks(c):
    bp = getattr(c, "breakpoints", None)
    return None if bp is None else [bp]


def fk_length(s: KawaMechStructure, c: Curve, q: QuadratureSpec = QuadratureSpec(), cross_check: bool = False) -> float:
    """Integral of K along the second-order lift of ``c``."""
    direct = ext.quad_rect(lambda ts: s.f(lift2(c, ts[0])), [c.interval], q, _breaks(c))
    if cross_check:
        via = ext.integrate(fk_form(s), second_order_lift(c), [c.interval], q, breakpoints=_breaks(c))
        if abs(direct - via) > 2 * max(q.refine_rtol * max(abs(direct), abs(via)), q.refine_atol):
            raise ConsistencyError(f"length {direct!r} disagrees with the form integral {via!r}")
    return float(np.real_if_close(direct))


def _mixed(f: Callable, point, rows: Sequence[int], cols: Sequence[int]):
    out = []
    for r in rows:
        out.append(sc.gradient(sc.partial(f, r), point, list(cols)))
    return out


def el2_residual(s: KawaMechStructure, c: Curve, t) -> list:
    """R_mu = K_{x y} x' + 2 K_{x z} x'' - d/dt K_y + d^2/dt^2 K_z along the lift.

    The curve is expanded to fourth order in t; K's fibre gradient is composed
    with the second-order jets of (x, x', x'') and the total derivatives are
    read off by shifting.
    """
    n = s.n
    tj = Jet.variable(t, 0, 1, 4)
    X = as_jets(c.at(tj), tj)
    x = [j.truncate(2) for j in X]
    y = [j.shift(0).truncate(2) for j in X]
    z = [j.shift(0).shift(0) for j in X]
    vals = x + y + z
    g = sc.gradient(s.f, vals, s.y_idx + s.z_idx)
    dKy = [gj.shift(0).c[0] for gj in g[:n]]
    ddKz = [gj.shift(0).shift(0).c[0] for gj in g[n:]]
    point = [v.c[0] for v in vals]
    M = _mixed(s.f, point, range(n), s.y_idx + s.z_idx)
    yv, zv = point[n : 2 * n], point[2 * n :]
    return [
        sum(M[mu][r] * yv[r] + 2 * M[mu][n + r] * zv[r] for r in range(n)) - dKy[mu] + ddKz[mu]
        for mu in range(n)
    ]


# ---------------------------------------------------------------------------
# Noether


class Noether2Current:
    """f = u^mu K_{y^mu} + 2 (D u^mu) K_{z^mu} - D_3(u^mu K_{z^mu}) on the (x, y, z, w) chart.

    D u = (du/dx) y and D_3 g = g_x y + g_y z + g_z w are the total
    derivatives; along a curve they reduce to d/dt.
    """

    def __init__(self, s: KawaMechStructure, u: NoetherSpec):
        if len(u.generator) != s.n:
            raise ValueError(f"generator has {len(u.generator)} components, structure needs {s.n}")
        self.s = s
        self.u = u.functions(s.names[: s.n])

    def _uKz(self, vals3):
        n = self.s.n
        g = sc.gradient(self.s.f, vals3, self.s.z_idx)
        x = list(vals3[:n])
        return sum(self.u[m](x) * g[m] for m in range(n))

    def __call__(self, values):
        n = self.s.n
        vals3 = list(values[: 3 * n])
        x, y, z, w = (list(values[i * n : (i + 1) * n]) for i in range(4))
        g = sc.gradient(self.s.f, vals3, self.s.y_idx + self.s.z_idx)
        uu = [u(x) for u in self.u]
        Du = []
        for m in range(n):
            du = sc.gradient(self.u[m], x)
            Du.append(sum(du[k] * y[k] for k in range(n)))
        dg = sc.gradient(self._uKz, vals3)
        D3 = sum(dg[k] * y[k] + dg[n + k] * z[k] + dg[2 * n + k] * w[k] for k in range(n))
        return sum(uu[m] * g[m] + 2 * Du[m] * g[n + m] for m in range(n)) - D3

    def along(self, c: Curve, t):
        d = curve_derivatives(c, t, 3)
        return self(d[0] + d[1] + d[2] + d[3])


def noether2_current(s: KawaMechStructure, u: NoetherSpec) -> Noether2Current:
    return Noether2Current(s, u)


# ---------------------------------------------------------------------------
# conventional Lagrangians


def lift2_conventional(
    L: Union[LagrangianExpr, str], m: Optional[int] = None, env: Optional[Mapping] = None, **kw
) -> KawaMechStructure:
    """K = L(x^0, x^i, y^i/y^0, (z^i y^0 - z^0 y^i)/(y^0)^3) y^0 over (t, q, qdot, qddot)."""
    env = dict(env or {})
    if isinstance(L, str):
        if m is None:
            raise ValueError("give m when L is text")
        L = lx.parse(L, conventional_names(m, 2), constants=env.keys())
    names = L.var_names
    if m is None:
        m = (len(names) - 1) // 3
    if len(names) != 3 * m + 1:
        raise ValueError(f"L must depend on 1 + 3*{m} variables (t, q, qdot, qddot)")
    n = m + 1
    sig = CoordSignature.mechanics(n, 2)
    xs, ys, zs = sig.base_names, sig.block("y"), sig.block("z")
    y0 = Var(ys[0])
    mapping = {names[0]: Var(xs[0])}
    for i in range(1, m + 1):
        mapping[names[i]] = Var(xs[i])
        mapping[names[m + i]] = BinOp("/", Var(ys[i]), y0)
        num = BinOp("-", BinOp("*", Var(zs[i]), y0), BinOp("*", Var(zs[0]), Var(ys[i])))
        mapping[names[2 * m + i]] = BinOp("/", num, lx.Pow(y0, lx.Num(3.0)))
    ast = BinOp("*", lx.substitute(L.ast, mapping), y0)
    kw.setdefault("exclusion", "y0_nonzero")
    return KawaMechStructure(n, LagrangianExpr(ast, sig.names, L.kind), env, sig=sig, **kw)


def theta_k_restrict(s: KawaMechStructure) -> DifferentialForm:
    """The form K_y dx + 2 K_z dy restricted to y^0 = 1, z^0 = 0 on (t, q, qdot, qddot)."""
    n = s.n
    m = n - 1

    def ev(values):
        t, q = values[0], list(values[1 : 1 + m])
        qd, qdd = list(values[1 + m : 1 + 2 * m]), list(values[1 + 2 * m :])
        point = [t] + q + [1.0] + qd + [0.0] + qdd
        g = sc.gradient(s.f, point, s.y_idx + s.z_idx)
        out = {(mu,): g[mu] for mu in range(n)}
        out.update({(n + i,): 2 * g[n + 1 + i] for i in range(m)})
        return out

    return DifferentialForm(3 * m + 1, 1, evaluator=ev, names=conventional_names(m, 2))


# ---------------------------------------------------------------------------
# first variation


def prolonged_generator(xi: Sequence[Callable], n: int) -> Callable:
    """X = xi d/dx + (D xi) d/dy + (D^2 xi) d/dz on the (x, y, z) chart.

    D xi = xi_x y and D^2 xi = xi_xx (y, y) + xi_x z.
    """

    def X(values):
        x, y, z = list(values[:n]), list(values[n : 2 * n]), list(values[2 * n : 3 * n])
        comps, dy, dz = [], [], []
        for f in xi:
            _, g, H = sc.hessian(f, x)
            comps.append(f(x))
            dy.append(sum(g[a] * y[a] for a in range(n)))
            dz.append(
                sum(H[a][b] * y[a] * y[b] for a in range(n) for b in range(n)) + sum(g[a] * z[a] for a in range(n))
            )
        return comps + dy + dz

    return X


def variation_identity(
    s: KawaMechStructure,
    c: Curve,
    xi: Sequence[Callable],
    q: QuadratureSpec = QuadratureSpec(),
) -> tuple:
    """Both sides of the integrated first-variation formula for a boundary-vanishing xi.

    Returns ``(int over the lift of L_X K-form, int of xi . R dt)``; the Lie
    derivative comes from Cartan's formula applied to the Finsler-Kawaguchi
    form, and the right side from :func:`el2_residual`.  ``xi`` and its first
    derivative must vanish at the ends of the curve.
    """
    n = s.n
    form = ext.lie_derivative(fk_form(s), prolonged_generator(xi, n))
    lhs = ext.integrate(form, second_order_lift(c), [c.interval], q)

    def rhs_density(ts):
        t = ts[0]
        x = c.at(t)
        R = el2_residual(s, c, t)
        return sum(xi[m](x) * R[m] for m in range(n))

    rhs = ext.quad_rect(rhs_density, [c.interval], q)
    return lhs, rhs
