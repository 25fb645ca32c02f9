"""First-order k-dimensional field theory on the multivector chart (x^mu, y^I).

A k-areal density ``K(x, y)`` lives on coordinates ``y^I`` indexed by ordered
k-multi-indices ``I = (i1 < ... < ik)``; along a k-patch these become the
k x k minors of the patch Jacobian (the multi-tangent lift).  ``K`` must be
positively 1-homogeneous in ``y`` for the k-area to be parameterization
invariant.

All sums over multi-indices are over ordered tuples; the factorial weights
that appear in unordered index notation are absorbed at construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from . import exterior as ext
from . import lagexpr as lx
from . import scalarcalc as sc
from ._common import on_samples, rel_residual
from .exterior import DifferentialForm, QuadratureSpec, minor_determinant, ordered_indices, perm_sign
from .finsler import ConsistencyError, NoetherSpec
from .lagexpr import BinOp, CoordSignature, LagrangianExpr, Neg, Var
from .paths import Patch
from .scalarcalc import Jet, ScalarKind, SampleSpec

__all__ = [
    "ArealStructure",
    "lift_field",
    "multi_tangent_lift",
    "check_homogeneity_field",
    "kawaguchi_k_form",
    "kawaguchi_area",
    "el_field_forms",
    "el_field_residual",
    "el_field_residual_direct",
    "el_form_field",
    "el_form_field_correction",
    "noether_field_current",
    "noether_conservation",
    "field_names",
    "lift_field_conventional",
    "DEBROGLIE_K",
    "DEBROGLIE_L",
    "debroglie",
    "plane_wave",
]


@dataclass
class ArealStructure:
    """A k-areal density over ``(x^1..x^n, y^I)``.

    Attributes:
        n, k: base dimension and patch dimension.
        K: the density over ``sig.names``.
        gauge: the multi-index whose coordinate must stay away from zero
            (default ``(0, ..., k-1)``); it sets the default sampling exclusion.
    """

    n: int
    k: int
    K: LagrangianExpr
    env: dict = field(default_factory=dict)
    box: Optional[tuple] = None
    exclusion: Optional[str] = None
    sig: Optional[CoordSignature] = None
    gauge: Optional[tuple] = None
    name: str = "areal"

    def __post_init__(self):
        if self.sig is None:
            self.sig = CoordSignature.areal(self.n, self.k)
        if tuple(self.K.var_names) != self.sig.names:
            raise ValueError("density must be an expression over the structure's chart coordinates")
        if self.gauge is None:
            self.gauge = tuple(range(self.k))
        self.gauge = tuple(self.gauge)
        if self.box is None:
            self.box = tuple((-2.0, 2.0) for _ in range(len(self.sig.names)))
        if self.exclusion is None:
            self.exclusion = f"{self.sig.names[self.y_index(self.gauge)]}_nonzero"
        self.f = self.K.bind(self.env)

    @classmethod
    def from_text(cls, text: str, n: int, k: int, env: Optional[Mapping] = None, kind="real", labels=None, **kw):
        sig = CoordSignature.areal(n, k, labels)
        env = dict(env or {})
        return cls(n, k, lx.parse(text, sig, kind, constants=env.keys()), env, sig=sig, **kw)

    @property
    def kind(self) -> ScalarKind:
        return self.K.kind

    @property
    def names(self) -> tuple:
        return self.sig.names

    @property
    def multi(self) -> tuple:
        return ordered_indices(self.n, self.k)

    @property
    def m(self) -> int:
        return self.n + len(self.multi)

    def y_index(self, I: Sequence[int]) -> int:
        """Chart position of y^I for an ordered multi-index."""
        return self.n + ext.rank(tuple(I), self.n)

    @property
    def y_idx(self) -> list:
        return list(range(self.n, self.m))

    def sample_spec(self, count: int = 200, seed: int = 0) -> SampleSpec:
        return SampleSpec(seed, count, self.box, self.exclusion, self.names)

    def __call__(self, values):
        return self.f(values)


# ---------------------------------------------------------------------------
# lifts


def lift_field(p: Patch, t: Sequence) -> list:
    """(x, all ordered k x k minors of dx/dt) at the parameter point ``t``."""
    x, J = ext.jacobian(p.evaluate, list(t))
    return list(x) + [minor_determinant(J, I) for I in ordered_indices(p.n, p.k)]


def multi_tangent_lift(p: Patch) -> Callable:
    return lambda t: lift_field(p, t)


# ---------------------------------------------------------------------------
# homogeneity


def check_homogeneity_field(
    s: ArealStructure,
    spec: Optional[SampleSpec] = None,
    lambdas: Sequence[float] = (0.5, 2.0, np.pi),
) -> dict:
    """Scaling residual and the ordered Euler relation sum_I y^I K_{y^I} = K."""
    if any(not lam > 0 for lam in lambdas):
        raise ValueError("scaling factors must be positive")
    spec = spec or s.sample_spec()
    pts = sc.sample_points(spec)
    n = s.n

    def base(cols):
        K0 = s.f(cols)
        g = sc.gradient(s.f, cols, s.y_idx)
        return K0, [g[i] * cols[n + i] for i in range(len(g))]

    K0, terms = on_samples(base, pts, s.names)
    scale = np.maximum(np.abs(K0), sum(np.abs(t) for t in terms))
    res_euler = rel_residual(sum(terms) - K0, scale)
    res_scaling = 0.0
    for lam in lambdas:
        moved = pts.copy()
        moved[:, n:] *= lam
        Kl = on_samples(s.f, moved, s.names)
        res_scaling = max(res_scaling, rel_residual(Kl - lam * K0, lam * scale))
    return {"max_rel_residual_scaling": res_scaling, "max_rel_residual_euler": res_euler, "samples": int(pts.shape[0])}


# ---------------------------------------------------------------------------
# forms


def kawaguchi_k_form(s: ArealStructure) -> DifferentialForm:
    """sum over ordered I of K_{y^I} dx^I."""
    multi = s.multi

    def ev(values):
        g = sc.gradient(s.f, values, s.y_idx)
        return {I: g[r] for r, I in enumerate(multi)}

    return DifferentialForm(s.m, s.k, evaluator=ev, names=s.names)


def _breaks(p):
    return getattr(p, "breakpoints", None)


def kawaguchi_area(s: ArealStructure, p: Patch, q: QuadratureSpec = QuadratureSpec(), cross_check: bool = False):
    """Integral of K over the multi-tangent lift of the patch."""
    direct = ext.quad_rect(lambda ts: s.f(lift_field(p, ts)), p.rect, q, _breaks(p))
    if cross_check:
        via = ext.integrate(kawaguchi_k_form(s), multi_tangent_lift(p), p.rect, q, breakpoints=_breaks(p))
        if abs(direct - via) > 2 * max(q.refine_rtol * max(abs(direct), abs(via)), q.refine_atol):
            raise ConsistencyError(f"area {direct!r} disagrees with the k-form integral {via!r}")
    return complex(direct) if np.iscomplexobj(direct) else float(direct)


def _signed_y(s: ArealStructure, tup: Sequence[int]):
    """(chart index, sign) of y^{tup} for an unordered tuple; sign 0 for repeats."""
    sgn = perm_sign(tup)
    if sgn == 0:
        return None, 0
    return s.y_index(tuple(sorted(tup))), sgn


def el_field_forms(s: ArealStructure) -> list:
    """The k-forms EL_mu = sum_I K_{x^mu y^I} dx^I - d(sum_rho K_{y^{mu rho}} dx^rho).

    The inner sum runs over ordered (k-1)-tuples rho not containing mu, and
    the exterior derivative acts on the whole chart.
    """
    n, k = s.n, s.k
    multi = s.multi
    out = []
    for mu in range(n):
        def b_ev(values, mu=mu):
            g = sc.gradient(sc.partial(s.f, mu), values, s.y_idx)
            return {I: g[r] for r, I in enumerate(multi)}

        terms = []
        for rho in ordered_indices(n, k - 1):
            if mu in rho:
                continue
            idx, sgn = _signed_y(s, (mu,) + rho)
            terms.append((rho, idx, sgn))

        def a_ev(values, terms=terms):
            g = sc.gradient(s.f, values, sorted({t[1] for t in terms}))
            lookup = dict(zip(sorted({t[1] for t in terms}), g))
            res = {}
            for rho, idx, sgn in terms:
                v = lookup[idx]
                res[rho] = v if sgn > 0 else -v
            return res

        B = DifferentialForm(s.m, k, evaluator=b_ev, names=s.names)
        if k == 1:
            # A is the 0-form K_{y^mu}
            A = DifferentialForm(s.m, 0, evaluator=lambda v, a=a_ev: {(): a(v)[()]}, names=s.names)
        else:
            A = DifferentialForm(s.m, k - 1, evaluator=a_ev, names=s.names)
        out.append(B - ext.exterior_derivative(A))
    return out



def el_field_residual(s: ArealStructure, p: Patch, t: Sequence) -> list:
    """Densities of the pulled-back EL forms at ``t`` (one per base coordinate)."""
    lift = multi_tangent_lift(p)
    return [ext.pullback_density(form, lift, list(t)) for form in el_field_forms(s)]


def el_field_residual_direct(s: ArealStructure, p: Patch, t: Sequence) -> list:
    """Independent route to :func:`el_field_residual` using derivatives in t.

    R_mu = sum_I K_{x^mu y^I} y^I - sum_rho sgn det[grad_t (K_{y^{mu rho}} o lift), grad_t x^rho_1, ...].
    """
    n, k = s.n, s.k
    t = list(t)
    seeds = sc.jet_lift(t, np.eye(k), 1)
    like = seeds[0]
    # lift values as order-1 jets in t (needs the patch to second order)
    x2 = [v if isinstance(v, Jet) else Jet.constant(np.broadcast_to(v, like.batch_shape), k, 1) for v in p.evaluate(seeds)]
    _, J = ext.jacobian(p.evaluate, seeds)
    minors = [minor_determinant(J, I) for I in s.multi]
    lift_j = x2 + [mm if isinstance(mm, Jet) else Jet.constant(mm, k, 1) for mm in minors]
    point = [v.c[0] for v in lift_j]
    gy = sc.gradient(s.f, lift_j, s.y_idx)
    dx = [[xv.shift(a).c[0] for a in range(k)] for xv in x2]
    out = []
    for mu in range(n):
        mixed = sc.gradient(sc.partial(s.f, mu), point, s.y_idx)
        val = sum(mixed[r] * point[n + r] for r in range(len(s.multi)))
        for rho in ordered_indices(n, k - 1):
            if mu in rho:
                continue
            idx, sgn = _signed_y(s, (mu,) + rho)
            gj = gy[idx - n]
            row0 = [gj.shift(a).c[0] for a in range(k)]
            mat = [row0] + [dx[r] for r in rho]
            val = val - sgn * ext._det(mat)
        out.append(val)
    return out


def el_form_field(s: ArealStructure) -> DifferentialForm:
    """The (k+1)-form sum_I (K_{x^mu y^I} dx^mu + d K_{y^I}) ^ dx^I, from one Hessian."""
    n, m = s.n, s.m
    multi = s.multi

    def ev(values):
        _, _, H = sc.hessian(s.f, values)
        out = {}
        for r, I in enumerate(multi):
            yi = n + r
            for c in range(m):
                coef = H[yi][c] + (H[c][yi] if c < n else 0.0)
                if c in I:
                    continue
                merged = (c,) + I
                sgn = perm_sign(merged)
                key = tuple(sorted(merged))
                term = coef if sgn > 0 else -coef
                out[key] = out[key] + term if key in out else term
        return out

    return DifferentialForm(m, s.k + 1, evaluator=ev, names=s.names)


def el_form_field_correction(s: ArealStructure) -> DifferentialForm:
    """sum_I K_{x^mu y^I} dx^mu ^ dx^I."""
    n = s.n
    multi = s.multi

    def ev(values):
        _, _, H = sc.hessian(s.f, values)
        out = {}
        for r, I in enumerate(multi):
            for mu in range(n):
                if mu in I:
                    continue
                merged = (mu,) + I
                sgn = perm_sign(merged)
                key = tuple(sorted(merged))
                v = H[mu][n + r]
                term = v if sgn > 0 else -v
                out[key] = out[key] + term if key in out else term
        return out

    return DifferentialForm(s.m, s.k + 1, evaluator=ev, names=s.names)


# ---------------------------------------------------------------------------
# Noether


def noether_field_current(s: ArealStructure, u: NoetherSpec) -> DifferentialForm:
    """The (k-1)-form with ordered coefficients f_J = sum_{rho not in J} sgn(rho, J) K_{y^{rho J}} u^rho."""
    if len(u.generator) != s.n:
        raise ValueError(f"generator has {len(u.generator)} components, structure needs {s.n}")
    n, k = s.n, s.k
    us = u.functions(s.names[:n])

    def ev(values):
        g = sc.gradient(s.f, values, s.y_idx)
        x = list(values[:n])
        uu = [fn(x) for fn in us]
        out = {}
        for J in ordered_indices(n, k - 1):
            acc = 0.0
            for rho in range(n):
                if rho in J:
                    continue
                idx, sgn = _signed_y(s, (rho,) + J)
                term = g[idx - n] * uu[rho]
                acc = acc + term if sgn > 0 else acc - term
            out[J] = acc
        return out

    return DifferentialForm(s.m, k - 1, evaluator=ev, names=s.names)


def noether_conservation(
    s: ArealStructure, u: NoetherSpec, p: Patch, rect: Sequence, q: QuadratureSpec = QuadratureSpec()
):
    """Integral of d(current) over the lift of ``rect`` (a sub-rectangle of the patch domain)."""
    form = ext.exterior_derivative(noether_field_current(s, u))
    return ext.integrate(form, multi_tangent_lift(p), rect, q)


# ---------------------------------------------------------------------------
# conventional Lagrangians


def field_names(k: int, m: int) -> list:
    """Names of a field Lagrangian's variables: t1..tk, q1..qm, then q{i}d{a} = dq^i/dt^a."""
    return (
        [f"t{a}" for a in range(1, k + 1)]
        + [f"q{i}" for i in range(1, m + 1)]
        + [f"q{i}d{a}" for i in range(1, m + 1) for a in range(1, k + 1)]
    )


def lift_field_conventional(
    L: Union[LagrangianExpr, str],
    k: int,
    m: Optional[int] = None,
    env: Optional[Mapping] = None,
    kind="real",
    **kw,
) -> ArealStructure:
    """K = L(x^a, x^i, y^{(1..k with a -> i)} / y^{1..k}) y^{1..k} on n = k + m coordinates."""
    env = dict(env or {})
    if isinstance(L, str):
        if m is None:
            raise ValueError("give m when L is text")
        L = lx.parse(L, field_names(k, m), kind, constants=env.keys())
    names = L.var_names
    if m is None:
        m = (len(names) - k) // (k + 1)
    if len(names) != k + m + m * k:
        raise ValueError("L must depend on t1..tk, q1..qm and all first derivatives")
    n = k + m
    sig = CoordSignature.areal(n, k)
    ybase = tuple(range(k))
    gauge = Var(sig.names[n + ext.rank(ybase, n)])
    mapping = {}
    for a in range(k):
        mapping[names[a]] = Var(sig.names[a])
    for i in range(m):
        mapping[names[k + i]] = Var(sig.names[k + i])
        for a in range(k):
            tup = list(ybase)
            tup[a] = k + i
            sgn = perm_sign(tup)
            node = Var(sig.names[n + ext.rank(tuple(sorted(tup)), n)])
            if sgn < 0:
                node = Neg(node)
            mapping[names[k + m + i * k + a]] = BinOp("/", node, gauge)
    ast = BinOp("*", lx.substitute(L.ast, mapping), gauge)
    return ArealStructure(n, k, LagrangianExpr(ast, sig.names, L.kind), env, sig=sig, **kw)


# ---------------------------------------------------------------------------
# De Broglie (Schrodinger) field on (t, x, psi, psibar)

DEBROGLIE_L = "(i/2)*(q2*q1d1 - q2d1*q1) - (1/(2*m))*q2d2*q1d2 + e*q2*({phi})*q1"
DEBROGLIE_K = "(i/2)*(x4*y32 - x3*y42) - (1/(2*m))*y14*y13/y12 + e*({phi})*x3*x4*y12"


def debroglie(m: float = 1.0, e: float = 1.0, phi: str = "0.3") -> ArealStructure:
    """The De Broglie field density with potential ``phi`` given as an expression in x2."""
    return ArealStructure.from_text(DEBROGLIE_K.format(phi=phi), 4, 2, {"m": m, "e": e}, "complex", name="debroglie")


def plane_wave(kappa: float, omega: float, rect=((0.0, 1.0), (0.0, 1.0))) -> Patch:
    """The patch (t, x) -> (t, x, exp(i(kx - wt)), exp(-i(kx - wt)))."""
    env = {"kappa": kappa, "omega": omega}
    return Patch(
        ["t1", "t2", "exp(i*(kappa*t2 - omega*t1))", "exp(-i*(kappa*t2 - omega*t1))"],
        rect,
        env=env,
        kind="complex",
    )
