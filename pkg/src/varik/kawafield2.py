"""Second-order k-areal densities on R^n.

Chart coordinates are ``(x^mu, y^I, z^{B;nu})`` where ``B`` is a strictly
increasing tuple of ``l >= 1`` ordered k-multi-indices and ``nu`` an ordered
(k - l)-tuple.  Along a patch, z^{B;nu} is the determinant whose rows are the
t-gradients of y^{B_1}, ..., y^{B_l}, x^{nu_1}, ..., x^{nu_{k-l}}.

Under an orientation-preserving reparameterization with Jacobian determinant
T, these coordinates move as

    y -> T y,    z^{B;nu} -> T^(l+1) z^{B;nu} + sum_j (-1)^j y^{B_j} c[B \\ B_j; nu]

with the c's arbitrary.  A density invariant under all such moves is a
second-order k-areal density; its area does not depend on parameterization.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import exterior as ext
from . import lagexpr as lx
from . import scalarcalc as sc
from ._common import on_samples, rel_residual
from .exterior import DifferentialForm, QuadratureSpec, ordered_indices, perm_sign
from .finsler import ConsistencyError
from .kawafield import lift_field
from .lagexpr import CoordSignature, LagrangianExpr, areal2_keys
from .paths import Patch
from .scalarcalc import SampleSpec, ScalarKind

__all__ = [
    "Areal2Structure",
    "lift2_field",
    "second_order_field_lift",
    "check_homogeneity_field2",
    "kawaguchi2_k_form",
    "kawaguchi2_area",
    "chart2_transition",
    "transition_discrepancy",
]


@dataclass
class Areal2Structure:
    """A second-order k-areal density over the chart of :func:`CoordSignature.areal` with order 2."""

    n: int
    k: int
    K: LagrangianExpr
    env: dict = field(default_factory=dict)
    box: Optional[tuple] = None
    exclusion: Optional[str] = None
    sig: Optional[CoordSignature] = None
    name: str = "areal2"

    def __post_init__(self):
        if self.sig is None:
            self.sig = CoordSignature.areal(self.n, self.k, order=2)
        if tuple(self.K.var_names) != self.sig.names:
            raise ValueError("density must be an expression over the structure's chart coordinates")
        if self.box is None:
            self.box = tuple((-2.0, 2.0) for _ in range(len(self.sig.names)))
        if self.exclusion is None:
            self.exclusion = f"{self.sig.names[self.n]}_nonzero"
        self.f = self.K.bind(self.env)

    @classmethod
    def from_text(cls, text: str, n: int, k: int, env: Optional[Mapping] = None, kind="real", labels=None, **kw):
        sig = CoordSignature.areal(n, k, labels, order=2)
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
    def zkeys(self) -> list:
        return areal2_keys(self.n, self.k)

    @property
    def m(self) -> int:
        return self.n + len(self.multi) + len(self.zkeys)

    @property
    def y_idx(self) -> list:
        return list(range(self.n, self.n + len(self.multi)))

    @property
    def z_idx(self) -> list:
        start = self.n + len(self.multi)
        return list(range(start, start + len(self.zkeys)))

    def sample_spec(self, count: int = 200, seed: int = 0) -> SampleSpec:
        return SampleSpec(seed, count, self.box, self.exclusion, self.names)

    def __call__(self, values):
        return self.f(values)


def _layout(n: int, k: int):
    multi = ordered_indices(n, k)
    yrank = {I: n + r for r, I in enumerate(multi)}
    return multi, yrank, areal2_keys(n, k)


# ---------------------------------------------------------------------------
# lift


def lift2_field(p: Patch, t: Sequence) -> list:
    """(x, y^I, z^{B;nu}) of the second-order lift at ``t``."""
    n, k = p.n, p.k
    multi, yrank, zkeys = _layout(n, k)
    first, G = ext.jacobian(lambda tt: lift_field(p, tt), list(t))
    z = []
    for blocks, nu in zkeys:
        rows = [G[yrank[I]] for I in blocks] + [G[v] for v in nu]
        z.append(ext._det(rows))
    return list(first) + z


def second_order_field_lift(p: Patch) -> Callable:
    return lambda t: lift2_field(p, t)


# ---------------------------------------------------------------------------
# homogeneity


def _move(pts: np.ndarray, n: int, k: int, lam: float, consts: Mapping) -> np.ndarray:
    """Apply y -> lam y, z -> lam^(l+1) z + sum_j (-1)^j y^{B_j} c[B \\ B_j; nu]."""
    multi, yrank, zkeys = _layout(n, k)
    out = pts.copy()
    out[:, n : n + len(multi)] *= lam
    base = n + len(multi)
    for r, (blocks, nu) in enumerate(zkeys):
        l = len(blocks)
        col = lam ** (l + 1) * pts[:, base + r]
        for j, I in enumerate(blocks):
            rest = blocks[:j] + blocks[j + 1 :]
            col = col + (-1) ** j * pts[:, yrank[I]] * consts[(rest, nu)]
        out[:, base + r] = col
    return out


def _transversality_terms(n: int, k: int):
    """For each (rest; nu), the (sign, y column, z column) triples of its identity."""
    multi, yrank, zkeys = _layout(n, k)
    zpos = {key: n + len(multi) + r for r, key in enumerate(zkeys)}
    groups = {}
    for (blocks, nu), col in zpos.items():
        for j, I in enumerate(blocks):
            rest = blocks[:j] + blocks[j + 1 :]
            groups.setdefault((rest, nu), []).append(((-1) ** j, yrank[I], col))
    return groups


def check_homogeneity_field2(
    s: Areal2Structure,
    spec: Optional[SampleSpec] = None,
    lambdas: Sequence[float] = (0.5, 2.0, np.pi),
    rhos: Sequence[float] = (-1.0, 0.0, 3.0),
    seed: int = 0,
) -> dict:
    """Scaling law on a (lambda, rho) grid plus the weighted Euler and transversality identities.

    The free constants are ``rho`` times fixed draws from ``[-1, 1]``.
    """
    if any(not lam > 0 for lam in lambdas):
        raise ValueError("scaling factors must be positive")
    spec = spec or s.sample_spec()
    pts = sc.sample_points(spec)
    n, k = s.n, s.k
    multi, yrank, zkeys = _layout(n, k)
    groups = _transversality_terms(n, k)
    draws = np.random.default_rng(seed).uniform(-1.0, 1.0, len(groups))
    unit = dict(zip(sorted(groups), draws))
    weights = [1.0] * len(multi) + [len(b) + 1.0 for b, _ in zkeys]
    fib = s.y_idx + s.z_idx

    def base(cols):
        K0 = s.f(cols)
        g = sc.gradient(s.f, cols, fib)
        return K0, dict(zip(fib, g))

    K0, grad = on_samples(base, pts, s.names)
    terms = [w * grad[c] * pts[:, c] for w, c in zip(weights, fib)]
    scale = np.maximum(np.abs(K0), sum(np.abs(t) for t in terms))
    res_euler = rel_residual(sum(terms) - K0, scale)

    res_trans = {}
    for key, trip in groups.items():
        parts = [sgn * pts[:, yc] * grad[zc] for sgn, yc, zc in trip]
        res_trans[key] = rel_residual(sum(parts), np.maximum(np.abs(K0), sum(np.abs(p) for p in parts)))

    res_scaling = 0.0
    for lam in lambdas:
        for rho in rhos:
            moved = _move(pts, n, k, lam, {key: rho * v for key, v in unit.items()})
            Kl = on_samples(s.f, moved, s.names)
            res_scaling = max(res_scaling, rel_residual(Kl - lam * K0, lam * scale))
    return {
        "max_rel_residual_scaling": res_scaling,
        "max_rel_residual_euler": res_euler,
        "max_rel_residual_transversality": max(res_trans.values(), default=0.0),
        "transversality": res_trans,
        "samples": int(pts.shape[0]),
    }


# ---------------------------------------------------------------------------
# forms and area


def _gradient_by_coordinate(f: Callable, values: Sequence, indices: Sequence[int]) -> list:
    # one seeded direction per call keeps jets small when f seeds internally
    p, d = sc._base_signature(values)
    out = []
    for j in indices:
        seeds = [[1.0 if i == j else None for i in range(len(values))]]
        out.append(sc._extract(f(sc.seeded(list(values), seeds, 1)), p, d, 1, (1,)))
    return out


def _k2_form(f: Callable, n: int, k: int, names=None, per_coordinate: bool = False) -> DifferentialForm:
    multi, yrank, zkeys = _layout(n, k)
    m = n + len(multi) + len(zkeys)
    fib = list(range(n, m))
    entries = []
    for I in multi:
        entries.append((I, 1.0))
    for blocks, nu in zkeys:
        tup = tuple(yrank[I] for I in blocks) + tuple(nu)
        key = tuple(sorted(tup))
        entries.append((key, (len(blocks) + 1.0) * perm_sign(tup)))

    def ev(values):
        g = _gradient_by_coordinate(f, values, fib) if per_coordinate else sc.gradient(f, values, fib)
        out = {}
        for (key, w), gi in zip(entries, g):
            term = w * gi
            out[key] = out[key] + term if key in out else term
        return out

    return DifferentialForm(m, k, evaluator=ev, names=names)


def kawaguchi2_k_form(s: Areal2Structure) -> DifferentialForm:
    """sum K_{y^I} dx^I + sum (l+1) K_{z^{B;nu}} dy^{B_1} ^ ... ^ dy^{B_l} ^ dx^nu."""
    return _k2_form(s.f, s.n, s.k, s.names)


def kawaguchi2_area(s: Areal2Structure, p: Patch, q: QuadratureSpec = QuadratureSpec(), cross_check: bool = False):
    """Integral of K over the second-order lift of the patch."""
    bp = getattr(p, "breakpoints", None)
    direct = ext.quad_rect(lambda ts: s.f(lift2_field(p, ts)), p.rect, q, bp)
    if cross_check:
        via = ext.integrate(kawaguchi2_k_form(s), second_order_field_lift(p), p.rect, q, breakpoints=bp)
        if abs(direct - via) > 2 * max(q.refine_rtol * max(abs(direct), abs(via)), q.refine_atol):
            raise ConsistencyError(f"area {direct!r} disagrees with the k-form integral {via!r}")
    return complex(direct) if np.iscomplexobj(direct) else float(direct)


# ---------------------------------------------------------------------------
# chart transitions


def chart2_transition(psi: Callable, n: int, k: int) -> Callable:
    """Second-order chart map induced by a base transition ``x = psi(xbar)``.

    Each z row is a combination of the rows grad xbar^c and grad ybar^J; the
    determinant is expanded multilinearly and every resulting determinant is
    a barred chart coordinate (or zero).
    """
    multi, yrank, zkeys = _layout(n, k)
    zpos = {key: n + len(multi) + r for r, key in enumerate(zkeys)}

    def generator_value(gens, values):
        # gens: list of ('y', I) / ('x', c); value of the determinant with those rows
        ys = [g[1] for g in gens if g[0] == "y"]
        xs = [g[1] for g in gens if g[0] == "x"]
        if len(set(ys)) < len(ys) or len(set(xs)) < len(xs):
            return None
        canon = sorted(ys, key=lambda I: yrank[I]) + sorted(xs)
        order = [canon.index(g[1]) if g[0] == "y" else len(ys) + sorted(xs).index(g[1]) for g in gens]
        sgn = perm_sign(order)
        if not ys:
            return sgn, values[yrank[tuple(sorted(xs))]]
        key = (tuple(sorted(ys, key=lambda I: yrank[I])), tuple(sorted(xs)))
        return sgn, values[zpos[key]]

    def T2(values):
        values = list(values)
        xb = values[:n]
        p, d = sc._base_signature(xb)
        seeds = [[1.0 if i == c else None for i in range(n)] for c in range(n)]
        # minors of d psi / d xbar as jets in xbar
        _, A = ext.jacobian(psi, sc.seeded(xb, seeds, 1))
        x = [sc._extract(v, p, d, n, (0,) * n) for v in psi(xb)]
        unit = [tuple(1 if b == c else 0 for b in range(n)) for c in range(n)]
        M = {}
        dM = {}
        for I in multi:
            for J in multi:
                mj = ext._det([[A[i][j] for j in J] for i in I])
                M[I, J] = sc._extract(mj, p, d, n, (0,) * n)
                dM[I, J] = [sc._extract(mj, p, d, n, u) for u in unit]
        A0 = [[sc._extract(A[i][c], p, d, n, (0,) * n) for c in range(n)] for i in range(n)]
        ybar = {J: values[yrank[J]] for J in multi}
        y = [sum(M[I, J] * ybar[J] for J in multi) for I in multi]

        def yrow(I):
            row = {("y", J): M[I, J] for J in multi}
            for c in range(n):
                row[("x", c)] = sum(dM[I, J][c] * ybar[J] for J in multi)
            return row

        def xrow(v):
            return {("x", c): A0[v][c] for c in range(n)}

        z = []
        for blocks, nu in zkeys:
            rows = [yrow(I) for I in blocks] + [xrow(v) for v in nu]
            acc = 0.0
            for choice in itertools.product(*[list(r.items()) for r in rows]):
                gv = generator_value([g for g, _ in choice], values)
                if gv is None:
                    continue
                sgn, val = gv
                coef = choice[0][1]
                for _, cf in choice[1:]:
                    coef = coef * cf
                acc = acc + (sgn * coef) * val
            z.append(acc)
        return x + y + z

    return T2


def transition_discrepancy(
    s: Areal2Structure,
    psi: Callable,
    spec: Optional[SampleSpec] = None,
    seed: int = 1,
) -> dict:
    """Compare the k-form built in barred coordinates with the pullback of the original one.

    With ``x = psi(xbar)`` and the induced second-order map T2, the barred
    density is K o T2.  Both forms are evaluated on random k-tuples of chart
    vectors at sampled barred points; the difference is reported.
    """
    n, k = s.n, s.k
    T2 = chart2_transition(psi, n, k)
    spec = spec or s.sample_spec(50)
    pts = sc.sample_points(spec)
    m = s.m
    V = np.random.default_rng(seed).normal(size=(k, m, pts.shape[0]))
    Kbar = lambda v: s.f(T2(v))
    bar_form = _k2_form(Kbar, n, k, per_coordinate=True)
    orig_form = kawaguchi2_k_form(s)

    def affine(t):
        return [pts[:, i] + sum(V[a, i] * t[a] for a in range(k)) for i in range(m)]

    zero = [0.0] * k
    with np.errstate(divide="raise", invalid="raise", over="raise"):
        lhs = ext.pullback_density(bar_form, affine, zero)
        rhs = ext.pullback_density(orig_form, lambda t: T2(affine(t)), zero)
    diff = np.abs(np.asarray(lhs) - np.asarray(rhs))
    scale = np.maximum(np.abs(lhs), np.abs(rhs))
    return {
        "max_discrepancy": float(np.max(diff)),
        "max_rel_discrepancy": rel_residual(diff, scale),
        "samples": int(pts.shape[0]),
    }
