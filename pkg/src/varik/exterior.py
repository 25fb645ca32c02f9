"""Multi-indices, differential forms and their integration over rectangles.

Forms live on a single chart with ``m`` coordinates.  A degree-``r`` form is
stored by its coefficients on ordered multi-indices ``J = (j1 < ... < jr)``
(0-based coordinate positions).  Coefficients are produced by an evaluator
that maps a list of coordinate values to ``{J: value}``; values may be floats,
numpy batches or jets, which is what lets the exterior derivative and
pullbacks be computed by forward-mode differentiation instead of symbolically.

Integration pulls a ``k``-form back along a map from a ``k``-rectangle and
integrates the density with tensor Gauss-Legendre quadrature, doubling the
cell count until two levels agree.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import scalarcalc as sc
from .scalarcalc import Jet

__all__ = [
    "MultiIndex",
    "rank",
    "unrank",
    "perm_sign",
    "ordered_indices",
    "minor_determinant",
    "leibniz_determinant",
    "DifferentialForm",
    "coordinate_form",
    "function_form",
    "wedge",
    "exterior_derivative",
    "interior",
    "lie_derivative",
    "jacobian",
    "pullback_density",
    "QuadratureSpec",
    "NonConvergent",
    "OrientationError",
    "quad_rect",
    "integrate",
]


class NonConvergent(RuntimeError):
    """Raised when an iterative procedure stops before meeting its tolerance."""


class OrientationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# multi-indices


def perm_sign(tup: Sequence[int]) -> int:
    """Parity of the permutation sorting ``tup``; 0 if an index repeats."""
    tup = list(tup)
    sign = 1
    for i in range(len(tup)):
        for j in range(i + 1, len(tup)):
            if tup[i] == tup[j]:
                return 0
            if tup[i] > tup[j]:
                sign = -sign
    return sign


@lru_cache(maxsize=None)
def ordered_indices(n: int, k: int) -> tuple:
    """All strictly increasing k-tuples over range(n) in lexicographic order."""
    return tuple(itertools.combinations(range(n), k))


def rank(indices: Sequence[int], n: int) -> int:
    """Lexicographic position of an ordered multi-index among all k-subsets of range(n)."""
    k = len(indices)
    r = 0
    prev = -1
    for pos, idx in enumerate(indices):
        if idx <= prev or idx >= n:
            raise ValueError(f"{tuple(indices)} is not an ordered multi-index over range({n})")
        for skipped in range(prev + 1, idx):
            r += math.comb(n - skipped - 1, k - pos - 1)
        prev = idx
    return r


def unrank(r: int, n: int, k: int) -> tuple:
    if not 0 <= r < math.comb(n, k):
        raise ValueError(f"rank {r} out of range for C({n},{k})")
    out = []
    nxt = 0
    for pos in range(k):
        while True:
            block = math.comb(n - nxt - 1, k - pos - 1)
            if r < block:
                out.append(nxt)
                nxt += 1
                break
            r -= block
            nxt += 1
    return tuple(out)


@dataclass(frozen=True, order=True)
class MultiIndex:
    """An ordered k-tuple of 0-based coordinate positions below ``n``."""

    indices: tuple
    n: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if any(b <= a for a, b in zip(idx, idx[1:])) or (idx and (idx[0] < 0 or idx[-1] >= self.n)):
            raise ValueError(f"{idx} is not an ordered multi-index over range({self.n})")

    @classmethod
    def from_tuple(cls, tup: Sequence[int], n: int):
        """Sort an arbitrary tuple; returns ``(MultiIndex or None, sign)``."""
        s = perm_sign(tup)
        if s == 0:
            return None, 0
        return cls(tuple(sorted(tup)), n), s

    @property
    def k(self) -> int:
        return len(self.indices)

    @property
    def rank(self) -> int:
        return rank(self.indices, self.n)

    @classmethod
    def unrank(cls, r: int, n: int, k: int) -> "MultiIndex":
        return cls(unrank(r, n, k), n)


# ---------------------------------------------------------------------------
# determinants


def _det(mat: list):
    """Determinant of a small square matrix of scalars, arrays or jets."""
    k = len(mat)
    if k == 0:
        return 1.0
    if k == 1:
        return mat[0][0]
    if k == 2:
        return mat[0][0] * mat[1][1] - mat[0][1] * mat[1][0]
    if k == 3:
        a, b, c = mat
        return (
            a[0] * (b[1] * c[2] - b[2] * c[1])
            - a[1] * (b[0] * c[2] - b[2] * c[0])
            + a[2] * (b[0] * c[1] - b[1] * c[0])
        )
    if not any(isinstance(x, Jet) for row in mat for x in row):
        arr = np.array([[np.asarray(x) for x in row] for row in mat])
        batch = arr.shape[2:]
        arr = np.broadcast_to(arr, (k, k) + batch)
        moved = np.moveaxis(arr.reshape(k, k, -1), -1, 0)
        return np.linalg.det(moved).reshape(batch) if batch else np.linalg.det(moved)[0]
    # Laplace expansion along the first row
    total = 0
    for j in range(k):
        sub = [row[:j] + row[j + 1 :] for row in mat[1:]]
        term = mat[0][j] * _det(sub)
        total = total + term if j % 2 == 0 else total - term
    return total


def minor_determinant(jacobian, rows: Sequence[int]):
    """Determinant of the k x k submatrix of an m x k Jacobian picked out by ``rows``.

    Cofactor formulas for k <= 3 (generic over jets), LU through numpy above.
    """
    return _det([list(jacobian[r]) for r in rows])


def leibniz_determinant(jacobian, rows: Sequence[int]):
    """Permutation-sum determinant; an independent oracle for :func:`minor_determinant`."""
    k = len(rows)
    total = 0.0
    for perm in itertools.permutations(range(k)):
        term = float(perm_sign(perm))
        for a in range(k):
            term = term * jacobian[rows[a]][perm[a]]
        total = total + term
    return total


# ---------------------------------------------------------------------------
# forms


def _is_zero(v) -> bool:
    if isinstance(v, Jet):
        return False
    return np.ndim(v) == 0 and v == 0


class DifferentialForm:
    """Degree-``r`` form on an ``m``-coordinate chart.

    Args:
        m: chart dimension.
        r: degree.
        coeffs: mapping from multi-index tuples (any order; normalized with
            the permutation sign) to callables ``f(values)`` or constants.
        evaluator: alternative to ``coeffs``; a callable returning the whole
            ``{ordered tuple: value}`` dictionary at once.
        names: optional coordinate names (for display and lookups).
    """

    def __init__(
        self,
        m: int,
        r: int,
        coeffs: Optional[Mapping] = None,
        evaluator: Optional[Callable] = None,
        names: Optional[Sequence[str]] = None,
    ):
        if not 0 <= r <= m:
            raise ValueError(f"degree {r} impossible on a {m}-dimensional chart")
        if (coeffs is None) == (evaluator is None):
            raise ValueError("give exactly one of coeffs or evaluator")
        self.m = m
        self.r = r
        self.names = tuple(names) if names is not None else None
        if coeffs is not None:
            normalized = []
            for key, f in coeffs.items():
                key = tuple(key)
                if len(key) != r:
                    raise ValueError(f"key {key} does not have {r} indices")
                if any(not 0 <= i < m for i in key):
                    raise ValueError(f"key {key} out of range for m={m}")
                s = perm_sign(key)
                if s == 0:
                    continue
                normalized.append((tuple(sorted(key)), s, f))

            def evaluator(values, _items=tuple(normalized)):
                out = {}
                for key, s, f in _items:
                    v = f(values) if callable(f) else f
                    v = v if s > 0 else -v
                    out[key] = out[key] + v if key in out else v
                return out

        self._evaluator = evaluator

    def __call__(self, values: Sequence) -> dict:
        if len(values) != self.m:
            raise ValueError(f"form on {self.m} coordinates evaluated at {len(values)} values")
        return self._evaluator(values)

    evaluate = __call__

    def coefficient(self, key: Sequence[int], values: Sequence):
        key = tuple(key)
        s = perm_sign(key)
        if s == 0:
            return 0.0
        v = self(values).get(tuple(sorted(key)), 0.0)
        return v if s > 0 else -v

    def __add__(self, other: "DifferentialForm") -> "DifferentialForm":
        _same_chart(self, other)
        if self.r != other.r:
            raise ValueError("cannot add forms of different degree")

        def ev(values):
            a = dict(self(values))
            for k, v in other(values).items():
                a[k] = a[k] + v if k in a else v
            return a

        return DifferentialForm(self.m, self.r, evaluator=ev, names=self.names)

    def __neg__(self) -> "DifferentialForm":
        return DifferentialForm(self.m, self.r, evaluator=lambda v: {k: -c for k, c in self(v).items()}, names=self.names)

    def __sub__(self, other: "DifferentialForm") -> "DifferentialForm":
        return self + (-other)

    def scale(self, f: Callable) -> "DifferentialForm":
        """Multiply by a function of the chart coordinates."""

        def ev(values):
            g = f(values) if callable(f) else f
            return {k: g * c for k, c in self(values).items()}

        return DifferentialForm(self.m, self.r, evaluator=ev, names=self.names)

    def __repr__(self) -> str:
        return f"DifferentialForm(m={self.m}, r={self.r})"


def _same_chart(a: DifferentialForm, b: DifferentialForm) -> None:
    if a.m != b.m:
        raise ValueError(f"forms live on charts of dimension {a.m} and {b.m}")


def coordinate_form(m: int, indices: Sequence[int], coeff=1.0) -> DifferentialForm:
    """coeff * dx^{i1} ^ ... ^ dx^{ir}."""
    return DifferentialForm(m, len(indices), {tuple(indices): coeff})


def function_form(m: int, f: Callable) -> DifferentialForm:
    return DifferentialForm(m, 0, {(): f})


def wedge(a: DifferentialForm, b: DifferentialForm) -> DifferentialForm:
    _same_chart(a, b)
    if a.r + b.r > a.m:
        raise ValueError(f"wedge of degrees {a.r} and {b.r} overflows dimension {a.m}")

    def ev(values):
        ca, cb = a(values), b(values)
        out = {}
        for ka, va in ca.items():
            for kb, vb in cb.items():
                merged = ka + kb
                s = perm_sign(merged)
                if s == 0:
                    continue
                key = tuple(sorted(merged))
                term = va * vb if s > 0 else -(va * vb)
                out[key] = out[key] + term if key in out else term
        return out

    return DifferentialForm(a.m, a.r + b.r, evaluator=ev, names=a.names)


def _chart_gradient_jets(values: Sequence):
    """Seed every chart coordinate; returns the extended inputs and base signature."""
    m = len(values)
    p, d = sc._base_signature(values)
    seeds = [[1.0 if i == j else None for i in range(m)] for j in range(m)]
    return sc.seeded(values, seeds, 1), p, d


def partials_all(f_values: Mapping, p: int, d: int, m: int) -> dict:
    """From coefficients computed on seeded inputs, extract (value, [d/dx^mu]) per key."""
    out = {}
    for key, c in f_values.items():
        val = sc._extract(c, p, d, m, (0,) * m)
        grads = [sc._extract(c, p, d, m, tuple(1 if t == mu else 0 for t in range(m))) for mu in range(m)]
        out[key] = (val, grads)
    return out


def exterior_derivative(a: DifferentialForm) -> DifferentialForm:
    """d a, with partials taken by one forward-mode evaluation over all chart coordinates."""
    if a.r >= a.m:
        raise ValueError("the exterior derivative of a top-degree form has no room on the chart")
    m = a.m

    def ev(values):
        ext, p, d = _chart_gradient_jets(values)
        parts = partials_all(a(ext), p, d, m)
        out = {}
        for key, (_, grads) in parts.items():
            for mu in range(m):
                if mu in key:
                    continue
                g = grads[mu]
                if _is_zero(g):
                    continue
                merged = (mu,) + key
                s = perm_sign(merged)
                nk = tuple(sorted(merged))
                term = g if s > 0 else -g
                out[nk] = out[nk] + term if nk in out else term
        return out

    return DifferentialForm(m, a.r + 1, evaluator=ev, names=a.names)


def interior(a: DifferentialForm, X: Callable) -> DifferentialForm:
    """Contraction i_X a with a vector field ``X(values) -> m components``."""
    if a.r == 0:
        return DifferentialForm(a.m, 0, evaluator=lambda v: {}, names=a.names)

    def ev(values):
        comps = X(values)
        out = {}
        for key, c in a(values).items():
            for pos, j in enumerate(key):
                xj = comps[j]
                if _is_zero(xj):
                    continue
                nk = key[:pos] + key[pos + 1 :]
                term = xj * c if pos % 2 == 0 else -(xj * c)
                out[nk] = out[nk] + term if nk in out else term
        return out

    return DifferentialForm(a.m, a.r - 1, evaluator=ev, names=a.names)


def lie_derivative(a: DifferentialForm, X: Callable) -> DifferentialForm:
    """Cartan's formula L_X a = i_X da + d(i_X a); ``X`` must be jet-evaluable."""
    terms = []
    if a.r < a.m:
        terms.append(interior(exterior_derivative(a), X))
    if a.r > 0:
        terms.append(exterior_derivative(interior(a, X)))
    out = terms[0]
    for t in terms[1:]:
        out = out + t
    return out


# ---------------------------------------------------------------------------
# pullback


def jacobian(mapping: Callable, t: Sequence):
    """Values and first partials of ``mapping`` at parameter point ``t``.

    Returns ``(x, J)`` where ``x`` lists the m outputs and ``J[i][a]`` is
    d x^i / d t^a.  Inputs may themselves be jets, in which case everything
    returned is a jet of the same shape.
    """
    k = len(t)
    p, d = sc._base_signature(t)
    seeds = [[1.0 if i == a else None for i in range(k)] for a in range(k)]
    out = mapping(sc.seeded(t, seeds, 1))
    x = [sc._extract(o, p, d, k, (0,) * k) for o in out]
    J = [[sc._extract(o, p, d, k, tuple(1 if b == a else 0 for b in range(k))) for a in range(k)] for o in out]
    return x, J


def pullback_density(a: DifferentialForm, mapping: Callable, t: Sequence):
    """Coefficient of dt^1 ^ ... ^ dt^k in the pullback of a degree-k form."""
    k = len(t)
    if a.r != k:
        raise ValueError(f"cannot pull a degree-{a.r} form back to a {k}-dimensional parameter space")
    x, J = jacobian(mapping, t)
    if len(x) != a.m:
        raise ValueError(f"map produces {len(x)} coordinates, form expects {a.m}")
    total = 0.0
    for key, c in a(x).items():
        total = total + c * minor_determinant(J, key)
    return total


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureSpec:
    gauss_order: int = 8
    subdivisions: int = 8
    refine_rtol: float = 1e-9
    max_levels: int = 6
    refine_atol: float = 1e-13
    max_nodes: int = 1 << 20

    def __post_init__(self):
        if self.gauss_order < 2:
            raise ValueError("gauss_order must be >= 2")
        if self.subdivisions < 1:
            raise ValueError("subdivisions must be >= 1")
        if self.max_levels < 1:
            raise ValueError("max_levels must be >= 1")
        if not self.refine_rtol > 0:
            raise ValueError("refine_rtol must be positive")
        if self.refine_atol < 0:
            raise ValueError("refine_atol must be non-negative")


@lru_cache(maxsize=None)
def _gauss(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def _axis_nodes(edges: np.ndarray, order: int):
    x, w = _gauss(order)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _edges(lo: float, hi: float, base: Optional[Sequence[float]], pieces: int, level: int) -> np.ndarray:
    if base is None:
        return np.linspace(lo, hi, pieces * 2**level + 1)
    pts = np.unique(np.concatenate([[lo, hi], np.asarray(base, float)]))
    pts = pts[(pts >= lo) & (pts <= hi)]
    per = 2**level
    frac = np.arange(per) / per
    out = (pts[:-1, None] + (pts[1:] - pts[:-1])[:, None] * frac[None, :]).ravel()
    return np.append(out, hi)


def _rule(rect, q: QuadratureSpec, level: int, breakpoints):
    axes = []
    for ax, (lo, hi) in enumerate(rect):
        base = breakpoints[ax] if breakpoints is not None else None
        axes.append(_axis_nodes(_edges(lo, hi, base, q.subdivisions, level), q.gauss_order))
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    wgrid = np.ones_like(grids[0])
    for ax, a in enumerate(axes):
        shape = [1] * len(axes)
        shape[ax] = -1
        wgrid = wgrid * a[1].reshape(shape)
    return [g.ravel() for g in grids], wgrid.ravel()


_CHUNK = 1 << 14


def _eval_chunked(f: Callable, nodes: list, size: int) -> np.ndarray:
    # bounded batches keep jet temporaries small on fine 2-D levels
    parts = []
    for lo in range(0, size, _CHUNK):
        sl = [a[lo : lo + _CHUNK] for a in nodes]
        parts.append(np.broadcast_to(np.asarray(f(sl)), sl[0].shape))
    return np.concatenate(parts)


def quad_rect(
    f: Callable,
    rect: Sequence,
    q: QuadratureSpec = QuadratureSpec(),
    breakpoints: Optional[Sequence] = None,
    return_info: bool = False,
):
    """Integrate ``f(list of k node arrays) -> array`` over a closed rectangle.

    The cell count per axis doubles until two consecutive levels agree to
    ``refine_rtol`` (relative to the larger of |I| and the integral of |f|)
    or to ``refine_atol`` absolutely, which settles integrands that are pure
    round-off.  Refinement also stops before a level would exceed
    ``max_nodes`` nodes.
    ``breakpoints`` optionally gives per-axis points where cells must break
    (e.g. knots of a piecewise curve); the rule then refines those pieces.
    """
    rect = [(float(lo), float(hi)) for lo, hi in rect]
    for lo, hi in rect:
        if not hi > lo:
            raise ValueError(f"degenerate integration interval [{lo}, {hi}]")
    prev = None
    change = math.inf
    scale = 0.0
    level = 0
    for level in range(q.max_levels + 1):
        nodes, w = _rule(rect, q, level, breakpoints)
        if prev is not None and w.size > q.max_nodes:
            level -= 1
            break
        vals = _eval_chunked(f, nodes, w.size)
        val = np.sum(w * vals)
        scale = max(abs(val), float(np.sum(w * np.abs(vals))))
        if prev is not None:
            change = abs(val - prev)
            if change <= max(q.refine_rtol * scale, q.refine_atol):
                return (val, {"levels": level, "change": change}) if return_info else val
        prev = val
    if change > max(10 * q.refine_rtol * scale, q.refine_atol):
        raise NonConvergent(
            f"quadrature did not converge after {level} refinements (last change {change:.3e}, scale {scale:.3e})"
        )
    return (prev, {"levels": level, "change": change}) if return_info else prev


def integrate(
    a: DifferentialForm,
    mapping: Callable,
    rect: Sequence,
    q: QuadratureSpec = QuadratureSpec(),
    orientation: Optional[Sequence[int]] = None,
    breakpoints: Optional[Sequence] = None,
):
    """Integral of a degree-k form over the image of a k-rectangle.

    ``orientation`` names the multi-index whose Jacobian minor must be positive
    at the rectangle centre (the map must preserve orientation); a warning is
    issued if that minor changes sign at the quadrature nodes.
    """
    k = len(rect)
    if orientation is not None:
        centre = [0.5 * (lo + hi) for lo, hi in rect]
        _, J = jacobian(mapping, centre)
        if not minor_determinant(J, orientation) > 0:
            raise OrientationError(f"map reverses orientation on multi-index {tuple(orientation)}")

    def density(nodes):
        if orientation is not None:
            _, J = jacobian(mapping, nodes)
            mdet = np.asarray(minor_determinant(J, orientation))
            if np.isrealobj(mdet) and np.any(mdet <= 0):
                warnings.warn("orientation minor changes sign inside the rectangle", RuntimeWarning, stacklevel=3)
        return pullback_density(a, mapping, nodes)

    if k != a.r:
        raise ValueError(f"a degree-{a.r} form cannot be integrated over a {k}-rectangle")
    return quad_rect(density, rect, q, breakpoints)
