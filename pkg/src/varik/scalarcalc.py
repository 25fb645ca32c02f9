"""Truncated multivariate Taylor jets and the scalar helpers built on them.

A :class:`Jet` holds the Taylor coefficients of a function of ``p`` parameters
up to total degree ``d``.  Coefficients live in a dense array whose first axis
runs over multi-degrees in graded-lexicographic order; any trailing axes are a
batch, so one jet can carry the expansion at many base points at once.

Arithmetic is exact truncation: every coefficient of a result equals the
corresponding Taylor coefficient of the composite function.  Elementary
functions are applied by composing their univariate Taylor series with the
nilpotent part of the argument.

The module also provides the differentiation helpers used everywhere else
(:func:`gradient`, :func:`hessian`, :func:`partial`) and deterministic sampling
of chart points for property checks.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

MAX_ORDER = 4  # highest order accepted from callers; helpers may seed internally beyond it

__all__ = [
    "ScalarKind",
    "Jet",
    "JetError",
    "DomainError",
    "jet_lift",
    "derivative",
    "gradient",
    "hessian",
    "partial",
    "seeded",
    "sqrt",
    "sin",
    "cos",
    "exp",
    "log",
    "fabs",
    "power",
    "value_of",
    "is_jet",
    "SampleSpec",
    "sample_points",
    "SamplingError",
]


class ScalarKind(enum.Enum):
    REAL = "real"
    COMPLEX = "complex"

    @classmethod
    def parse(cls, text: "str | ScalarKind") -> "ScalarKind":
        if isinstance(text, ScalarKind):
            return text
        try:
            return cls(str(text).lower())
        except ValueError:
            raise ValueError(f"unknown scalar kind {text!r} (expected 'real' or 'complex')") from None


class JetError(ArithmeticError):
    """Raised for invalid jet operations (order mismatch, division by a zero-constant jet)."""


class DomainError(ValueError):
    """Raised when a real function is evaluated outside its domain."""


# ---------------------------------------------------------------------------
# index tables


@lru_cache(maxsize=None)
def _alphas(p: int, d: int) -> tuple:
    """Multi-degrees with |alpha| <= d, graded, lexicographically descending within a degree."""
    out = []
    for deg in range(d + 1):
        level = [a for a in itertools.product(range(deg, -1, -1), repeat=p) if sum(a) == deg]
        out.extend(level)
    return tuple(out)


@lru_cache(maxsize=None)
def _index(p: int, d: int) -> dict:
    return {a: i for i, a in enumerate(_alphas(p, d))}


def size(p: int, d: int) -> int:
    return math.comb(p + d, d)


@lru_cache(maxsize=None)
def _mul_table(p: int, d: int):
    alphas = _alphas(p, d)
    index = _index(p, d)
    triples = []
    for i, a in enumerate(alphas):
        da = sum(a)
        for j, b in enumerate(alphas):
            if da + sum(b) > d:
                continue
            k = index[tuple(x + y for x, y in zip(a, b))]
            triples.append((k, i, j))
    triples.sort()
    ks = np.array([t[0] for t in triples])
    left = np.array([t[1] for t in triples])
    right = np.array([t[2] for t in triples])
    starts = np.flatnonzero(np.r_[True, ks[1:] != ks[:-1]])
    return left, right, starts


@lru_cache(maxsize=None)
def _embed_table(p: int, d: int, q: int, D: int) -> np.ndarray:
    index = _index(p + q, D)
    return np.array([index[a + (0,) * q] for a in _alphas(p, d)], dtype=int)


@lru_cache(maxsize=None)
def _slice_table(p: int, q: int, D: int, beta: tuple, dout: int) -> np.ndarray:
    index = _index(p + q, D)
    return np.array([index[a + beta] for a in _alphas(p, dout)], dtype=int)


@lru_cache(maxsize=None)
def _shift_table(p: int, d: int, axis: int):
    index = _index(p, d)
    src, fac = [], []
    for a in _alphas(p, d - 1):
        b = list(a)
        b[axis] += 1
        src.append(index[tuple(b)])
        fac.append(a[axis] + 1)
    return np.array(src, dtype=int), np.array(fac, dtype=float)


@lru_cache(maxsize=None)
def _factorials(p: int, d: int) -> np.ndarray:
    return np.array([math.prod(math.factorial(x) for x in a) for a in _alphas(p, d)], dtype=float)


# ---------------------------------------------------------------------------
# the jet type


def _bshape(c: np.ndarray) -> tuple:
    return c.shape[1:]


def _align(a: np.ndarray, b: np.ndarray):
    """Give two coefficient arrays batch axes that broadcast numpy-style."""
    da, db = a.ndim, b.ndim
    if da < db:
        a = a.reshape(a.shape[:1] + (1,) * (db - da) + a.shape[1:])
    elif db < da:
        b = b.reshape(b.shape[:1] + (1,) * (da - db) + b.shape[1:])
    return a, b


class Jet:
    """Truncated Taylor expansion in ``p`` parameters through total degree ``d``."""

    __slots__ = ("p", "d", "c")
    __array_ufunc__ = None  # make numpy defer to the reflected jet operators

    def __init__(self, p: int, d: int, coeffs):
        c = np.asarray(coeffs)
        if c.dtype.kind not in "fc":
            c = c.astype(float)
        if c.shape[0] != size(p, d):
            raise JetError(f"jet with p={p}, d={d} needs {size(p, d)} coefficients, got {c.shape[0]}")
        self.p = p
        self.d = d
        self.c = c

    # constructors -------------------------------------------------------
    @classmethod
    def constant(cls, value, p: int, d: int) -> "Jet":
        v = np.asarray(value)
        dtype = np.result_type(v.dtype, float)
        c = np.zeros((size(p, d),) + v.shape, dtype=dtype)
        c[0] = v
        return cls(p, d, c)

    @classmethod
    def variable(cls, value, axis: int, p: int, d: int) -> "Jet":
        j = cls.constant(value, p, d)
        if d >= 1:
            j.c[1 + axis] = 1.0
        return j

    # basic properties ---------------------------------------------------
    @property
    def value(self):
        return self.c[0]

    @property
    def batch_shape(self) -> tuple:
        return _bshape(self.c)

    def coeff(self, alpha: Sequence[int]):
        return self.c[_index(self.p, self.d)[tuple(alpha)]]

    def __repr__(self) -> str:
        return f"Jet(p={self.p}, d={self.d}, coeffs={self.c!r})"

    def copy(self) -> "Jet":
        return Jet(self.p, self.d, self.c.copy())

    def truncate(self, order: int) -> "Jet":
        if order > self.d:
            raise JetError(f"cannot raise jet order from {self.d} to {order}")
        return Jet(self.p, order, self.c[: size(self.p, order)])

    def shift(self, axis: int = 0) -> "Jet":
        """Partial derivative with respect to parameter ``axis``; the order drops by one."""
        if self.d < 1:
            raise JetError("cannot differentiate an order-0 jet")
        src, fac = _shift_table(self.p, self.d, axis)
        fac = fac.reshape((-1,) + (1,) * len(self.batch_shape))
        return Jet(self.p, self.d - 1, self.c[src] * fac)

    def derivatives(self) -> np.ndarray:
        """All mixed partials alpha! * c_alpha in storage order."""
        f = _factorials(self.p, self.d).reshape((-1,) + (1,) * len(self.batch_shape))
        return self.c * f

    # arithmetic ---------------------------------------------------------
    def _check(self, other: "Jet") -> None:
        if other.p != self.p or other.d != self.d:
            raise JetError(f"jet shape mismatch: (p={self.p}, d={self.d}) vs (p={other.p}, d={other.d})")

    def __neg__(self) -> "Jet":
        return Jet(self.p, self.d, -self.c)

    def __pos__(self) -> "Jet":
        return self

    def __add__(self, other) -> "Jet":
        if isinstance(other, Jet):
            self._check(other)
            a, b = _align(self.c, other.c)
            return Jet(self.p, self.d, a + b)
        other = np.asarray(other)
        a, b = _align(self.c, other[None])
        c = np.array(np.broadcast_to(a, (a.shape[0],) + np.broadcast_shapes(a.shape[1:], b.shape[1:])),
                     dtype=np.result_type(a.dtype, b.dtype))
        c[0] = c[0] + b[0]
        return Jet(self.p, self.d, c)

    __radd__ = __add__

    def __sub__(self, other) -> "Jet":
        return self + (-other)

    def __rsub__(self, other) -> "Jet":
        return (-self) + other

    def __mul__(self, other) -> "Jet":
        if isinstance(other, Jet):
            self._check(other)
            left, right, starts = _mul_table(self.p, self.d)
            a, b = _align(self.c, other.c)
            prod = a[left] * b[right]
            return Jet(self.p, self.d, np.add.reduceat(prod, starts, axis=0))
        a, b = _align(self.c, np.asarray(other)[None])
        return Jet(self.p, self.d, a * b)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Jet":
        if isinstance(other, Jet):
            q = self * other.reciprocal()
            # exact quotient for the value, so degree-0 jets agree with plain division
            q.c[0] = self.c[0] / other.c[0]
            return q
        other = np.asarray(other)
        if np.any(other == 0):
            raise JetError("division by zero")
        a, b = _align(self.c, other[None])
        return Jet(self.p, self.d, a / b)

    def __rtruediv__(self, other) -> "Jet":
        q = self.reciprocal() * other
        q.c[0] = other / self.c[0]
        return q

    def __pow__(self, exponent) -> "Jet":
        return power(self, exponent)

    # series composition -------------------------------------------------
    def compose(self, series: Sequence) -> "Jet":
        """Apply g(a) = sum_n series[n] * (a - a0)**n, with series[n] = g^(n)(a0)/n!."""
        h = self.c.copy()
        h[0] = 0
        h = Jet(self.p, self.d, h)
        n = min(len(series) - 1, self.d)
        acc = Jet.constant(series[n], self.p, self.d)
        for k in range(n - 1, -1, -1):
            acc = acc * h + series[k]
        return acc

    def reciprocal(self) -> "Jet":
        a0 = self.c[0]
        if np.any(a0 == 0):
            raise JetError("division by a jet with zero constant term")
        inv = 1.0 / a0
        series = [inv]
        for _ in range(self.d):
            series.append(-series[-1] * inv)
        return self.compose(series)


def is_jet(x) -> bool:
    return isinstance(x, Jet)


def value_of(x):
    """Constant term of a jet, or the value itself."""
    return x.c[0] if isinstance(x, Jet) else x


# ---------------------------------------------------------------------------
# elementary functions (dispatching on plain scalars, arrays and jets)


def _is_complex(x) -> bool:
    return np.iscomplexobj(x)


def _require(cond, message: str) -> None:
    if not np.all(cond):
        raise DomainError(message)


def sqrt(x):
    if isinstance(x, Jet):
        a0 = x.c[0]
        if not _is_complex(a0):
            _require(~(a0 < 0), "sqrt of a negative real number")
        if x.d >= 1:
            _require(a0 != 0, "sqrt is not differentiable at 0")
        series = [np.sqrt(a0)]
        coef = 1.0
        for n in range(1, x.d + 1):
            coef *= (0.5 - (n - 1)) / n
            series.append(coef * a0 ** (0.5 - n))
        return x.compose(series)
    if _is_complex(x):
        return np.sqrt(x)
    _require(~(np.asarray(x) < 0), "sqrt of a negative real number")
    return np.sqrt(x)


def exp(x):
    if isinstance(x, Jet):
        e = np.exp(x.c[0])
        return x.compose([e / math.factorial(n) for n in range(x.d + 1)])
    return np.exp(x)


def log(x):
    if isinstance(x, Jet):
        a0 = x.c[0]
        if not _is_complex(a0):
            _require(~(a0 <= 0), "log of a nonpositive real number")
        else:
            _require(a0 != 0, "log of zero")
        series = [np.log(a0)]
        for n in range(1, x.d + 1):
            series.append((-1) ** (n + 1) / (n * a0**n))
        return x.compose(series)
    if _is_complex(x):
        _require(np.asarray(x) != 0, "log of zero")
        return np.log(x)
    _require(~(np.asarray(x) <= 0), "log of a nonpositive real number")
    return np.log(x)


def sin(x):
    if isinstance(x, Jet):
        s, c = np.sin(x.c[0]), np.cos(x.c[0])
        cyc = [s, c, -s, -c]
        return x.compose([cyc[n % 4] / math.factorial(n) for n in range(x.d + 1)])
    return np.sin(x)


def cos(x):
    if isinstance(x, Jet):
        s, c = np.sin(x.c[0]), np.cos(x.c[0])
        cyc = [c, -s, -c, s]
        return x.compose([cyc[n % 4] / math.factorial(n) for n in range(x.d + 1)])
    return np.cos(x)


def fabs(x):
    if isinstance(x, Jet):
        a0 = x.c[0]
        if _is_complex(a0):
            raise DomainError("abs of a complex jet is not analytic")
        if x.d >= 1:
            _require(a0 != 0, "abs is not differentiable at 0")
        return x * np.sign(a0)
    return np.abs(x)


def _int_power(x, n: int):
    if n < 0:
        return _int_power(1.0 / x if not isinstance(x, Jet) else x.reciprocal(), -n)
    if n == 0:
        if isinstance(x, Jet):
            return Jet.constant(np.ones_like(x.c[0]), x.p, x.d)
        return np.ones_like(np.asarray(x, dtype=float)) if np.ndim(x) else 1.0
    result = None
    base = x
    while n:
        if n & 1:
            result = base if result is None else result * base
        n >>= 1
        if n:
            base = base * base
    return result


def power(x, exponent):
    """x**exponent for a constant exponent (integer exponents use repeated products)."""
    e = exponent
    if isinstance(e, complex):
        if e.imag != 0:
            raise DomainError("complex exponents are not supported")
        e = e.real
    e = float(e)
    if e.is_integer() and abs(e) <= 64:
        n = int(e)
        if n < 0 and not isinstance(x, Jet) and np.any(np.asarray(x) == 0):
            raise JetError("division by zero")
        return _int_power(x, n)
    if isinstance(x, Jet):
        a0 = x.c[0]
        if not _is_complex(a0):
            _require(~(a0 <= 0), "non-integer power of a nonpositive real number")
        series = [np.power(a0, e)]
        coef = 1.0
        for n in range(1, x.d + 1):
            coef *= (e - (n - 1)) / n
            series.append(coef * np.power(a0, e - n))
        return x.compose(series)
    if not _is_complex(x):
        _require(~(np.asarray(x) <= 0), "non-integer power of a nonpositive real number")
    return np.power(x, e)


# ---------------------------------------------------------------------------
# seeding and differentiation


def jet_lift(point: Sequence, directions, order: int = 1) -> list:
    """Seed jets at ``point``: value point[i], degree-1 coefficients directions[:, i].

    ``directions`` is a p x m matrix (p parameters, m coordinates).
    """
    point = list(point)
    D = np.asarray(directions)
    if D.ndim != 2 or D.shape[1] != len(point):
        raise ValueError(f"directions must be p x {len(point)}, got shape {D.shape}")
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"order must be between 0 and {MAX_ORDER}")
    p = D.shape[0]
    out = []
    for i, v in enumerate(point):
        j = Jet.constant(v, p, order)
        if order >= 1:
            col = D[:, i].reshape((p,) + (1,) * np.ndim(v))
            j.c = j.c.astype(np.result_type(j.c.dtype, col.dtype))
            j.c[1 : 1 + p] = j.c[1 : 1 + p] + col
        out.append(j)
    return out


def derivative(j: Jet, alpha: Sequence[int]):
    """The mixed partial d^|alpha| f / dt^alpha at the base point."""
    alpha = tuple(alpha)
    if len(alpha) != j.p:
        raise ValueError(f"multi-degree must have length {j.p}")
    if sum(alpha) > j.d:
        raise JetError(f"degree {sum(alpha)} exceeds jet order {j.d}")
    return math.prod(math.factorial(a) for a in alpha) * j.coeff(alpha)


def _base_signature(values) -> tuple:
    p = d = None
    for v in values:
        if isinstance(v, Jet):
            if p is None:
                p, d = v.p, v.d
            elif (v.p, v.d) != (p, d):
                raise JetError("all jet inputs must share parameter count and order")
    return (0, 0) if p is None else (p, d)


@lru_cache(maxsize=None)
def _unit_positions(p: int, q: int, D: int) -> tuple:
    idx = _index(p + q, D)
    return tuple(idx[(0,) * p + tuple(1 if t == j else 0 for t in range(q))] for j in range(q))


@lru_cache(maxsize=None)
def _plain_hessian_table(q: int, D: int):
    """Positions and factorial weights of value, gradient and upper Hessian for p = 0."""
    idx = _index(q, D)
    pos, fac = [idx[(0,) * q]], [1.0]
    for j in range(q):
        pos.append(idx[tuple(1 if t == j else 0 for t in range(q))])
        fac.append(1.0)
    for a in range(q):
        for b in range(a, q):
            beta = [0] * q
            beta[a] += 1
            beta[b] += 1
            pos.append(idx[tuple(beta)])
            fac.append(2.0 if a == b else 1.0)
    return np.array(pos), np.array(fac)


def seeded(values: Sequence, seeds: Sequence[Sequence], extra_order: int) -> list:
    """Extend ``values`` by q = len(seeds) new parameters.

    ``seeds[j][i]`` is the derivative of input ``i`` along new parameter ``j``
    (``None`` or 0 for no dependence).  Existing jets keep their coefficients;
    the order grows by ``extra_order``.  Coefficients extracted with
    :func:`_extract` at new-parameter degree >= 1 and old degree <= the old
    order are exact.
    """
    p, d = _base_signature(values)
    q = len(seeds)
    D = d + extra_order
    N = size(p + q, D)
    batch = np.broadcast_shapes(*[v.c.shape[1:] if isinstance(v, Jet) else np.shape(v) for v in values])
    out = []
    for i, v in enumerate(values):
        if isinstance(v, Jet):
            emb = _embed_table(p, d, q, D)
            c = np.zeros((N,) + batch, dtype=v.c.dtype)
            c[emb] = v.c
        else:
            a = np.asarray(v)
            c = np.zeros((N,) + batch, dtype=np.result_type(a.dtype, float))
            c[0] = a
        for j in range(q):
            s = seeds[j][i]
            if s is None:
                continue
            if isinstance(s, Jet):
                # a jet-valued seed: place its coefficients at new-degree e_j
                beta = tuple(1 if t == j else 0 for t in range(q))
                dst = _slice_table(p, q, D, beta, d)
                sc = s.c if (s.p, s.d) == (p, d) else None
                if sc is None:
                    raise JetError("seed jets must match the input jets")
                c = c.astype(np.result_type(c.dtype, sc.dtype))
                c[dst] = c[dst] + sc
                continue
            pos = _unit_positions(p, q, D)[j]
            if type(s) is float or type(s) is int:
                if s:
                    c[pos] += s
                continue
            s_arr = np.asarray(s)
            if not np.any(s_arr != 0):
                continue
            c = c.astype(np.result_type(c.dtype, s_arr.dtype))
            c[pos] = c[pos] + s_arr
        out.append(Jet(p + q, D, c))
    return out


def _extract(result, p: int, d: int, q: int, beta: tuple):
    """Coefficient block of ``result`` at new-parameter degree ``beta`` as a (p, d) jet or plain value."""
    if not isinstance(result, Jet):
        # the function ignored its inputs: all derivatives vanish
        if any(beta):
            z = np.zeros_like(np.asarray(result, dtype=np.result_type(np.asarray(result).dtype, float)))
            return z if p == 0 else Jet.constant(z, p, d)
        return result if p == 0 else Jet.constant(result, p, d)
    src = _slice_table(p, q, result.d, beta, d)
    c = result.c[src] * float(math.prod(math.factorial(b) for b in beta))
    if p == 0:
        return c[0]
    return Jet(p, d, c)


def gradient(f: Callable, values: Sequence, indices: Optional[Sequence[int]] = None) -> list:
    """First partials of ``f`` with respect to the inputs listed in ``indices``.

    Works for plain (possibly batched) values and for jets alike; with jet
    inputs the partials come back as jets of the same order, i.e. composed
    with whatever the input jets describe.
    """
    m = len(values)
    indices = list(range(m)) if indices is None else list(indices)
    p, d = _base_signature(values)
    q = len(indices)
    seeds = [[1.0 if i == idx else None for i in range(m)] for idx in indices]
    res = f(seeded(values, seeds, 1))
    if p == 0 and isinstance(res, Jet) and res.d == 1:
        return list(res.c[1 : q + 1])
    return [_extract(res, p, d, q, tuple(1 if t == j else 0 for t in range(q))) for j in range(q)]


def hessian(f: Callable, values: Sequence, indices: Optional[Sequence[int]] = None):
    """Value, gradient and Hessian of ``f`` with respect to ``indices``.

    Returns ``(value, grad, hess)`` with ``grad`` a list and ``hess`` a nested
    list (symmetric).
    """
    m = len(values)
    indices = list(range(m)) if indices is None else list(indices)
    p, d = _base_signature(values)
    q = len(indices)
    seeds = [[1.0 if i == idx else None for i in range(m)] for idx in indices]
    res = f(seeded(values, seeds, 2))
    if p == 0 and isinstance(res, Jet) and res.d == 2:
        pos, fac = _plain_hessian_table(q, 2)
        block = res.c[pos] * fac.reshape((-1,) + (1,) * (res.c.ndim - 1))
        val, grad = block[0], list(block[1 : q + 1])
        hess = [[None] * q for _ in range(q)]
        r = q + 1
        for a in range(q):
            for b in range(a, q):
                hess[a][b] = hess[b][a] = block[r]
                r += 1
        return val, grad, hess

    def unit(*js):
        b = [0] * q
        for j in js:
            b[j] += 1
        return tuple(b)

    val = _extract(res, p, d, q, unit())
    grad = [_extract(res, p, d, q, unit(j)) for j in range(q)]
    hess = [[None] * q for _ in range(q)]
    for a in range(q):
        for b in range(a, q):
            h = _extract(res, p, d, q, unit(a, b))
            hess[a][b] = hess[b][a] = h
    return val, grad, hess


def partial(f: Callable, index: int) -> Callable:
    """The function values -> df/dvalues[index], itself jet-evaluable."""

    def df(values):
        return gradient(f, values, [index])[0]

    df.__name__ = f"d{getattr(f, '__name__', 'f')}_{index}"
    return df


# ---------------------------------------------------------------------------
# sampling


class SamplingError(RuntimeError):
    pass


def _predicate(exclusion, names: Optional[Sequence[str]]) -> Optional[Callable]:
    if exclusion is None:
        return None
    if callable(exclusion):
        return exclusion
    terms = [t.strip() for t in str(exclusion).split(",") if t.strip()]
    checks = []
    for term in terms:
        for suffix, kind in (("_nonzero", "nonzero"), ("_positive", "positive"), ("_negative", "negative")):
            if term.endswith(suffix):
                name = term[: -len(suffix)]
                break
        else:
            raise ValueError(f"unknown exclusion predicate {term!r}")
        if names is None or name not in names:
            raise ValueError(f"exclusion {term!r} refers to unknown coordinate {name!r}")
        checks.append((list(names).index(name), kind))

    def pred(pts: np.ndarray) -> np.ndarray:
        ok = np.ones(pts.shape[0], dtype=bool)
        for col, kind in checks:
            v = pts[:, col]
            if kind == "nonzero":
                ok &= np.abs(v) >= 1e-3
            elif kind == "positive":
                ok &= v >= 1e-3
            else:
                ok &= v <= -1e-3
        return ok

    return pred


@dataclass(frozen=True)
class SampleSpec:
    """Seeded uniform sampling inside a box, optionally rejecting excluded points.

    ``exclusion`` is a callable on an (count, m) array returning a boolean
    mask, or a comma-separated list of ``<name>_nonzero`` / ``<name>_positive``
    / ``<name>_negative`` predicates resolved against ``names`` (threshold 1e-3).
    """

    seed: int
    count: int
    box: tuple
    exclusion: object = None
    names: Optional[tuple] = None

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        for lo, hi in box:
            if not lo <= hi:
                raise ValueError(f"empty sampling interval [{lo}, {hi}]")
        object.__setattr__(self, "box", box)
        if self.names is not None:
            object.__setattr__(self, "names", tuple(self.names))


def sample_points(spec: SampleSpec) -> np.ndarray:
    """Deterministic (count, m) array of points in ``spec.box`` satisfying the exclusion."""
    rng = np.random.default_rng(spec.seed)
    lo = np.array([b[0] for b in spec.box])
    hi = np.array([b[1] for b in spec.box])
    pred = _predicate(spec.exclusion, spec.names)
    budget = 1000 * spec.count
    drawn = 0
    kept = []
    have = 0
    while have < spec.count:
        if drawn >= budget:
            raise SamplingError(
                f"exclusion {spec.exclusion!r} rejected too many points ({have} of {spec.count} after {drawn} draws)"
            )
        batch = min(max(spec.count, 64), budget - drawn)
        pts = lo + (hi - lo) * rng.random((batch, len(lo)))
        drawn += batch
        if pred is not None:
            pts = pts[pred(pts)]
        kept.append(pts)
        have += pts.shape[0]
    return np.concatenate(kept)[: spec.count]
