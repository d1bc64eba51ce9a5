"""Canonical polynomial-trigonometric expressions on R^N.

An :class:`Expr` is a finite sum of terms ``c * x^p * k^q * sin(x_i)^s * cos(x_j)^r``
where ``x`` are coordinates (integer indices), ``k`` are named positive
parameters (treated as constants by :func:`differentiate`) and the
trigonometric atoms only take bare coordinates as arguments.  Terms are
kept in a canonical sorted order with like terms merged, so structural
equality is decidable by comparing term tuples.

Coefficients are :class:`fractions.Fraction` whenever the inputs are exact;
floats are accepted and merged with an absolute tolerance of ``1e-12``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

SIN, COS = 0, 1
FLOAT_TOL = 1e-12

_ALIASES = ("x", "y", "z")


class ExprError(ValueError):
    pass


class UnboundParameterError(ExprError):
    pass


class Term(NamedTuple):
    coeff: Fraction | float
    coords: tuple[tuple[int, int], ...]
    params: tuple[tuple[str, int], ...]
    trig: tuple[tuple[int, int, int], ...]

    @property
    def key(self):
        return (self.coords, self.params, self.trig)

    @property
    def degree(self) -> int:
        return sum(p for _, p in self.coords)


def _coerce(c):
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (bool, np.bool_)):
        raise TypeError("boolean coefficient")
    if isinstance(c, (int, np.integer)):
        return Fraction(int(c))
    if isinstance(c, (float, np.floating)):
        c = float(c)
        if not math.isfinite(c):
            raise ExprError(f"non-finite coefficient {c!r}")
        return c
    raise TypeError(f"unsupported coefficient type {type(c).__name__}")


def _is_zero_coeff(c) -> bool:
    if isinstance(c, Fraction):
        return c == 0
    return abs(c) < FLOAT_TOL


def _coeff_eq(a, b) -> bool:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a == b
    return abs(float(a) - float(b)) < FLOAT_TOL


def _merge_pows(a, b):
    if not a:
        return b
    if not b:
        return a
    out = dict(a)
    for v, p in b:
        out[v] = out.get(v, 0) + p
    return tuple(sorted(out.items()))


def _merge_trig(a, b):
    if not a:
        return b
    if not b:
        return a
    out: dict[tuple[int, int], int] = {}
    for i, kind, p in itertools.chain(a, b):
        out[(i, kind)] = out.get((i, kind), 0) + p
    return tuple(sorted((i, kind, p) for (i, kind), p in out.items()))


def _join_dim(a: int | None, b: int | None) -> int | None:
    if a is None:
        return b
    if b is None or a == b:
        return a
    raise ExprError(f"dimension mismatch: {a} vs {b}")


def _accumulate(acc: dict, key, c) -> None:
    prev = acc.get(key)
    acc[key] = c if prev is None else prev + c


class Expr:
    """Immutable canonical expression.  Build with the class constructors
    (:meth:`const`, :meth:`var`, :meth:`param`, :meth:`sin`, :meth:`cos`)
    and the arithmetic operators."""

    __slots__ = ("terms", "dim", "_hash")

    def __init__(self, terms: Mapping | Iterable = (), dim: int | None = None):
        acc: dict = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for key, c in items:
            _accumulate(acc, key, _coerce(c))
        canon = []
        for key in sorted(acc):
            c = acc[key]
            if not _is_zero_coeff(c):
                canon.append(Term(c, *key))
        self.terms: tuple[Term, ...] = tuple(canon)
        self.dim = dim
        self._hash = None

    # constructors -------------------------------------------------------
    @classmethod
    def const(cls, c, dim: int | None = None) -> "Expr":
        return cls({((), (), ()): c}, dim)

    @classmethod
    def zero(cls, dim: int | None = None) -> "Expr":
        return cls((), dim)

    @classmethod
    def var(cls, i: int, dim: int | None = None) -> "Expr":
        _check_index(i, dim)
        return cls({(((i, 1),), (), ()): 1}, dim)

    @classmethod
    def param(cls, name: str, dim: int | None = None) -> "Expr":
        return cls({((), ((name, 1),), ()): 1}, dim)

    @classmethod
    def sin(cls, i: int, dim: int | None = None) -> "Expr":
        _check_index(i, dim)
        return cls({((), (), ((i, SIN, 1),)): 1}, dim)

    @classmethod
    def cos(cls, i: int, dim: int | None = None) -> "Expr":
        _check_index(i, dim)
        return cls({((), (), ((i, COS, 1),)): 1}, dim)

    # structural queries -------------------------------------------------
    def is_structurally_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        """True when no coordinate appears (parameters are allowed)."""
        return all(not t.coords and not t.trig for t in self.terms)

    def is_number(self) -> bool:
        return self.is_constant() and all(not t.params for t in self.terms)

    def number(self):
        if not self.is_number():
            raise ExprError(f"{self} is not a number")
        return self.terms[0].coeff if self.terms else Fraction(0)

    @property
    def parameters(self) -> frozenset[str]:
        return frozenset(n for t in self.terms for n, _ in t.params)

    @property
    def coordinates(self) -> frozenset[int]:
        out = {i for t in self.terms for i, _ in t.coords}
        out.update(i for t in self.terms for i, _, _ in t.trig)
        return frozenset(out)

    @property
    def degree(self) -> int:
        return max((t.degree for t in self.terms), default=0)

    def with_dim(self, dim: int | None) -> "Expr":
        if dim is not None and any(i >= dim for i in self.coordinates):
            raise ExprError(f"expression uses coordinates beyond dimension {dim}")
        e = Expr.__new__(Expr)
        e.terms, e.dim, e._hash = self.terms, dim, None
        return e

    # arithmetic ---------------------------------------------------------
    def _wrap(self, other) -> "Expr":
        if isinstance(other, Expr):
            return other
        return Expr.const(other)

    def __add__(self, other):
        if not isinstance(other, (Expr, int, float, Fraction, np.number)):
            return NotImplemented
        other = self._wrap(other)
        dim = _join_dim(self.dim, other.dim)
        return Expr(((t.key, t.coeff) for t in itertools.chain(self.terms, other.terms)), dim)

    __radd__ = __add__

    def __neg__(self):
        return Expr(((t.key, -t.coeff) for t in self.terms), self.dim)

    def __sub__(self, other):
        if not isinstance(other, (Expr, int, float, Fraction, np.number)):
            return NotImplemented
        return self + (-self._wrap(other))

    def __rsub__(self, other):
        return self._wrap(other) - self

    def __mul__(self, other):
        if not isinstance(other, (Expr, int, float, Fraction, np.number)):
            return NotImplemented
        other = self._wrap(other)
        dim = _join_dim(self.dim, other.dim)
        acc: dict = {}
        for a in self.terms:
            for b in other.terms:
                key = (
                    _merge_pows(a.coords, b.coords),
                    _merge_pows(a.params, b.params),
                    _merge_trig(a.trig, b.trig),
                )
                _accumulate(acc, key, a.coeff * b.coeff)
        return Expr(acc, dim)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Expr):
            if not other.is_number():
                raise ExprError("division only by numeric constants")
            other = other.number()
        c = _coerce(other)
        if _is_zero_coeff(c):
            raise ZeroDivisionError("division of expression by zero")
        inv = 1 / c
        return Expr(((t.key, t.coeff * inv) for t in self.terms), self.dim)

    def __pow__(self, n: int):
        if not isinstance(n, (int, np.integer)) or n < 0:
            raise ExprError("only non-negative integer powers are supported")
        out = Expr.const(1, self.dim)
        base = self
        n = int(n)
        while n:
            if n & 1:
                out = out * base
            n >>= 1
            if n:
                base = base * base
        return out

    # comparison ---------------------------------------------------------
    def __eq__(self, other):
        if isinstance(other, (int, float, Fraction)):
            other = Expr.const(other)
        if not isinstance(other, Expr):
            return NotImplemented
        if len(self.terms) != len(other.terms):
            return False
        return all(
            a.key == b.key and _coeff_eq(a.coeff, b.coeff)
            for a, b in zip(self.terms, other.terms)
        )

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(tuple(t.key for t in self.terms))
        return self._hash

    def __bool__(self):
        return bool(self.terms)

    # calculus / evaluation ---------------------------------------------
    def diff(self, i: int) -> "Expr":
        return differentiate(self, i)

    def bind(self, params: Mapping[str, object]) -> "Expr":
        """Substitute numeric values for the parameters named in ``params``."""
        acc: dict = {}
        for t in self.terms:
            c = t.coeff
            rest = []
            for name, p in t.params:
                if name in params:
                    c = c * _coerce(params[name]) ** p
                else:
                    rest.append((name, p))
            _accumulate(acc, (t.coords, tuple(rest), t.trig), c)
        return Expr(acc, self.dim)

    def __call__(self, point, params=None) -> float:
        return evaluate(self, point, params)

    def lambdify(self, params: Mapping[str, object] | None = None) -> Callable[[np.ndarray], np.ndarray]:
        """Vectorised evaluator acting on arrays of shape ``(..., N)``."""
        bound = self.bind(params or {})
        if bound.parameters:
            raise UnboundParameterError(f"unbound parameters {sorted(bound.parameters)}")
        terms = [(float(t.coeff), t.coords, t.trig) for t in bound.terms]

        def f(x):
            x = np.asarray(x, dtype=float)
            out = np.zeros(x.shape[:-1])
            for c, coords, trig in terms:
                v = np.full(x.shape[:-1], c)
                for i, p in coords:
                    v = v * x[..., i] ** p
                for i, kind, p in trig:
                    v = v * (np.sin(x[..., i]) if kind == SIN else np.cos(x[..., i])) ** p
                out = out + v
            return out

        return f

    # printing -----------------------------------------------------------
    def to_string(self, names: Sequence[str] | None = None) -> str:
        if not self.terms:
            return "0"
        if names is None:
            n = self.dim if self.dim is not None else (max(self.coordinates, default=-1) + 1)
            names = _ALIASES[:n] if n <= 3 else [f"x{i + 1}" for i in range(n)]
        pieces = []
        for t in self.terms:
            factors = []
            for i, p in t.coords:
                factors.append(names[i] if p == 1 else f"{names[i]}^{p}")
            for name, p in t.params:
                factors.append(name if p == 1 else f"{name}^{p}")
            for i, kind, p in t.trig:
                f = f"{'sin' if kind == SIN else 'cos'}({names[i]})"
                factors.append(f if p == 1 else f"{f}^{p}")
            c = t.coeff
            neg = c < 0
            mag = -c if neg else c
            if isinstance(mag, Fraction) and mag.denominator != 1:
                cs = f"{mag.numerator}/{mag.denominator}"
            else:
                cs = str(int(mag)) if isinstance(mag, Fraction) else repr(mag)
            if factors:
                body = "*".join(factors) if mag == 1 else cs + "*" + "*".join(factors)
            else:
                body = cs
            pieces.append(("-" if neg else "+", body))
        sign, body = pieces[0]
        out = ("-" if sign == "-" else "") + body
        for sign, body in pieces[1:]:
            out += f" {sign} {body}"
        return out

    def __str__(self):
        return self.to_string()

    def __repr__(self):
        return f"Expr({self.to_string()!r})"


def _check_index(i: int, dim: int | None) -> None:
    if i < 0 or (dim is not None and i >= dim):
        raise IndexError(f"coordinate index {i} outside dimension {dim}")


def canonicalize(e: Expr) -> Expr:
    """Re-run canonical merging (idempotent)."""
    return Expr(((t.key, t.coeff) for t in e.terms), e.dim)


def differentiate(e: Expr, i: int) -> Expr:
    """Exact partial derivative with respect to coordinate ``i``."""
    _check_index(i, e.dim)
    acc: dict = {}
    for t in e.terms:
        p = dict(t.coords).get(i, 0)
        trig = {(j, kind): q for j, kind, q in t.trig}
        s = trig.get((i, SIN), 0)
        r = trig.get((i, COS), 0)
        if not (p or s or r):
            continue
        other_coords = tuple(cp for cp in t.coords if cp[0] != i)
        other_trig = tuple(tr for tr in t.trig if tr[0] != i)

        def emit(c, pp, ss, rr):
            coords = _merge_pows(other_coords, ((i, pp),) if pp else ())
            extra = tuple(x for x in ((i, SIN, ss), (i, COS, rr)) if x[2])
            _accumulate(acc, (coords, t.params, _merge_trig(other_trig, extra)), c)

        if p:
            emit(t.coeff * p, p - 1, s, r)
        if s:
            emit(t.coeff * s, p, s - 1, r + 1)
        if r:
            emit(-t.coeff * r, p, s + 1, r - 1)
    return Expr(acc, e.dim)


def evaluate(e: Expr, point: Sequence[float], params: Mapping[str, object] | None = None) -> float:
    point = [float(v) for v in point]
    if e.dim is not None and len(point) != e.dim:
        raise ExprError(f"point has dimension {len(point)}, expected {e.dim}")
    if e.coordinates and max(e.coordinates) >= len(point):
        raise ExprError("point too short for expression")
    params = params or {}
    total = 0.0
    for t in e.terms:
        v = float(t.coeff)
        for i, p in t.coords:
            v *= point[i] ** p
        for name, p in t.params:
            if name not in params:
                raise UnboundParameterError(f"parameter {name!r} has no binding")
            v *= float(params[name]) ** p
        for i, kind, p in t.trig:
            v *= (math.sin(point[i]) if kind == SIN else math.cos(point[i])) ** p
        total += v
    return total


def reduce_trig(e: Expr) -> Expr:
    """Rewrite every cos(x_i)^r with r >= 2 as cos^(r-2) * (1 - sin^2).

    The result is a unique representative modulo sin^2 + cos^2 = 1, since
    ``sin^a`` and ``sin^a cos`` are linearly independent over the
    polynomials."""
    work = [(t.key, t.coeff) for t in e.terms]
    acc: dict = {}
    while work:
        (coords, params, trig), c = work.pop()
        hit = next((k for k, tr in enumerate(trig) if tr[1] == COS and tr[2] >= 2), None)
        if hit is None:
            _accumulate(acc, (coords, params, trig), c)
            continue
        i, _, r = trig[hit]
        rest = trig[:hit] + trig[hit + 1:]
        base = _merge_trig(rest, ((i, COS, r - 2),) if r > 2 else ())
        work.append(((coords, params, base), c))
        work.append(((coords, params, _merge_trig(base, ((i, SIN, 2),))), -c))
    return Expr(acc, e.dim)


@dataclass(frozen=True)
class ZeroCheck:
    """Outcome of :func:`is_zero`.

    ``structural`` is the verdict of the raw canonical form, ``zero`` the
    verdict after the sin^2 + cos^2 = 1 rewrite, and ``flagged`` is set when
    the raw form is nonzero although every random sample vanished (a
    simplification the canonical form does not see)."""

    zero: bool
    structural: bool
    flagged: bool

    def __bool__(self):
        return self.zero


def _sample_points(e: Expr, n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    dim = e.dim if e.dim is not None else max(e.coordinates, default=-1) + 1
    pts = rng.uniform(-2.0, 2.0, size=(n, max(dim, 1)))
    params = {name: float(v) for name, v in zip(sorted(e.parameters), rng.uniform(0.5, 2.0, len(e.parameters)))}
    return pts, params


def is_zero(e: Expr, n_samples: int = 32) -> ZeroCheck:
    structural = e.is_structurally_zero()
    if structural:
        return ZeroCheck(True, True, False)
    pts, params = _sample_points(e, n_samples)
    vals = e.lambdify(params)(pts)
    flagged = bool(np.all(np.abs(vals) < 1e-12))
    return ZeroCheck(reduce_trig(e).is_structurally_zero(), False, flagged)


def is_bounded(e: Expr) -> bool:
    """True iff no term carries a coordinate monomial of positive degree."""
    return all(not t.coords for t in e.terms)


def _require_numeric(e: Expr, params) -> Expr:
    b = e.bind(params or {})
    if b.parameters:
        raise UnboundParameterError(f"unbound parameters {sorted(b.parameters)}")
    return b


def sup_norm(
    e: Expr,
    domain: Sequence[tuple[float, float]] | None = None,
    resolution: int = 64,
    params: Mapping[str, object] | None = None,
) -> tuple[float, bool]:
    """Upper bound for ``sup |e|``; returns ``(value, exact)``.

    On all of R^N (``domain=None``): constants are exact, trigonometric
    polynomials get the coefficient-sum bound, anything with a coordinate
    monomial is ``+inf``.  On a box the grid maximum is inflated by 10%.
    """
    b = _require_numeric(e, params)
    if b.is_number():
        return abs(float(b.number())), True
    if domain is None:
        if not is_bounded(b):
            return math.inf, True
        return float(sum(abs(float(t.coeff)) for t in b.terms)), False
    if resolution < 2:
        raise ExprError("resolution must be at least 2 per axis")
    axes = [np.linspace(lo, hi, resolution) for lo, hi in domain]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
    return 1.1 * float(np.max(np.abs(b.lambdify()(grid)))), False


def signed_sup(e: Expr, params: Mapping[str, object] | None = None) -> float:
    """Upper bound for ``sup_x e(x)`` (not of its absolute value)."""
    b = _require_numeric(e, params)
    if not is_bounded(b):
        return math.inf
    const = sum((float(t.coeff) for t in b.terms if not t.trig), 0.0)
    return const + sum(abs(float(t.coeff)) for t in b.terms if t.trig)
