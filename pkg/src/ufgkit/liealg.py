"""Multi-indices, vector fields, Lie brackets and the bracket hierarchy.

A multi-index is a plain tuple over ``{0, ..., d}``; entry 0 stands for the
drift field and counts twice in the length.  The hierarchy maps each index
``alpha`` with ``length(alpha) <= m`` to the iterated bracket
``[[V_a1, V_a2], ...]`` and exposes a deduplicated, sign-normalised basis
of the nonzero fields.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .symexpr import Expr, differentiate, is_zero

MultiIndex = tuple


class MultiIndexError(ValueError):
    pass


def validate(alpha: Sequence[int], d: int | None = None) -> MultiIndex:
    alpha = tuple(int(a) for a in alpha)
    if not alpha:
        raise MultiIndexError("multi-index must be nonempty")
    if alpha == (0,):
        raise MultiIndexError("the singleton (0) is not a valid multi-index")
    if any(a < 0 or (d is not None and a > d) for a in alpha):
        raise MultiIndexError(f"entries of {alpha} must lie in 0..{d}")
    return alpha


def length(alpha: Sequence[int]) -> int:
    return len(alpha) + sum(1 for a in alpha if a == 0)


def concat(alpha: Sequence[int], beta: Sequence[int]) -> MultiIndex:
    return tuple(alpha) + tuple(beta)


def index_label(alpha: Sequence[int]) -> str:
    """Compact label: digits joined when all entries are single digits."""
    if all(a < 10 for a in alpha):
        return "".join(str(a) for a in alpha)
    return "_".join(str(a) for a in alpha)


def enumerate_indices(d: int, m: int, exact: bool = False) -> list[MultiIndex]:
    """All valid multi-indices over ``0..d`` with length ``<= m`` (``== m`` if
    ``exact``), lengths ascending and lexicographic within each length."""
    out: list[MultiIndex] = []
    for n in range(1, m + 1):
        for alpha in itertools.product(range(d + 1), repeat=n):
            if alpha == (0,) or length(alpha) > m:
                continue
            if exact and length(alpha) != m:
                continue
            out.append(alpha)
    out.sort(key=lambda a: (length(a), a))
    return out


class VectorField:
    """First-order differential operator ``sum_j V^j d_j`` with Expr components."""

    __slots__ = ("components", "dim")

    def __init__(self, components: Iterable[Expr | int | float]):
        comps = [c if isinstance(c, Expr) else Expr.const(c) for c in components]
        self.dim = len(comps)
        if self.dim == 0:
            raise ValueError("vector field needs at least one component")
        self.components = tuple(c.with_dim(self.dim) for c in comps)

    @classmethod
    def zero(cls, dim: int) -> "VectorField":
        return cls([Expr.zero(dim)] * dim)

    @classmethod
    def coordinate(cls, i: int, dim: int) -> "VectorField":
        return cls([Expr.const(1 if j == i else 0, dim) for j in range(dim)])

    def _check(self, other: "VectorField"):
        if not isinstance(other, VectorField):
            raise TypeError("expected a VectorField")
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def apply(self, f: Expr) -> Expr:
        """The directional derivative ``V f``."""
        f = f.with_dim(self.dim) if f.dim is None else f
        out = Expr.zero(self.dim)
        for j, c in enumerate(self.components):
            if c:
                out = out + c * differentiate(f, j)
        return out

    def __add__(self, other):
        self._check(other)
        return VectorField(a + b for a, b in zip(self.components, other.components))

    def __sub__(self, other):
        self._check(other)
        return VectorField(a - b for a, b in zip(self.components, other.components))

    def __neg__(self):
        return VectorField(-c for c in self.components)

    def scale(self, s: Expr | int | float | Fraction) -> "VectorField":
        if isinstance(s, Expr):
            s = s.with_dim(self.dim) if s.dim is None else s
        return VectorField(s * c for c in self.components)

    __rmul__ = scale

    def is_zero(self) -> bool:
        return all(is_zero(c) for c in self.components)

    def is_structurally_zero(self) -> bool:
        return all(c.is_structurally_zero() for c in self.components)

    def bind(self, params: Mapping[str, object]) -> "VectorField":
        return VectorField(c.bind(params) for c in self.components)

    @property
    def parameters(self) -> frozenset[str]:
        return frozenset().union(*(c.parameters for c in self.components))

    def evaluate(self, point, params=None) -> np.ndarray:
        return np.array([c(point, params) for c in self.components])

    def leading_coefficient(self):
        for c in self.components:
            if c.terms:
                return c.terms[0].coeff
        return None

    def normalized(self) -> tuple["VectorField", int]:
        """Sign-normalised copy (first nonzero coefficient positive) and the sign used."""
        lead = self.leading_coefficient()
        if lead is not None and lead < 0:
            return -self, -1
        return self, 1

    def __eq__(self, other):
        if not isinstance(other, VectorField):
            return NotImplemented
        return self.dim == other.dim and self.components == other.components

    def __hash__(self):
        return hash(self.components)

    def to_strings(self, names=None) -> list[str]:
        return [c.to_string(names) for c in self.components]

    def __repr__(self):
        return f"VectorField({self.to_strings()})"


def bracket(v: VectorField, w: VectorField) -> VectorField:
    """Lie bracket ``[V, W] = VW - WV``."""
    v._check(w)
    return VectorField(v.apply(wi) - w.apply(vi) for vi, wi in zip(v.components, w.components))


@dataclass
class BracketHierarchy:
    """Iterated brackets of ``fields = (V_0, ..., V_d)`` for ``length <= m``.

    ``entries`` covers every index of the enumerated set; ``basis`` lists the
    representative indices of the distinct nonzero fields (up to sign) and
    ``sign_map`` sends every nonzero index to ``(representative, +-1)``.
    Brackets beyond order ``m`` are available through :meth:`field`.
    """

    fields: tuple[VectorField, ...]
    m: int
    entries: dict = field(default_factory=dict)
    basis: list = field(default_factory=list)
    sign_map: dict = field(default_factory=dict)
    _norm_sign: dict = field(default_factory=dict, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def d(self) -> int:
        return len(self.fields) - 1

    @property
    def dim(self) -> int:
        return self.fields[0].dim

    @property
    def indices(self) -> list[MultiIndex]:
        return list(self.entries)

    def field(self, alpha: Sequence[int]) -> VectorField:
        alpha = tuple(alpha)
        hit = self._cache.get(alpha)
        if hit is not None:
            return hit
        validate(alpha, self.d)
        return self._field(alpha)

    def _field(self, alpha: MultiIndex) -> VectorField:
        # the recursion passes through the drift singleton (0,) for indices starting with 0
        hit = self._cache.get(alpha)
        if hit is not None:
            return hit
        if len(alpha) == 1:
            out = self.fields[alpha[0]]
        else:
            out = bracket(self._field(alpha[:-1]), self.fields[alpha[-1]])
        self._cache[alpha] = out
        return out

    def basis_fields(self) -> list[VectorField]:
        return [self.entries[b] for b in self.basis]

    def basis_by_length(self) -> dict[int, list[MultiIndex]]:
        out: dict[int, list[MultiIndex]] = {}
        for b in self.basis:
            out.setdefault(length(b), []).append(b)
        return out

    def representative(self, alpha: Sequence[int]) -> tuple[MultiIndex, int] | None:
        """``(basis index, sign)`` when ``V_alpha = sign * V_rep``; ``None`` for a zero field."""
        alpha = tuple(alpha)
        if alpha in self.sign_map:
            return self.sign_map[alpha]
        if alpha in self.entries:
            return None
        v = self.field(alpha)
        if v.is_zero():
            return None
        norm, sign = v.normalized()
        for b in self.basis:
            if self.entries[b].normalized()[0] == norm:
                return b, sign * self._norm_sign[b]
        return None

    def bracket_table(self) -> list[tuple[MultiIndex, int, VectorField]]:
        """Rows ``(alpha, i, [V_alpha, V_i])`` for basis ``alpha`` and every ``i``."""
        rows = []
        for alpha in self.basis:
            for i in range(self.d + 1):
                rows.append((alpha, i, self.field(alpha + (i,))))
        return rows

    def bind(self, params: Mapping[str, object]) -> "BracketHierarchy":
        return build_hierarchy([f.bind(params) for f in self.fields], self.m)


def build_hierarchy(fields: Sequence[VectorField], m: int) -> BracketHierarchy:
    if m < 1:
        raise ValueError("order m must be at least 1")
    fields = tuple(fields)
    if len(fields) < 2:
        raise ValueError("need a drift field and at least one diffusion field")
    dim = fields[0].dim
    if any(f.dim != dim for f in fields):
        raise ValueError("all fields must share one dimension")
    h = BracketHierarchy(fields, m)
    seen: dict[VectorField, MultiIndex] = {}
    for alpha in enumerate_indices(h.d, m):
        v = h.field(alpha)
        h.entries[alpha] = v
        if v.is_zero():
            continue
        norm, sign = v.normalized()
        rep = seen.get(norm)
        if rep is None:
            seen[norm] = alpha
            h.basis.append(alpha)
            h.sign_map[alpha] = (alpha, 1)
            h._norm_sign[alpha] = sign
        else:
            rel = sign * h._norm_sign[rep]
            h.sign_map[alpha] = (rep, rel)
    return h


@dataclass(frozen=True)
class Combination:
    """Formal combination ``sum coeff_beta * V_beta`` over basis indices."""

    coeffs: dict

    @classmethod
    def zero(cls) -> "Combination":
        return cls({})

    def terms(self):
        return sorted(self.coeffs.items(), key=lambda kv: (length(kv[0]), kv[0]))

    def to_field(self, h: BracketHierarchy) -> VectorField:
        out = VectorField.zero(h.dim)
        for beta, c in self.coeffs.items():
            out = out + h.entries[beta].scale(c)
        return out

    def __add__(self, other: "Combination") -> "Combination":
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out[k] + v if k in out else v
        return Combination({k: v for k, v in out.items() if v})

    def scale(self, s) -> "Combination":
        return Combination({k: v * s for k, v in self.coeffs.items() if v * s})

    def __eq__(self, other):
        if not isinstance(other, Combination):
            return NotImplemented
        keys = set(self.coeffs) | set(other.coeffs)
        return all(self.coeffs.get(k, 0) == other.coeffs.get(k, 0) for k in keys)


def in_range_combination(h: BracketHierarchy, alpha: Sequence[int]) -> Combination:
    rep = h.representative(alpha)
    if rep is None:
        return Combination.zero()
    beta, sign = rep
    return Combination({beta: Expr.const(sign, h.dim)})


def apply_lambda_j(h: BracketHierarchy, cert, j: int, alpha: Sequence[int]) -> Combination:
    """Image of ``V_alpha`` under the j-th bracket map: ``V_{alpha*j}`` in range,
    otherwise the certificate row for ``alpha*j``."""
    alpha = tuple(alpha)
    if length(alpha) > h.m:
        raise MultiIndexError(f"{alpha} is longer than the hierarchy order {h.m}")
    target = alpha + (j,)
    if length(target) <= h.m:
        return in_range_combination(h, target)
    from .ufgcheck import UfgCertificate, expand_in_basis  # local import avoids a cycle

    return expand_in_basis(h, cert if cert is not None else UfgCertificate(h.m), target)


def apply_lambda_j_to(h: BracketHierarchy, cert, j: int, comb: Combination) -> Combination:
    """Extend the bracket map linearly to combinations with coefficient functions.

    The coefficient is pulled through formally, matching the definition on the
    span; the Leibniz correction is not part of the map."""
    out = Combination.zero()
    for beta, c in comb.coeffs.items():
        out = out + apply_lambda_j(h, cert, j, beta).scale(c)
    return out


def apply_lambda(h: BracketHierarchy, cert, alpha: Sequence[int]) -> Combination:
    """``Lambda_0 + sum_j Lambda_j Lambda_j`` applied to ``V_alpha``."""
    out = apply_lambda_j(h, cert, 0, alpha)
    for j in range(1, h.d + 1):
        out = out + apply_lambda_j_to(h, cert, j, apply_lambda_j(h, cert, j, alpha))
    return out
