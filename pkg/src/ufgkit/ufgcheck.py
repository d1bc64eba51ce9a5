"""Finite-generation certificates, the dilation condition and the drift-span test.

A certificate of order ``m`` stores, for every basis index ``alpha`` and
field index ``i`` with ``length(alpha*i) > m``, bounded coefficient
functions ``phi`` with ``V_{alpha*i} = sum_beta phi_beta V_beta``.
Coefficients are found by matching canonical term coefficients against an
ansatz (constants, or reduced trigonometric monomials) and are then
re-verified symbolically.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .liealg import (
    BracketHierarchy,
    Combination,
    MultiIndex,
    VectorField,
    build_hierarchy,
    enumerate_indices,
    in_range_combination,
    index_label,
    length,
)
from .symexpr import (
    COS,
    SIN,
    Expr,
    UnboundParameterError,
    is_bounded,
    is_zero,
    reduce_trig,
    signed_sup,
    sup_norm,
)

PIVOT_TOL = 1e-10


class UfgError(Exception):
    code = "ufg"


class MissingRow(UfgError):
    def __init__(self, row):
        super().__init__(f"no certificate row for overflow bracket {index_label(row)}")
        self.row = tuple(row)


class ResidualNonzero(UfgError):
    def __init__(self, row, component: int, residual: Expr):
        super().__init__(
            f"row {index_label(row)}: residual component {component} is {residual}"
        )
        self.row, self.component, self.residual = tuple(row), component, residual


class UnboundedPhi(UfgError):
    def __init__(self, row, beta, what: str, expr: Expr):
        super().__init__(f"row {index_label(row)}, entry {index_label(beta)}: {what} {expr} is unbounded")
        self.row, self.beta, self.expr = tuple(row), tuple(beta), expr


class NoSolution(UfgError):
    def __init__(self, row, residual_norm: float, ansatz: str):
        super().__init__(
            f"row {index_label(row)} not in the span under ansatz {ansatz!r} "
            f"(least-squares residual {residual_norm:.3g})"
        )
        self.row, self.residual_norm, self.ansatz = tuple(row), residual_norm, ansatz


class DilationError(Exception):
    code = "dilation"


class NotProportional(DilationError):
    def __init__(self, alpha):
        super().__init__(f"[V_{index_label(alpha)}, V_0] is not a multiple of V_{index_label(alpha)}")
        self.alpha = tuple(alpha)


class NonNegativeFactor(DilationError):
    def __init__(self, alpha, factor: Expr, sup: float):
        super().__init__(
            f"[V_{index_label(alpha)}, V_0] = ({factor}) V_{index_label(alpha)} with sup factor {sup:g} >= 0"
        )
        self.alpha, self.factor, self.sup = tuple(alpha), factor, sup


# --------------------------------------------------------------------------
# linear span solver


def _ansatz_functions(dim: int, ansatz) -> list[Expr]:
    """Bounded trial functions: 1, or reduced trig monomials up to a degree."""
    if ansatz in ("constants", 0, None):
        return [Expr.const(1, dim)]
    kind, degree = ansatz
    if kind != "trig":
        raise ValueError(f"unknown ansatz {ansatz!r}")
    per_coord = [(a, b) for a in range(degree + 1) for b in (0, 1) if a + b <= degree]
    out = []
    for combo in itertools.product(per_coord, repeat=dim):
        if sum(a + b for a, b in combo) > degree:
            continue
        g = Expr.const(1, dim)
        for i, (a, b) in enumerate(combo):
            g = g * Expr.sin(i, dim) ** a * Expr.cos(i, dim) ** b
        out.append(g)
    out.sort(key=lambda g: (g.terms[0].trig if g.terms else ()))
    return out


def ansatz_name(ansatz) -> str:
    if ansatz in ("constants", 0, None):
        return "constants"
    return f"{ansatz[0]}{ansatz[1]}"


def parse_ansatz(text: str):
    text = text.strip().lower()
    if text in ("constants", "const", "0"):
        return "constants"
    if text.startswith("trig"):
        return ("trig", int(text[4:] or 1))
    raise ValueError(f"unknown ansatz {text!r}")


def _param_quotients(target: VectorField, span: Sequence[VectorField]) -> list[tuple]:
    """Parameter monomials q such that q * (span monomial) can hit a target monomial."""
    tgt = {t.params for c in target.components for t in c.terms}
    src = {t.params for v in span for c in v.components for t in c.terms} or {()}
    out = {()}
    for p in tgt:
        for s in src:
            q = dict(p)
            ok = True
            for name, e in s:
                q[name] = q.get(name, 0) - e
                if q[name] < 0:
                    ok = False
                    break
            if ok:
                out.add(tuple(sorted((k, v) for k, v in q.items() if v)))
    return sorted(out)


def _param_expr(q, dim) -> Expr:
    e = Expr.const(1, dim)
    for name, p in q:
        e = e * Expr.param(name, dim) ** p
    return e


def _vectorize(v: VectorField) -> dict:
    out = {}
    for i, c in enumerate(v.components):
        for t in reduce_trig(c).terms:
            out[(i, t.key)] = t.coeff
    return out


def _rref_solve(columns: list[dict], target: dict) -> list | None:
    """Exact Gauss-Jordan elimination; returns one solution (free variables 0) or None."""
    keys = sorted(set(target).union(*columns)) if columns else sorted(target)
    n = len(columns)
    rows = []
    for k in keys:
        rows.append([Fraction(col.get(k, 0)) for col in columns] + [Fraction(target.get(k, 0))])
    pivots = []
    r = 0
    for c in range(n):
        best = max(range(r, len(rows)), key=lambda i: abs(rows[i][c]), default=None)
        if best is None or abs(rows[best][c]) <= PIVOT_TOL:
            continue
        rows[r], rows[best] = rows[best], rows[r]
        piv = rows[r][c]
        rows[r] = [v / piv for v in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    for i in range(r, len(rows)):
        if abs(rows[i][n]) > PIVOT_TOL:
            return None
    sol = [Fraction(0)] * n
    for i, c in enumerate(pivots):
        sol[c] = rows[i][n]
    return sol


def _lstsq_residual(columns: list[dict], target: dict) -> tuple[float, dict]:
    keys = sorted(set(target).union(*columns)) if columns else sorted(target)
    if not keys:
        return 0.0, {}
    a = np.array([[float(col.get(k, 0)) for col in columns] for k in keys]).reshape(len(keys), len(columns))
    b = np.array([float(target.get(k, 0)) for k in keys])
    if columns:
        x, *_ = np.linalg.lstsq(a, b, rcond=None)
        res = b - a @ x
    else:
        res = b
    per_comp: dict[int, float] = {}
    for (comp, _), r in zip(keys, res):
        per_comp[comp] = per_comp.get(comp, 0.0) + r * r
    return float(np.linalg.norm(res)), {c: math.sqrt(v) for c, v in per_comp.items()}


def express_in_span(
    target: VectorField,
    span: Mapping[MultiIndex, VectorField],
    ansatz="constants",
) -> dict[MultiIndex, Expr] | tuple[float, dict]:
    """Coefficients ``phi`` with ``target = sum phi_beta span[beta]``.

    Returns the coefficient map, or ``(residual_norm, per_component_residual)``
    when the ansatz admits no exact solution."""
    dim = target.dim
    funcs = _ansatz_functions(dim, ansatz)
    quots = _param_quotients(target, list(span.values()))
    labels, columns = [], []
    for beta, v in span.items():
        for q in quots:
            qe = _param_expr(q, dim)
            for g in funcs:
                col = _vectorize(v.scale(qe * g))
                if col:
                    labels.append((beta, qe * g))
                    columns.append(col)
    rhs = _vectorize(target)
    sol = _rref_solve(columns, rhs)
    if sol is None:
        return _lstsq_residual(columns, rhs)
    out: dict[MultiIndex, Expr] = {}
    for (beta, g), x in zip(labels, sol):
        if x != 0:
            out[beta] = out.get(beta, Expr.zero(dim)) + g * x
    return {b: e for b, e in out.items() if e}


# --------------------------------------------------------------------------
# certificates


@dataclass
class PhiReport:
    bounded: bool
    sup: float | None
    derivative_bounded: tuple[bool, ...]
    derivative_sups: tuple[float | None, ...]


@dataclass
class UfgCertificate:
    m: int
    rows: dict = field(default_factory=dict)
    verified: bool = False
    boundedness_report: dict = field(default_factory=dict)
    ansatz: dict = field(default_factory=dict)

    def row(self, alpha) -> dict:
        return self.rows.get(tuple(alpha), {})

    def bind(self, params: Mapping[str, object]) -> "UfgCertificate":
        rows = {r: {b: e.bind(params) for b, e in row.items()} for r, row in self.rows.items()}
        return UfgCertificate(self.m, rows, False, {}, dict(self.ansatz))


def overflow_rows(h: BracketHierarchy, m: int | None = None) -> list[MultiIndex]:
    m = h.m if m is None else m
    out = []
    for alpha in h.basis:
        for i in range(h.d + 1):
            if length(alpha) + (2 if i == 0 else 1) > m:
                out.append(alpha + (i,))
    return out


def _safe_sup(e: Expr, params) -> float | None:
    try:
        return sup_norm(e, params=params)[0]
    except UnboundParameterError:
        return None


def verify_certificate(
    h: BracketHierarchy, cert: UfgCertificate, params: Mapping[str, object] | None = None
) -> UfgCertificate:
    """Check every overflow row symbolically and the boundedness of each phi
    and of its first derivatives along the diffusion fields.  Sets
    ``cert.verified`` and fills ``cert.boundedness_report``; raises on the
    first failure."""
    if cert.m != h.m:
        raise ValueError(f"certificate order {cert.m} differs from hierarchy order {h.m}")
    cert.verified = False
    report = {}
    for row in overflow_rows(h):
        target = h.field(row)
        coeffs = cert.rows.get(row)
        if coeffs is None:
            if target.is_zero():
                continue
            raise MissingRow(row)
        combo = VectorField.zero(h.dim)
        for beta, phi in coeffs.items():
            if beta not in h.entries:
                raise ValueError(f"row {index_label(row)} references unknown index {beta}")
            combo = combo + h.entries[beta].scale(phi)
        resid = target - combo
        for comp, c in enumerate(resid.components):
            if not is_zero(c):
                raise ResidualNonzero(row, comp, c)
        for beta, phi in coeffs.items():
            if not is_bounded(phi):
                raise UnboundedPhi(row, beta, "coefficient", phi)
            ders = [h.fields[j].apply(phi) for j in range(1, h.d + 1)]
            for der in ders:
                if not is_bounded(der):
                    raise UnboundedPhi(row, beta, "derivative", der)
            report[(row, beta)] = PhiReport(
                True,
                _safe_sup(phi, params),
                tuple(True for _ in ders),
                tuple(_safe_sup(der, params) for der in ders),
            )
    cert.boundedness_report = report
    cert.verified = True
    return cert


DEFAULT_ANSATZ_LADDER = ("constants", ("trig", 1), ("trig", 2))


def solve_certificate(
    h: BracketHierarchy,
    m: int | None = None,
    ansatz="auto",
    params: Mapping[str, object] | None = None,
) -> UfgCertificate:
    """Search each overflow row in the span of the basis; ``ansatz="auto"``
    escalates constants -> trig degree 1 -> trig degree 2 per row."""
    if m is not None and m != h.m:
        h = build_hierarchy(h.fields, m)
    ladder = DEFAULT_ANSATZ_LADDER if ansatz == "auto" else (ansatz,)
    span = {b: h.entries[b] for b in h.basis}
    cert = UfgCertificate(h.m)
    for row in overflow_rows(h):
        target = h.field(row)
        if target.is_zero():
            cert.rows[row] = {}
            cert.ansatz[row] = "constants"
            continue
        last = None
        for a in ladder:
            got = express_in_span(target, span, a)
            if isinstance(got, dict):
                cert.rows[row] = got
                cert.ansatz[row] = ansatz_name(a)
                break
            last = (got[0], a)
        else:
            raise NoSolution(row, last[0], ansatz_name(last[1]))
    return verify_certificate(h, cert, params)


def expand_in_basis(h: BracketHierarchy, cert: UfgCertificate, mu: Sequence[int], _memo=None) -> Combination:
    """Write ``V_mu`` for an arbitrary index as a combination of basis fields,
    using the certificate for overflow and the Leibniz rule
    ``[phi V_b, V_i] = phi [V_b, V_i] - (V_i phi) V_b`` beyond it."""
    mu = tuple(mu)
    memo = {} if _memo is None else _memo
    if mu in memo:
        return memo[mu]
    if length(mu) <= h.m:
        out = in_range_combination(h, mu)
    elif mu in cert.rows:
        out = Combination({b: c for b, c in cert.rows[mu].items() if c})
    elif mu[:-1] in h.sign_map and h.sign_map[mu[:-1]][0] == mu[:-1]:
        # basis representative times a field index, but no row
        if h.field(mu).is_zero():
            out = Combination.zero()
        else:
            raise MissingRow(mu)
    else:
        i = mu[-1]
        inner = expand_in_basis(h, cert, mu[:-1], memo)
        out = Combination.zero()
        vi = h.fields[i]
        for beta, phi in inner.coeffs.items():
            out = out + expand_in_basis(h, cert, beta + (i,), memo).scale(phi)
            dphi = vi.apply(phi)
            if dphi:
                out = out + Combination({beta: -dphi})
    memo[mu] = out
    return out


# --------------------------------------------------------------------------
# dilation condition


@dataclass
class DilationCertificate:
    factors: dict
    sups: dict
    lambda0: float

    def __post_init__(self):
        if not self.lambda0 > 0:
            raise ValueError("lambda0 must be positive")


def _divide_term(num: Expr, den: Expr) -> Expr | None:
    """Exact quotient ``num / den`` when ``den`` is a single term, else None."""
    if len(den.terms) != 1:
        return None
    d = den.terms[0]
    dc, dp, dt = dict(d.coords), dict(d.params), {(i, k): p for i, k, p in d.trig}
    acc = []
    for t in num.terms:
        coords = dict(t.coords)
        params = dict(t.params)
        trig = {(i, k): p for i, k, p in t.trig}
        for src, sub in ((coords, dc), (params, dp), (trig, dt)):
            for key, p in sub.items():
                left = src.get(key, 0) - p
                if left < 0:
                    return None
                if left:
                    src[key] = left
                else:
                    src.pop(key, None)
        key = (
            tuple(sorted(coords.items())),
            tuple(sorted(params.items())),
            tuple(sorted((i, k, p) for (i, k), p in trig.items())),
        )
        acc.append((key, t.coeff / d.coeff))
    return Expr(acc, num.dim)


def proportionality_factor(target: VectorField, base: VectorField) -> Expr | None:
    """``c`` with ``target == c * base`` (after the trig identity), if one exists."""
    candidates = []
    for tc, bc in zip(target.components, base.components):
        if not bc:
            continue
        for num in (tc, reduce_trig(tc)):
            for den in (bc, reduce_trig(bc)):
                q = _divide_term(num, den)
                if q is not None:
                    candidates.append(q)
    if target.is_zero():
        candidates.insert(0, Expr.zero(target.dim))
    for c in candidates:
        if (target - base.scale(c)).is_zero():
            return c
    return None


def check_dilation(
    h: BracketHierarchy, params: Mapping[str, object] | None = None
) -> DilationCertificate:
    """Proportional form of the dilation condition over the basis.

    Raises :class:`NotProportional` or :class:`NonNegativeFactor`."""
    factors, sups = {}, {}
    for alpha in h.basis:
        c = proportionality_factor(h.field(alpha + (0,)), h.entries[alpha])
        if c is None:
            raise NotProportional(alpha)
        s = signed_sup(c, params)
        if not s < 0:
            raise NonNegativeFactor(alpha, c, s)
        factors[alpha], sups[alpha] = c, s
    if not factors:
        raise ValueError("hierarchy has an empty basis")
    return DilationCertificate(factors, sups, min(-s for s in sups.values()))


# --------------------------------------------------------------------------
# drift in the span of short brackets


@dataclass
class V0Result:
    ok: bool
    coefficients: dict
    residual_norm: float
    failing_components: tuple
    ansatz: str


def check_v0_condition(h: BracketHierarchy, ansatz="auto") -> V0Result:
    span = {}
    seen = set()
    for alpha in enumerate_indices(h.d, 2):
        v = h.field(alpha)
        if v.is_zero():
            continue
        norm = v.normalized()[0]
        if norm in seen:
            continue
        seen.add(norm)
        span[alpha] = v
    ladder = DEFAULT_ANSATZ_LADDER if ansatz == "auto" else (ansatz,)
    last = (math.inf, {})
    for a in ladder:
        got = express_in_span(h.fields[0], span, a)
        if isinstance(got, dict):
            bounded = all(is_bounded(c) for c in got.values())
            if bounded:
                return V0Result(True, got, 0.0, (), ansatz_name(a))
            continue
        last = (got[0], got[1], ansatz_name(a))
    norm, per_comp, name = last if len(last) == 3 else (last[0], last[1], "none")
    bad = tuple(sorted(c for c, r in per_comp.items() if r > PIVOT_TOL))
    return V0Result(False, {}, norm, bad, name)
