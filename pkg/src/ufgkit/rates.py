"""Certified decay rates for the weighted gradient form.

The form is ``Gamma f = sum_alpha a_alpha |V_alpha f|^2`` over the basis of
the hierarchy.  Its time derivative along the semigroup splits into a part
``S`` driven by brackets with the diffusion fields and a part ``F`` driven
by the drift.  The generic engine bounds ``S <= gamma * Gamma`` and
``F <= -mu * Gamma`` using sup-constants of the certificate, giving the
rate ``lambda = mu - gamma``.  For small systems (order <= 2) a direct
optimiser tunes the weights and Young splits term by term.

Sums that nominally range over all indices of a given length range over
the basis here: sign duplicates and zero fields carry no weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .liealg import BracketHierarchy, index_label, length
from .symexpr import Expr, signed_sup, sup_norm
from .ufgcheck import DilationCertificate, UfgCertificate, UnboundedPhi, expand_in_basis


class RateError(Exception):
    code = "rates"


class CoefficientsViolateRecursion(RateError):
    pass


class NotSmallSystem(RateError):
    pass


def _sup(e: Expr, params) -> float:
    return sup_norm(e, params=params)[0] if e else 0.0


@dataclass
class SupConstants:
    m: int
    d: int
    basis: list
    lengths: dict
    J: dict
    H: dict
    I: dict
    diag_first: dict  # sum_j V_j phi_{g*j, g}
    diag_second: dict  # sum_j phi_{g*j*j, g}
    J_total: int
    first: dict = field(repr=False, default_factory=dict)  # (g, j) -> Combination for V_{g*j}
    second: dict = field(repr=False, default_factory=dict)  # (g, j) -> Combination for V_{g*j*j}

    def of_length(self, k: int) -> list:
        return [b for b in self.basis if self.lengths[b] == k]


def compute_sup_constants(
    h: BracketHierarchy, cert: UfgCertificate, params: Mapping[str, object] | None = None
) -> SupConstants:
    """Sup-constants of the expansion coefficients of ``V_{g*j}`` and ``V_{g*j*j}``."""
    dim, d = h.dim, h.d
    memo: dict = {}
    J, H, I, diag1, diag2, first, second = {}, {}, {}, {}, {}, {}, {}
    for g in h.basis:
        j_sup = h_sup = i_sup = 0.0
        d1 = Expr.zero(dim)
        d2 = Expr.zero(dim)
        for j in range(1, d + 1):
            e1 = expand_in_basis(h, cert, g + (j,), memo)
            e2 = expand_in_basis(h, cert, g + (j, j), memo)
            first[(g, j)], second[(g, j)] = e1, e2
            vj = h.fields[j]
            for beta, phi in e1.coeffs.items():
                s = _sup(phi, params)
                if math.isinf(s):
                    raise UnboundedPhi(g + (j,), beta, "coefficient", phi)
                j_sup = max(j_sup, s)
                dphi = vj.apply(phi)
                if beta == g:
                    d1 = d1 + dphi
                else:
                    h_sup = max(h_sup, _sup(dphi, params))
            for beta, phi in e2.coeffs.items():
                if beta == g:
                    d2 = d2 + phi
                else:
                    i_sup = max(i_sup, _sup(phi, params))
        J[g], H[g], I[g], diag1[g], diag2[g] = j_sup, h_sup, i_sup, d1, d2
    lengths = {b: length(b) for b in h.basis}
    top = [b for b in h.basis if lengths[b] == h.m]
    return SupConstants(
        h.m, d, list(h.basis), lengths, J, H, I, diag1, diag2,
        sum(1 for b in top if J[b] != 0), first, second,
    )


@dataclass
class GammaCoefficients:
    a: dict

    def __getitem__(self, alpha):
        return self.a[tuple(alpha)]

    def as_labels(self) -> dict:
        return {index_label(k): v for k, v in self.a.items()}


def policy_by_length(J_total: int, m: int) -> list[float]:
    """Deterministic weights per length: ``a_1 = max(1, J+1)``, ``a_k = J + a_{k-1}^2 + 1``."""
    out = [float(max(1, J_total + 1))]
    for _ in range(2, m + 1):
        out.append(J_total + out[-1] ** 2 + 1.0)
    return out


def choose_gamma_coefficients(s: SupConstants, m: int | None = None) -> GammaCoefficients:
    m = s.m if m is None else m
    by_len = policy_by_length(s.J_total, m)
    return GammaCoefficients({b: by_len[s.lengths[b] - 1] for b in s.basis})


def recursion_violations(a: GammaCoefficients, s: SupConstants) -> list[str]:
    """Strict weight recursion: length-1 weights above ``max(0, J)``, each
    length-k weight above ``J + (max length-(k-1) weight)^2``."""
    bad = []
    J = s.J_total
    for b in s.basis:
        k = s.lengths[b]
        if k == 1:
            if not a[b] > max(0, J):
                bad.append(f"a_{index_label(b)} = {a[b]:g} must exceed {max(0, J)}")
            continue
        prev = [a[p] for p in s.of_length(k - 1)]
        if prev and not a[b] > J + max(prev) ** 2:
            bad.append(f"a_{index_label(b)} = {a[b]:g} must exceed {J + max(prev) ** 2:g}")
    return bad


def check_recursion(a: GammaCoefficients, s: SupConstants) -> None:
    bad = recursion_violations(a, s)
    if bad:
        raise CoefficientsViolateRecursion("; ".join(bad))


def _double_step_weight(a: GammaCoefficients, s: SupConstants, h: BracketHierarchy, target) -> float:
    """Sum of ``a_src^2`` over basis ``src`` (length <= m-2) and ``j`` with
    ``V_{src*j*j}`` equal to plus or minus ``V_target``."""
    total = 0.0
    for src in s.basis:
        if s.lengths[src] > s.m - 2:
            continue
        for j in range(1, s.d + 1):
            rep = h.representative(src + (j, j))
            if rep is not None and rep[0] == target:
                total += a[src] ** 2
    return total


def compute_gamma(
    a: GammaCoefficients, s: SupConstants, h=None, cert=None, params=None
) -> tuple[float, dict]:
    check_recursion(a, s)
    m, d, nb = s.m, s.d, len(s.basis)
    top = s.of_length(m)
    h_count = lambda excl=None: sum(1 for b in top if b != excl and s.H[b] != 0)  # noqa: E731
    c = {}
    for al in s.basis:
        if s.lengths[al] == m:
            c[al] = (
                2 * a[al] ** 2 * s.J[al] ** 2 * d * nb
                + 4 * a[al] * signed_sup(s.diag_first[al], params)
                + 2 * d * h_count(al)
                + 2 * d * a[al] ** 2 * s.H[al] ** 2 * (nb - 1)
            )
        else:
            c[al] = 2 * d + 2 * d * h_count()
    gamma = max(0.0, max(c[al] / a[al] for al in s.basis))
    return gamma, c


def compute_lambda0_threshold(
    a: GammaCoefficients, s: SupConstants, h: BracketHierarchy, cert=None, params=None
) -> tuple[float, dict]:
    check_recursion(a, s)
    m, d, nb = s.m, s.d, len(s.basis)
    top, sub = s.of_length(m), s.of_length(m - 1)
    i_top = lambda excl=None: sum(1 for b in top if b != excl and s.I[b] != 0)  # noqa: E731
    i_sub = sum(1 for b in sub if s.I[b] != 0)
    ell = {}
    for al in s.basis:
        k = s.lengths[al]
        if k == m:
            ell[al] = (
                d * a[al] ** 2 * s.I[al] ** 2 * (nb - 1)
                + d * i_top(al)
                + 2 * a[al] * signed_sup(s.diag_second[al], params)
                + d * i_sub
                + _double_step_weight(a, s, h, al)
            )
        elif k == m - 1:
            ell[al] = (
                2 * a[al] * signed_sup(s.diag_second[al], params)
                + d * a[al] ** 2 * s.I[al] ** 2 * (nb - 1)
                + _double_step_weight(a, s, h, al)
                + d * i_top()
                + d * i_sub
            )
        else:
            ell[al] = (
                d
                + (_double_step_weight(a, s, h, al) if k > 2 else 0.0)
                + d * i_top()
                + d * i_sub
            )
    threshold = max(0.0, max(ell[al] / a[al] for al in s.basis))
    return threshold, ell


@dataclass
class RateReport:
    gamma: float
    lambda0_required: float
    lambda0_available: float
    mu: float
    lam: float | None
    c_values: dict
    l_values: dict
    coefficients: GammaCoefficients
    method: str
    details: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.lam is not None

    def to_dict(self) -> dict:
        lab = lambda dct: {index_label(k): float(v) for k, v in dct.items()}  # noqa: E731
        return {
            "method": self.method,
            "gamma": float(self.gamma),
            "lambda0_required": None if math.isnan(self.lambda0_required) else float(self.lambda0_required),
            "lambda0_available": float(self.lambda0_available),
            "mu": float(self.mu),
            "lambda": None if self.lam is None else float(self.lam),
            "certified": self.certified,
            "c": lab(self.c_values),
            "l": lab(self.l_values),
            "coefficients": {k: float(v) for k, v in self.coefficients.as_labels().items()},
            "details": self.details,
        }


def certify_rate(
    dil: DilationCertificate,
    a: GammaCoefficients,
    s: SupConstants,
    h: BracketHierarchy,
    cert: UfgCertificate | None = None,
    params=None,
) -> RateReport:
    """``mu = 2 lambda0 - max l/a`` and ``lambda = mu - gamma`` when positive."""
    gamma, c = compute_gamma(a, s, h, cert, params)
    threshold, ell = compute_lambda0_threshold(a, s, h, cert, params)
    mu = 2.0 * dil.lambda0 - threshold
    lam = mu - gamma if mu > gamma else None
    return RateReport(gamma, threshold, dil.lambda0, mu, lam, c, ell, a, "generic")


def certified_rate(h, cert, dil, params=None) -> RateReport:
    s = compute_sup_constants(h, cert, params)
    return certify_rate(dil, choose_gamma_coefficients(s), s, h, cert, params)


# --------------------------------------------------------------------------
# small-system optimiser


@dataclass
class _Bookkeeping:
    basis: list
    lengths: dict
    s_diag: dict  # alpha -> signed sup of the first-order S diagonal (per unit weight)
    f_diag: dict
    s_cross: dict  # (alpha, beta) -> Expr per unit weight of alpha, alpha != beta
    f_cross: dict
    absorbers: dict  # (j, beta) -> list of (alpha, sup |phi|)
    J_total: int
    lambda0: float
    params: dict


def _build_bookkeeping(h, cert, dil, params) -> _Bookkeeping:
    dim, d = h.dim, h.d
    memo: dict = {}
    s_diag, f_diag, s_cross, f_cross, absorbers = {}, {}, {}, {}, {}
    for al in h.basis:
        s_terms: dict = {}
        f_terms: dict = {}
        for j in range(1, d + 1):
            e1 = expand_in_basis(h, cert, al + (j,), memo)
            for beta, phi in e1.coeffs.items():
                dphi = h.fields[j].apply(phi)
                if dphi:
                    s_terms[beta] = s_terms.get(beta, Expr.zero(dim)) + dphi * 4
                g = _sup(phi, params)
                if g:
                    absorbers.setdefault((j, beta), []).append((al, 4 * g))
            e2 = expand_in_basis(h, cert, al + (j, j), memo)
            for beta, phi in e2.coeffs.items():
                f_terms[beta] = f_terms.get(beta, Expr.zero(dim)) + phi * 2
        e0 = expand_in_basis(h, cert, al + (0,), memo)
        for beta, phi in e0.coeffs.items():
            f_terms[beta] = f_terms.get(beta, Expr.zero(dim)) + phi * 2
        s_diag[al] = signed_sup(s_terms.pop(al, Expr.zero(dim)), params)
        f_diag[al] = signed_sup(f_terms.pop(al, Expr.zero(dim)), params)
        for beta, e in s_terms.items():
            if e:
                s_cross[(al, beta)] = e.bind(params or {})
        for beta, e in f_terms.items():
            if e:
                f_cross[(al, beta)] = e.bind(params or {})
    s = compute_sup_constants(h, cert, params)
    return _Bookkeeping(
        list(h.basis), {b: length(b) for b in h.basis}, s_diag, f_diag, s_cross, f_cross,
        absorbers, s.J_total, dil.lambda0, dict(params or {}),
    )


def _pairs(cross: dict) -> list:
    return sorted({tuple(sorted((a, b), key=lambda x: (length(x), x))) for a, b in cross})


@dataclass
class SmallSystemParameters:
    a: dict
    eps_s: dict
    eps_f: dict
    shares: dict


def _pair_coeff(cross, a, p, q) -> float:
    e = Expr.zero()
    if (p, q) in cross:
        e = e + cross[(p, q)] * a[p]
    if (q, p) in cross:
        e = e + cross[(q, p)] * a[q]
    return _sup(e, None) if e else 0.0


def bookkeeping_rate(bk: _Bookkeeping, prm: SmallSystemParameters) -> tuple[float, dict, dict]:
    """Re-derive the rate from explicit weights, Young parameters and
    absorber shares; returns ``(lambda, S per weight, F per weight)``."""
    a = prm.a
    S = {al: a[al] * bk.s_diag[al] for al in bk.basis}
    F = {al: a[al] * bk.f_diag[al] for al in bk.basis}
    for cross, eps, tgt in ((bk.s_cross, prm.eps_s, S), (bk.f_cross, prm.eps_f, F)):
        for p, q in _pairs(cross):
            k = _pair_coeff(cross, a, p, q)
            if k:
                e = eps[(p, q)]
                tgt[p] += 0.5 * k * e
                tgt[q] += 0.5 * k / e
    for key, users in bk.absorbers.items():
        _, beta = key
        shares = prm.shares[key]
        if sum(shares) > 1 + 1e-12:
            return -math.inf, S, F
        for (al, g), sh in zip(users, shares):
            S[al] += (a[al] * g) ** 2 / (8 * sh * a[beta])
    lam = min(-(S[al] + F[al]) / a[al] for al in bk.basis)
    return lam, {al: S[al] / a[al] for al in bk.basis}, {al: F[al] / a[al] for al in bk.basis}


def _recursion_ok(bk: _Bookkeeping, a: dict) -> bool:
    J = bk.J_total
    for b in bk.basis:
        k = bk.lengths[b]
        if k == 1:
            if not a[b] > max(0, J):
                return False
            continue
        prev = [a[p] for p in bk.basis if bk.lengths[p] == k - 1]
        if prev and not a[b] > J + max(prev) ** 2:
            return False
    return True


def optimize_small_system(
    h: BracketHierarchy,
    cert: UfgCertificate,
    dil: DilationCertificate,
    params: Mapping[str, object] | None = None,
    budget: int = 4000,
    bound: float = 8.0,
) -> RateReport:
    """Coordinate search in log-space over weights, Young parameters and
    absorber shares, maximising the rate of the exact term-by-term bound.

    Weights are rescaled so the smallest length-1 weight equals
    ``2 / lambda0``; candidates that then break the weight recursion are
    rejected."""
    if h.m > 2:
        raise NotSmallSystem(f"order {h.m} exceeds 2")
    bk = _build_bookkeeping(h, cert, dil, params)
    basis = bk.basis
    s_pairs, f_pairs = _pairs(bk.s_cross), _pairs(bk.f_cross)
    abs_keys = sorted(bk.absorbers)
    # coordinates: log a (basis), log eps (pairs), share logits (absorbers with >1 user)
    layout = [("a", b) for b in basis]
    layout += [("es", p) for p in s_pairs] + [("ef", p) for p in f_pairs]
    for key in abs_keys:
        if len(bk.absorbers[key]) > 1:
            layout += [("sh", (key, i)) for i in range(len(bk.absorbers[key]))]
    seed_a = policy_by_length(bk.J_total, h.m)
    theta = np.array([math.log(seed_a[bk.lengths[v] - 1]) if kind == "a" else 0.0 for kind, v in layout])
    len1 = [b for b in basis if bk.lengths[b] == 1]
    target_a1 = 2.0 / bk.lambda0

    def unpack(th):
        raw = {v: math.exp(x) for (kind, v), x in zip(layout, th) if kind == "a"}
        scale = target_a1 / min(raw[b] for b in len1) if len1 else 1.0
        a = {b: raw[b] * scale for b in basis}
        eps_s = {v: math.exp(x) for (kind, v), x in zip(layout, th) if kind == "es"}
        eps_f = {v: math.exp(x) for (kind, v), x in zip(layout, th) if kind == "ef"}
        logits: dict = {}
        for (kind, v), x in zip(layout, th):
            if kind == "sh":
                logits.setdefault(v[0], []).append(x)
        shares = {}
        for key in abs_keys:
            n = len(bk.absorbers[key])
            if n == 1:
                shares[key] = [1.0]
            else:
                z = np.exp(np.array(logits[key]) - max(logits[key]))
                shares[key] = list(z / z.sum())
        return SmallSystemParameters(a, eps_s, eps_f, shares)

    def score(th):
        prm = unpack(th)
        if not _recursion_ok(bk, prm.a):
            return -math.inf, prm
        return bookkeeping_rate(bk, prm)[0], prm

    best, _ = score(theta)
    evals = 1
    step = 2.0
    while evals < budget and step > 1e-3:
        improved = False
        for i in range(len(theta)):
            for sgn in (1.0, -1.0):
                if evals >= budget:
                    break
                cand = theta.copy()
                cand[i] = float(np.clip(cand[i] + sgn * step, -bound, bound))
                if cand[i] == theta[i]:
                    continue
                val, _ = score(cand)
                evals += 1
                if val > best + 1e-15:
                    best, theta, improved = val, cand, True
                    break
        if not improved:
            step /= 2
    lam, prm = score(theta)
    a = GammaCoefficients(prm.a)
    if math.isinf(lam):
        return RateReport(0.0, math.nan, bk.lambda0, 0.0, None, {}, {}, a, "optimized",
                          {"evaluations": evals, "feasible": False})
    lam_chk, s_part, f_part = bookkeeping_rate(bk, prm)
    gamma = max(0.0, max(s_part.values()))
    mu = lam_chk + gamma
    details = {
        "evaluations": evals,
        "feasible": True,
        "eps_s": {f"{index_label(p)},{index_label(q)}": v for (p, q), v in prm.eps_s.items()},
        "eps_f": {f"{index_label(p)},{index_label(q)}": v for (p, q), v in prm.eps_f.items()},
        "shares": {f"{j}:{index_label(b)}": list(v) for (j, b), v in prm.shares.items()},
        "drift_terms": {index_label(al): v * prm.a[al] for al, v in f_part.items()},
    }
    report = RateReport(
        gamma, math.nan, bk.lambda0, mu, lam_chk if lam_chk > 0 else None,
        {al: v * prm.a[al] for al, v in s_part.items()},
        {},
        a, "optimized", details,
    )
    report._bookkeeping = bk  # retained for re-verification
    report._parameters = prm
    return report


def recheck_small_system(report: RateReport) -> float:
    """Recompute the optimiser's rate from its own returned parameters."""
    return bookkeeping_rate(report._bookkeeping, report._parameters)[0]
