"""Exact per-mode symbol algebra in the normal covariable.

Scalars are sympy expressions in the generators ``mu``, ``a``, ``a_lam`` together
with the projection symbols ``sgn`` (the per-mode value of A/|A'|) and ``pi0``
(the kernel projection), plus any tangential labels.  The relation
``a_lam**2 = a**2 + mu**2`` is used for reduction, and ``mu = (-lambda)**(1/2)``.

Normal symbols are finite sums of ``c/(a_lam + i xi)**p``, ``c/(a_lam - i xi)**q``
and a short polynomial part in ``i xi``.  Writing ``u = a_lam + i xi`` and
``v = a_lam - i xi`` we have ``u + v = 2 a_lam``; every product reduces to
pure ``u``- or ``v``-poles through that identity.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping

import sympy as sp
from sympy.polys.rings import PolyElement, ring
from sympy import QQ

MU, A, AL = sp.symbols("mu a a_lam")
SGN, PI0 = sp.symbols("sgn pi0")
XI = sp.Symbol("xi", real=True)
LAM = sp.Symbol("lam")

BASE_GENERATORS = (MU, A, AL, SGN, PI0)

POLY_DEGREE_CAP = 1


class CutError(ValueError):
    """Raised when lambda lies on the spectral cut [0, oo)."""


def label_symbol(label: str) -> sp.Symbol:
    """Symbol standing for the per-mode scalar of a tangential operator."""
    return sp.Symbol(label)


# ---------------------------------------------------------------------------
# numeric branches

def mu_of(lam: complex) -> complex:
    lam = complex(lam)
    if lam.imag == 0.0 and lam.real >= 0.0:
        raise CutError(f"lambda={lam} lies on the cut [0, oo)")
    m = cmath.sqrt(-lam)
    return m if m.real > 0 else -m


def a_lambda(a: float, lam: complex) -> complex:
    """Principal branch of (a^2 - lambda)^(1/2) with positive real part."""
    lam = complex(lam)
    if lam.imag == 0.0 and lam.real >= 0.0:
        raise CutError(f"lambda={lam} lies on the cut [0, oo)")
    r = cmath.sqrt(a * a - lam)
    return r if r.real > 0 else -r


def sign_part(a: float) -> int:
    return 0 if a == 0 else (1 if a > 0 else -1)


# ---------------------------------------------------------------------------
# scalar coefficients

def _reduce_monomial(term: sp.Expr) -> sp.Expr:
    coeff, rest = term.as_coeff_Mul()
    powers = rest.as_powers_dict()
    e_al = powers.pop(AL, 0)
    e_sgn = powers.pop(SGN, 0)
    e_pi = powers.pop(PI0, 0)
    out = sp.Integer(1)
    if e_pi:
        # zero modes: a = 0, sgn = 0, a_lam = mu
        if powers.get(A, 0) > 0 or e_sgn > 0:
            return sp.Integer(0)
        out = PI0 * MU ** e_al
        e_al = 0
    elif e_sgn:
        out = SGN if e_sgn % 2 else (1 - PI0)
    if e_al >= 2:
        out *= (A**2 + MU**2) ** (e_al // 2) * AL ** (e_al % 2)
    else:
        out *= AL**e_al
    for base, e in powers.items():
        out *= base**e
    return coeff * out


def canonical(expr) -> sp.Expr:
    """Expanded canonical form: a_lam to power <= 1 in numerators.

    Negative a_lam powers stay as explicit factors; sgn/pi0 relations applied.
    """
    expr = sp.expand(sp.sympify(expr))
    for _ in range(50):
        new = sp.expand(sp.Add(*[_reduce_monomial(t) for t in sp.Add.make_args(expr)]))
        if new == expr:
            return new
        expr = new
    raise RuntimeError("canonical form did not stabilise")


def branch_forms(expr) -> tuple[sp.Expr, sp.Expr, sp.Expr]:
    """Values on the three sign branches a>0, a<0 and a=0."""
    expr = sp.sympify(expr)
    plus = expr.subs({SGN: 1, PI0: 0})
    minus = expr.subs({SGN: -1, PI0: 0})
    zero = expr.subs({SGN: 0, PI0: 1, A: 0}).subs(AL, MU)
    return plus, minus, zero


def _field_zero(expr) -> bool:
    num, _ = sp.fraction(sp.together(sp.expand(expr)))
    num = sp.expand(num)
    if num == 0:
        return True
    poly = sp.Poly(num, AL)
    rem = sp.rem(poly, sp.Poly(AL**2 - A**2 - MU**2, AL))
    return sp.expand(rem.as_expr()) == 0


def is_zero(expr) -> bool:
    """Exact test modulo a_lam^2 = a^2 + mu^2 on every sign branch."""
    return all(_field_zero(b) for b in branch_forms(expr))


def coeff_equal(e1, e2) -> bool:
    return is_zero(sp.sympify(e1) - sp.sympify(e2))


def matrix_equal(m1, m2) -> bool:
    m1, m2 = sp.Matrix(m1), sp.Matrix(m2)
    return m1.shape == m2.shape and all(coeff_equal(x, y) for x, y in zip(m1, m2))


@lru_cache(maxsize=4096)
def _lambdified(expr: sp.Expr, labels: tuple[str, ...], module: str):
    syms = list(BASE_GENERATORS) + [label_symbol(s) for s in labels]
    return sp.lambdify(syms, expr, modules=module, cse=True)


def free_labels(expr) -> tuple[str, ...]:
    expr = sp.sympify(expr)
    names = {s.name for s in expr.free_symbols} - {s.name for s in BASE_GENERATORS}
    return tuple(sorted(names))


def evaluate(expr, a: float, lam: complex, scalars: Mapping[str, complex] | None = None) -> complex:
    """Numeric value of a scalar at a mode ``a`` and spectral parameter ``lam``."""
    expr = sp.sympify(expr)
    scalars = scalars or {}
    labels = free_labels(expr)
    fn = _lambdified(expr, labels, "numpy")
    s = sign_part(a)
    args = [mu_of(lam), float(a), a_lambda(a, lam), s, 1 if s == 0 else 0]
    args += [scalars[name] for name in labels]
    return complex(fn(*args))


def mode_function(expr, labels: Iterable[str] = (), module: str = "numpy"):
    """Callable f(mu, a, a_lam, sgn, pi0, *labels) for fast repeated evaluation."""
    return _lambdified(sp.sympify(expr), tuple(labels), module)


def d_lambda(expr, r: int = 1) -> sp.Expr:
    """Exact r-th lambda derivative using d(mu)/d(lam) = -1/(2 mu), d(a_lam)/d(lam) = -1/(2 a_lam)."""
    if r < 0:
        raise ValueError("r must be >= 0")
    expr = sp.sympify(expr)
    for _ in range(r):
        expr = -sp.diff(expr, MU) / (2 * MU) - sp.diff(expr, AL) / (2 * AL)
        expr = sp.expand(expr)
    return expr


def dump(expr) -> str:
    """Deterministic textual form: '+'-joined monomials sorted by exponent signature.

    Grammar: ``term ('+' term)*`` with ``term := coeff ('*' gen '^' int)*`` and generators
    ordered mu, a, a_lam, sgn, pi0 then labels alphabetically.
    """
    expr = canonical(expr)
    if expr == 0:
        return "0"
    gens = list(BASE_GENERATORS) + [label_symbol(s) for s in free_labels(expr)]
    rows = []
    for t in sp.Add.make_args(expr):
        c, rest = t.as_coeff_Mul()
        pw = rest.as_powers_dict()
        sig = tuple(int(pw.get(g, 0)) for g in gens)
        parts = [str(c)] + [f"{g}^{e}" for g, e in zip(gens, sig) if e]
        rows.append((sig, "*".join(parts)))
    rows.sort(key=lambda r: tuple(-e for e in r[0]))
    return " + ".join(r[1] for r in rows)


# ---------------------------------------------------------------------------
# fast coefficient ring (sparse Laurent polynomials over QQ)

@lru_cache(maxsize=None)
def coeff_ring(labels: tuple[str, ...] = ()):
    """Sparse polynomial ring in mu, a, a_lam, sgn, pi0 and labels; negative exponents allowed."""
    names = [str(g) for g in BASE_GENERATORS] + list(labels)
    return ring(",".join(names), QQ)[0]


@lru_cache(maxsize=None)
def to_ring(R, expr) -> PolyElement:
    expr = sp.expand(sp.sympify(expr))
    gens = [sp.Symbol(str(g)) for g in R.gens]
    index = {g: i for i, g in enumerate(gens)}
    data: dict = {}
    for term in sp.Add.make_args(expr):
        if term == 0:
            continue
        c, rest = term.as_coeff_Mul()
        exps = [0] * len(gens)
        for base, e in rest.as_powers_dict().items():
            if base == 1:
                continue
            if base not in index or not e.is_Integer:
                raise ValueError(f"cannot place {term} in the coefficient ring")
            exps[index[base]] += int(e)
        key = tuple(exps)
        data[key] = data.get(key, QQ(0)) + QQ(int(sp.Rational(c).p), int(sp.Rational(c).q))
    return R({k: v for k, v in data.items() if v})


def from_ring(p) -> sp.Expr:
    if not isinstance(p, PolyElement):
        return sp.sympify(p)
    return p.as_expr()


def _coerce(c, like):
    if isinstance(like, PolyElement):
        if isinstance(c, PolyElement):
            return c
        return to_ring(like.ring, sp.sympify(c))
    return sp.sympify(c) if not isinstance(c, PolyElement) else c


def _is_nonzero(c) -> bool:
    if isinstance(c, PolyElement):
        return bool(c)
    return c != 0


# ---------------------------------------------------------------------------
# normal symbols

@lru_cache(maxsize=None)
def _uv_split(p: int, q: int) -> tuple[tuple[tuple[str, int], sp.Expr], ...]:
    """1/(u^p v^q) as pure poles, using 1/(uv) = (1/u + 1/v)/(2 a_lam)."""
    if p == 0:
        return ((("-", q), sp.Integer(1)),)
    if q == 0:
        return ((("+", p), sp.Integer(1)),)
    acc: dict = {}
    for key, c in _uv_split(p - 1, q) + _uv_split(p, q - 1):
        acc[key] = acc.get(key, 0) + c / (2 * AL)
    return tuple(sorted(acc.items()))


@lru_cache(maxsize=None)
def _key_product(k1: tuple[str, int], k2: tuple[str, int]) -> tuple[tuple[tuple[str, int], sp.Expr], ...]:
    (t1, n1), (t2, n2) = sorted([k1, k2])  # order: '+', '-', 'x'
    acc: dict = {}

    def add(key, c):
        acc[key] = acc.get(key, 0) + c

    if t1 == t2 == "x":
        add(("x", n1 + n2), 1)
    elif t1 == t2:
        add((t1, n1 + n2), 1)
    elif (t1, t2) == ("+", "-"):
        for key, c in _uv_split(n1, n2):
            add(key, c)
    else:
        # t2 == 'x': (i xi)^d times a pure pole of kind t1, order n1
        d, p = n2, n1
        if t1 == "+":  # i xi = u - a_lam
            for i in range(d + 1):
                c = sp.binomial(d, i) * (-AL) ** (d - i)
                if i < p:
                    add(("+", p - i), c)
                else:
                    e = i - p  # u^e = (i xi + a_lam)^e
                    for kk in range(e + 1):
                        add(("x", kk), c * sp.binomial(e, kk) * AL ** (e - kk))
        else:  # i xi = a_lam - v
            for i in range(d + 1):
                c = sp.binomial(d, i) * AL ** (d - i) * (-1) ** i
                if i < p:
                    add(("-", p - i), c)
                else:
                    e = i - p  # v^e = (a_lam - i xi)^e
                    for kk in range(e + 1):
                        add(("x", kk), c * sp.binomial(e, kk) * AL ** (e - kk) * (-1) ** kk)
    return tuple(sorted((k, sp.sympify(v)) for k, v in acc.items() if v != 0))


@dataclass(frozen=True)
class NormalSymbol:
    """Partial-fraction form: keys ('+',p), ('-',q) for 1/u^p, 1/v^q and ('x',d) for (i xi)^d."""

    terms: tuple = ()

    @staticmethod
    def from_dict(d: Mapping) -> "NormalSymbol":
        items = []
        for key, c in d.items():
            if not isinstance(c, PolyElement):
                c = sp.expand(c)
            if _is_nonzero(c):
                items.append((key, c))
        return NormalSymbol(tuple(sorted(items, key=lambda kv: kv[0])))

    @staticmethod
    def pole(kind: str, order: int, coeff=1) -> "NormalSymbol":
        if order < 1:
            raise ValueError("pole order must be >= 1")
        return NormalSymbol.from_dict({(kind, order): sp.sympify(coeff)})

    @staticmethod
    def const(c) -> "NormalSymbol":
        return NormalSymbol.from_dict({("x", 0): sp.sympify(c)})

    @staticmethod
    def ixi(c=1) -> "NormalSymbol":
        return NormalSymbol.from_dict({("x", 1): sp.sympify(c)})

    def as_dict(self) -> dict:
        return dict(self.terms)

    def __add__(self, other: "NormalSymbol") -> "NormalSymbol":
        d = self.as_dict()
        for k, c in other.terms:
            d[k] = d[k] + c if k in d else c
        return NormalSymbol.from_dict(d)

    def __neg__(self) -> "NormalSymbol":
        return self.scale(-1)

    def __sub__(self, other: "NormalSymbol") -> "NormalSymbol":
        return self + (-other)

    def scale(self, c) -> "NormalSymbol":
        if not self.terms:
            return self
        c = _coerce(c, self.terms[0][1])
        return NormalSymbol.from_dict({k: v * c for k, v in self.terms})

    def in_ring(self, R) -> "NormalSymbol":
        return NormalSymbol.from_dict({k: to_ring(R, from_ring(c)) for k, c in self.terms})

    def __mul__(self, other):
        if not isinstance(other, NormalSymbol):
            return self.scale(other)
        acc: dict = {}
        for k1, c1 in self.terms:
            for k2, c2 in other.terms:
                c12 = c1 * c2
                for k, c in _key_product(k1, k2):
                    term = c12 * _coerce(c, c12)
                    acc[k] = acc[k] + term if k in acc else term
        return NormalSymbol.from_dict(acc)

    __rmul__ = scale

    def i_dxi(self) -> "NormalSymbol":
        """Apply i*d/dxi."""
        acc: dict = {}
        for (kind, n), c in self.terms:
            if kind == "+":
                acc[("+", n + 1)] = n * c
            elif kind == "-":
                acc[("-", n + 1)] = -n * c
            elif n > 0:
                acc[("x", n - 1)] = -n * c
        return NormalSymbol.from_dict(acc)

    def h_plus(self) -> "NormalSymbol":
        return NormalSymbol(tuple(t for t in self.terms if t[0][0] == "+"))

    def h_minus(self) -> "NormalSymbol":
        return NormalSymbol(tuple(t for t in self.terms if t[0][0] == "-"))

    def poly_part(self) -> "NormalSymbol":
        return NormalSymbol(tuple(t for t in self.terms if t[0][0] == "x"))

    def poly_degree(self) -> int:
        return max((n for (kind, n), _ in self.terms if kind == "x"), default=-1)

    def coefficient(self, kind: str, n: int, zero=sp.Integer(0)):
        return self.as_dict().get((kind, n), zero)

    def map_coeffs(self, fn) -> "NormalSymbol":
        return NormalSymbol.from_dict({k: fn(c) for k, c in self.terms})

    def to_sympy(self) -> sp.Expr:
        out = sp.Integer(0)
        for (kind, n), c in self.terms:
            if kind == "+":
                out += c / (AL + sp.I * XI) ** n
            elif kind == "-":
                out += c / (AL - sp.I * XI) ** n
            else:
                out += c * (sp.I * XI) ** n
        return out

    def evaluate(self, xi: float, a: float, lam: complex, scalars=None) -> complex:
        al = a_lambda(a, lam)
        u, v = al + 1j * xi, al - 1j * xi
        total = 0j
        for (kind, n), c in self.terms:
            cv = evaluate(c, a, lam, scalars)
            if kind == "+":
                total += cv / u**n
            elif kind == "-":
                total += cv / v**n
            else:
                total += cv * (1j * xi) ** n
        return total

    def is_canonical(self) -> bool:
        return all(kind in "+-x" for (kind, _), _ in self.terms)

    def equals(self, other: "NormalSymbol") -> bool:
        diff = (self - other).as_dict()
        return all(is_zero(c) for c in diff.values())

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for (kind, n), c in self.terms:
            base = {"+": "(a_lam+i*xi)^-", "-": "(a_lam-i*xi)^-", "x": "(i*xi)^"}[kind]
            parts.append(f"[{dump(c)}]*{base}{n}")
        return " + ".join(parts)


def partial_fractions(f) -> NormalSymbol:
    """Canonical partial-fraction form of a rational function of ``XI``.

    Accepts a NormalSymbol (re-canonicalised) or a sympy expression whose
    denominator factors into powers of (a_lam + i xi), (a_lam - i xi) and
    (a_lam^2 + xi^2).
    """
    if isinstance(f, NormalSymbol):
        out = NormalSymbol.from_dict({}) + f
    else:
        out = _from_sympy(sp.sympify(f))
    if out.poly_degree() > POLY_DEGREE_CAP:
        raise ValueError(f"polynomial part of degree {out.poly_degree()} exceeds the cap {POLY_DEGREE_CAP}")
    return out


def _from_sympy(expr: sp.Expr) -> NormalSymbol:
    num, den = sp.fraction(sp.together(expr))
    u, v = AL + sp.I * XI, AL - sp.I * XI
    p = q = 0
    const = sp.Integer(1)
    for fac, e in sp.factor_list(den, XI)[1]:
        e = int(e)
        fac = sp.expand(fac)
        if sp.expand(fac - sp.expand(XI**2 + AL**2)) == 0 or sp.expand(fac + sp.expand(XI**2 + AL**2)) == 0:
            if sp.expand(fac + XI**2 + AL**2) == 0:
                const *= (-1) ** e
            p += e
            q += e
            continue
        ratio_u = sp.simplify(fac / u)
        ratio_v = sp.simplify(fac / v)
        if not ratio_u.has(XI):
            p += e
            const *= ratio_u**e
        elif not ratio_v.has(XI):
            q += e
            const *= ratio_v**e
        else:
            raise ValueError(f"unsupported pole factor {fac}")
    const *= sp.factor_list(den, XI)[0]
    poly = sp.Poly(sp.expand(num), XI)
    numer = NormalSymbol.from_dict({})
    for (deg,), c in poly.terms():
        numer = numer + NormalSymbol.from_dict({("x", deg): c / sp.I**deg})
    denom_inv = NormalSymbol.const(1 / const)
    if p:
        denom_inv = denom_inv * NormalSymbol.pole("+", p)
    if q:
        denom_inv = denom_inv * NormalSymbol.pole("-", q)
    return numer * denom_inv


def h_plus(f: NormalSymbol) -> NormalSymbol:
    return partial_fractions(f).h_plus()


def h_minus(f: NormalSymbol) -> NormalSymbol:
    return partial_fractions(f).h_minus()


# ---------------------------------------------------------------------------
# 2x2 symbol matrices

SymMat = list  # [[NormalSymbol, NormalSymbol], [NormalSymbol, NormalSymbol]]


def smat(rows) -> SymMat:
    return [[rows[0][0], rows[0][1]], [rows[1][0], rows[1][1]]]


def smat_mul(P: SymMat, Q: SymMat) -> SymMat:
    return [[P[i][0] * Q[0][j] + P[i][1] * Q[1][j] for j in range(2)] for i in range(2)]


def smat_left(M, P: SymMat) -> SymMat:
    """Constant coefficient matrix times symbol matrix."""
    M = sp.Matrix(M)
    return [[P[0][j].scale(M[i, 0]) + P[1][j].scale(M[i, 1]) for j in range(2)] for i in range(2)]


def smat_map(P: SymMat, fn) -> SymMat:
    return [[fn(P[i][j]) for j in range(2)] for i in range(2)]


def smat_coeff(P: SymMat, kind: str, n: int) -> sp.Matrix:
    return sp.Matrix(2, 2, lambda i, j: P[i][j].coefficient(kind, n))


def smat_orders(P: SymMat, kind: str) -> list[int]:
    return sorted({n for row in P for f in row for (k, n), _ in f.terms if k == kind})


def q_symbol() -> NormalSymbol:
    """Symbol of (A_lam^2 + D^2)^{-1}: 1/(u v)."""
    return NormalSymbol.pole("+", 1) * NormalSymbol.pole("-", 1)


def dq_symbol() -> NormalSymbol:
    """Symbol of d/dx (A_lam^2 + D^2)^{-1}."""
    return NormalSymbol.ixi() * q_symbol()


def q0_symbol() -> SymMat:
    """Symbol of the full-line inverse of [[mu, d - a], [d + a, mu]]."""
    q, dq = q_symbol(), dq_symbol()
    return smat([[q.scale(MU), q.scale(A) - dq], [-(dq + q.scale(A)), q.scale(MU)]])


# ---------------------------------------------------------------------------
# elementary identities

def xn_power_on_K(k: int) -> NormalSymbol:
    """Symbol f with x^k K = OPK(f): k!/(a_lam + i xi)^(k+1)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return NormalSymbol.pole("+", k + 1, sp.factorial(k))


def trace_symbol(k: int) -> NormalSymbol:
    """Symbol g with T x^k = OPT(g): k!/(a_lam - i xi)^(k+1)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return NormalSymbol.pole("-", k + 1, sp.factorial(k))


def compose_T_xk_K(k: int) -> sp.Expr:
    """T x^k K = k! (2 a_lam)^(-k-1)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return sp.factorial(k) / (2 * AL) ** (k + 1)


def trace_pairing(g: NormalSymbol, f: NormalSymbol) -> sp.Expr:
    """OPT(g) OPK(f) for g with v-poles and f with u-poles."""
    total = sp.Integer(0)
    for (kg, q), cg in g.terms:
        for (kf, p), cf in f.terms:
            if kg != "-" or kf != "+":
                raise ValueError("trace_pairing expects a trace symbol and a Poisson symbol")
            total += cg * cf * compose_T_xk_K(p + q - 2) / (sp.factorial(p - 1) * sp.factorial(q - 1))
    return sp.expand(total)


def poisson_terms(P: SymMat) -> list[tuple[int, sp.Matrix]]:
    """Read OPK(h+ P) as a list of (x-power, coefficient matrix): x^(p-1) K C / (p-1)!."""
    out = []
    for p in smat_orders(P, "+"):
        out.append((p - 1, smat_coeff(P, "+", p) / sp.factorial(p - 1)))
    return out


def trace_terms(P: SymMat) -> list[tuple[int, sp.Matrix]]:
    """Read OPT(h- P) as (x-power, C) with C T x^(q-1) / (q-1)!."""
    out = []
    for q in smat_orders(P, "-"):
        out.append((q - 1, smat_coeff(P, "-", q) / sp.factorial(q - 1)))
    return out


def _residual_sort(rows):
    return sorted(((k, sp.Matrix(M).applyfunc(sp.expand)) for k, M in rows), key=lambda r: -r[0])


def compose_T_xk_Q0plus(k: int) -> list[tuple[sp.Matrix, int]]:
    """T x^k Q0_+ as a list of (S, residual power) with T x^k Q0_+ = sum S T x^residual.

    Residual powers run from k+1 down to 0.
    """
    g = trace_symbol(k)
    P = smat_map(q0_symbol(), lambda f: (g * f).h_minus())
    return [(M, e) for e, M in _residual_sort(trace_terms(P))]


def compose_Q0plus_xk_K(k: int) -> list[tuple[int, sp.Matrix]]:
    """Q0_+ x^k K as a list of (residual power, S) with Q0_+ x^k K = sum x^residual K S."""
    f = xn_power_on_K(k)
    P = smat_map(q0_symbol(), lambda s: (s * f).h_plus())
    return _residual_sort(poisson_terms(P))


def closed_T_xk_q(k: int) -> dict[int, sp.Expr]:
    """Closed form of T x^k q_+: sum_{j=1}^{k+2} k!/((2a_lam)^j (k+2-j)!) T x^(k+2-j)."""
    return {k + 2 - j: sp.factorial(k) / ((2 * AL) ** j * sp.factorial(k + 2 - j)) for j in range(1, k + 3)}


def closed_T_xk_dq(k: int) -> dict[int, sp.Expr]:
    """Closed form of T x^k (dq)_+."""
    out = {k + 1: sp.Rational(1, 2) / (k + 1)}
    for j in range(1, k + 2):
        out[k + 1 - j] = out.get(k + 1 - j, 0) - sp.factorial(k) / (2 * (2 * AL) ** j * sp.factorial(k + 1 - j))
    return out


def closed_T_xk_Q0plus(k: int) -> list[tuple[sp.Matrix, int]]:
    """T x^k Q0_+ assembled from the scalar closed forms."""
    cq, cd = closed_T_xk_q(k), closed_T_xk_dq(k)
    out = []
    for e in range(k + 1, -1, -1):
        q, d = cq.get(e, 0), cd.get(e, 0)
        out.append((sp.Matrix([[MU * q, A * q - d], [-(d + A * q), MU * q]]).applyfunc(sp.expand), e))
    return out


def closed_Q0plus_xk_K(k: int) -> list[tuple[int, sp.Matrix]]:
    """Q0_+ x^k K from the reflected closed forms (q is even, dq odd under x -> -x)."""
    cq, cd = closed_T_xk_q(k), closed_T_xk_dq(k)
    out = []
    for e in range(k + 1, -1, -1):
        q, d = cq.get(e, 0), -cd.get(e, 0)
        out.append((e, sp.Matrix([[MU * q, A * q - d], [-(d + A * q), MU * q]]).applyfunc(sp.expand)))
    return out


def g_plusminus_of_Q0(sign: int) -> sp.Matrix:
    """S1 with G^+(Q0) = K S1^+ T (sign=+1) or G^-(Q0) = K S1^- T (sign=-1)."""
    P = q0_symbol()
    kind = "+" if sign > 0 else "-"
    for row in P:
        for f in row:
            part = f.h_plus() if sign > 0 else f.h_minus()
            if any(n != 1 for (_, n), _ in part.terms):
                raise AssertionError("unexpected higher pole in Q0")
    return smat_coeff(P, kind, 1).applyfunc(sp.expand)


def s1_closed(sign: int) -> sp.Matrix:
    s = 1 if sign > 0 else -1
    return sp.Matrix([[MU, s * AL + A], [s * AL - A, MU]]) / (2 * AL)
