"""Per-mode resolvent blocks, singular Green traces and the perturbation engine.

Everything is written for one eigenmode ``a`` of the tangential operator and
the reduced 2x2 system ``[[mu, d - a], [d + a, mu]]`` on the half-line with
boundary condition ``Pi>= u1(0) + Pi< u2(0) = 0``.  The Laplacian resolvent
is read off the 11-block: ``R_{-mu^2} = mu^{-1} R_{mu,11}``.

Operators on the half-line are kept as a truncated pseudodifferential part in
left-normal form ``sum_i x^i OP(p_i)_+`` plus a singular Green part
``sum x^a K S T x^b``.  Products follow

* ``P_+ P'_+ = (P P')_+ - G^+(P) G^-(P')``,
* ``G^-(x^i P) = (-1)^i x^i G^-(P)`` (reflection through the boundary),
* ``OP(p)_+ OPK(f) = OPK(h^+(p f))`` and ``OPT(g) OP(p)_+ = OPT(h^-(g p))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import sympy as sp

from . import symfrac as sf
from .symfrac import A, AL, MU, PI0, SGN

# projections, per mode
P_GE = (1 + SGN + PI0) / 2
P_LT = (1 - SGN - PI0) / 2


def s_boundary() -> sp.Matrix:
    """S_B, the right inverse of the boundary operator on the solution space."""
    return sp.Matrix([[P_GE, (AL + A) / MU * P_LT], [(AL - A) / MU * P_GE, P_LT]])


def s1(sign: int) -> sp.Matrix:
    return sf.g_plusminus_of_Q0(sign)


@lru_cache(maxsize=None)
def s0() -> sp.Matrix:
    """S0 = -S_B S1^- (coefficient of the boundary correction K S0 T)."""
    return (-s_boundary() * s1(-1)).applyfunc(sf.canonical)


def s0_closed() -> sp.Matrix:
    """S0 written out entrywise."""
    f = -1 / (2 * AL)
    return sp.Matrix(
        [
            [f * (MU * P_GE - (AL + A) ** 2 / MU * P_LT), f * ((A - AL) * P_GE + (AL + A) * P_LT)],
            [f * ((AL - A) * P_GE - (AL + A) * P_LT), f * (MU * P_LT - (AL - A) ** 2 / MU * P_GE)],
        ]
    ).applyfunc(sf.canonical)


# ---------------------------------------------------------------------------
# numeric mode block

@dataclass
class ModeBlock:
    a: float
    lam: complex
    mu: complex
    a_lam: complex
    bc: str
    S_B: list
    S1m: list
    S1p: list
    S0: list

    def as_numpy(self, name: str):
        import numpy as np

        return np.array(getattr(self, name), dtype=complex)


def boundary_condition_split(a: float) -> tuple[str, float | None]:
    """Dirichlet for a >= 0, Robin u'(0) + a u(0) = 0 for a < 0."""
    return ("Dirichlet", None) if a >= 0 else ("Robin", float(a))


def _num_matrix(M: sp.Matrix, a, lam, scalars=None) -> list:
    return [[sf.evaluate(M[i, j], a, lam, scalars) for j in range(2)] for i in range(2)]


def assemble_mode_block(a: float, lam: complex) -> ModeBlock:
    mu, al = sf.mu_of(lam), sf.a_lambda(a, lam)
    return ModeBlock(
        a=float(a),
        lam=complex(lam),
        mu=mu,
        a_lam=al,
        bc=boundary_condition_split(a)[0],
        S_B=_num_matrix(s_boundary(), a, lam),
        S1m=_num_matrix(s1(-1), a, lam),
        S1p=_num_matrix(s1(1), a, lam),
        S0=_num_matrix(s0(), a, lam),
    )


def g0_trace_expr() -> sp.Expr:
    """mu^{-1} tr_n of the 11-block of K S0 T, as a scalar expression."""
    return sf.canonical(s0()[0, 0] / (2 * AL * MU))


def closed_518() -> sp.Expr:
    """The mode trace written as -1/(4 lam)[a^2/a_lam^2 + a/a_lam] + ... with lam = -mu^2."""
    lam = -MU**2
    return (
        -1 / (4 * lam) * (A**2 / AL**2 + A / AL)
        + A / (4 * lam * AL) * SGN
        + SGN / (4 * lam)
        + PI0 / (4 * lam)
    )


def dirichlet_trace(a: float, lam: complex) -> complex:
    al = sf.a_lambda(a, lam)
    return -1 / (4 * al * al)


def robin_trace(a: float, lam: complex) -> complex:
    al = sf.a_lambda(a, lam)
    b = abs(a)
    return (al - b) / (al + b) / (4 * al * al)


def trn_G0_mode(a: float, lam: complex, r: int = 0) -> complex:
    """Normal trace of d_lam^r of the Laplacian singular Green part for mode a."""
    return sf.evaluate(_trn_expr(r), a, lam)


@lru_cache(maxsize=None)
def _trn_expr(r: int) -> sp.Expr:
    return sf.d_lambda(closed_518(), r)


# ---------------------------------------------------------------------------
# perturbations

@dataclass(frozen=True)
class PerturbationTerm:
    k: int
    label: str
    order: int = 0

    @property
    def symbol(self) -> sp.Symbol:
        return sf.label_symbol(self.label)


@dataclass(frozen=True)
class PerturbationSpec:
    """P = sum_k x^k P_k with P_k acting per mode by the real scalar of ``label``."""

    terms: tuple[PerturbationTerm, ...]

    def __post_init__(self):
        for t in self.terms:
            if t.k < 0:
                raise ValueError("x-power must be >= 0")
            if t.order > 1:
                raise ValueError(f"{t.label}: tangential order {t.order} > 1 not allowed")

    @property
    def depth(self) -> int:
        return max((t.k for t in self.terms), default=-1)

    def labels(self) -> tuple[str, ...]:
        return tuple(sorted({t.label for t in self.terms}))

    def orders(self) -> dict[str, int]:
        return {t.label: t.order for t in self.terms}

    def matrices(self) -> dict[int, sp.Matrix]:
        """P_k = [[0, -p_k], [p_k, 0]] (real per-mode scalars)."""
        out: dict[int, sp.Matrix] = {}
        for t in self.terms:
            M = sp.Matrix([[0, -t.symbol], [t.symbol, 0]])
            out[t.k] = out.get(t.k, sp.zeros(2, 2)) + M
        return out

    def check_labels(self, known: Sequence[str]) -> None:
        missing = [t.label for t in self.terms if t.label not in known]
        if missing:
            raise ValueError(f"labels not declared as commuting tangential operators: {missing}")


@dataclass(frozen=True)
class SKindTerm:
    """(-lam)^{l/2} L a_lam^{-j} times sign part (a), 1 (b) or Pi0 (c)."""

    kind: str
    l: int
    m: int
    j: int
    coeff: sp.Expr
    L: sp.Expr = sp.Integer(1)

    def to_expr(self) -> sp.Expr:
        tail = {"a": SGN, "b": sp.Integer(1), "c": PI0}[self.kind]
        return self.coeff * MU**self.l * self.L * AL ** (-self.j) * tail

    def as_json(self) -> dict:
        return {"kind": self.kind, "l": self.l, "m": self.m, "j": self.j,
                "coeff": str(self.coeff), "L": str(self.L)}


@dataclass
class SgoTerm:
    """x^k K S T x^kp with a 2x2 coefficient matrix S."""

    k: int
    kp: int
    S: sp.Matrix
    skinds: list | None = None

    def normal_trace(self) -> sp.Matrix:
        return normal_trace_term(self)


def normal_trace_term(t: SgoTerm) -> sp.Matrix:
    return (sf.compose_T_xk_K(t.k + t.kp) * t.S).applyfunc(sp.expand)


def normal_trace_assembly(terms: Sequence[SgoTerm]) -> sp.Matrix:
    out = sp.zeros(2, 2)
    for t in terms:
        out += normal_trace_term(t)
    return out.applyfunc(sf.canonical)


def _label_order(sym: sp.Symbol, orders: Mapping[str, int]) -> int:
    if sym == A:
        return 1
    return orders.get(sym.name, 0)


def canonicalize_scalar(expr, orders: Mapping[str, int] | None = None) -> list[SKindTerm]:
    """Split a scalar into kinds (a)/(b)/(c) with explicit (l, m, j).

    Positive a_lam powers are traded for (a^2 + mu^2) a_lam^{-1}.
    """
    orders = orders or {}
    plus, minus, zero = sf.branch_forms(sp.sympify(expr))
    even = sp.expand((plus + minus) / 2)
    odd = sp.expand((plus - minus) / 2)
    third = sp.expand(zero - even.subs(A, 0).subs(AL, MU))
    out: dict = {}
    for kind, part in (("b", even), ("a", odd), ("c", third)):
        part = _negative_al(part)
        for term in sp.Add.make_args(part):
            if term == 0:
                continue
            c, rest = term.as_coeff_Mul()
            pw = rest.as_powers_dict()
            l = int(pw.pop(MU, 0))
            j = -int(pw.pop(AL, 0))
            L = sp.Integer(1)
            m = 0
            for base, e in pw.items():
                if base == 1:
                    continue
                if not base.is_Symbol or not (e.is_Integer and e > 0):
                    raise ValueError(f"entry not reducible to canonical kinds: {term}")
                L *= base**e
                m += int(e) * _label_order(base, orders)
            key = (kind, l, j, L)
            out[key] = out.get(key, 0) + c
    terms = [SKindTerm(kind, l, _l_order(L, orders), j, sp.nsimplify(c), L)
             for (kind, l, j, L), c in out.items() if c != 0]
    return sorted(terms, key=lambda t: (t.kind, -t.l, t.j, sf.dump(t.L)))


def _l_order(L, orders) -> int:
    m = 0
    for base, e in sp.sympify(L).as_powers_dict().items():
        if base != 1:
            m += int(e) * _label_order(base, orders)
    return m


def _negative_al(expr) -> sp.Expr:
    expr = sp.expand(expr)
    for _ in range(20):
        changed = False
        terms = []
        for t in sp.Add.make_args(expr):
            e = t.as_powers_dict().get(AL, 0)
            if e > 0:
                terms.append(sp.expand(t / AL**e * (A**2 + MU**2) ** ((e + 1) // 2) * AL ** (e - 2 * ((e + 1) // 2))))
                changed = True
            else:
                terms.append(t)
        expr = sp.expand(sp.Add(*terms))
        if not changed:
            return expr
    raise RuntimeError("positive a_lam powers persist")


def skinds_to_expr(terms: Sequence[SKindTerm]) -> sp.Expr:
    return sp.Add(*[t.to_expr() for t in terms])


def canonicalize_skinds(terms: Sequence[SgoTerm], orders: Mapping[str, int] | None = None) -> list[SgoTerm]:
    out = []
    for t in terms:
        kinds = [[canonicalize_scalar(t.S[i, j], orders) for j in range(2)] for i in range(2)]
        S = sp.Matrix(2, 2, lambda i, j: skinds_to_expr(kinds[i][j]))
        if not sf.matrix_equal(S, t.S):
            raise ValueError("canonical kinds do not reproduce the entry")
        out.append(SgoTerm(t.k, t.kp, S, kinds))
    return out


# ---------------------------------------------------------------------------
# half-line operator algebra (coefficients in a sparse Laurent ring)

def _mm(X, Y):
    return [[X[i][0] * Y[0][j] + X[i][1] * Y[1][j] for j in range(2)] for i in range(2)]


def _madd(X, Y):
    return [[X[i][j] + Y[i][j] for j in range(2)] for i in range(2)]


def _mscale(X, c):
    return [[X[i][j] * c for j in range(2)] for i in range(2)]


def _mnonzero(X) -> bool:
    return any(bool(X[i][j]) for i in range(2) for j in range(2))


def _to_rmat(R, M):
    M = sp.Matrix(M)
    return [[sf.to_ring(R, M[i, j]) for j in range(2)] for i in range(2)]


def _from_rmat(X) -> sp.Matrix:
    return sp.Matrix(2, 2, lambda i, j: sf.from_ring(X[i][j]))


def _rcoeff(P, kind, n, zero):
    return [[P[i][j].coefficient(kind, n, zero) for j in range(2)] for i in range(2)]


def _add_psi(acc: dict, i: int, P):
    acc[i] = [[acc[i][r][c] + P[r][c] for c in range(2)] for r in range(2)] if i in acc else P


def _add_sgo(acc: dict, key, S):
    acc[key] = _madd(acc[key], S) if key in acc else S


def _psi_nonzero(P) -> bool:
    return any(f.terms for row in P for f in row)


class Algebra:
    """Ring context for one perturbation spec (labels fixed)."""

    def __init__(self, labels: tuple[str, ...] = ()):
        self.R = sf.coeff_ring(tuple(labels))
        self.zero = self.R(0)
        self.one = self.R(1)
        self._fact = {}

    def c(self, expr):
        return sf.to_ring(self.R, sp.sympify(expr))

    def mat(self, M):
        return _to_rmat(self.R, M)

    def sym(self, f: sf.NormalSymbol) -> sf.NormalSymbol:
        return f.in_ring(self.R)

    def smat(self, P):
        return sf.smat_map(P, self.sym)

    def tk(self, n: int):
        """T x^n K = n!/(2 a_lam)^(n+1) as a ring element."""
        if n not in self._fact:
            self._fact[n] = self.c(sf.compose_T_xk_K(n))
        return self._fact[n]

    def q0(self):
        return self.smat(sf.q0_symbol())

    def s0(self):
        return self.mat(s0())


@dataclass
class HalfLineOp:
    """sum_i x^i OP(psi[i])_+  +  sum_(a,b) x^a K sgo[(a,b)] T x^b, over an Algebra."""

    alg: Algebra
    psi: dict = field(default_factory=dict)
    sgo: dict = field(default_factory=dict)

    def sgo_terms(self) -> list["SgoTerm"]:
        return [SgoTerm(a, b, _from_rmat(S)) for (a, b), S in sorted(self.sgo.items()) if _mnonzero(S)]

    def mul(self, other: "HalfLineOp", need_psi: bool = True) -> "HalfLineOp":
        alg = self.alg
        psi: dict = {}
        if need_psi:
            for i, P in self.psi.items():
                for ip, Pp in other.psi.items():
                    D = P
                    for j in range(ip + 1):
                        # OP(p) x^ip = sum_j C(ip, j) x^(ip-j) OP((-i d)^j p)
                        c = int(sp.binomial(ip, j)) * (-1) ** j
                        term = sf.smat_mul(D, Pp)
                        _add_psi(psi, i + ip - j, sf.smat_map(term, lambda f, c=c: f.scale(alg.c(c))))
                        D = sf.smat_map(D, lambda f: f.i_dxi())
            psi = {i: P for i, P in psi.items() if _psi_nonzero(P)}
        sgo: dict = {}
        self._sgo_mul_into(sgo, g_plus(alg, self.psi), g_minus(alg, other.psi), -1)
        for i, P in self.psi.items():
            for (a, b), S in other.sgo.items():
                f = alg.sym(sf.xn_power_on_K(a))
                Ph = sf.smat_map(P, lambda s: (s * f).h_plus())
                for p in sf.smat_orders(Ph, "+"):
                    C = _mscale(_rcoeff(Ph, "+", p, alg.zero), alg.c(1 / sp.factorial(p - 1)))
                    _add_sgo(sgo, (i + p - 1, b), _mm(C, S))
        for (a, b), S in self.sgo.items():
            for i, P in other.psi.items():
                g = alg.sym(sf.trace_symbol(b + i))
                Ph = sf.smat_map(P, lambda s: (g * s).h_minus())
                for q in sf.smat_orders(Ph, "-"):
                    C = _mscale(_rcoeff(Ph, "-", q, alg.zero), alg.c(1 / sp.factorial(q - 1)))
                    _add_sgo(sgo, (a, q - 1), _mm(S, C))
        self._sgo_mul_into(sgo, self.sgo, other.sgo, 1)
        return HalfLineOp(alg, psi, {k: v for k, v in sgo.items() if _mnonzero(v)})

    __mul__ = mul

    def _sgo_mul_into(self, acc: dict, G1: dict, G2: dict, sign: int):
        for (a, b), S in G1.items():
            for (c, d), Sp in G2.items():
                _add_sgo(acc, (a, d), _mscale(_mm(S, Sp), self.alg.tk(b + c) * sign))

    def left_multiply(self, k: int, M) -> "HalfLineOp":
        """x^k M (M a constant ring matrix) times self."""
        psi = {i + k: [[P[0][j] * M[r][0] + P[1][j] * M[r][1] for j in range(2)] for r in range(2)]
               for i, P in self.psi.items()}
        sgo = {(a + k, b): _mm(M, S) for (a, b), S in self.sgo.items()}
        return HalfLineOp(self.alg, psi, sgo)

    def __add__(self, other: "HalfLineOp") -> "HalfLineOp":
        psi = dict(self.psi)
        for i, P in other.psi.items():
            _add_psi(psi, i, P)
        sgo = dict(self.sgo)
        for key, S in other.sgo.items():
            _add_sgo(sgo, key, S)
        return HalfLineOp(self.alg, psi, sgo)


def _g_pm(alg: Algebra, psi: dict, kind: str) -> dict:
    out: dict = {}
    for i, P in psi.items():
        for p in sf.smat_orders(P, kind):
            C = _rcoeff(P, kind, p, alg.zero)
            if kind == "-" and i % 2:
                C = _mscale(C, alg.c(-1))
            for aa in range(p):
                w = alg.c(1 / (sp.factorial(aa) * sp.factorial(p - 1 - aa)))
                _add_sgo(out, (i + aa, p - 1 - aa), _mscale(C, w))
    return out


def g_plus(alg: Algebra, psi: dict) -> dict:
    """Singular Green part G^+ of sum x^i OP(p_i): kernel from h^+ p evaluated at x + y."""
    return _g_pm(alg, psi, "+")


def g_minus(alg: Algebra, psi: dict) -> dict:
    """G^- of sum x^i OP(p_i); the reflection gives a factor (-1)^i."""
    return _g_pm(alg, psi, "-")


def resolvent_R0(alg: Algebra | None = None) -> HalfLineOp:
    """R0 = Q0_+ + K S0 T."""
    alg = alg or Algebra()
    return HalfLineOp(alg, {0: alg.q0()}, {(0, 0): alg.s0()})


def multiplier_times(spec: PerturbationSpec, op: HalfLineOp) -> HalfLineOp:
    out = HalfLineOp(op.alg)
    for k, M in sorted(spec.matrices().items()):
        out = out + op.left_multiply(k, op.alg.mat(M))
    return out


@dataclass
class NeumannWord:
    """The word R0 (P R0)^m: its truncated pseudodifferential and singular Green parts."""

    op: HalfLineOp
    m: int = 0

    @property
    def sgo_terms(self) -> list["SgoTerm"]:
        return self.op.sgo_terms()


def perturbation_step(terms, spec: PerturbationSpec, need_psi: bool = True) -> NeumannWord:
    """One more factor P R0 on the right.

    ``terms`` is either a NeumannWord or a list of SgoTerms; a bare list is
    read as the singular Green part of R0 (pseudodifferential part Q0_+).
    """
    if isinstance(terms, NeumannWord):
        word = terms
        alg = word.op.alg
        if not set(spec.labels()) <= {str(g) for g in alg.R.gens}:
            raise ValueError("spec labels missing from the word's coefficient ring")
    else:
        alg = Algebra(spec.labels())
        sgo: dict = {}
        for t in terms:
            _add_sgo(sgo, (t.k, t.kp), alg.mat(t.S))
        word = NeumannWord(HalfLineOp(alg, {0: alg.q0()}, sgo), 0)
    PR = multiplier_times(spec, resolvent_R0(alg))
    return NeumannWord(word.op.mul(PR, need_psi=need_psi), word.m + 1)


def g0_terms() -> list[SgoTerm]:
    return [SgoTerm(0, 0, s0())]


def neumann_words(spec: PerturbationSpec, m_max: int) -> list[NeumannWord]:
    alg = Algebra(spec.labels())
    words = [NeumannWord(resolvent_R0(alg), 0)]
    for m in range(m_max):
        words.append(perturbation_step(words[-1], spec, need_psi=m < m_max - 1))
    return words


def template_452(spec: PerturbationSpec) -> list[SgoTerm]:
    """Closed-form first-order singular Green part, built from the elementary identities.

    Per x^k P_k:  -G^+(Q0) x^k P_k G^-(Q0) (-1)^k  +  Q0_+ x^k P_k K S0 T
                  + K S0 T x^k P_k Q0_+  +  K S0 T x^k P_k K S0 T.
    """
    S0, S1p, S1m = s0(), s1(1), s1(-1)
    out: list[SgoTerm] = []
    for k, Pk in sorted(spec.matrices().items()):
        out.append(SgoTerm(0, 0, -(-1) ** k * sf.compose_T_xk_K(k) * S1p * Pk * S1m))
        out.append(SgoTerm(0, 0, sf.compose_T_xk_K(k) * S0 * Pk * S0))
        for e, C in sf.compose_Q0plus_xk_K(k):
            out.append(SgoTerm(e, 0, C * Pk * S0))
        for C, e in sf.compose_T_xk_Q0plus(k):
            out.append(SgoTerm(0, e, S0 * Pk * C))
    return _merge(out)


def _merge(terms: Sequence[SgoTerm]) -> list[SgoTerm]:
    acc: dict = {}
    for t in terms:
        key = (t.k, t.kp)
        acc[key] = acc[key] + sp.Matrix(t.S) if key in acc else sp.Matrix(t.S)
    return [SgoTerm(a, b, S.applyfunc(sp.expand)) for (a, b), S in sorted(acc.items())]


def sgo_lists_equal(t1: Sequence[SgoTerm], t2: Sequence[SgoTerm]) -> bool:
    d1 = {(t.k, t.kp): t.S for t in _merge(t1)}
    d2 = {(t.k, t.kp): t.S for t in _merge(t2)}
    for key in set(d1) | set(d2):
        if not sf.matrix_equal(d1.get(key, sp.zeros(2, 2)), d2.get(key, sp.zeros(2, 2))):
            return False
    return True


@lru_cache(maxsize=None)
def perturbed_trace_orders(spec: PerturbationSpec, m_max: int) -> tuple[sp.Expr, ...]:
    """Per-mode Laplacian boundary trace coefficients of eps^m, m = 0..m_max.

    Entry m is (-1)^m mu^{-1} tr_n of the 11-block of the singular Green part
    of R0 (P R0)^m.
    """
    out = []
    for word in neumann_words(spec, m_max):
        alg = word.op.alg
        tr = alg.zero
        for (a, b), S in word.op.sgo.items():
            tr += alg.tk(a + b) * S[0][0]
        out.append(sp.expand((-1) ** word.m * sf.from_ring(tr) / MU))
    return tuple(out)


def perturbed_trace_expr(spec: PerturbationSpec | None, m_max: int = 2, r: int = 0) -> sp.Expr:
    """Per-mode boundary trace (Neumann series to order m_max), differentiated r times."""
    if spec is None or not spec.terms:
        base = closed_518()
    else:
        base = sp.Add(*perturbed_trace_orders(spec, m_max))
    return sf.d_lambda(base, r) if r else sp.expand(base)
