"""Mode sums, transforms between resolvent/heat/zeta data, fits, and independent oracles.

Infinite spectra are summed as: enumerated modes directly, then each tail
branch by Euler-Maclaurin with the integral done in the eigenvalue variable.
All high-precision work uses mpmath.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import mpmath as mp
import numpy as np
import sympy as sp
from scipy.linalg import eigh_tridiagonal

from . import symfrac as sf
from .log_extractor import ell_polynomial, zeta_residue
from .product_resolvent import (PerturbationSpec, assemble_mode_block, closed_518, perturbed_trace_expr)
from .spectral_model import SpectralModel


class DivergentSumError(ValueError):
    pass


class ConditioningError(ArithmeticError):
    def __init__(self, message: str, report: dict):
        super().__init__(message)
        self.report = report


class ContourError(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# expansion series


@dataclass
class ExpansionTerm:
    exponent: Fraction
    has_log: bool
    coefficient: float
    sigma: float = 0.0
    locality: str = "unknown"
    zero_at_tau: bool = False

    def row(self) -> list[str]:
        return [str(self.exponent), "1" if self.has_log else "0", f"{self.coefficient:.15e}",
                f"{self.sigma:.3e}", self.locality, "1" if self.zero_at_tau else "0"]


@dataclass
class ExpansionSeries:
    terms: list
    variable: str = "minus_lambda"
    fit_residual: float = 0.0
    window: tuple = ()
    tau: float = 0.0
    condition: float = 0.0
    lead_exponent: Fraction | None = None

    CSV_HEADER = ["exponent", "has_log", "coefficient", "sigma", "locality", "zero_at_tau"]

    def coefficient(self, exponent, log: bool = False) -> float:
        e = Fraction(exponent)
        for t in self.terms:
            if t.exponent == e and t.has_log == log:
                return t.coefficient
        return 0.0

    def term(self, exponent, log: bool = False) -> ExpansionTerm | None:
        e = Fraction(exponent)
        for t in self.terms:
            if t.exponent == e and t.has_log == log:
                return t
        return None

    def leading(self) -> ExpansionTerm:
        """Most singular power term that is resolved above its own noise."""
        pw = [t for t in self.terms if not t.has_log]
        if self.lead_exponent is not None:
            return next(t for t in pw if t.exponent == self.lead_exponent)
        pw.sort(key=lambda t: -t.exponent if self.variable != "t" else t.exponent)
        return next((t for t in pw if abs(t.coefficient) > 5 * t.sigma), pw[0])

    def log_terms(self) -> list:
        return [t for t in self.terms if t.has_log]

    def max_relative_log(self) -> float:
        lead = abs(self.leading().coefficient)
        return max((abs(t.coefficient) for t in self.log_terms()), default=0.0) / lead

    def rows(self) -> list[list[str]]:
        return [t.row() for t in self.terms]


def fit_expansion(xs: Sequence, ys: Sequence, powers: Sequence, logs: Sequence = (), tau: float = 1e-6,
                  variable: str = "minus_lambda", dps: int = 60, cond_max: float = 1e34,
                  locality: dict | None = None) -> ExpansionSeries:
    """Least squares on the basis {x^e} (e in powers) and {x^e log x} (e in logs)."""
    powers = [Fraction(p) for p in powers]
    logs = [Fraction(p) for p in logs]
    ncoef = len(powers) + len(logs)
    if len(xs) < 2 * ncoef:
        raise ValueError(f"need at least {2 * ncoef} samples for {ncoef} coefficients, got {len(xs)}")
    with mp.workdps(dps):
        X = [mp.mpf(x) for x in xs]
        cols = [[mp.power(x, mp.mpf(e.numerator) / e.denominator) for x in X] for e in powers]
        cols += [[mp.power(x, mp.mpf(e.numerator) / e.denominator) * mp.log(x) for x in X] for e in logs]
        scales = [max(abs(v) for v in c) for c in cols]
        A = mp.matrix(len(X), ncoef)
        for j, c in enumerate(cols):
            for i, v in enumerate(c):
                A[i, j] = v / scales[j]
        b = mp.matrix([mp.mpf(y) for y in ys])
        sv = mp.svd_r(A, compute_uv=False)
        cond = max(sv) / min(sv) if min(sv) > 0 else mp.inf
        report = {"condition": float(cond), "threshold": cond_max, "samples": len(xs), "coefficients": ncoef,
                  "window": [float(min(X)), float(max(X))]}
        if not cond < cond_max:
            raise ConditioningError(f"ill-conditioned basis (condition {float(cond):.3e})", report)
        sol, res = mp.qr_solve(A, b)
        dof = max(len(X) - ncoef, 1)
        s2 = (res**2) / dof
        cov = mp.inverse(A.T * A)
        coefs = [sol[j] / scales[j] for j in range(ncoef)]
        sig = [mp.sqrt(abs(cov[j, j]) * s2) / scales[j] for j in range(ncoef)]
    keys = [(e, False) for e in powers] + [(e, True) for e in logs]
    locality = locality or {}
    order = sorted(range(len(powers)), key=lambda j: powers[j] if variable == "t" else -powers[j])
    # the leading term is the most singular power carrying at least tau of the signal somewhere in the window
    with mp.workdps(dps):
        ymax = [abs(mp.mpf(y)) for y in ys]
        share = [max(abs(coefs[j]) * abs(cols[j][i]) / (ymax[i] or 1) for i in range(len(X))) for j in range(len(powers))]
    lead_idx = next((j for j in order if share[j] >= tau and abs(coefs[j]) > 5 * sig[j]), order[0])
    lead = abs(float(coefs[lead_idx])) or 1.0
    terms = []
    for (e, lg), c, s in zip(keys, coefs, sig):
        c, s = float(c), float(s)
        terms.append(ExpansionTerm(e, lg, c, s, locality.get((e, lg), "unknown"), abs(c) <= max(tau * lead, 5 * s)))
    terms.sort(key=lambda t: (-t.exponent if variable != "t" else t.exponent, t.has_log))
    return ExpansionSeries(terms, variable, float(res), (float(min(xs)), float(max(xs))), tau, float(cond),
                           powers[lead_idx])


def half_steps(start, count: int) -> list[Fraction]:
    start = Fraction(start)
    return [start - Fraction(i, 2) for i in range(count)]


# ---------------------------------------------------------------------------
# per-mode expressions and spectral sums


@dataclass
class TraceSetup:
    """The per-mode boundary trace of F d_lam^r (Delta_B - lam)^{-1} with optional perturbation."""

    model: SpectralModel
    spec: PerturbationSpec | None = None
    F: str | None = None
    r: int = 0
    m_max: int = 2

    def __post_init__(self):
        if self.spec is not None:
            self.spec.check_labels(self.model.labels())
        self.expr = perturbed_trace_expr(self.spec, self.m_max, self.r)
        self._ops = {t.label: t for t in self.model.tangential}
        # constant per-mode scalars are folded in before compiling
        const = {sf.label_symbol(lb): sp.nsimplify(op.coeffs[0]) for lb, op in self._ops.items()
                 if op.values is None and len(op.coeffs) == 1}
        compiled = sp.expand(self.expr.subs(const)) if const else self.expr
        self.labels = sf.free_labels(compiled)
        if self.F is not None and self.F not in self._ops:
            raise ValueError(f"unknown tangential label {self.F!r}")
        # one compiled function per sign branch (a > 0, a < 0, a = 0) keeps sgn/pi0 out of the arithmetic
        syms = [sf.MU, sf.A, sf.AL] + [sf.label_symbol(lb) for lb in self.labels]
        forms = sf.branch_forms(compiled)
        self._np = [sp.lambdify(syms, f, "numpy", cse=True) for f in forms]
        self._mp = [sp.lambdify(syms, f, "mpmath", cse=True) for f in forms]

    def _call(self, table, a, mu, al):
        fn = table[0] if a > 0 else (table[1] if a < 0 else table[2])
        v = fn(mu, a, al, *[self._ops[lb].scalar(a) for lb in self.labels])
        return v * self._ops[self.F].scalar(a) if self.F else v

    def mode_value(self, a: float, lam: complex) -> complex:
        return complex(self._call(self._np, a, sf.mu_of(lam), sf.a_lambda(a, lam)))

    def mode_value_mp(self, a, lam):
        lam = mp.mpmathify(lam)
        return self._call(self._mp, a, mp.sqrt(-lam), mp.sqrt(a * a - lam))

    def decay_exponent(self, lam: complex) -> float:
        """Large-|a| power law of the summand, estimated from two far points on each side."""
        worst = -np.inf
        mu = abs(sf.mu_of(lam))
        with mp.workdps(30):
            for sign in (1, -1):
                a1 = sign * 1e4 * (1 + mu)
                a2 = 10 * a1
                v1 = abs(self.mode_value_mp(mp.mpf(a1), lam))
                v2 = abs(self.mode_value_mp(mp.mpf(a2), lam))
                if v1 == 0 and v2 == 0:
                    continue
                if v1 == 0:
                    return np.inf
                worst = max(worst, float(mp.log10(v2 / v1)))
        return worst


@dataclass
class TraceValue:
    value: complex
    tail: complex = 0
    tail_bound: float = 0.0
    direct_modes: int = 0


_GL_CACHE: dict = {}


def _gauss_legendre(degree: int):
    """mpmath Gauss-Legendre rule on [-1, 1] with 3*2^(degree-1) nodes at working precision."""
    key = (degree, mp.mp.prec)
    if key not in _GL_CACHE:
        rule = mp.calculus.quadrature.GaussLegendre(mp.mp)
        nodes = rule.calc_nodes(degree, mp.mp.prec + 20)
        _GL_CACHE[key] = ([x for x, _ in nodes], [w for _, w in nodes])
    return _GL_CACHE[key]


def _tail_integral(f, v0, scale, degree: int = 4):
    """int_{v0}^inf f(v) dv via u = 1/v and composite Gauss-Legendre in u.

    The summands used here behave like powers of 1/v at infinity with
    expansions analytic in u, so the substituted integrand is smooth at u = 0.
    """
    # geometric cuts keep each u-interval short relative to its distance from u = +-i/scale
    cuts = [v0]
    while cuts[-1] < 64 * (v0 + scale):
        cuts.append(2 * cuts[-1])
    us = [1 / c for c in cuts] + [mp.mpf(0)]
    xg, wg = _gauss_legendre(degree)
    total = 0
    for hi, lo in zip(us[:-1], us[1:]):
        half, mid = (hi - lo) / 2, (hi + lo) / 2
        for x, w in zip(xg, wg):
            u = mid + half * x
            total += w * half * f(1 / u) / (u * u)
    return total


def _em_tail(branch, g, mu_scale, terms: int = 6):
    """Euler-Maclaurin sum of g(sign * value(x)) over x > branch.stop."""
    x0 = mp.mpf(branch.stop + 1)
    sign = branch.sign

    def gx(x):
        return g(sign * branch.value(x))

    v0 = branch.value(x0)
    integral = _tail_integral(lambda v: g(sign * v) * branch.density(v), v0, mp.mpf(mu_scale) + 1)
    total = integral + gx(x0) / 2
    last = 0
    for k in range(1, terms + 1):
        corr = mp.bernoulli(2 * k) / mp.factorial(2 * k) * mp.diff(gx, x0, 2 * k - 1)
        total -= corr
        last = corr
    return total, abs(last)


def spectral_sum(model: SpectralModel, g: Callable, mu_scale: float = 1.0, em_terms: int = 6):
    """sum over all modes (with multiplicity) of g(a), tails by Euler-Maclaurin.

    ``g`` must accept mpmath numbers.  Returns (value, tail_bound).
    """
    direct = mp.fsum(m.multiplicity * g(mp.mpf(m.a)) for m in model.modes)
    bound = 0
    for br in model.branches():
        tail, err = _em_tail(br, g, mu_scale, em_terms)
        direct += tail
        bound += err
    return direct, bound


def boundary_resolvent_trace(model: SpectralModel, spec: PerturbationSpec | None = None, F: str | None = None,
                             r: int = 0, lam: complex = -1.0, m_max: int = 2, dps: int | None = None,
                             setup: TraceSetup | None = None) -> TraceValue:
    """Tr F d_lam^r of the boundary (singular Green) part of the resolvent, summed over modes."""
    if not (np.imag(lam) != 0 or np.real(lam) < 0):
        raise sf.CutError("lam must lie off [0, inf)")
    setup = setup or TraceSetup(model, spec, F, r, m_max)
    if model.kind == "matrix":
        val = sum(m.multiplicity * setup.mode_value(m.a, lam) for m in model.modes)
        return TraceValue(val, 0, 0.0, len(model.modes))
    decay = setup.decay_exponent(lam)
    if decay + (model.dim_n - 1) >= -1e-3:
        raise DivergentSumError(
            f"summand decays like |a|^{decay:.2f}; with n-1={model.dim_n - 1} tangential dimensions the "
            f"mode sum diverges: the normal trace must be integrable in xi' (raise r)")
    with mp.workdps(dps or 20):
        mu = abs(sf.mu_of(lam))
        val, bound = spectral_sum(model, lambda a: setup.mode_value_mp(a, lam), mu)
        return TraceValue(complex(val), 0, float(bound), len(model.modes))


def trace_samples(setup: TraceSetup, xs: Sequence, dps: int = 50) -> list:
    """High-precision values of the boundary trace at lam = -x."""
    model = setup.model
    out = []
    with mp.workdps(dps):
        for x in xs:
            lam = -mp.mpf(x)
            if model.kind == "matrix":
                v = mp.fsum(m.multiplicity * setup.mode_value_mp(mp.mpf(m.a), lam) for m in model.modes)
            else:
                v, _ = spectral_sum(model, lambda a: setup.mode_value_mp(a, lam), mp.sqrt(x))
            out.append(mp.re(v))
    return out


def geometric_window(lo: float, hi: float, count: int) -> list:
    return [float(v) for v in np.geomspace(lo, hi, count)]


# ---------------------------------------------------------------------------
# resolvent <-> heat


def heat_power_to_resolvent(alpha, r: int = 0):
    """t^alpha in the heat trace gives Gamma(r+1+alpha) (-lam)^(-r-1-alpha) in Tr d_lam^r (D - lam)^-1."""
    return float(mp.gamma(r + 1 + alpha)), -r - 1 - alpha


def heat_log_to_resolvent(alpha, r: int = 0):
    """t^alpha log t gives Gamma(r+1+alpha) x^(-r-1-alpha) (psi(r+1+alpha) - log x), x = -lam."""
    g = mp.gamma(r + 1 + alpha)
    return float(-g), float(g * mp.digamma(r + 1 + alpha)), -r - 1 - alpha


def resolvent_log_to_heat(coefficient: float, exponent, r: int = 0) -> float:
    """Heat coefficient of t^alpha log t from the x^exponent log x coefficient of the resolvent trace."""
    alpha = -float(exponent) - r - 1
    return -coefficient / float(mp.gamma(r + 1 + alpha))


def heat_from_resolvent(trace_fn: Callable, t: float, N: int = 32, tol: float = 1e-9) -> float:
    """Inverse Laplace transform over the parabolic contour z = N/t (0.1309 - 0.1194 th^2 + 0.25 i th).

    ``trace_fn(lam)`` is the r = 0 resolvent trace; the heat trace is recovered
    from F(z) = trace_fn(-z).
    """

    def run(N):
        th = -np.pi + (np.arange(N) + 0.5) * 2 * np.pi / N
        z = N / t * (0.1309 - 0.1194 * th**2 + 0.25j * th)
        dz = N / t * (-0.2388 * th + 0.25j)
        F = np.array([trace_fn(-zz) for zz in z])
        return float(np.real(np.sum(np.exp(z * t) * F * dz) / (1j * N)))

    h1 = run(N)
    h2 = run(N + N // 2)
    if abs(h1 - h2) > tol * max(1.0, abs(h2)):
        raise ContourError(f"contour not resolved at t={t}: |dh|={abs(h1 - h2):.2e}")
    return h2


# ---------------------------------------------------------------------------
# finite-difference oracle


@dataclass(frozen=True)
class OracleConfig:
    L: float = 16.0
    h: float = 0.02
    order: int = 2
    cap: int = 200000

    def halved(self) -> "OracleConfig":
        return OracleConfig(self.L, self.h / 2, self.order, self.cap)


@dataclass
class FDResult:
    eigenvalues: np.ndarray
    a: float
    bc: str
    cfg: OracleConfig

    def _bulk_resolvent(self, lam):
        al2 = self.a * self.a - lam
        h = self.cfg.h
        return self.cfg.L / np.sqrt(al2 * (4 + h * h * al2))

    def resolvent_trace(self, lam: complex) -> complex:
        """Boundary part of Tr (H - lam)^-1 per wall (both walls carry the same condition)."""
        return 0.5 * (np.sum(1.0 / (self.eigenvalues - lam)) - self._bulk_resolvent(lam))

    def heat_trace(self, t: float) -> float:
        h = self.cfg.h
        s = t / h**2
        from scipy.special import ive

        site = math.exp(-self.a**2 * t) * ive(0, 2 * s)
        bulk = self.cfg.L / h * site
        return 0.5 * (float(np.sum(np.exp(-t * self.eigenvalues))) - bulk)

    def tail_bound(self, lam: complex) -> float:
        return float(np.exp(-2 * np.real(sf.a_lambda(self.a, lam)) * self.cfg.L))


def fd_oracle(a: float, bc: str | None = None, cfg: OracleConfig = OracleConfig()) -> FDResult:
    """Second-order discretization of -d^2 + a^2 on [0, L] with the mode condition at both ends.

    Dirichlet: u = 0.  Robin: u' + a u = 0 at 0 (mirrored at L), ghost-point
    closure with half weights on the end nodes.
    """
    if bc is None:
        bc = "dirichlet" if a >= 0 else "robin"
    h, L = cfg.h, cfg.L
    M = int(round(L / h))
    if M + 1 > cfg.cap:
        raise ValueError("grid exceeds eigenvalue cap")
    if bc == "dirichlet":
        n = M - 1
        d = np.full(n, 2.0 / h**2 + a * a)
        e = np.full(n - 1, -1.0 / h**2)
    elif bc == "robin":
        n = M + 1
        diag = np.full(n, 2.0 / h + h * a * a)
        diag[0] = diag[-1] = 1.0 / h - a + 0.5 * h * a * a
        w = np.full(n, h)
        w[0] = w[-1] = h / 2
        off = np.full(n - 1, -1.0 / h)
        sw = np.sqrt(w)
        d = diag / w
        e = off / (sw[:-1] * sw[1:])
    else:
        raise ValueError(f"unknown boundary condition {bc!r}")
    ev = eigh_tridiagonal(d, e, eigvals_only=True)
    return FDResult(ev, a, bc, cfg)


def fd_boundary_trace(a: float, lam: complex, cfg: OracleConfig = OracleConfig()) -> dict:
    """Oracle value with Richardson extrapolation and the observed convergence ratio."""
    c1 = fd_oracle(a, None, cfg).resolvent_trace(lam)
    c2 = fd_oracle(a, None, cfg.halved()).resolvent_trace(lam)
    c4 = fd_oracle(a, None, cfg.halved().halved()).resolvent_trace(lam)
    ratio = abs(c2 - c4) / abs(c1 - c2) if c1 != c2 else 0.0
    return {"coarse": c1, "fine": c4, "richardson": (4 * c4 - c2) / 3, "ratio": ratio,
            "tail_bound": fd_oracle(a, None, cfg).tail_bound(lam)}


# ---------------------------------------------------------------------------
# Nystrom oracle for the Neumann series of the perturbed reduced system


def _kernel(a, lam, xs, ys):
    al = sf.a_lambda(a, lam)
    mu = sf.mu_of(lam)
    z = xs[:, None] - ys[None, :]
    q = np.exp(-al * np.abs(z)) / (2 * al)
    s = np.sign(z)
    K = np.empty(z.shape + (2, 2), complex)
    K[..., 0, 0] = mu * q
    K[..., 1, 1] = mu * q
    K[..., 0, 1] = (al * s + a) * q
    K[..., 1, 0] = (al * s - a) * q
    return K


def _blocks(K):
    n, m = K.shape[:2]
    return K.transpose(0, 2, 1, 3).reshape(2 * n, 2 * m)


def neumann_oracle(a: float, lam: complex, pk: dict, m: int, h: float, L: float = 12.0) -> complex:
    """(-1)^m mu^-1 times the boundary part of the 11-trace of R (P R)^m, by trapezoid Nystrom.

    R is the half-line reduced resolvent and the reference is the full-line one;
    P = sum_k x^k [[0, -p_k], [p_k, 0]].
    """
    al = sf.a_lambda(a, lam)
    mu = sf.mu_of(lam)
    S0 = np.array(assemble_mode_block(a, lam).S0, dtype=complex)
    xh = np.arange(0, L + h / 2, h)
    wh = np.full(xh.size, h)
    wh[0] = wh[-1] = h / 2
    xf = np.arange(-L, L + h / 2, h)
    wf = np.full(xf.size, h)
    wf[0] = wf[-1] = h / 2

    def chain(K, w, z):
        B = _blocks(K)
        P = np.zeros((z.size, 2, 2))
        for k, p in pk.items():
            P[:, 0, 1] -= p * z**k
            P[:, 1, 0] += p * z**k
        P *= w[:, None, None]
        WP = np.zeros((2 * z.size, 2 * z.size))
        for i in range(2):
            for j in range(2):
                WP[i::2, j::2] = np.diag(P[:, i, j])
        out = B
        for _ in range(m):
            out = out @ WP @ B
        return out

    ex = np.exp(-al * xh)
    Rh = _kernel(a, lam, xh, xh) + ex[:, None, None, None] * ex[None, :, None, None] * S0
    Mh = chain(Rh, wh, xh)
    Mf = chain(_kernel(a, lam, xf, xf), wf, xf)
    i0 = np.where(xf >= -h / 2)[0]
    dh = np.array([Mh[2 * i, 2 * i] for i in range(xh.size)])
    df = np.array([Mf[2 * i, 2 * i] for i in i0])
    return complex(np.sum(wh * (dh - df)) * (-1) ** m / mu)


def neumann_oracle_extrapolated(a, lam, pk, m, h=0.05, L=12.0) -> dict:
    c1 = neumann_oracle(a, lam, pk, m, h, L)
    c2 = neumann_oracle(a, lam, pk, m, h / 2, L)
    return {"coarse": c1, "fine": c2, "richardson": (4 * c2 - c1) / 3}


# ---------------------------------------------------------------------------
# zeta and eta functions


@dataclass
class ZetaResult:
    value: complex | None
    poles: list
    at_pole: bool = False
    method: str = ""


def _ell(model, F):
    return {0: 1.0} if F is None else ell_polynomial(sp.Symbol(F), model)


def pole_data(model: SpectralModel, which: str, F: str | None = None, depth: int = 4) -> list:
    """Poles (location, order, residue) of zeta(s) = sum F(a) |a|^(-2s) or eta(s) = sum F(a) sign(a) |a|^(-s)."""
    ell = _ell(model, F)
    # zeta: |a|^(-2s) = sign(a) a |a|^(-(2s+1)), shift ell by one power
    if which == "zeta":
        shifted = {i + 1: c for i, c in ell.items()}
        cands = _candidate_sigmas(model, shifted, depth)
        out = []
        for s_sig in cands:
            res = zeta_residue(model, shifted, s_sig)
            if abs(res) > 1e-15:
                out.append(((s_sig - 1) / 2, 1, res / 2))
        return sorted(out, reverse=True)
    cands = _candidate_sigmas(model, ell, depth)
    return sorted([(s, 1, zeta_residue(model, ell, s)) for s in cands if abs(zeta_residue(model, ell, s)) > 1e-15],
                  reverse=True)


def _candidate_sigmas(model, ell, depth):
    if model.kind == "matrix":
        return []
    out = set()
    for i in ell:
        if model.kind == "circle":
            out.add(float(i + 1))
        else:
            for t in range(depth + 1):
                out.add(float(i + model.dim_n - 1 - 2 * t))
    return sorted(out, reverse=True)


def _grouped(model: SpectralModel):
    """{|a|: (mult of +|a|, mult of -|a|)} for nonzero modes (exact cancellation for symmetric spectra)."""
    g: dict = {}
    for m in model.modes:
        if m.a == 0:
            continue
        key = abs(m.a)
        p, q = g.get(key, (0, 0))
        g[key] = (p + m.multiplicity, q) if m.a > 0 else (p, q + m.multiplicity)
    return g


def _finite_sum(model, which, s, ell):
    total = mp.mpf(0)
    for v, (p, q) in sorted(_grouped(model).items()):
        v = mp.mpf(v)
        for i, c in ell.items():
            if which == "zeta":
                total += c * (p + q * (-1) ** i) * v ** (i - 2 * s)
            else:
                w = p - q if i % 2 == 0 else p + q
                if w:
                    total += c * w * v ** (i - s)
    return total


def _circle_mellin(model, which, s, T=1, terms=40):
    """Mellin split at T with the Poisson-dual small-t part (F = 1)."""
    alpha = mp.mpf(model.param("alpha"))
    s = mp.mpmathify(s)
    zero_modes = sum(m.multiplicity for m in model.modes if m.a == 0)
    big = mp.mpf(0)
    for v, (p, q) in sorted(_grouped(model).items()):
        v = mp.mpf(v)
        if which == "zeta":
            big += (p + q) * v ** (-2 * s) * mp.gammainc(s, v * v * T)
        elif p != q:
            big += (p - q) * v ** (-s) * mp.gammainc((s + 1) / 2, v * v * T)
    small = mp.mpf(0)
    if which == "zeta":
        small += mp.sqrt(mp.pi) * mp.power(T, s - 0.5) / (s - 0.5)
        for m in range(1, terms + 1):
            c = (mp.pi * m) ** 2
            small += 2 * mp.sqrt(mp.pi) * mp.cospi(2 * m * alpha) * c ** (s - 0.5) * mp.gammainc(0.5 - s, c / T)
        # 1/Gamma keeps s = 0, -1, -2, ... regular; the kernel term uses 1/(s Gamma(s)) = 1/Gamma(s+1)
        return (big + small) * mp.rgamma(s) - zero_modes * mp.power(T, s) * mp.rgamma(s + 1)
    beta = s / 2 - 1
    for m in range(1, terms + 1):
        c = (mp.pi * m) ** 2
        small += 2 * mp.pi ** 1.5 * m * mp.sinpi(2 * m * alpha) * c**beta * mp.gammainc(-beta, c / T)
    return (big + small) * mp.rgamma((s + 1) / 2)


def hurwitz_eta_circle(alpha: float, s) -> complex:
    """Closed form zeta_H(s, alpha) - zeta_H(s, 1 - alpha) for 0 < alpha < 1."""
    return mp.zeta(s, alpha) - mp.zeta(s, 1 - alpha)


def _circle_closed(model, which, s, ell):
    alpha = mp.mpf(model.param("alpha")) % 1
    qp = alpha if alpha > 0 else mp.mpf(1)
    qm = 1 - alpha
    total = mp.mpf(0)
    for i, c in ell.items():
        if which == "zeta":
            total += c * (mp.zeta(2 * s - i, qp) + (-1) ** i * mp.zeta(2 * s - i, qm))
        else:
            total += c * (mp.zeta(s - i, qp) - (-1) ** i * mp.zeta(s - i, qm))
    return total


def _weyl_closed(model, which, s, ell, tol=1e-30, tmax=400):
    n = model.dim_n
    p = mp.mpf(1) / (n - 1)
    c = mp.mpf(model.param("c"))
    M = mp.mpf(model.param("mass", 0.0))
    asym = mp.mpf(model.param("asymmetry"))
    total = mp.mpf(0)
    for sign, w in ((1, 1 + asym), (-1, 1 - asym)):
        if w <= 0:
            continue
        if M > 0 and M >= c * (1 / w) ** p:
            raise ValueError("binomial mass expansion needs mass below the first eigenvalue")
        for i, ci in ell.items():
            sgn = 1 if sign > 0 else (-1) ** (i if which == "zeta" else i + 1)
            sigma = (2 * s if which == "zeta" else s) - i
            acc = mp.mpf(0)
            for t in range(tmax):
                e = sigma + 2 * t
                term = mp.binomial(-sigma / 2, t) * M ** (2 * t) * c ** (-e) * w ** (p * e) * mp.zeta(p * e) if (M > 0 or t == 0) else 0
                acc += term
                if M == 0 or (t > 3 and abs(term) < tol * max(1, abs(acc))):
                    break
            total += sgn * ci * acc
    return total


def zeta_eta(model: SpectralModel, which: str, s, F: str | None = None, method: str = "auto") -> ZetaResult:
    """zeta(s) = sum' F(a)|a|^(-2s) (zeta of A^2, zero modes excluded) or eta(s) = sum F(a) sign(a)|a|^(-s)."""
    if which not in ("zeta", "eta"):
        raise ValueError("which must be 'zeta' or 'eta'")
    poles = pole_data(model, which, F)
    for loc, _, _ in poles:
        if abs(complex(s) - loc) < 1e-12:
            return ZetaResult(None, poles, True, "pole")
    ell = _ell(model, F)
    if model.kind == "matrix":
        return ZetaResult(complex(_finite_sum(model, which, s, ell)), poles, False, "finite")
    if model.kind == "circle":
        if method in ("auto", "mellin") and F is None:
            if which == "eta" and float(2 * model.param("alpha")).is_integer():
                # spectrum of -i d/dtheta + alpha is symmetric exactly when 2 alpha is an integer
                return ZetaResult(0j, poles, False, "mellin")
            return ZetaResult(complex(_circle_mellin(model, which, s)), poles, False, "mellin")
        return ZetaResult(complex(_circle_closed(model, which, s, ell)), poles, False, "hurwitz")
    if which == "eta" and model.param("asymmetry") == 0 and all(i % 2 == 0 for i in ell):
        return ZetaResult(0j, poles, False, "symmetric")
    return ZetaResult(complex(_weyl_closed(model, which, s, ell)), poles, False, "zeta-series")


# ---------------------------------------------------------------------------
# heat coefficients of A^2 and the a'_1 check


def heat_A2_samples(model: SpectralModel, ts: Sequence, F: str | None = None, dps: int = 30) -> list:
    ops = {t.label: t for t in model.tangential}
    out = []
    with mp.workdps(dps):
        for t in ts:
            t = mp.mpf(t)

            def g(a):
                v = mp.exp(-t * a * a)
                return v * ops[F].scalar(a) if F else v

            val, _ = spectral_sum(model, g, 1 / mp.sqrt(t))
            out.append(val)
    return out


def fit_heat_A2(model: SpectralModel, F: str | None = None, t_lo: float = 1e-3, t_hi: float = 0.05,
                count: int = 40, kmax: int = 8, tau: float = 1e-8, with_logs: bool = False) -> ExpansionSeries:
    """Fit sum_k e_k t^(k/2), k >= 1 - n, to the heat trace of A^2."""
    ts = geometric_window(t_lo, t_hi, count)
    ys = heat_A2_samples(model, ts, F)
    powers = [Fraction(k, 2) for k in range(1 - model.dim_n, kmax)]
    logs = [Fraction(k, 2) for k in range(0, 4)] if with_logs else []
    return fit_expansion(ts, ys, powers, logs, tau, variable="t")


def exact_heat_A2_coefficient(model: SpectralModel, k: int, F: str | None = None) -> float:
    """e_k from the residue of Gamma(s) zeta_{A^2}(s) at s = -k/2 (0 for exponentially flat parts)."""
    s0 = Fraction(-k, 2)
    if s0.denominator == 1 and s0 <= 0:
        # Gamma pole: e_k = (-1)^j/j! zeta(-j) for k = 2j, plus zero-mode contribution at k = 0
        j = -int(s0)
        val = complex(zeta_eta(model, "zeta", -j, F).value) if not _is_pole(model, -j, F) else None
        if val is None:
            raise ValueError("double pole: log term in the heat expansion")
        e = (-1) ** j / math.factorial(j) * val.real
        if j == 0:
            e += sum(m.multiplicity for m in model.modes if m.a == 0)
        return e
    for loc, _, res in pole_data(model, "zeta", F, depth=abs(k) + 4):
        if abs(loc - float(s0)) < 1e-12:
            return float(mp.gamma(float(s0)) * res)
    return 0.0


def _is_pole(model, s, F):
    return any(abs(loc - s) < 1e-12 for loc, _, _ in pole_data(model, "zeta", F))


@dataclass
class A1Report:
    a1_fit: float
    a1_sigma: float
    e1_fit: float
    e1_sigma: float
    e1_exact: float
    a1_spectral: float
    n: int
    tau: float
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def as_json(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


def a1_from_resolvent_fit(series: ExpansionSeries, r: int) -> tuple[float, float]:
    """a'_1 from the x^(-r-3/2) log x coefficient of the resolvent trace."""
    t = series.term(Fraction(-3, 2) - r, log=True)
    if t is None:
        return 0.0, 0.0
    g = float(mp.gamma(r + 1.5))
    return -t.coefficient / g, t.sigma / g


def resolvent_fit_for_model(model: SpectralModel, F: str | None = None, r: int = 0, spec=None,
                            x_lo: float = 1e2, x_hi: float = 1e6, count: int = 48, npow: int = 18,
                            nlog: int = 6, tau: float = 1e-6, m_max: int = 2,
                            power_start=None, log_start=None) -> ExpansionSeries:
    """Sample the boundary trace on lam = -x, x in [x_lo, x_hi], and fit the log-aware template."""
    setup = TraceSetup(model, spec, F, r, m_max)
    n = model.dim_n
    pstart = Fraction(n - 3, 2) - r if power_start is None else Fraction(power_start)
    lstart = Fraction(-r - 1) if log_start is None else Fraction(log_start)
    xs = geometric_window(x_lo, x_hi, count)
    ys = trace_samples(setup, xs)
    return fit_expansion(xs, ys, half_steps(pstart, npow), half_steps(lstart, nlog), tau)


def check_a1_formula(model: SpectralModel, phi: str | None = None, tau: float = 1e-6) -> A1Report:
    """Compare the fitted log coefficient a'_1 with -e_1/pi, e_1 the t^(1/2) heat coefficient of A^2."""
    n = model.dim_n
    r = max(0, (n - 2) // 2)
    if n == 1:
        series = resolvent_fit_for_model(model, phi, 0)
    else:
        series = resolvent_fit_for_model(model, phi, r, power_start=Fraction(n - 3, 2) - r)
    a1, a1s = a1_from_resolvent_fit(series, r)
    heat = fit_heat_A2(model, phi)
    e1t = heat.term(Fraction(1, 2))
    e1, e1s = (e1t.coefficient, e1t.sigma) if e1t else (0.0, 0.0)
    e1x = exact_heat_A2_coefficient(model, 1, phi)
    lead = abs(series.leading().coefficient)
    a1_spec = -_negative_e1(model, phi) / (2 * math.pi)
    tol = tau * max(lead, 1.0)
    checks = {
        "a1_equals_minus_e1_over_pi": abs(a1 + e1 / math.pi) <= tol + 5 * (a1s + e1s / math.pi),
        "e1_fit_matches_exact": abs(e1 - e1x) <= tol + 5 * e1s,
    }
    if n % 2 == 1:
        checks["odd_n_a1_zero"] = abs(a1) <= tol + 5 * a1s
    return A1Report(a1, a1s, e1, e1s, e1x, a1_spec, n, tau, checks)


def _negative_e1(model: SpectralModel, phi) -> float:
    """e_1 of A^2 restricted to the negative half of the spectrum (analytic)."""
    if model.kind != "synthetic_weyl":
        return 0.0
    ell = _ell(model, phi)
    n = model.dim_n
    M = model.param("mass", 0.0)
    c = model.param("c")
    w = 1 - model.param("asymmetry")
    if M == 0 or w <= 0:
        return 0.0
    # pole of sum_k (b_k^2 + M^2)^(-s) at s = -1/2 from the t = n/2 binomial term
    total = 0.0
    for i, ci in ell.items():
        t2 = n + i  # 2t with s = -1/2: 2s - i + 2t = n - 1
        if t2 % 2:
            continue
        t = t2 // 2
        sigma = n - 1 - 2 * t
        res = float(mp.binomial(-sigma / 2, t)) * M ** (2 * t) * c ** (-(n - 1)) * w * (n - 1) / 2
        total += ci * (-1) ** i * float(mp.gamma(-0.5)) * res
    return total


def alpha_derivative_ratio(builder: Callable, n: int, alpha0: float = 0.3, h: float = 0.05, F=None) -> dict:
    """Finite-difference d^n/d alpha^n e_1 against e_(1-n) along a one-parameter family."""
    weights = [(-1) ** (n - j) * math.comb(n, j) for j in range(n + 1)]
    e1 = []
    lead = None
    for j in range(n + 1):
        al = alpha0 + (j - n / 2) * h
        fit = fit_heat_A2(builder(al), F)
        e1.append(fit.coefficient(Fraction(1, 2)))
        if j == n // 2:
            lead = fit.coefficient(Fraction(1 - n, 2))
    deriv = sum(w * v for w, v in zip(weights, e1)) / h**n
    return {"e1": e1, "derivative": deriv, "e_1_minus_n": lead, "ratio": deriv / lead if lead else float("nan")}
