"""Parity classification, sphere integrals and log-power enumeration.

Log terms in boundary trace expansions come only from terms of kind (a),
``(-lam)^(l/2) L a_lam^(-j) sign(A)``.  Such a term yields candidate powers
``(l - j)/2 - nu`` (only ``l/2`` when ``j = 0``).  For spectrally explicit models the
coefficient is exact.  Write ``Z_L(s) = sum_a sign(a) L(a) |a|^(-s)``.  The
coefficient of ``(-lam)^((l-j)/2 - nu) log(-lam)`` is then::

    coeff * binom(-j/2, nu) * Res_{s=-2 nu} Z_L(s) / 2

which follows from the Mellin representation of ``(a^2 + mu^2)^(-j/2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import mpmath as mp
import numpy as np
import sympy as sp

from . import symfrac as sf
from .product_resolvent import SKindTerm, SgoTerm, canonicalize_scalar, closed_518
from .spectral_model import SpectralModel

# ---------------------------------------------------------------------------
# homogeneous symbol terms


@dataclass(frozen=True)
class HomogeneousTerm:
    """A symbol term homogeneous of ``degree`` in xi' (for |xi'| >= 1).

    ``evaluator`` takes an array of shape (N, n-1) and returns N values.
    """

    degree: int
    evaluator: Callable
    dim: int = 1
    parity: str = "none"
    label: str = ""

    def __call__(self, xi) -> np.ndarray:
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        return np.asarray(self.evaluator(xi), dtype=float)

    def check_homogeneous(self, rng=None, samples: int = 8, tol: float = 1e-10) -> bool:
        rng = rng or np.random.default_rng(0)
        xi = rng.normal(size=(samples, self.dim))
        xi /= np.linalg.norm(xi, axis=1)[:, None]
        xi *= 1.5
        for r in (2.0, 3.7):
            lhs = self(r * xi)
            rhs = r**self.degree * self(xi)
            if np.max(np.abs(lhs - rhs)) > tol * max(1.0, np.max(np.abs(rhs))):
                return False
        return True


def _term_parity(term: HomogeneousTerm, xi: np.ndarray, tol: float) -> set[str]:
    plus = term(xi)
    minus = term(-xi)
    scale = max(1.0, float(np.max(np.abs(plus))))
    ok = set()
    sign_ee = (-1) ** (term.degree % 2)
    if np.max(np.abs(minus - sign_ee * plus)) <= tol * scale:
        ok.add("even-even")
    if np.max(np.abs(minus + sign_ee * plus)) <= tol * scale:
        ok.add("even-odd")
    return ok


def classify_parity(series: Sequence[HomogeneousTerm], rng=None, samples: int = 16,
                    tol: float = 1e-10) -> str:
    """'even-even', 'even-odd' or 'none' by testing p(-xi) against +-(-1)^deg p(xi)."""
    rng = rng or np.random.default_rng(12345)
    if not series:
        return "none"
    dim = series[0].dim
    xi = rng.normal(size=(samples, dim))
    xi *= (1.0 + rng.random(samples) * 3.0)[:, None] / np.linalg.norm(xi, axis=1)[:, None]
    ok = {"even-even", "even-odd"}
    for t in series:
        ok &= _term_parity(t, xi, tol)
    if len(ok) == 1:
        return ok.pop()
    return "none" if not ok else "even-even"  # all terms vanish: any parity holds


def polynomial_series(coeffs: dict[tuple[int, ...], float], dim: int) -> list[HomogeneousTerm]:
    """Symbol of a differential operator, sum c_alpha xi^alpha, grouped by degree."""
    by_deg: dict[int, list] = {}
    for alpha, c in coeffs.items():
        by_deg.setdefault(sum(alpha), []).append((np.array(alpha), c))
    out = []
    for deg in sorted(by_deg, reverse=True):
        items = by_deg[deg]

        def ev(xi, items=items):
            return sum(c * np.prod(xi**alpha, axis=1) for alpha, c in items)

        out.append(HomogeneousTerm(deg, ev, dim, "even-even", f"poly{deg}"))
    return out


def circle_sign_series(alpha: float) -> list[HomogeneousTerm]:
    """A/|A'| for A = -i d/dtheta + alpha: symbol (xi + alpha)/|xi + alpha| = sign(xi) for |xi| > |alpha|."""
    return [HomogeneousTerm(0, lambda xi: np.sign(xi[:, 0]), 1, "even-odd", "sign")]


def circle_abs_series(alpha: float) -> list[HomogeneousTerm]:
    """|A| on the circle: |xi + alpha| = |xi| + alpha sign(xi) for |xi| > |alpha|."""
    return [
        HomogeneousTerm(1, lambda xi: np.abs(xi[:, 0]), 1, "even-odd", "abs1"),
        HomogeneousTerm(0, lambda xi, a=alpha: a * np.sign(xi[:, 0]), 1, "even-odd", "abs0"),
    ]


def series_product(s1: Sequence[HomogeneousTerm], s2: Sequence[HomogeneousTerm]) -> list[HomogeneousTerm]:
    """Pointwise product of two commuting (scalar) symbol series, regrouped by degree."""
    groups: dict[int, list] = {}
    for t1 in s1:
        for t2 in s2:
            groups.setdefault(t1.degree + t2.degree, []).append((t1, t2))
    out = []
    dim = (s1 or s2)[0].dim
    for deg in sorted(groups, reverse=True):
        pairs = groups[deg]

        def ev(xi, pairs=pairs):
            return sum(a(xi) * b(xi) for a, b in pairs)

        out.append(HomogeneousTerm(deg, ev, dim))
    return out


def circle_power_series(alpha: float, power: int) -> list[HomogeneousTerm]:
    """A^power = (xi + alpha)^power expanded in homogeneous parts."""
    return polynomial_series({(k,): math.comb(power, k) * alpha ** (power - k) for k in range(power + 1)}, 1)


def sphere_sign_model(dim: int, rng=None, degrees: Sequence[int] = (0, -1, -2, -3), parity: str = "even-odd"):
    """Random homogeneous series on R^dim with a prescribed alternating parity.

    Term of degree d is |xi|^d g(xi/|xi|) with g a random polynomial in the unit
    vector whose parity is (-1)^d (even-even) or (-1)^(d+1) (even-odd).
    """
    rng = rng or np.random.default_rng(7)
    out = []
    for d in degrees:
        want_odd = (d % 2 == 1) if parity == "even-even" else (d % 2 == 0)
        monos = []
        for total in range(1, 5):
            if (total % 2 == 1) != want_odd:
                continue
            for _ in range(2):
                alpha = rng.multinomial(total, [1.0 / dim] * dim)
                monos.append((alpha, rng.normal()))
        if not want_odd:
            monos.append((np.zeros(dim, dtype=int), rng.normal()))

        def ev(xi, monos=monos, d=d):
            r = np.linalg.norm(xi, axis=1)
            u = xi / r[:, None]
            return r**d * sum(c * np.prod(u**a, axis=1) for a, c in monos)

        out.append(HomogeneousTerm(d, ev, dim, parity, f"deg{d}"))
    return out


# ---------------------------------------------------------------------------
# sphere quadrature


@dataclass
class SphereResult:
    value: float
    error: float
    certificate: str | None = None


def _sphere_rule(dim: int, order: int):
    """Nodes and weights on the unit sphere of R^dim (dim = 1, 2, 3)."""
    if dim == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if dim == 2:
        N = 2 * order
        th = 2 * np.pi * np.arange(N) / N
        return np.stack([np.cos(th), np.sin(th)], axis=1), np.full(N, 2 * np.pi / N)
    if dim == 3:
        z, wz = np.polynomial.legendre.leggauss(order)
        N = 2 * order
        ph = 2 * np.pi * np.arange(N) / N
        Z, P = np.meshgrid(z, ph, indexing="ij")
        rho = np.sqrt(1 - Z**2)
        nodes = np.stack([rho * np.cos(P), rho * np.sin(P), Z], axis=-1).reshape(-1, 3)
        w = (wz[:, None] * np.full(N, 2 * np.pi / N)[None, :]).reshape(-1)
        return nodes, w
    raise ValueError(f"sphere quadrature implemented for n-1 <= 3, got n-1={dim}")


def sphere_integral(term: HomogeneousTerm, n: int, order: int = 32, weights=None) -> SphereResult:
    """Integral of ``term`` over the unit sphere of R^(n-1).

    For n = 2 the sphere is {+1, -1} with counting measure (``weights`` may
    reweight the two points).  Odd integrands get an exact zero certificate
    when the antipodal symmetry holds at every node.
    """
    dim = n - 1
    if dim != term.dim:
        raise ValueError(f"term lives on R^{term.dim}, not R^{dim}")
    nodes, w = _sphere_rule(dim, order)
    if dim == 1 and weights is not None:
        w = np.asarray(weights, dtype=float)
    vals = term(nodes)
    anti = term(-nodes)
    symmetric_weights = dim > 1 or w[0] == w[1]
    scale = max(1.0, float(np.max(np.abs(vals))))
    if symmetric_weights and np.max(np.abs(vals + anti)) <= 1e-13 * scale:
        return SphereResult(0.0, 0.0, "odd")
    value = float(np.dot(w, vals))
    if dim == 1:
        return SphereResult(value, 0.0)
    nodes2, w2 = _sphere_rule(dim, 2 * order)
    value2 = float(np.dot(w2, term(nodes2)))
    err = abs(value2 - value)
    if err > 1e-8 * max(1.0, abs(value2)):
        raise ArithmeticError(f"sphere quadrature not converged (difference {err:.2e})")
    return SphereResult(value2, err)


def sphere_area(n: int) -> float:
    """Measure of the unit sphere in R^(n-1) (2 points for n = 2)."""
    d = n - 1
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


# ---------------------------------------------------------------------------
# the three-region decomposition


def radial_constant(p: int, n: int) -> Fraction | None:
    """The constant c multiplying the sphere integral (with dxi-bar = (2 pi)^(1-n) dxi).

    Returns the rational factor r with c = r (2 pi)^(1-n): 1/2 for the log branch
    (p = 0, coefficient of log|lam|) and 1/p otherwise.
    """
    return Fraction(1, 2) if p == 0 else Fraction(1, p)


def radial_antiderivative(p: int):
    """Symbolic value of int_1^R r^(p-1) dr."""
    r, R = sp.symbols("r R", positive=True)
    exact = sp.integrate(r ** (p - 1), (r, 1, R))
    closed = sp.log(R) if p == 0 else (R**p - 1) / p
    return sp.simplify(exact - closed) == 0, closed


@dataclass
class RegionSplit:
    sphere: float
    p: int  # degree + n - 1
    outer: float | None  # |xi| >= |lam|^(1/2)
    inner: float | None  # |xi| <= 1, homogeneous extension
    middle_powers: list  # (exponent of |lam|, coefficient)
    log_coefficient: float  # coefficient of log|lam|
    radial_log: float  # radial factor alone (1/2 on the log branch)
    measure_factor: float


def region_decompose(term: HomogeneousTerm, lam: float, n: int, degree_total: int | None = None,
                     normalized: bool = True) -> RegionSplit:
    """Split int term dxi-bar over |xi| >= R, |xi| <= 1 and 1 <= |xi| <= R, R = |lam|^(1/2)."""
    if not (np.isreal(lam) and lam < 0):
        raise sf.CutError("region decomposition needs real lam < 0")
    deg = term.degree if degree_total is None else degree_total
    p = deg + n - 1
    R = math.sqrt(-lam)
    sph = sphere_integral(term, n).value
    fac = (2 * math.pi) ** (1 - n) if normalized else 1.0
    outer = fac * sph * (-R**p / p) if p < 0 else None
    inner = fac * sph / p if p > 0 else None
    if p == 0:
        return RegionSplit(sph, p, outer, inner, [], fac * sph * 0.5, 0.5, fac)
    middle = [(Fraction(p, 2), fac * sph / p), (Fraction(0), -fac * sph / p)]
    return RegionSplit(sph, p, outer, inner, middle, 0.0, 0.0, fac)


# ---------------------------------------------------------------------------
# spectral residues and the log enumerator


def ell_polynomial(L, model: SpectralModel | None) -> dict[int, float]:
    """Coefficients {i: c_i} with L(a) = sum c_i a^i, tangential labels replaced by model polynomials."""
    L = sp.sympify(L)
    subs = {}
    if model is not None:
        for t in model.tangential:
            if t.values is not None:
                raise ValueError(f"{t.label}: explicit per-eigenvalue values have no polynomial form")
            subs[sf.label_symbol(t.label)] = sum(sp.nsimplify(c) * sf.A**i for i, c in enumerate(t.coeffs))
    poly = sp.Poly(sp.expand(L.subs(subs)), sf.A)
    if poly.free_symbols - {sf.A}:
        raise ValueError(f"unresolved labels in {L}")
    return {int(m[0]): float(c) for m, c in zip(poly.monoms(), poly.coeffs())}


def zeta_residue(model: SpectralModel, ell: dict[int, float], s0: float, signed: bool = True) -> float:
    """Res_{s=s0} of sum over modes of sign(a) L(a) |a|^(-s) (analytic in the model parameters).

    ``signed=False`` drops the sign(a) factor.
    """
    if model.kind == "matrix":
        return 0.0
    total = 0.0
    for i, c in ell.items():
        if model.kind == "circle":
            # Hurwitz branches: pole at s = i + 1, residue 1 per branch
            if abs(s0 - (i + 1)) < 1e-12:
                total += c * (1 + (-1) ** (i + (1 if signed else 0)))
            continue
        n = model.dim_n
        cc = model.param("c")
        M = model.param("mass", 0.0)
        asym = model.param("asymmetry")
        for sign, w in ((1, 1 + asym), (-1, 1 - asym)):
            if w <= 0:
                continue
            sgn = 1 if sign > 0 else (-1) ** (i + (1 if signed else 0))
            # |a|^(i-s) = sum_t binom((i-s)/2, t) M^(2t) b^(i-s-2t), pole where s - i + 2t = n - 1
            t = (s0 - i - (n - 1)) / -2.0
            if t < -1e-12 or abs(t - round(t)) > 1e-12:
                continue
            t = int(round(t))
            if M == 0 and t > 0:
                continue
            sigma = n - 1 - 2 * t
            total += sgn * c * float(mp.binomial(-sigma / 2.0, t)) * M ** (2 * t) * cc ** (-(n - 1)) * w * (n - 1)
    return total


@dataclass
class LogEntry:
    power: Fraction  # exponent of (-lam)
    source: int
    nu: int
    coefficient: float | None
    certificate: str | None = None

    def as_json(self) -> dict:
        return {"power": str(self.power), "source": self.source, "nu": self.nu,
                "coefficient": self.coefficient, "certificate": self.certificate}


@dataclass
class LogReport:
    n: int
    entries: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def powers(self) -> set[Fraction]:
        """Candidate powers not certified to vanish."""
        return {e.power for e in self.entries if e.certificate is None}

    def nonzero_powers(self, tol: float = 1e-12) -> set[Fraction]:
        return {p for p, c in self.coefficients().items() if abs(c) > tol}

    def coefficients(self) -> dict[Fraction, float]:
        out: dict[Fraction, float] = {}
        for e in self.entries:
            if e.coefficient is not None:
                out[e.power] = out.get(e.power, 0.0) + e.coefficient
        return out

    def as_json(self) -> dict:
        return {"n": self.n, "entries": [e.as_json() for e in self.entries],
                "powers": sorted(str(p) for p in self.powers()), "notes": self.notes}


def _as_skinds(terms) -> list[SKindTerm]:
    out = []
    for t in terms:
        if isinstance(t, SKindTerm):
            out.append(t)
        elif isinstance(t, SgoTerm):
            if t.skinds is None:
                raise ValueError("SgoTerm not canonicalized")
            for row in t.skinds:
                for cell in row:
                    out.extend(cell)
        elif isinstance(t, dict):
            out.append(SKindTerm(t["kind"], int(t["l"]), int(t.get("m", 0)), int(t["j"]),
                                 sp.sympify(t.get("coeff", 1)), sp.sympify(t.get("L", 1))))
        else:
            raise ValueError(f"non-canonical term {t!r}")
    for t in out:
        if t.kind not in ("a", "b", "c") or t.j < 0:
            raise ValueError(f"non-canonical term {t!r}")
    return out


def enumerate_log_powers(terms, n: int, depth: int = 4, model: SpectralModel | None = None) -> LogReport:
    """Candidate log powers from kind-(a) terms; kinds (b), (c) contribute none.

    With a spectral ``model`` each candidate gets its exact coefficient; for odd
    n every candidate carries a parity zero certificate.  Kind-(b) terms whose
    L is odd in a are strongly polyhomogeneous only when A is a differential
    operator; synthetic spectra break that, so with a model their residues are
    added as certified-non-candidate entries that still enter coefficients().
    """
    rep = LogReport(n)
    for idx, t in enumerate(_as_skinds(terms)):
        if t.kind == "c":
            continue
        if t.kind == "b" and model is None:
            continue
        nus = [0] if t.j == 0 else list(range(depth + 1))
        ell = ell_polynomial(t.L, model) if model is not None else None
        for nu in nus:
            power = Fraction(t.l - t.j, 2) - nu
            if n % 2 == 1:
                if t.kind == "a":
                    rep.entries.append(LogEntry(power, idx, nu, 0.0, "parity: odd sphere integrand for odd n"))
                continue
            coeff = None
            if model is not None:
                b = float(mp.binomial(-t.j / 2.0, nu))
                coeff = float(t.coeff) * 0.5 * b * zeta_residue(model, ell, -2 * nu, signed=(t.kind == "a"))
            if t.kind == "b":
                if coeff:
                    rep.entries.append(LogEntry(power, idx, nu, coeff, "kind (b): no log when A is differential"))
                continue
            rep.entries.append(LogEntry(power, idx, nu, coeff))
    if n % 2 == 1:
        rep.notes.append("odd n: all log coefficients vanish by parity")
    return rep


def decompose_518(r: int = 0, F=1) -> list[SKindTerm]:
    """Exact kinds (a)/(b)/(c) of F d_lam^r of the product-case mode trace."""
    expr = sf.d_lambda(sp.sympify(F) * closed_518(), r)
    return canonicalize_scalar(expr, {})


def expected_product_logs(r: int, depth: int) -> set[Fraction]:
    """{-r-1} together with {-3/2 - r - nu : 0 <= nu <= depth'}."""
    out = {Fraction(-r - 1)}
    for nu in range(depth + 1):
        out.add(Fraction(-3, 2) - r - nu)
    return out
