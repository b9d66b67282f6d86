import cmath

import mpmath as mp
import pytest
import sympy as sp

from apslog import symfrac as sf
from apslog.symfrac import A, AL, MU, PI0, SGN, XI


def test_branches_have_positive_real_part():
    for lam in (-4.0, -1 + 2j, -1 - 2j, 3j):
        assert sf.mu_of(lam).real > 0
        assert sf.a_lambda(1.5, lam).real > 0
        assert sf.a_lambda(1.5, lam) ** 2 == pytest.approx(1.5**2 - lam)


def test_cut_rejected():
    with pytest.raises(sf.CutError):
        sf.mu_of(2.0)
    with pytest.raises(sf.CutError):
        sf.a_lambda(1.0, 0.0)


def test_canonical_reduces_al_powers():
    e = sf.canonical(AL**3)
    assert sp.expand(e - (A**2 + MU**2) * AL) == 0
    assert sf.is_zero(AL**2 - A**2 - MU**2)
    assert not sf.is_zero(AL - MU)


def test_sign_relations_per_branch():
    plus, minus, zero = sf.branch_forms(SGN * A + PI0)
    assert plus == A and minus == -A and zero == 1
    assert sf.coeff_equal(SGN**2 + PI0, 1)


def test_d_lambda_matches_numeric_derivative():
    expr = A / (AL**2 * MU) + 1 / AL
    d = sf.d_lambda(expr, 1)
    a, lam, h = 0.7, -2.3 + 0.4j, 1e-6
    num = (sf.evaluate(expr, a, lam + h) - sf.evaluate(expr, a, lam - h)) / (2 * h)
    assert sf.evaluate(d, a, lam) == pytest.approx(num, rel=1e-7)


def test_d_lambda_rejects_negative_order():
    with pytest.raises(ValueError):
        sf.d_lambda(MU, -1)


def test_evaluate_with_labels():
    p = sf.label_symbol("p")
    assert sf.free_labels(p * AL + MU) == ("p",)
    v = sf.evaluate(p * AL, 2.0, -5.0, {"p": 3.0})
    assert v == pytest.approx(3 * cmath.sqrt(9.0))


def test_partial_fractions_roundtrip():
    f = 1 / ((AL + sp.I * XI) ** 2 * (AL - sp.I * XI))
    ns = sf.partial_fractions(f)
    assert sp.simplify(ns.to_sympy() - f) == 0


def test_polynomial_cap():
    with pytest.raises(ValueError):
        sf.partial_fractions(XI**3 / (AL + sp.I * XI))


def test_trace_pairing_matches_direct_integral():
    # T x^k K = k!/(2 a_lam)^(k+1); check numerically for k = 2 at a_lam = 1.3
    k, al = 2, 1.3
    direct = mp.quad(lambda x: x**k * mp.e ** (-2 * al * x), [0, mp.inf])
    closed = float(sf.compose_T_xk_K(k).subs(AL, al))
    assert closed == pytest.approx(float(direct), rel=1e-12)
    g, f = sf.trace_symbol(0), sf.xn_power_on_K(k)
    assert sp.simplify(sf.trace_pairing(g, f) - sf.compose_T_xk_K(k)) == 0


def test_negative_powers_rejected():
    for fn in (sf.xn_power_on_K, sf.trace_symbol, sf.compose_T_xk_K):
        with pytest.raises(ValueError):
            fn(-1)
