import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from apslog import log_extractor as le
from apslog import spectral_model as sm
from apslog.symfrac import A, AL


def test_polynomial_symbols_are_even_even():
    s = le.polynomial_series({(2, 0): 1.0, (0, 1): 0.5, (0, 0): 3.0}, 2)
    assert le.classify_parity(s) == "even-even"
    assert all(t.check_homogeneous() for t in s)


def test_sign_series_is_even_odd():
    assert le.classify_parity(le.circle_sign_series(0.3)) == "even-odd"
    assert le.classify_parity(le.circle_abs_series(0.3)) == "even-odd"


def test_mixed_parity_is_none():
    s = le.polynomial_series({(1,): 1.0}, 1) + le.circle_sign_series(0.0)
    assert le.classify_parity(s) == "none"


def test_series_product_parity():
    prod = le.series_product(le.circle_sign_series(0.0), le.circle_sign_series(0.0))
    assert le.classify_parity(prod) == "even-even"


def test_sphere_area_and_integral():
    assert le.sphere_area(2) == pytest.approx(2.0)
    assert le.sphere_area(3) == pytest.approx(2 * math.pi)
    assert le.sphere_area(4) == pytest.approx(4 * math.pi)
    one = le.HomogeneousTerm(0, lambda xi: np.ones(len(xi)), 2)
    assert le.sphere_integral(one, 3).value == pytest.approx(2 * math.pi)
    sq = le.HomogeneousTerm(2, lambda xi: xi[:, 2] ** 2, 3)
    assert le.sphere_integral(sq, 4).value == pytest.approx(4 * math.pi / 3)


def test_odd_integrand_certified_zero():
    odd = le.HomogeneousTerm(-1, lambda xi: xi[:, 0] / np.linalg.norm(xi, axis=1) ** 2, 2)
    res = le.sphere_integral(odd, 3)
    assert res.value == 0.0 and res.certificate == "odd"


def test_even_odd_terms_vanish_at_degree_one_minus_n():
    rng = np.random.default_rng(3)
    for t in le.sphere_sign_model(2, rng, degrees=(-2,), parity="even-odd"):
        assert abs(le.sphere_integral(t, 3).value) < 1e-12


def test_sphere_dim_mismatch():
    with pytest.raises(ValueError):
        le.sphere_integral(le.circle_sign_series(0.0)[0], 3)


def test_radial_pieces():
    assert le.radial_constant(0, 2) == Fraction(1, 2)
    assert le.radial_constant(3, 2) == Fraction(1, 3)
    for p in (-2, 0, 1, 3):
        assert le.radial_antiderivative(p)[0]


def test_region_decomposition_log_branch():
    t = le.HomogeneousTerm(-1, lambda xi: 1 / np.abs(xi[:, 0]), 1)
    rs = le.region_decompose(t, -100.0, 2)
    assert rs.p == 0
    assert rs.log_coefficient == pytest.approx(2 * 0.5 / (2 * math.pi))
    with pytest.raises(ValueError):
        le.region_decompose(t, 4.0, 2)


def test_ell_polynomial():
    m = sm.build_circle_model(0.2, 5, [sm.TangentialOp("p", 1, (0.5, 2.0))])
    assert le.ell_polynomial(sp.Symbol("p") * A, m) == {1: 0.5, 2: 2.0}


def test_enumerator_product_pattern():
    for r in (0, 1):
        rep = le.enumerate_log_powers(le.decompose_518(r), 2, depth=4)
        assert rep.powers() == le.expected_product_logs(r, 4)


def test_enumerator_odd_n_certifies_everything():
    rep = le.enumerate_log_powers(le.decompose_518(0), 3, depth=4)
    assert rep.powers() == set()
    assert rep.entries and all(e.certificate for e in rep.entries)


def test_enumerator_accepts_dicts_and_ignores_kinds_b_c():
    terms = [{"kind": "a", "l": 0, "m": 0, "j": 2}, {"kind": "b", "l": 0, "m": 0, "j": 2},
             {"kind": "c", "l": 0, "m": 0, "j": 0}]
    rep = le.enumerate_log_powers(terms, 2, depth=2)
    assert rep.powers() == {Fraction(-1), Fraction(-2), Fraction(-3)}
    assert {e.source for e in rep.entries} == {0}


def test_enumerator_rejects_bad_terms():
    with pytest.raises(ValueError):
        le.enumerate_log_powers([{"kind": "z", "l": 0, "j": 0}], 2)
    with pytest.raises(ValueError):
        le.enumerate_log_powers([{"kind": "a", "l": 0, "j": -1}], 2)


def test_circle_residue_and_symmetric_cancellation():
    m = sm.build_circle_model(0.25, 10)
    # sum sign(a) |a|^(-s): the two Hurwitz poles at s = 1 cancel
    assert le.zeta_residue(m, {0: 1.0}, 1.0) == 0.0
    assert le.zeta_residue(m, {0: 1.0}, 1.0, signed=False) == 2.0


def test_massive_weyl_log_coefficient():
    m = sm.build_weyl_model(2, 0.4, 30, mass=0.5)
    rep = le.enumerate_log_powers(le.decompose_518(0), 2, depth=4, model=m)
    assert rep.coefficients()[Fraction(-3, 2)] == pytest.approx(-0.01875, rel=1e-10)
