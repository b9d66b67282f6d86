import math
from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest

from apslog import product_resolvent as pr
from apslog import spectral_model as sm
from apslog import symfrac as sf
from apslog import trace_numerics as tn


def _synthetic(xs, coeffs, logs):
    out = []
    with mp.workdps(50):
        for x in xs:
            x = mp.mpf(x)
            v = sum(c * x ** (mp.mpf(e.numerator) / e.denominator) for e, c in coeffs.items())
            v += sum(c * x ** (mp.mpf(e.numerator) / e.denominator) * mp.log(x) for e, c in logs.items())
            out.append(v)
    return out


def test_fit_recovers_powers_and_logs():
    xs = tn.geometric_window(1e2, 1e6, 40)
    coeffs = {Fraction(-1): 0.7, Fraction(-3, 2): -1.2, Fraction(-2): 0.3, Fraction(-5, 2): 2.0}
    logs = {Fraction(-3, 2): 0.05}
    ys = _synthetic(xs, coeffs, logs)
    s = tn.fit_expansion(xs, ys, tn.half_steps(-1, 8), tn.half_steps(-1, 4), tau=1e-8)
    for e, c in coeffs.items():
        assert s.coefficient(e) == pytest.approx(c, rel=1e-8)
    assert s.coefficient(Fraction(-3, 2), log=True) == pytest.approx(0.05, rel=1e-8)
    assert s.term(Fraction(-1), log=True).zero_at_tau
    assert not s.term(Fraction(-3, 2), log=True).zero_at_tau
    assert s.leading().exponent == Fraction(-1)


def test_leading_skips_unresolved_terms():
    xs = tn.geometric_window(1e2, 1e6, 40)
    ys = _synthetic(xs, {Fraction(-3, 2): 1.0, Fraction(-2): 0.5}, {})
    s = tn.fit_expansion(xs, ys, tn.half_steps(-1, 6), [], tau=1e-8)
    assert s.leading().exponent == Fraction(-3, 2)
    assert s.term(Fraction(-1)).zero_at_tau


def test_fit_needs_enough_samples():
    with pytest.raises(ValueError):
        tn.fit_expansion([1.0, 2.0, 3.0], [1.0, 1.0, 1.0], [0, -1])


def test_fit_conditioning_error_carries_report():
    xs = tn.geometric_window(1e4, 1.0001e4, 40)
    ys = _synthetic(xs, {Fraction(-1): 1.0}, {})
    with pytest.raises(tn.ConditioningError) as err:
        tn.fit_expansion(xs, ys, tn.half_steps(-1, 12), tn.half_steps(-1, 6))
    assert err.value.report["condition"] > err.value.report["threshold"]


def test_csv_rows():
    t = tn.ExpansionTerm(Fraction(-3, 2), True, 0.25, 1e-9, "local", False)
    assert t.row() == ["-3/2", "1", "2.500000000000000e-01", "1.000e-09", "local", "0"]


def test_heat_resolvent_dictionary():
    # t^alpha <-> Gamma(1+alpha) x^(-1-alpha)
    c, e = tn.heat_power_to_resolvent(0.5)
    assert c == pytest.approx(math.gamma(1.5)) and e == -1.5
    # log round trip
    c_log, _, e = tn.heat_log_to_resolvent(0.5, r=1)
    assert tn.resolvent_log_to_heat(c_log, e, r=1) == pytest.approx(1.0)


def test_contour_inverts_simple_pole():
    for t in (0.05, 0.5, 2.0):
        h = tn.heat_from_resolvent(lambda lam: 1.0 / (2.0 - lam), t)
        assert h == pytest.approx(math.exp(-2 * t), rel=1e-9)


def test_spectral_sum_circle_closed_form():
    alpha = 0.3
    m = sm.build_circle_model(alpha, 20)
    with mp.workdps(30):
        val, bound = tn.spectral_sum(m, lambda a: 1 / (a * a + 1))
    exact = math.pi * math.sinh(2 * math.pi) / (math.cosh(2 * math.pi) - math.cos(2 * math.pi * alpha))
    assert float(val) == pytest.approx(exact, rel=1e-15)
    assert bound < 1e-12


def test_matrix_trace_is_mode_sum():
    m = sm.build_matrix_model([(1.0, 2), (-0.5, 1), (0.0, 1)])
    lam = -3.0 + 1j
    v = tn.boundary_resolvent_trace(m, lam=lam).value
    ref = sum(md.multiplicity * pr.trn_G0_mode(md.a, lam) for md in m.modes)
    assert v == pytest.approx(ref, rel=1e-12)


def test_divergent_sum_detected():
    m = sm.build_weyl_model(3, 0.0, 10)
    with pytest.raises(tn.DivergentSumError):
        tn.boundary_resolvent_trace(m, r=0, lam=-4.0)
    with pytest.raises(sf.CutError):
        tn.boundary_resolvent_trace(m, r=1, lam=4.0)


def test_fd_oracle_matches_closed_form():
    for a in (1.0, -0.7):
        d = tn.fd_boundary_trace(a, -2.0)
        assert d["richardson"].real == pytest.approx(pr.trn_G0_mode(a, -2.0).real, abs=1e-6)
        assert 0.2 < d["ratio"] < 0.3


def test_zeta_matrix_and_circle():
    m = sm.build_matrix_model([(1.0, 1), (-2.0, 2), (0.0, 1)])
    z = tn.zeta_eta(m, "zeta", 1.0)
    assert z.value.real == pytest.approx(1 + 2 / 4)
    e = tn.zeta_eta(m, "eta", 0.0)
    assert e.value.real == pytest.approx(1 - 2)
    c = sm.build_circle_model(0.0, 10)
    assert tn.zeta_eta(c, "zeta", 1.0).value.real == pytest.approx(math.pi**2 / 3, rel=1e-10)
    assert tn.zeta_eta(c, "eta", 0.5).value == 0


def test_circle_mellin_matches_hurwitz():
    c = sm.build_circle_model(0.3, 10)
    for which, s in (("zeta", 1.7), ("eta", 0.0), ("eta", 2.5)):
        a = tn.zeta_eta(c, which, s, method="mellin").value
        b = tn.zeta_eta(c, which, s, method="hurwitz").value
        assert a == pytest.approx(b, rel=1e-10, abs=1e-12)


def test_circle_zeta_pole():
    c = sm.build_circle_model(0.3, 10)
    poles = tn.pole_data(c, "zeta")
    assert poles == [(0.5, 1, 1.0)]
    assert tn.zeta_eta(c, "zeta", 0.5).at_pole


def test_heat_a2_fit_matches_exact_coefficients():
    c = sm.build_circle_model(0.3, 30)
    s = tn.fit_heat_A2(c)
    # index k labels the power t^(k/2)
    assert s.coefficient(Fraction(-1, 2)) == pytest.approx(tn.exact_heat_A2_coefficient(c, -1), rel=1e-8)
    assert tn.exact_heat_A2_coefficient(c, -1) == pytest.approx(math.sqrt(math.pi))
    assert abs(s.coefficient(Fraction(1, 2))) < 1e-10


@pytest.mark.parametrize("alpha", [0.0, 0.3])
@pytest.mark.parametrize("which,s", [("zeta", 0), ("zeta", -1), ("eta", -1), ("eta", 0)])
def test_circle_mellin_regular_at_gamma_poles(alpha, which, s):
    c = sm.build_circle_model(alpha, 10)
    a = tn.zeta_eta(c, which, s, method="mellin").value
    b = tn.zeta_eta(c, which, s, method="hurwitz").value
    assert a == pytest.approx(b, abs=1e-12)
