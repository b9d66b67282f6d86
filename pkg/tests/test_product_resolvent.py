import pytest
import sympy as sp

from apslog import product_resolvent as pr
from apslog import symfrac as sf
from apslog.symfrac import A, AL, MU

POINTS = [(1.3, -2.0), (-0.8, -0.5 + 1.5j), (2.5, 3j), (-3.0, -7.0)]


@pytest.mark.parametrize("a,lam", POINTS)
def test_mode_trace_is_dirichlet_or_robin(a, lam):
    v = pr.trn_G0_mode(a, lam)
    ref = pr.dirichlet_trace(a, lam) if a > 0 else pr.robin_trace(a, lam)
    assert v == pytest.approx(ref, rel=1e-12)


def test_zero_mode_is_dirichlet():
    # the kernel of A sits in the range of the boundary projection
    lam = -4.0
    assert pr.trn_G0_mode(0.0, lam) == pytest.approx(pr.dirichlet_trace(0.0, lam), abs=1e-14)


def test_closed_form_agrees_with_block_assembly():
    assert sf.coeff_equal(pr.g0_trace_expr(), pr.closed_518())


def test_r_derivative_closed_form():
    a, lam, h = 0.9, -3.0, 1e-5
    num = (pr.trn_G0_mode(a, lam + h) - pr.trn_G0_mode(a, lam - h)) / (2 * h)
    assert pr.trn_G0_mode(a, lam, r=1) == pytest.approx(num, rel=1e-7)


def test_boundary_condition_split():
    assert pr.boundary_condition_split(1.0)[0] != pr.boundary_condition_split(-1.0)[0]


def test_perturbation_spec_validation():
    with pytest.raises(ValueError):
        pr.PerturbationSpec((pr.PerturbationTerm(-1, "p"),))
    with pytest.raises(ValueError):
        pr.PerturbationSpec((pr.PerturbationTerm(0, "p", order=2),))
    spec = pr.PerturbationSpec((pr.PerturbationTerm(0, "p"), pr.PerturbationTerm(2, "q", 1)))
    assert spec.depth == 2
    assert spec.labels() == ("p", "q")
    assert spec.orders() == {"p": 0, "q": 1}


def test_canonicalize_scalar_roundtrip():
    expr = pr.closed_518()
    terms = pr.canonicalize_scalar(expr)
    assert sf.coeff_equal(pr.skinds_to_expr(terms), expr)
    assert {t.kind for t in terms} <= {"a", "b", "c"}
    assert all(t.j >= 0 for t in terms)


def test_canonicalize_scalar_constant_term():
    terms = pr.canonicalize_scalar(sp.Rational(-1, 2) + A / AL)
    assert sf.coeff_equal(pr.skinds_to_expr(terms), sp.Rational(-1, 2) + A / AL)


def test_canonicalize_rejects_non_polynomial_labels():
    with pytest.raises(ValueError):
        pr.canonicalize_scalar(1 / (sf.label_symbol("p") * AL))


def test_one_step_matches_template():
    spec = pr.PerturbationSpec((pr.PerturbationTerm(0, "p"),))
    word = pr.perturbation_step(pr.g0_terms(), spec)
    assert pr.sgo_lists_equal(word.sgo_terms, pr.template_452(spec))


def test_perturbed_trace_reduces_to_product_case():
    assert sf.coeff_equal(pr.perturbed_trace_expr(None, 2, 0), pr.closed_518())
    d1 = pr.perturbed_trace_expr(None, 2, 1)
    assert sf.coeff_equal(d1, sf.d_lambda(pr.closed_518(), 1))
