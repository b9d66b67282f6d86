from fractions import Fraction

import pytest

from apslog import grade_algebra as ga
from apslog.suites import EMBED_GOLDEN, GRADING_GOLDEN, SHIFT_GOLDEN, TEMPLATE_GOLDEN


@pytest.mark.parametrize("expr,kind,triple,rule", GRADING_GOLDEN)
def test_composition_table(expr, kind, triple, rule):
    g = ga.grade(expr)
    assert (g.kind, g.triple, g.rule) == (kind, triple, rule)


@pytest.mark.parametrize("expr,triple", SHIFT_GOLDEN)
def test_modifiers(expr, triple):
    assert ga.grade(expr).triple == triple


@pytest.mark.parametrize("triple,which,a,b", EMBED_GOLDEN)
def test_embeddings(triple, which, a, b):
    kind, (ga_, gb) = ga.embeddings(ga.GradeClass(*triple, "sgo0"))
    assert (kind, ga_.triple, gb.triple) == (which, a, b)


@pytest.mark.parametrize("expr,n,pstart,lstart", TEMPLATE_GOLDEN)
def test_trace_templates(expr, n, pstart, lstart):
    tpl = ga.predict_trace_shape(ga.grade(expr), n)
    assert (tpl.power_start, tpl.log_start) == (pstart, lstart)


def test_unicode_and_ascii_compose_agree():
    assert ga.grade("T[0,0,-1] ∘ K[0,0,-1]") == ga.grade("T[0,0,-1] @ K[0,0,-1]")
    assert ga.grade("gamma0 ∘ K[-1,0,-1]") == ga.grade("γ0 ∘ K[-1,0,-1]")


def test_parenthesised_association():
    g = ga.grade("(T[0,0,-1] ∘ G[-1,0,-1]) ∘ K[0,0,-1]")
    assert g.kind == "psdo_boundary"
    assert ga.dump_tree(ga.parse_expr("T ∘ (G ∘ K)")) == "(T[0, 0, 0] ∘ (G[0, 0, 0] ∘ K[0, 0, 0]))"


@pytest.mark.parametrize("text,column", [("T[0,", 5), ("T ∘", 4), ("Z", 1), ("T[0,0,-1]]", 10), ("xn^-1 G", 1)])
def test_parse_errors_carry_columns(text, column):
    with pytest.raises(ga.ParseError) as err:
        ga.parse_expr(text)
    assert err.value.column == column


@pytest.mark.parametrize("text", ["T ∘ T", "K ∘ K", "P[0,0,1] ∘ K", "P[1,0,0]", "xn^1 P[0,0,-1]"])
def test_grading_errors(text):
    with pytest.raises(ga.GradingError):
        ga.grade(text)


def test_missing_row_cites_composition_table():
    with pytest.raises(ga.GradingError, match="composition table"):
        ga.grade("T ∘ T")


def test_xiv_carries_singular_green_correction():
    g = ga.grade("P[0,0,-1] ∘ P[0,0,-2]")
    assert len(g.corrections) == 1
    assert g.corrections[0].kind == "sgo0" and g.corrections[0].triple == (0, 0, -4)


def test_strong_polyhomogeneity_removes_logs():
    g = ga.GradeClass(0, 0, -2, "sgo0", strongly_polyhomogeneous=True)
    assert ga.predict_trace_shape(g, 2).log_start is None


def test_perturbation_shape():
    tpl = ga.predict_perturbation_shape(l=0, mprime=0, tangential=False, r=2, n=2)
    assert tpl.k0 == 1
    assert tpl.power_step == Fraction(1, 2)
    assert tpl.log_start == Fraction(-1, 2) - 2
    with pytest.raises(ga.GradingError):
        ga.predict_perturbation_shape(l=0, mprime=0, tangential=False, r=1, n=2)
    assert ga.k0_value(1, 2, True) == 4 and ga.k0_value(1, 2, False) == 2


def test_predict_payload():
    out = ga.predict("G[0,-1,-2]", 2)
    assert out["template"]["log_start"] == -3
    assert ga.predict("T[0,0,-1] @ K[0,0,-1]", 4)["grade"]["kind"] == "psdo_boundary"
    assert ga.predict("K[0,0,-1]", 2)["template"] is None
