import json

import numpy as np
import pytest

from apslog import spectral_model as sm


def test_matrix_model_merges_and_sorts():
    m = sm.build_matrix_model([(2.0, 1), (-1.0, 2), (2.0, 1), (0.0, 1)])
    assert [md.a for md in m.modes] == [-1.0, 0.0, 2.0]
    assert m.total_dimension() == 5
    assert m.kernel_rank() == 1
    assert list(m.eigenvalues()) == [-1.0, -1.0, 0.0, 2.0, 2.0]


def test_matrix_model_rejects_bad_input():
    with pytest.raises(sm.ModelError):
        sm.build_matrix_model([])
    with pytest.raises(sm.ModelError):
        sm.build_matrix_model([(1.0, 0)])


def test_noncommuting_values_rejected():
    op = sm.TangentialOp("p", 0, values=((1.0, 0.5), (1.0, 0.7), (2.0, 0.1)))
    with pytest.raises(sm.ModelError):
        sm.build_matrix_model([(1.0, 1), (2.0, 1)], [op])
    op = sm.TangentialOp("p", 0, values=((1.0, 0.5),))
    with pytest.raises(sm.ModelError):
        sm.build_matrix_model([(1.0, 1), (2.0, 1)], [op])


def test_tangential_degree_bounded_by_order():
    with pytest.raises(sm.ModelError):
        sm.TangentialOp("p", 0, (1.0, 2.0))
    op = sm.TangentialOp("p", 1, (1.0, 2.0))
    assert op.scalar(3.0) == 7.0


def test_circle_modes_and_branches():
    m = sm.build_circle_model(0.25, 5)
    assert len(m.modes) == 11
    assert m.dim_n == 2
    pos, neg = m.branches()
    assert pos.value(6) == pytest.approx(6.25)
    assert neg.value(6) == pytest.approx(5.75)
    assert sm.check_weyl_counting(m, 5.0, rtol=0.2)


def test_weyl_counting_and_asymmetry():
    m = sm.build_weyl_model(3, 0.4, 400)
    assert sm.check_weyl_counting(m, 15.0, rtol=0.05)
    pos = sum(1 for md in m.modes if md.a > 0)
    neg = sum(1 for md in m.modes if md.a < 0)
    assert pos == round(1.4 * 400) and neg == round(0.6 * 400)


def test_weyl_parameter_checks():
    for kw in ({"n": 1, "asymmetry": 0.0}, {"n": 2, "asymmetry": 1.5}):
        with pytest.raises(sm.ModelError):
            sm.build_weyl_model(kw["n"], kw["asymmetry"], 10)


def test_mass_shifts_spectrum():
    m0 = sm.build_weyl_model(2, 0.0, 10)
    m1 = sm.build_weyl_model(2, 0.0, 10, mass=0.5)
    a0 = np.sort(np.abs(m0.eigenvalues()))
    a1 = np.sort(np.abs(m1.eigenvalues()))
    assert np.allclose(a1, np.sqrt(a0**2 + 0.25))


def test_growth_check():
    op = sm.TangentialOp("p", 1, (0.5, 2.0))
    m = sm.build_circle_model(0.3, 20, [op])
    assert sm.check_growth(m)
    assert not sm.check_growth(m, C=0.1)


def test_heat_trace_matrix():
    m = sm.build_matrix_model([(1.0, 2), (-2.0, 1)])
    assert sm.heat_trace_A2(m, 0.1) == pytest.approx(2 * np.exp(-0.1) + np.exp(-0.4))


def test_theta_dual_matches_direct_sum():
    t, alpha = 0.3, 0.2
    direct = sum(np.exp(-t * (k + alpha) ** 2) for k in range(-60, 61))
    assert sm.theta_dual(alpha, t) == pytest.approx(direct, rel=1e-12)


def test_load_model_roundtrip():
    cfg = {"kind": "synthetic_weyl", "dim_n": 3, "params": {"asymmetry": 0.2, "N": 30, "mass": 0.0},
           "tangential": [{"label": "p", "order": 0, "coeffs": [0.3]}]}
    m = sm.load_model(json.dumps(cfg))
    assert m.dim_n == 3 and m.labels() == ("p",)
    with pytest.raises(sm.ModelError):
        sm.load_model({"kind": "circle", "dim_n": 3, "params": {"alpha": 0.1, "N": 3}})
    with pytest.raises(sm.ModelError):
        sm.load_model({"kind": "torus"})
