import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gapflow.asymptotics import (
    assemble,
    assemble_and_solve,
    cramer_solve,
    det_scaled,
    elimination_pivots,
    kappa_K,
    laplace_det,
    leading_coefficients,
    load_entry,
    lu_factor,
    lu_solve,
    solve_system,
    stiffness_entry,
    stiffness_matrix,
    sweep_fit,
)
from gapflow.errors import DegenerateCurvature, InsufficientData, SingularSystem, UnsupportedFamily
from gapflow.fields import BoundaryPhi1, BoundaryPhi2, BoundaryPhi3
from gapflow.geometry import GapConfig
from oracles import kappa_K_exact

A11 = 5.026548245743669  # 1.6 pi
A15 = 1.8849555921538759  # 0.6 pi
A33 = 0.1308996938995747  # pi / 24


def test_kappa_K_values():
    assert kappa_K(1, 0) == pytest.approx(0.6, abs=1e-15)
    assert kappa_K(2, 1) == pytest.approx(9.24, abs=1e-14)
    assert kappa_K(2, 0) == pytest.approx(0.6, abs=1e-15)
    with pytest.raises(DegenerateCurvature):
        kappa_K(1, 1)


@given(st.integers(1, 50), st.integers(-20, 40))
def test_kappa_K_matches_exact_rational(a, b):
    k1, kb = a / 10, b / 50
    if kb >= k1:
        return
    assert kappa_K(k1, kb) == pytest.approx(float(kappa_K_exact(a / 10, b / 50)), rel=1e-12)


def test_leading_coefficients():
    lead = leading_coefficients(GapConfig(eps=1e-3))
    assert lead["A11"] == pytest.approx(A11, rel=1e-12)
    assert lead["A15"] == pytest.approx(A15, rel=1e-12)
    assert lead["A55"] == pytest.approx(A15, rel=1e-12)
    assert lead["A33"] == pytest.approx(A33, rel=1e-12)
    with pytest.raises(UnsupportedFamily):
        leading_coefficients(GapConfig(d=4, eps=1e-3))


def test_sweep_fit_trivial_cases():
    eps = [1e-2, 1e-3, 1e-4]
    fit = sweep_fit([(e, 2 * abs(math.log(e)) + 3) for e in eps], "log_abs")
    assert fit.slope == pytest.approx(2) and fit.intercept == pytest.approx(3)
    assert fit.deviation == pytest.approx(0, abs=1e-14)
    fit = sweep_fit([(e, 5 / e) for e in eps], "inv")
    assert fit.slope == pytest.approx(5) and fit.intercept == pytest.approx(0, abs=1e-8)
    with pytest.raises(InsufficientData):
        sweep_fit([(1e-2, 1.0), (1e-3, 2.0)], "log_abs")
    with pytest.raises(InsufficientData):
        sweep_fit([(1e-2, 1.0), (1e-2, 2.0), (1e-3, 2.0)], "log_abs")


def test_identity_system():
    sol = solve_system(np.eye(6), np.eye(6)[0])
    np.testing.assert_array_equal(sol.C, np.eye(6)[0])
    assert sol.det == 1.0 and sol.positive_definite and sol.cramer_agreement == 0


def test_nonpositive_determinant_is_refused():
    with pytest.raises(SingularSystem):
        solve_system(np.diag([1.0, -1.0]), np.ones(2))
    with pytest.raises(SingularSystem):
        lu_factor(np.zeros((3, 3)))


@given(st.integers(0, 2**31 - 1), st.integers(2, 7))
def test_cramer_lu_and_determinant_agree(seed, n):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((n, n))
    a = m @ m.T + n * np.eye(n)
    b = rng.standard_normal(n)
    lu, perm, sign = lu_factor(a)
    x = lu_solve(lu, perm, b)
    np.testing.assert_allclose(a @ x, b, atol=1e-10)
    np.testing.assert_allclose(cramer_solve(a, b), x, rtol=1e-8, atol=1e-10)
    assert laplace_det(a) == pytest.approx(np.linalg.det(a), rel=1e-10)
    assert np.all(elimination_pivots(a) > 0)
    assert np.prod(elimination_pivots(a)) == pytest.approx(np.linalg.det(a), rel=1e-10)


def test_stiffness_matrix_properties():
    cfg = GapConfig(eps=1e-3)
    a = stiffness_matrix(cfg)
    np.testing.assert_array_equal(a.values, a.values.T)
    assert np.all(np.diag(a.values) > 0)
    assert np.linalg.eigvalsh(a.values).min() > 0
    # only the (1,5) and (2,6) couplings survive the reflection symmetries
    off = a.values.copy()
    np.fill_diagonal(off, 0)
    off[0, 4] = off[4, 0] = off[1, 5] = off[5, 1] = 0
    assert np.abs(off).max() <= 1e-10 * np.abs(a.values).max()
    # in-plane translations are interchangeable
    assert a.values[0, 0] == pytest.approx(a.values[1, 1], rel=1e-12)
    # regression value from this quadrature, cross-checked against a brute-force rule in test_quadrature
    assert a.values[0, 0] == pytest.approx(38.15844738622532, rel=1e-8)


def test_entry_helpers_and_load_identity():
    cfg = GapConfig(eps=1e-3)
    a11, err = stiffness_entry(cfg, 1, 1)
    assert err < 1e-8 * a11
    q1, _ = load_entry(cfg, BoundaryPhi1(0), 1)
    # the wall datum e_1 field is e_1 minus v_1, so its strain is minus the strain of v_1
    assert q1 == pytest.approx(a11, rel=1e-8)
    a, q = assemble(cfg, BoundaryPhi1(0))
    np.testing.assert_allclose(q.values, a.values[0], rtol=1e-8, atol=1e-10)
    sol = assemble_and_solve(cfg, BoundaryPhi1(0))
    np.testing.assert_allclose(sol.C, np.eye(6)[0], atol=1e-8)
    with pytest.raises(ValueError):
        assemble_and_solve(cfg, BoundaryPhi1(0), far_field=np.triu(np.ones((6, 6))))


def test_decade_difference_of_a11():
    a3 = stiffness_matrix(GapConfig(eps=1e-3)).values[0, 0]
    a4 = stiffness_matrix(GapConfig(eps=1e-4)).values[0, 0]
    assert a4 - a3 == pytest.approx(A11 * math.log(10), rel=0.03)


def test_phi3_loads_are_bounded():
    q = [assemble(GapConfig(eps=e), BoundaryPhi3(1))[1].values for e in (1e-2, 1e-3, 1e-4)]
    for b in range(6):
        fit = sweep_fit([(e, v[b]) for e, v in zip((1e-2, 1e-3, 1e-4), q)], "log_abs")
        assert abs(fit.slope) <= 0.02 * A15


def test_phi2_loads_follow_reflection_parity():
    _, q = assemble(GapConfig(eps=1e-3), BoundaryPhi2(1))
    # datum x1 e3 is odd in x1 and even in x2: it couples to alpha = 1 and 5 only
    zero = [1, 2, 3, 5]
    assert np.abs(q.values[zero]).max() <= 1e-10 * np.abs(q.values).max()


def test_det_scaling_formula():
    cfg = GapConfig(eps=1e-3)
    assert det_scaled(cfg, 2.0) == pytest.approx(2e-3 / math.log(1e3) ** 4)
    assert det_scaled(GapConfig(d=4, eps=1e-3), 2.0) == pytest.approx(2e-3)
