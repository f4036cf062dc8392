import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gapflow.jets import Jet2, VecJet2, divergence, jet_arith, laplacian, strain
from oracles import fd_gradient, fd_hessian

coords = st.floats(-2.0, 2.0, allow_nan=False)


def _vars(x):
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    return [Jet2.variable(pts, i) for i in range(pts.shape[1])], pts


def _fun_jet(x):
    (a, b, c), _ = _vars(x)
    return (a * b + 3.0) / (c * c + 1.0) - (a - 2.0) ** 3 * b


def _fun_val(x):
    a, b, c = x
    return (a * b + 3.0) / (c * c + 1.0) - (a - 2.0) ** 3 * b


@given(st.tuples(coords, coords, coords))
def test_gradient_and_hessian_match_finite_differences(x):
    j = _fun_jet(x)
    np.testing.assert_allclose(j.value[0], _fun_val(np.array(x)), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(j.grad[0], fd_gradient(_fun_val, x, 1e-6), rtol=1e-6, atol=1e-6)
    np.testing.assert_allclose(j.hess[0], fd_hessian(_fun_val, x, 1e-4), rtol=1e-4, atol=1e-4)


@given(st.tuples(coords, coords, coords))
def test_hessian_is_exactly_symmetric(x):
    h = _fun_jet(x).hess[0]
    assert np.array_equal(h, h.T)


@given(st.tuples(coords, coords, coords), st.integers(-3, 4))
def test_integer_powers(x, n):
    (a, b, c), _ = _vars(x)
    base = a * a + b * c + 3.0 + c * c
    p = base**n
    ref = base.value[0] ** n
    np.testing.assert_allclose(p.value[0], ref, rtol=1e-12)
    f = lambda y: (y[0] ** 2 + y[1] * y[2] + 3.0 + y[2] ** 2) ** n  # noqa: E731
    np.testing.assert_allclose(p.grad[0], fd_gradient(f, x, 1e-6), rtol=1e-5, atol=1e-7)


def test_product_rule_and_constants():
    (a, b), _ = _vars([1.5, -2.0])
    p = a * b
    assert p.value[0] == -3.0
    np.testing.assert_array_equal(p.grad[0], [-2.0, 1.5])
    np.testing.assert_array_equal(p.hess[0], [[0.0, 1.0], [1.0, 0.0]])
    c = Jet2.constant(4.0, 1, 2)
    assert np.all(c.grad == 0) and np.all(c.hess == 0)


def test_reciprocal_of_zero_raises():
    (a,), _ = _vars([0.0])
    with pytest.raises(ZeroDivisionError):
        a.reciprocal()
    with pytest.raises(ZeroDivisionError):
        a / 0.0


def test_jet_arith_dispatch():
    (a, b), _ = _vars([2.0, 3.0])
    assert jet_arith(a, b, "add").value[0] == 5.0
    assert jet_arith(a, b, "sub").value[0] == -1.0
    assert jet_arith(a, b, "mul").value[0] == 6.0
    assert jet_arith(a, b, "div").value[0] == pytest.approx(2 / 3)
    assert jet_arith(a, 3, "pow").value[0] == 8.0
    with pytest.raises(ValueError):
        jet_arith(a, b, "mod")
    with pytest.raises(TypeError):
        a**0.5


@given(st.tuples(coords, coords, coords))
def test_first_order_jets_share_gradients(x):
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    full = _fun_jet(x)
    a, b, c = (Jet2.variable(pts, i, order=1) for i in range(3))
    low = (a * b + 3.0) / (c * c + 1.0) - (a - 2.0) ** 3 * b
    assert low.hess is None and low.order == 1
    np.testing.assert_array_equal(low.grad, full.grad)
    np.testing.assert_array_equal(low.value, full.value)


def test_vector_operators_on_linear_fields():
    pts = np.array([[0.3, -0.2, 0.7]])
    x, y, z = (Jet2.variable(pts, i) for i in range(3))
    v = VecJet2([x * 2.0, y * 3.0 - z, x * x])
    assert divergence(v)[0] == pytest.approx(5.0)
    np.testing.assert_allclose(laplacian(v)[0], [0.0, 0.0, 2.0])
    e = strain(v)[0]
    np.testing.assert_allclose(e, e.T)
    assert e[0, 2] == pytest.approx(0.5 * 2 * 0.3)


def test_reflect_permutes_components_and_derivatives():
    pts = np.array([[0.3, -0.2, 0.7]])
    x, y, z = (Jet2.variable(pts, i) for i in range(3))
    v = VecJet2([x * y, z, x])
    r = v.reflect((1, 0, 2))
    assert r.comps[0].value[0] == pytest.approx(0.7)
    np.testing.assert_array_equal(r.comps[0].grad[0], [0.0, 0.0, 1.0])
    # grad(xy) = (y, x, 0) = (-0.2, 0.3, 0), with derivative slots swapped
    np.testing.assert_allclose(r.comps[1].grad[0], [0.3, -0.2, 0.0])
    np.testing.assert_array_equal(r.comps[1].hess[0], [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
