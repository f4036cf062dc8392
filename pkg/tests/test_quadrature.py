import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gapflow.fields import Rigid
from gapflow.geometry import GapConfig, delta
from gapflow.operators import energy_density
from gapflow.quadrature import direction_rule, integrate_neck, vertical_rule
from oracles import brute_neck_integral, inv_delta2_integral, neck_volume, neck_volume_4d, x1_squared_moment


def _inv_d2(cfg):
    return lambda p: delta(cfg, p[:, :-1]) ** -2.0


@pytest.mark.parametrize("eps", [1e-2, 1e-4, 1e-6])
@pytest.mark.parametrize("kb", [0.0, 0.5])
def test_inverse_delta_squared(eps, kb):
    cfg = GapConfig(eps=eps, kappa1=1.5, kappa=kb)
    res = integrate_neck(cfg, _inv_d2(cfg))
    assert res.converged
    assert res.value == pytest.approx(inv_delta2_integral(eps, cfg.kappa0, 1.0), rel=1e-6)


@given(st.floats(1e-5, 1e-2), st.floats(0.2, 1.0))
def test_volume_and_moment(eps, R):
    cfg = GapConfig(eps=eps, R=R, kappa1=1.0, kappa=0.0) if eps < R * R else GapConfig(eps=R * R / 2, R=R)
    vol = integrate_neck(cfg, lambda p: np.ones(len(p)))
    assert vol.value == pytest.approx(neck_volume(cfg.eps, 1.0, R), rel=1e-10)
    mom = integrate_neck(cfg, lambda p: p[:, 0] ** 2)
    assert mom.value == pytest.approx(x1_squared_moment(cfg.eps, 1.0, R), rel=1e-10)


def test_four_dimensional_volume():
    cfg = GapConfig(d=4, eps=1e-3)
    vol = integrate_neck(cfg, lambda p: np.ones(len(p)))
    assert vol.value == pytest.approx(neck_volume_4d(1e-3, 1.0, 1.0), rel=1e-12)


def test_direction_rules_are_exact_on_low_moments():
    dirs, w = direction_rule(2)
    assert w.sum() == pytest.approx(2 * math.pi)
    assert (w * dirs[:, 0] ** 4).sum() == pytest.approx(3 * math.pi / 4)
    dirs, w = direction_rule(3)
    assert w.sum() == pytest.approx(4 * math.pi)
    assert (w * dirs[:, 0] ** 2 * dirs[:, 1] ** 2 * dirs[:, 2] ** 2).sum() == pytest.approx(4 * math.pi / 105)
    assert np.allclose((w[:, None] * dirs).sum(axis=0), 0, atol=1e-14)
    t, wt = vertical_rule()
    assert (wt * t**11).sum() == pytest.approx(1 / 12)


def test_vector_integrands_and_linearity():
    cfg = GapConfig(eps=1e-3)
    res = integrate_neck(cfg, lambda p: np.column_stack([np.ones(len(p)), 2 * np.ones(len(p))]))
    assert res.value.shape == (2,)
    assert res.value[1] == pytest.approx(2 * res.value[0], rel=1e-14)


def test_odd_integrand_needs_absolute_tolerance():
    cfg = GapConfig(eps=1e-3)
    odd = lambda p: p[:, 0] / delta(cfg, p[:, :-1])  # noqa: E731
    res = integrate_neck(cfg, odd, abs_tol=1e-12)
    assert res.converged and abs(res.value) < 1e-12


def test_budget_exhaustion_and_tolerance_floor():
    cfg = GapConfig(eps=1e-4)
    res = integrate_neck(cfg, lambda p: np.abs(p[:, 0] - 0.3) ** 0.5, max_cells=12)
    assert not res.converged and res.cells <= 12
    with pytest.raises(ValueError):
        integrate_neck(cfg, lambda p: np.ones(len(p)), rel_tol=1e-12)


def test_energy_against_brute_force_rule():
    cfg = GapConfig(eps=1e-2)
    f = lambda p: energy_density(cfg, Rigid(1), Rigid(1), p)  # noqa: E731
    ref = brute_neck_integral(f, 1e-2, 1.0, 1.0)
    assert integrate_neck(cfg, f).value == pytest.approx(ref, rel=1e-8)
