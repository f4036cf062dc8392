import pytest

from gapflow.fields import BoundaryPhi1, BoundaryPhi2, Rigid
from gapflow.geometry import GapConfig
from gapflow.verify import (
    check_boundary_values,
    check_divergence,
    check_envelope,
    check_midpoint_identity,
    envelope_for,
    midpoint_values,
)

GRID = [GapConfig(eps=e) for e in (1e-2, 1e-3, 1e-4)]


def test_divergence_report_structure():
    rep = check_divergence(GRID, Rigid(5), n=2000)
    assert rep.verdict and rep.passed
    assert rep.eps_grid == (1e-2, 1e-3, 1e-4)
    assert len(rep.statistic) == 3 and rep.sample_count == 2000
    rows = list(rep.rows())
    assert rows[0][:3] == ("divergence", "rigid5", 1e-2)
    assert len(rows[0][6]) == 3


def test_boundary_report():
    rep = check_boundary_values(GRID, BoundaryPhi2(2), n=300)
    assert rep.verdict and max(rep.statistic) <= 1e-12


def test_envelope_is_stable_for_translation():
    grid = [GapConfig(eps=e) for e in (1e-2, 1e-3, 1e-4, 1e-5)]
    rep = check_envelope(grid, Rigid(1), "gradient", n=2000)
    assert rep.verdict
    assert rep.threshold == pytest.approx(1.1 * rep.statistic[0])


def test_envelope_order_is_by_descending_eps():
    grid = [GapConfig(eps=e) for e in (1e-4, 1e-2, 1e-3)]
    rep = check_envelope(grid, Rigid(3), "gradient", n=500)
    assert rep.eps_grid == (1e-2, 1e-3, 1e-4)


def test_envelope_weights():
    cfg = GapConfig(eps=1e-3)
    assert envelope_for(cfg, Rigid(1), "gradient").text == "1/delta"
    assert envelope_for(cfg, Rigid(3), "gradient").text == "1/delta+|x'|/delta^2"
    assert envelope_for(cfg, Rigid(3), "residual").axis_free
    assert envelope_for(cfg, Rigid(4), "gradient").text == "|x'|/delta+1"
    assert envelope_for(GapConfig(eps=1e-3, kappa2=2.0), Rigid(4), "gradient").text == "|x'|/delta"
    with pytest.raises(ValueError):
        envelope_for(cfg, BoundaryPhi1(1), "hessian")


def test_midpoint():
    m = midpoint_values(GapConfig(eps=1e-4))
    assert m["k_mid"] == 0.0
    assert m["eps_dv1"] == pytest.approx(1.0, abs=1e-12)
    assert check_midpoint_identity(GRID).verdict
    with pytest.raises(ValueError):
        midpoint_values(GapConfig(d=4, eps=1e-3))
