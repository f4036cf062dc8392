"""Field-level differential operators built on the exact jets."""

from __future__ import annotations

import numpy as np

from .fields import FieldEval, FieldId, eval_field
from .geometry import GapConfig, _as_points
from .jets import laplacian, strain


def residual_of(cfg: GapConfig, ev: FieldEval) -> np.ndarray:
    """Momentum residual ``mu Lap v - grad p_bar`` from an evaluated field, shape (N, d)."""
    return cfg.mu * laplacian(ev.jets) - np.atleast_2d(ev.grad_p)


def residual(cfg: GapConfig, f: FieldId, x) -> np.ndarray:
    pts, single = _as_points(x, cfg.d)
    res = residual_of(cfg, eval_field(cfg, f, pts))
    return res[0] if single else res


def strain_of(ev: FieldEval) -> np.ndarray:
    return strain(ev.jets)


def energy_pairing(mu: float, ea: np.ndarray, eb: np.ndarray) -> np.ndarray:
    """``2 mu e_a : e_b`` for batched strain tensors."""
    return 2.0 * mu * np.einsum("nij,nij->n", ea, eb)


def energy_density(cfg: GapConfig, a: FieldId, b: FieldId, x) -> np.ndarray:
    """Energy integrand ``(2 mu e(v_a), e(v_b))`` at ``x``."""
    pts, single = _as_points(x, cfg.d)
    ea = strain_of(eval_field(cfg, a, pts, want_jets=False))
    eb = ea if b == a else strain_of(eval_field(cfg, b, pts, want_jets=False))
    out = energy_pairing(cfg.mu, ea, eb)
    return out[0] if single else out
