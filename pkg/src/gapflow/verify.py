"""Named invariant checks for the auxiliary fields, with reportable verdicts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fields import PHI1, PHI2, PHI3, FieldId, Rigid, BoundaryPhi1, boundary_phi, eval_field, rigid_kind, rigid_motion
from .geometry import GapConfig, delta, keller_k, neck_lattice, sample_neck, sample_surface
from .jets import divergence
from .operators import residual_of

DIVERGENCE_TOL = 1e-9
BOUNDARY_TOL = 1e-12
MIDPOINT_TOL = 1e-12
GROWTH_FACTOR = 1.1


@dataclass(frozen=True)
class CheckReport:
    check_name: str
    family: str
    eps_grid: tuple
    statistic: tuple
    threshold: float
    verdict: bool
    sample_count: int
    worst_points: tuple = field(default=())

    @property
    def passed(self) -> bool:
        return self.verdict

    def rows(self):
        """One ``(check, family, eps, statistic, threshold, verdict, worst_point)`` row per eps."""
        for i, eps in enumerate(self.eps_grid):
            ok = self.statistic[i] <= self.threshold
            worst = self.worst_points[i] if self.worst_points else ()
            yield (self.check_name, self.family, eps, self.statistic[i], self.threshold, ok, worst)


def _report(name, f, cfgs, stats, worst, threshold, n) -> CheckReport:
    stats = tuple(float(s) for s in stats)
    verdict = all(s <= threshold for s in stats)
    return CheckReport(
        name, f.label, tuple(c.eps for c in cfgs), stats, float(threshold), verdict, n, tuple(worst)
    )


def _sup(values: np.ndarray, pts: np.ndarray) -> tuple[float, tuple]:
    if values.size == 0:
        return 0.0, ()
    i = int(np.argmax(values))
    return float(values[i]), tuple(float(c) for c in pts[i])


# ---------------------------------------------------------------------------
# divergence and boundary values


def check_divergence(cfgs: Sequence[GapConfig], f: FieldId, n: int = 10_000, seed: int = 0) -> CheckReport:
    stats, worst = [], []
    for cfg in cfgs:
        pts = sample_neck(cfg, None, n, seed)
        ev = eval_field(cfg, f, pts)
        s, w = _sup(np.abs(divergence(ev.jets)) * delta(cfg, pts[:, :-1]), pts)
        stats.append(s)
        worst.append(w)
    return _report("divergence", f, cfgs, stats, worst, DIVERGENCE_TOL, n)


def required_boundary_value(cfg: GapConfig, f: FieldId, pts: np.ndarray, which: str) -> np.ndarray:
    if f.is_rigid:
        return rigid_motion(cfg.d, f.index, pts) if which == "top" else np.zeros_like(pts)
    return boundary_phi(f, pts) if which == "bottom" else np.zeros_like(pts)


def check_boundary_values(cfgs: Sequence[GapConfig], f: FieldId, n: int = 1000, seed: int = 0) -> CheckReport:
    """Relative mismatch ``|v - target| / (1 + |target|)`` on both surfaces."""
    stats, worst = [], []
    for cfg in cfgs:
        best = (0.0, ())
        for which in ("top", "bottom"):
            pts = sample_surface(cfg, None, n, seed, which)
            target = required_boundary_value(cfg, f, pts, which)
            v = eval_field(cfg, f, pts).v
            err = np.linalg.norm(v - target, axis=1) / (1.0 + np.linalg.norm(target, axis=1))
            cand = _sup(err, pts)
            if cand[0] >= best[0]:
                best = cand
        stats.append(best[0])
        worst.append(best[1])
    return _report("boundary", f, cfgs, stats, worst, BOUNDARY_TOL, 2 * n)


# ---------------------------------------------------------------------------
# envelopes


@dataclass(frozen=True)
class Envelope:
    """Bound ``weight(rho, delta)``; ``axis_free`` restricts samples to ``|x'| >= sqrt(eps)/10``."""

    weight: Callable[[np.ndarray, np.ndarray], np.ndarray]
    axis_free: bool
    text: str


def _inv(rho, dl):
    return 1.0 / dl


def _lin_inv2(rho, dl):
    return rho / dl**2


def _inv_plus_lin_inv2(rho, dl):
    return 1.0 / dl + rho / dl**2


def _lin_inv_plus_one(rho, dl):
    return rho / dl + 1.0


def _lin_inv(rho, dl):
    return rho / dl


def _one(rho, dl):
    return np.ones_like(rho)


def _power_inv(p: int):
    def w(rho, dl):
        return rho**p / dl

    return w


_E_INV = Envelope(_inv, False, "1/delta")
_E_LIN2 = Envelope(_lin_inv2, True, "|x'|/delta^2")
_E_NORMAL = Envelope(_inv_plus_lin_inv2, False, "1/delta+|x'|/delta^2")
_E_LIN_ONE = Envelope(_lin_inv_plus_one, False, "|x'|/delta+1")
_E_LIN = Envelope(_lin_inv, True, "|x'|/delta")
_E_ONE = Envelope(_one, False, "1")


def _power_env(p: int) -> Envelope:
    if p == 0:
        return _E_INV
    return Envelope(_power_inv(p), True, f"|x'|^{p}/delta")


def envelope_for(cfg: GapConfig, f: FieldId, kind: str) -> Envelope:
    """Printed gradient bound or residual weight of family ``f``."""
    if kind not in ("gradient", "residual"):
        raise ValueError(f"kind must be 'gradient' or 'residual', got {kind!r}")
    grad = kind == "gradient"
    if f.is_rigid:
        rk, _ = rigid_kind(cfg.d, f.index)
        if cfg.geometry == "ellipsoid" and f.index == 4:
            return _E_LIN if grad else _E_LIN2
        if rk in ("translation", "tilt"):
            return _E_INV
        if rk == "normal":
            return _E_NORMAL if grad else _E_LIN2
        return _E_LIN_ONE if grad else _E_LIN
    l = f.index
    if f.kind == PHI1:
        if l == 0:
            return _E_INV
        if grad:
            return _power_env(l)
        return _E_LIN2 if l == 1 else _E_INV
    if f.kind == PHI2 or (f.kind == PHI3 and f.slot == 3):
        # the normal-slot phi3 datum on the wall is the x'-polynomial of degree 2l
        deg = l if f.kind == PHI2 else 2 * l
        if deg == 0:
            return _E_NORMAL if grad else _E_LIN2
        if grad:
            return _power_env(deg - 1)
        return _E_LIN2 if deg == 2 else _E_INV
    return _E_ONE if grad else _E_INV


def envelope_ratios(cfg: GapConfig, f: FieldId, kind: str, n: int, seed: int):
    env = envelope_for(cfg, f, kind)
    r_min = math.sqrt(cfg.eps) / 10 if env.axis_free else 0.0
    pts = np.vstack([sample_neck(cfg, None, n, seed, r_min=r_min), neck_lattice(cfg, r_min=r_min)])
    ev = eval_field(cfg, f, pts)
    if kind == "gradient":
        mag = np.linalg.norm(ev.jets.jacobian, axis=(1, 2))
    else:
        mag = np.linalg.norm(residual_of(cfg, ev), axis=1)
    xp = pts[:, :-1]
    rho = np.linalg.norm(xp, axis=1)
    return mag / env.weight(rho, delta(cfg, xp)), pts


def check_envelope(
    cfgs: Sequence[GapConfig], f: FieldId, kind: str, n: int = 10_000, seed: int = 0
) -> CheckReport:
    """Sup of quantity/bound per eps; passes iff no value exceeds 1.1x the coarsest-eps value."""
    order = sorted(range(len(cfgs)), key=lambda i: -cfgs[i].eps)
    cfgs = [cfgs[i] for i in order]
    stats, worst = [], []
    for cfg in cfgs:
        ratios, pts = envelope_ratios(cfg, f, kind, n, seed)
        s, w = _sup(ratios, pts)
        stats.append(s)
        worst.append(w)
    threshold = GROWTH_FACTOR * stats[0]
    return _report(f"envelope_{kind}", f, cfgs, stats, worst, threshold, n)


# ---------------------------------------------------------------------------
# midpoint identities


def midpoint_values(cfg: GapConfig) -> dict:
    if cfg.d != 3 or cfg.geometry != "spherical":
        raise ValueError("midpoint identities are stated for d = 3 with a spherical top")
    mid = np.array([0.0, 0.0, cfg.eps / 2])
    d1 = eval_field(cfg, Rigid(1), mid).jets.comps[0].grad[0, 2]
    d0 = eval_field(cfg, BoundaryPhi1(0), mid).jets.comps[0].grad[0, 2]
    return {"k_mid": float(keller_k(cfg, mid)), "eps_dv1": float(cfg.eps * d1), "eps_dv0": float(cfg.eps * d0)}


def check_midpoint_identity(cfgs: Sequence[GapConfig]) -> CheckReport:
    """``k = 0``, ``eps d3 v1^(1) = 1`` and ``eps (d3 v1^(1) + d3 v0^(1)) = 0`` at the gap midpoint."""
    stats, worst = [], []
    for cfg in cfgs:
        m = midpoint_values(cfg)
        s = max(abs(m["k_mid"]), abs(m["eps_dv1"] - 1.0), abs(m["eps_dv1"] + m["eps_dv0"]))
        stats.append(s)
        worst.append((0.0, 0.0, cfg.eps / 2))
    return _report("midpoint", Rigid(1), cfgs, stats, worst, MIDPOINT_TOL, 1)
