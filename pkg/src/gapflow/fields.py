"""Explicit auxiliary velocity/pressure pairs in the neck.

Every field has the shape

    v = b(x) r(k) + E(x) (k^2 - 1/4)

where ``b`` is a rigid motion with ``r = k + 1/2`` (so ``v = psi`` on the
particle and ``v = 0`` on the wall) or a wall datum with ``r = 1/2 - k``
(``v = 0`` on the particle and ``v = phi`` on the wall).  The correction
``E`` is chosen so that ``div v = 0`` exactly.  Pressures have the form
``L(x') + mu d_{x_d} v^(d)`` with an explicit lubrication part ``L``, or vanish.

Notation used below, with ``c = kappa1 + kappa`` and ``k0 = kappa1 - kappa``:
``ddk[j] = delta dk/dx_j`` and ``H_j = k0 x_j + 2 c x_j k``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import combinations
from typing import Callable, Optional

import numpy as np

from .errors import UnsupportedFamily
from .geometry import GapConfig, NeckJets, _as_points, neck_jets
from .jets import Jet2, VecJet2

RIGID = "rigid"
PHI1 = "phi1"
PHI2 = "phi2"
PHI3 = "phi3"
_KINDS = (RIGID, PHI1, PHI2, PHI3)
MAX_EXPONENT = 6


@dataclass(frozen=True, order=True)
class FieldId:
    """Identifier of one auxiliary field.

    * ``rigid``: ``index`` is the rigid-motion index alpha (1-based).
    * ``phi1``: wall datum ``x_slot^index`` placed in tangential component ``comp``.
    * ``phi2``: wall datum ``x_slot^index`` in the normal component.
    * ``phi3``: wall datum ``x_d^index`` in component ``slot``.
    """

    kind: str
    index: int
    slot: int = 1
    comp: int = 1

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}")
        if self.index < 0 or (self.kind == RIGID and self.index < 1):
            raise ValueError(f"invalid index {self.index} for {self.kind}")
        if self.kind == PHI3 and self.index < 1:
            raise ValueError("phi3 exponents start at 1")
        if self.kind != RIGID and self.index > MAX_EXPONENT:
            raise ValueError(f"exponent {self.index} exceeds the cap {MAX_EXPONENT}")

    @property
    def is_rigid(self) -> bool:
        return self.kind == RIGID

    @property
    def label(self) -> str:
        if self.kind == RIGID:
            return f"rigid{self.index}"
        if self.kind == PHI1:
            return f"phi1_l{self.index}_i{self.slot}_c{self.comp}"
        if self.kind == PHI2:
            return f"phi2_l{self.index}_i{self.slot}"
        return f"phi3_l{self.index}_j{self.slot}"

    @classmethod
    def parse(cls, label: str) -> "FieldId":
        """Inverse of :attr:`label`."""
        if label.startswith("rigid"):
            return cls(RIGID, int(label[5:]))
        kind, *parts = label.split("_")
        vals = {p[0]: int(p[1:]) for p in parts}
        if kind == PHI1:
            return cls(PHI1, vals["l"], vals.get("i", 1), vals.get("c", 1))
        if kind == PHI2:
            return cls(PHI2, vals["l"], vals.get("i", 1))
        if kind == PHI3:
            return cls(PHI3, vals["l"], vals.get("j", 1))
        raise ValueError(f"cannot parse field label {label!r}")


def Rigid(alpha: int) -> FieldId:
    return FieldId(RIGID, alpha)


def BoundaryPhi1(l: int, i: int = 1, comp: int = 1) -> FieldId:
    return FieldId(PHI1, l, i, comp)


def BoundaryPhi2(l: int, i: int = 1) -> FieldId:
    return FieldId(PHI2, l, i)


def BoundaryPhi3(l: int, j: int = 1) -> FieldId:
    return FieldId(PHI3, l, j)


# ---------------------------------------------------------------------------
# rigid motions


def rigid_count(d: int) -> int:
    return d * (d + 1) // 2


def rotation_pairs(d: int) -> list[tuple[int, int]]:
    """0-based ``(j, k)`` pairs of the rotations ``x_k e_j - x_j e_k`` in basis order."""
    return list(combinations(range(d), 2))


def rigid_kind(d: int, alpha: int) -> tuple[str, tuple[int, ...]]:
    """Classify alpha as ``translation`` (axis), ``normal``, ``inplane`` (j, k) or ``tilt`` (j,)."""
    if not 1 <= alpha <= rigid_count(d):
        raise IndexError(f"rigid index {alpha} outside 1..{rigid_count(d)}")
    if alpha < d:
        return "translation", (alpha - 1,)
    if alpha == d:
        return "normal", ()
    j, k = rotation_pairs(d)[alpha - d - 1]
    if k == d - 1:
        return "tilt", (j,)
    return "inplane", (j, k)


def rigid_motion(d: int, alpha: int, x) -> np.ndarray:
    """Evaluate the rigid motion psi_alpha at ``x`` (shape (d,) or (N, d))."""
    pts, single = _as_points(x, d)
    out = np.zeros_like(pts)
    if alpha <= d:
        rigid_kind(d, alpha)
        out[:, alpha - 1] = 1.0
    else:
        rigid_kind(d, alpha)
        j, k = rotation_pairs(d)[alpha - d - 1]
        out[:, j] = pts[:, k]
        out[:, k] = -pts[:, j]
    return out[0] if single else out


def _rigid_jets(nj: NeckJets, alpha: int) -> list[Jet2]:
    d = nj.cfg.d
    comps = [nj.const(0.0) for _ in range(d)]
    if alpha <= d:
        comps[alpha - 1] = nj.const(1.0)
    else:
        j, k = rotation_pairs(d)[alpha - d - 1]
        comps[j] = nj.x[k]
        comps[k] = -nj.x[j]
    return comps


# ---------------------------------------------------------------------------
# wall data


def boundary_phi(f: FieldId, x) -> np.ndarray:
    """Monomial wall datum of a boundary family at ``x`` (dimension from ``x``)."""
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    d = pts.shape[1]
    out = np.zeros_like(pts)
    if f.kind == PHI1:
        out[:, f.comp - 1] = pts[:, f.slot - 1] ** f.index
    elif f.kind == PHI2:
        out[:, d - 1] = pts[:, f.slot - 1] ** f.index
    elif f.kind == PHI3:
        out[:, f.slot - 1] = pts[:, d - 1] ** f.index
    else:
        raise ValueError("boundary_phi requires a boundary family")
    return out[0] if single else out


# ---------------------------------------------------------------------------
# evaluation results


@dataclass(frozen=True)
class FieldEval:
    """Velocity, pressure and their derivatives at a batch of points.

    With first-order jets the pressure is not available and ``p_bar`` and
    ``grad_p`` are ``None``.
    """

    v: np.ndarray
    p_bar: Optional[np.ndarray]
    jets: VecJet2
    grad_p: Optional[np.ndarray]
    derived_by_symmetry: bool = False


@dataclass(frozen=True)
class _Raw:
    vel: VecJet2
    lub: Optional[Jet2]  # lubrication part of the pressure; None for p_bar = 0


def _combine(nj: NeckJets, base, ramp: Jet2, corr) -> VecJet2:
    comps = []
    for b, e in zip(base, corr):
        c = b * ramp
        if e is not None:
            c = c + e * nj.q
        comps.append(c)
    return VecJet2(comps)


def _pressure(nj: NeckJets, raw: _Raw):
    n, d = nj.n, nj.cfg.d
    if nj.order == 1:
        return None, None
    if raw.lub is None:
        return np.zeros(n), np.zeros((n, d))
    mu = nj.cfg.mu
    vd = raw.vel.comps[d - 1]
    return raw.lub.value + mu * vd.grad[:, d - 1], raw.lub.grad + mu * vd.hess[:, d - 1, :]


def _normal_closure(nj: NeckJets, corr, extra: Optional[Jet2] = None) -> Jet2:
    """Normal correction ``extra - sum_j ddk_j E_j`` that cancels ``dE_j/dx_j``-type terms."""
    out = nj.const(0.0) if extra is None else extra
    for j, e in enumerate(corr[:-1]):
        if e is not None:
            out = out - nj.ddk[j] * e
    return out


# ---------------------------------------------------------------------------
# rigid fields, spherical top surface in any dimension


def _rigid_spherical(nj: NeckJets, alpha: int) -> _Raw:
    cfg = nj.cfg
    d, mu = cfg.d, cfg.mu
    c, k0 = cfg.kappa1 + cfg.kappa, cfg.kappa1 - cfg.kappa
    x, k, inv = nj.x, nj.k, nj.inv_delta
    base = _rigid_jets(nj, alpha)
    kind, idx = rigid_kind(d, alpha)
    m = 2 * d - 1
    corr: list[Optional[Jet2]] = [None] * d
    lub: Optional[Jet2] = None
    if kind == "translation":
        (a,) = idx
        for i in range(d - 1):
            corr[i] = x[a] * x[i] * inv * (-12.0 * c / m)
        corr[a] = corr[a] + 3.0 * c / (m * k0)
        h_a = x[a] * k0 + x[a] * k * (2 * c)
        corr[d - 1] = _normal_closure(nj, corr, h_a)
        lub = x[a] * inv * inv * (6.0 * mu * c / (m * k0))
    elif kind == "normal":
        for i in range(d - 1):
            corr[i] = x[i] * inv * (6.0 / (d - 1))
        corr[d - 1] = _normal_closure(nj, corr, k * -2.0)
        lub = inv * inv * (-3.0 * mu / ((d - 1) * k0))
    elif kind == "tilt":
        (j,) = idx
        xd = x[d - 1]
        for i in range(d - 1):
            corr[i] = x[i] * x[j] * inv * (-12.0 / m)
        corr[j] = corr[j] - k * xd * 2.0 - xd * xd * inv * 3.0 + 3.0 / (m * k0)
        # the closure for component j acts on F + 2 k x_d
        shifted = list(corr)
        shifted[j] = corr[j] + k * xd * 2.0
        corr[d - 1] = _normal_closure(nj, shifted, k * x[j] * 2.0)
        lub = x[j] * inv * inv * (6.0 * mu / (m * k0))
    return _Raw(_combine(nj, base, k + 0.5, corr), lub)


# ---------------------------------------------------------------------------
# rigid fields, ellipsoidal top surface (d = 3)


def _rigid_ellipsoid(nj: NeckJets, alpha: int) -> _Raw:
    cfg = nj.cfg
    mu = cfg.mu
    k1, k2, kb = cfg.kappa1, cfg.kappa2, cfg.kappa
    c, a, b = k1 + kb, k1 - kb, k2 - kb
    x, k, inv = nj.x, nj.k, nj.inv_delta
    base = _rigid_jets(nj, alpha)
    corr: list[Optional[Jet2]] = [None] * 3
    lub: Optional[Jet2] = None
    if alpha == 1:
        s = 3 * k1 + 2 * k2 - 5 * kb
        corr[0] = x[0] * x[0] * inv * (-12.0 * (k1 * k1 - kb * kb) / s) + 3.0 * c / s
        corr[1] = x[0] * x[1] * inv * (-12.0 * c * b / s)
        corr[2] = _normal_closure(nj, corr, x[0] * a + x[0] * k * (2 * c))
        lub = x[0] * inv * inv * (6.0 * mu * c / s)
    elif alpha == 3:
        corr[0] = x[0] * inv * (6.0 * a / (a + b))
        corr[1] = x[1] * inv * (6.0 * b / (a + b))
        corr[2] = _normal_closure(nj, corr, k * -2.0)
        lub = inv * inv * (-3.0 * mu / (a + b))
    elif alpha == 4:
        corr[0] = x[1] * -3.0
        corr[1] = x[0] * 3.0
        corr[2] = (k * 2.0 + 1.0) * x[0] * x[1] * (2.0 * (k2 - k1))
    else:
        raise UnsupportedFamily(f"rigid field {alpha} has no ellipsoid construction")
    return _Raw(_combine(nj, base, k + 0.5, corr), lub)


# ---------------------------------------------------------------------------
# boundary families (spherical top surface)


def _phi1_direct(nj: NeckJets, l: int) -> _Raw:
    """Datum ``x_1^l e_1``; valid in every dimension."""
    cfg = nj.cfg
    d = cfg.d
    if l == 0:
        rig = _rigid_spherical(nj, 1)
        one = [nj.const(1.0 if i == 0 else 0.0) for i in range(d)]
        vel = VecJet2([o - r for o, r in zip(one, rig.vel.comps)])
        return _Raw(vel, -rig.lub)
    c, k0, kb = cfg.kappa1 + cfg.kappa, cfg.kappa1 - cfg.kappa, cfg.kappa
    x1, k, inv = nj.x[0], nj.k, nj.inv_delta
    f = x1**l
    g = x1 ** (l + 2) * inv
    e1 = g * k * (32.0 * k0 / (l + 2)) + g * (12.0 * kb / (l + 2)) - f * k * 8.0 + f * 3.0
    ed = (
        (k * 2.0 - 1.0) * k * nj.delta * (x1 ** (l - 1)) * float(l)
        - x1 ** (l + 1) * k * (k * (2 * k0) + c) * 2.0
        - nj.ddk[0] * e1
    )
    corr: list[Optional[Jet2]] = [None] * d
    corr[0], corr[d - 1] = e1, ed
    base = [f if i == 0 else nj.const(0.0) for i in range(d)]
    return _Raw(_combine(nj, base, 0.5 - k, corr), None)


def _phi1_cross(nj: NeckJets, l: int) -> _Raw:
    """Datum ``x_2^l e_1`` (d = 3)."""
    cfg = nj.cfg
    c, k0, kb = cfg.kappa1 + cfg.kappa, cfg.kappa1 - cfg.kappa, cfg.kappa
    x1, x2, k, inv = nj.x[0], nj.x[1], nj.k, nj.inv_delta
    f = x2**l
    e1 = f * 3.0 + x1 * x1 * f * inv * (6.0 * kb)
    e3 = -(f * (x1 * k0 + x1 * k * (2 * c))) - nj.ddk[0] * e1
    base = [f, nj.const(0.0), nj.const(0.0)]
    return _Raw(_combine(nj, base, 0.5 - k, [e1, None, e3]), None)


def _phi2(nj: NeckJets, l: int) -> _Raw:
    """Datum ``x_1^l e_3`` (d = 3)."""
    cfg = nj.cfg
    mu, k0 = cfg.mu, cfg.kappa1 - cfg.kappa
    x1, x2, k, inv = nj.x[0], nj.x[1], nj.k, nj.inv_delta
    if l == 0:
        rig = _rigid_spherical(nj, 3)
        one = [nj.const(0.0), nj.const(0.0), nj.const(1.0)]
        vel = VecJet2([o - r for o, r in zip(one, rig.vel.comps)])
        return _Raw(vel, -rig.lub)
    base = [nj.const(0.0), nj.const(0.0), x1**l]
    corr: list[Optional[Jet2]] = [None] * 3
    lub = None
    if l == 1:
        corr[0] = x1 * x1 * inv * (-12.0 / 5.0) + 3.0 / (5.0 * k0)
        corr[1] = x1 * x2 * inv * (-12.0 / 5.0)
        lub = x1 * inv * inv * (6.0 * mu / (5.0 * k0))
    else:
        corr[0] = x1 ** (l + 1) * inv * (-6.0 / (l + 1))
    corr[2] = _normal_closure(nj, corr, k * x1**l * 2.0)
    return _Raw(_combine(nj, base, 0.5 - k, corr), lub)


def _phi3(nj: NeckJets, l: int, slot: int) -> _Raw:
    """Datum ``x_3^l e_slot`` with slot 1 or 3 (d = 3)."""
    cfg = nj.cfg
    x1, x3, k, inv = nj.x[0], nj.x[2], nj.k, nj.inv_delta
    zero = nj.const(0.0)
    if slot == 1:
        g = x3 ** (l + 1) * inv * (6.0 / (l + 1))
        e1 = x3**l * k * 2.0 + g
        e3 = nj.htilde(0) * g
        return _Raw(_combine(nj, [x3**l, zero, zero], 0.5 - k, [e1, None, e3]), None)
    # slot 3: on the wall x_3 = h(x'), so the datum is the x'-polynomial h^l
    h = (x1 * x1 + nj.x[1] * nj.x[1]) * cfg.kappa
    f = h**l
    corr = [nj.x[0] * f * inv * (-3.0 / (l + 1)), nj.x[1] * f * inv * (-3.0 / (l + 1)), None]
    corr[2] = _normal_closure(nj, corr, k * f * 2.0)
    return _Raw(_combine(nj, [zero, zero, f], 0.5 - k, corr), None)


# ---------------------------------------------------------------------------
# dispatch


_SWAP12 = (1, 0, 2)


def _plan(cfg: GapConfig, f: FieldId) -> tuple[Callable[[NeckJets], _Raw], Optional[tuple]]:
    """Return the builder and the coordinate permutation it must be pulled back by."""
    geom, d = cfg.geometry, cfg.d
    if f.kind == RIGID:
        rigid_kind(d, f.index)
        if geom == "ellipsoid":
            if f.index == 2:
                return (lambda nj: _rigid_ellipsoid(nj, 1)), _SWAP12
            return (lambda nj: _rigid_ellipsoid(nj, f.index)), None
        return (lambda nj: _rigid_spherical(nj, f.index)), None
    if geom == "ellipsoid":
        raise UnsupportedFamily(f"{f.label} has no ellipsoid construction")
    if f.kind == PHI1:
        if not (1 <= f.slot <= d - 1 and 1 <= f.comp <= d - 1):
            raise UnsupportedFamily(f"{f.label}: slot and component must be tangential")
        if f.index == 0 or f.slot == f.comp:
            if f.comp == 1:
                return (lambda nj: _phi1_direct(nj, f.index)), None
            perm = list(range(d))
            perm[0], perm[f.comp - 1] = f.comp - 1, 0
            return (lambda nj: _phi1_direct(nj, f.index)), tuple(perm)
        if d != 3:
            raise UnsupportedFamily(f"{f.label} is constructed only for d = 3")
        if f.comp == 1:
            return (lambda nj: _phi1_cross(nj, f.index)), None
        return (lambda nj: _phi1_cross(nj, f.index)), _SWAP12
    if d != 3:
        raise UnsupportedFamily(f"{f.label} is constructed only for d = 3")
    if f.kind == PHI2:
        if f.slot not in (1, 2):
            raise UnsupportedFamily(f"{f.label}: slot must be 1 or 2")
        return (lambda nj: _phi2(nj, f.index)), (None if f.slot == 1 else _SWAP12)
    if f.slot not in (1, 2, 3):
        raise UnsupportedFamily(f"{f.label}: slot must be 1, 2 or 3")
    if f.slot == 2:
        return (lambda nj: _phi3(nj, f.index, 1)), _SWAP12
    return (lambda nj: _phi3(nj, f.index, f.slot)), None


def is_derived_by_symmetry(cfg: GapConfig, f: FieldId) -> bool:
    return _plan(cfg, f)[1] is not None


def supported(cfg: GapConfig, f: FieldId) -> bool:
    try:
        _plan(cfg, f)
    except (UnsupportedFamily, IndexError):
        return False
    return True


def eval_field(cfg: GapConfig, f: FieldId, x, want_jets: bool = True) -> FieldEval:
    """Evaluate ``(v, p_bar)`` of family ``f`` with exact derivatives at ``x``.

    ``x`` is an ``(N, d)`` array of in-neck points; a single point is accepted.
    ``want_jets=False`` propagates first derivatives only (enough for strain),
    in which case the pressure is omitted.
    """
    pts, single = _as_points(x, cfg.d)
    builder, perm = _plan(cfg, f)
    order = 2 if want_jets else 1
    if perm is None:
        nj = neck_jets(cfg, pts, order)
        raw = builder(nj)
        vel = raw.vel
        p, gp = _pressure(nj, raw)
    else:
        p_idx = list(perm)
        mcfg = cfg.swapped() if perm == _SWAP12 and cfg.geometry == "ellipsoid" else cfg
        nj = neck_jets(mcfg, pts[:, p_idx], order)
        raw = builder(nj)
        p, gp = _pressure(nj, raw)
        vel = raw.vel.reflect(p_idx)
        gp = None if gp is None else gp[:, p_idx]
    out = FieldEval(vel.values, p, vel, gp, perm is not None)
    if single:
        return replace(
            out,
            v=out.v[0],
            p_bar=None if p is None else out.p_bar[0],
            grad_p=None if gp is None else out.grad_p[0],
        )
    return out


def all_rigid(cfg: GapConfig) -> list[FieldId]:
    return [Rigid(a) for a in range(1, rigid_count(cfg.d) + 1)]
