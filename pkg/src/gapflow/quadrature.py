"""Adaptive quadrature over the neck region ``{h < x_d < eps + h1, |x'| < r}``.

Coordinates are ``x' = rho * omega`` and ``x_d = h(x') + t delta(x')`` with
``t in (0, 1)``.  The vertical fraction uses a fixed Gauss-Legendre rule,
directions use a fixed symmetric rule (equispaced angles in the plane, a
Legendre-by-angle product on higher spheres), and the radius is integrated
adaptively with a 7/15-point Gauss-Kronrod pair on cells that start from the
geometric grading ``r 2^-j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .geometry import GapConfig, delta, gap_surfaces, grading_radii

# Kronrod abscissae on [0, 1) (mirrored), QUADPACK qk15 values.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# full 15-point nodes on [-1, 1] and the matching 7-point Gauss weights
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_W_K = np.concatenate([_WGK[:-1], _WGK[::-1]])
_W_G = np.zeros(15)
_gauss_pos = [1, 3, 5]
for _i, _w in zip(_gauss_pos, _WG[:-1]):
    _W_G[_i] = _w
    _W_G[14 - _i] = _w
_W_G[7] = _WG[-1]

N_ANGLE = 32
N_POLAR = 16
N_AZIMUTH_SPHERE = 16
N_VERTICAL = 12
DEFAULT_MAX_CELLS = 4000
_CHUNK_POINTS = 60_000


@dataclass(frozen=True)
class NeckIntegral:
    value: float | np.ndarray
    abs_error_estimate: float | np.ndarray
    cells: int
    converged: bool


@lru_cache(maxsize=None)
def _circle_rule(m: int) -> tuple[np.ndarray, np.ndarray]:
    theta = (np.arange(m) + 0.5) * (2 * math.pi / m)
    return np.stack([np.cos(theta), np.sin(theta)], axis=1), np.full(m, 2 * math.pi / m)


@lru_cache(maxsize=None)
def direction_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric quadrature on the unit sphere of R^n: ``(directions (A, n), weights (A,))``."""
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if n == 2:
        return _circle_rule(N_ANGLE)
    sub_dirs, sub_w = _circle_rule(N_AZIMUTH_SPHERE) if n == 3 else direction_rule(n - 1)
    if n == 3:
        # exact in u = omega_n: surface measure is du dphi
        u, wu = np.polynomial.legendre.leggauss(N_POLAR)
        s = np.sqrt(1.0 - u * u)
    else:
        # polar angle with Jacobian sin^(n-2)
        g, wg = np.polynomial.legendre.leggauss(N_POLAR)
        phi = 0.5 * math.pi * (g + 1.0)
        u, s = np.cos(phi), np.sin(phi)
        wu = 0.5 * math.pi * wg * s ** (n - 2)
    dirs = np.concatenate([np.column_stack([s[i] * sub_dirs, np.full(len(sub_w), u[i])]) for i in range(len(u))])
    w = np.concatenate([wu[i] * sub_w for i in range(len(u))])
    return dirs, w


@lru_cache(maxsize=None)
def vertical_rule(n: int = N_VERTICAL) -> tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (t + 1.0), 0.5 * w


def _radial_values(cfg: GapConfig, integrand: Callable, rho: np.ndarray) -> np.ndarray:
    """Integral over the shell ``|x'| = rho`` and the gap, per radius: shape (M, m)."""
    n = cfg.d - 1
    dirs, wd = direction_rule(n)
    tn, wt = vertical_rule()
    xp = (rho[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    bottom, _ = gap_surfaces(cfg, xp)
    dl = delta(cfg, xp)
    xd = bottom[:, None] + dl[:, None] * tn[None, :]
    pts = np.column_stack([np.repeat(xp, len(tn), axis=0), xd.reshape(-1)])
    vals = np.asarray(integrand(pts), dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    m = vals.shape[1]
    vals = vals.reshape(len(rho), len(wd), len(tn), m)
    jac = dl.reshape(len(rho), len(wd))
    inner = np.einsum("rati,t->rai", vals, wt) * jac[:, :, None]
    return np.einsum("rai,a->ri", inner, wd) * (rho ** (n - 1))[:, None]


def _integrate_cells(cfg, integrand, cells: list[tuple[float, float]]):
    """Kronrod estimate and ``|K - G|`` per cell: two arrays of shape (C, m)."""
    per_cell_points = 15 * len(direction_rule(cfg.d - 1)[1]) * N_VERTICAL
    chunk = max(1, _CHUNK_POINTS // per_cell_points)
    kron, err = [], []
    for s in range(0, len(cells), chunk):
        part = np.array(cells[s : s + chunk])
        half = 0.5 * (part[:, 1] - part[:, 0])
        mid = 0.5 * (part[:, 1] + part[:, 0])
        rho = (mid[:, None] + half[:, None] * _NODES[None, :]).reshape(-1)
        vals = _radial_values(cfg, integrand, rho).reshape(len(part), 15, -1)
        k = np.einsum("cni,n->ci", vals, _W_K) * half[:, None]
        g = np.einsum("cni,n->ci", vals, _W_G) * half[:, None]
        kron.append(k)
        err.append(np.abs(k - g))
    return np.concatenate(kron), np.concatenate(err)


def _fsum_columns(a: np.ndarray) -> np.ndarray:
    return np.array([math.fsum(a[:, i]) for i in range(a.shape[1])])


def integrate_neck(
    cfg: GapConfig,
    integrand: Callable[[np.ndarray], np.ndarray],
    r: Optional[float] = None,
    rel_tol: float = 1e-8,
    max_cells: int = DEFAULT_MAX_CELLS,
    scale: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    abs_tol: float = 0.0,
) -> NeckIntegral:
    """Integrate ``integrand`` over the neck of radius ``r`` (default ``cfg.R``).

    ``integrand`` maps an ``(N, d)`` point array to ``(N,)`` or ``(N, m)``
    values.  Each component converges once its summed error estimate is at
    most ``max(rel_tol * scale_i, abs_tol)`` with ``scale`` defaulting to
    ``|value_i|``.
    Exhausting ``max_cells`` returns ``converged = False`` instead of raising.
    """
    if rel_tol < 1e-10:
        raise ValueError(f"rel_tol must be at least 1e-10, got {rel_tol}")
    r = cfg.R if r is None else r
    radii = grading_radii(cfg, r)[::-1]
    cells = list(zip(radii[:-1], radii[1:]))
    vals, errs = _integrate_cells(cfg, integrand, cells)
    scalar = vals.shape[1] == 1 and scale is None
    while True:
        total = _fsum_columns(vals)
        total_err = _fsum_columns(errs)
        ref = np.abs(total) if scale is None else np.asarray(scale(total), dtype=float)
        allowed = np.maximum(rel_tol * (ref + 1e-300), abs_tol)
        bad = total_err > allowed
        if not bad.any():
            converged = True
            break
        if len(cells) >= max_cells:
            converged = False
            break
        # split every cell carrying more than its share of a failing component's budget
        share = (allowed / len(cells))[None, :]
        split = np.any((errs > share) & bad[None, :], axis=1)
        if not split.any():
            split[np.argmax((errs / (allowed[None, :])).max(axis=1))] = True
        budget = max_cells - len(cells)
        idx = np.flatnonzero(split)
        if len(idx) > budget:
            order = np.argsort(-(errs[idx] / allowed[None, :]).max(axis=1), kind="stable")
            idx = np.sort(idx[order[:budget]])
        keep = np.ones(len(cells), dtype=bool)
        keep[idx] = False
        new_cells = []
        for i in idx:
            a, b = cells[i]
            m = 0.5 * (a + b)
            new_cells += [(a, m), (m, b)]
        nv, ne = _integrate_cells(cfg, integrand, new_cells)
        cells = [c for c, kp in zip(cells, keep) if kp] + new_cells
        vals = np.concatenate([vals[keep], nv])
        errs = np.concatenate([errs[keep], ne])
        order = np.argsort(np.array([c[0] for c in cells]), kind="stable")
        cells = [cells[i] for i in order]
        vals, errs = vals[order], errs[order]
    if scalar:
        return NeckIntegral(float(total[0]), float(total_err[0]), len(cells), converged)
    return NeckIntegral(total, total_err, len(cells), converged)
