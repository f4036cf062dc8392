"""Narrow-gap geometry: gap function, Keller-type ramp and neck sampling.

The particle bottom is the graph ``x_d = eps + h1(x')`` and the wall is
``x_d = h(x')`` with exactly quadratic profiles

    h1(x') = kappa1 x1^2 + kappa2 x2^2   (d = 3; kappa2 = kappa1 when spherical)
    h1(x') = kappa1 |x'|^2               (d >= 4)
    h(x')  = kappa |x'|^2.

Coordinates are ``x = (x', x_d)``; every function takes an ``(N, d)`` array of
points (a single ``(d,)`` point is accepted and the result squeezed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import ConfigError, DegenerateCurvature, OutsideNeck
from .jets import Jet2

# Relative slack, in units of the local gap, for the closed-strip membership test.
_STRIP_SLACK = 1e-12


@dataclass(frozen=True)
class GapConfig:
    d: int = 3
    eps: float = 1e-3
    kappa1: float = 1.0
    kappa2: Optional[float] = None
    kappa: float = 0.0
    R: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        if self.kappa2 is None:
            object.__setattr__(self, "kappa2", self.kappa1)
        validate(self)

    @property
    def geometry(self) -> str:
        if self.d >= 4:
            return "higher_d"
        return "spherical" if self.kappa2 == self.kappa1 else "ellipsoid"

    @property
    def kappa0(self) -> float:
        """Smallest relative curvature ``min(kappa1, kappa2) - kappa``."""
        return min(self.kappa1, self.kappa2) - self.kappa

    def axis_curvatures(self) -> np.ndarray:
        """Top-surface curvature along each tangential axis, shape (d-1,)."""
        k = np.full(self.d - 1, float(self.kappa1))
        if self.d == 3:
            k[1] = self.kappa2
        return k

    def with_eps(self, eps: float) -> "GapConfig":
        return replace(self, eps=eps)

    def swapped(self) -> "GapConfig":
        """Configuration seen through the reflection ``x1 <-> x2``."""
        return replace(self, kappa1=self.kappa2, kappa2=self.kappa1)


def validate(cfg: GapConfig) -> None:
    if not isinstance(cfg.d, (int, np.integer)) or cfg.d < 3:
        raise ConfigError(f"dimension must be an integer >= 3, got {cfg.d!r}")
    if cfg.d >= 4 and cfg.kappa2 != cfg.kappa1:
        raise ConfigError("distinct principal curvatures are supported only for d = 3")
    for name in ("eps", "kappa1", "kappa2", "kappa", "R", "mu"):
        val = getattr(cfg, name)
        if not isinstance(val, (int, float, np.floating, np.integer)) or not math.isfinite(val):
            raise ConfigError(f"{name} must be a finite number, got {val!r}")
    if min(cfg.kappa1, cfg.kappa2) <= cfg.kappa:
        raise DegenerateCurvature(
            f"DegenerateCurvature: need min(kappa1, kappa2) > kappa, got "
            f"kappa1={cfg.kappa1}, kappa2={cfg.kappa2}, kappa={cfg.kappa}"
        )
    if not 0 < cfg.R <= 1:
        raise ConfigError(f"R must lie in (0, 1], got {cfg.R}")
    if cfg.mu <= 0:
        raise ConfigError(f"mu must be positive, got {cfg.mu}")
    if not 0 < cfg.eps < cfg.R**2 * (cfg.kappa0):
        raise ConfigError(
            f"eps must satisfy 0 < eps < R^2 (kappa1 - kappa) = {cfg.R**2 * cfg.kappa0}, got {cfg.eps}"
        )


def _as_points(x, width: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[-1] != width:
        raise ValueError(f"expected trailing dimension {width}, got shape {arr.shape}")
    return arr, single


def _squeeze(val, single: bool):
    return val[0] if single else val


def delta(cfg: GapConfig, xp):
    """Gap height ``eps + h1(x') - h(x')`` for tangential points ``xp``."""
    xp, single = _as_points(xp, cfg.d - 1)
    rel = cfg.axis_curvatures() - cfg.kappa
    return _squeeze(cfg.eps + (xp**2) @ rel, single)


def gap_surfaces(cfg: GapConfig, xp):
    """Return ``(bottom, top)`` heights ``h(x')`` and ``eps + h1(x')``."""
    xp, single = _as_points(xp, cfg.d - 1)
    sq = xp**2
    bottom = cfg.kappa * sq.sum(axis=1)
    top = cfg.eps + sq @ cfg.axis_curvatures()
    return _squeeze(bottom, single), _squeeze(top, single)


def in_neck(cfg: GapConfig, x, r: Optional[float] = None) -> np.ndarray:
    """Boolean mask of points in the closed strip over ``|x'| <= r`` (default 2R)."""
    x, _ = _as_points(x, cfg.d)
    r = 2 * cfg.R if r is None else r
    xp, xd = x[:, :-1], x[:, -1]
    bottom, top = gap_surfaces(cfg, xp)
    slack = _STRIP_SLACK * (top - bottom)
    radial = np.sqrt((xp**2).sum(axis=1)) <= r
    return radial & (xd >= bottom - slack) & (xd <= top + slack)


def require_neck(cfg: GapConfig, x: np.ndarray) -> None:
    mask = in_neck(cfg, x)
    if not mask.all():
        bad = x[np.argmin(mask)]
        raise OutsideNeck(f"point {bad.tolist()} lies outside the neck strip")


def keller_k(cfg: GapConfig, x):
    """Keller-type ramp ``(x_d - h)/delta - 1/2``: -1/2 on the wall, +1/2 on the particle."""
    x, single = _as_points(x, cfg.d)
    require_neck(cfg, x)
    xp = x[:, :-1]
    bottom, _ = gap_surfaces(cfg, xp)
    return _squeeze((x[:, -1] - bottom) / delta(cfg, xp) - 0.5, single)


@dataclass(frozen=True)
class NeckJets:
    """Coordinate, gap and ramp jets shared by every field construction.

    ``ddk[j]`` is the jet of ``delta * d k / d x_j`` for tangential ``j``; it is a
    polynomial in ``x'`` and ``k`` so it can itself be differentiated twice.
    """

    cfg: GapConfig
    x: tuple
    delta: Jet2
    inv_delta: Jet2
    k: Jet2
    q: Jet2
    ddk: tuple

    @property
    def n(self) -> int:
        return self.delta.size

    @property
    def order(self) -> int:
        return self.delta.order

    def const(self, c) -> Jet2:
        return Jet2.constant(c, self.n, self.cfg.d, self.order)

    def htilde(self, j: int) -> Jet2:
        """``-delta d k / d x_j``."""
        return -self.ddk[j]


def neck_jets(cfg: GapConfig, x: np.ndarray, order: int = 2) -> NeckJets:
    """Shared jets at in-neck points; ``order=1`` skips Hessians."""
    x, _ = _as_points(x, cfg.d)
    require_neck(cfg, x)
    d = cfg.d
    xs = tuple(Jet2.variable(x, i, order) for i in range(d))
    curv = cfg.axis_curvatures()
    dl = Jet2.constant(cfg.eps, x.shape[0], d, order)
    h = Jet2.constant(0.0, x.shape[0], d, order)
    for i in range(d - 1):
        sq = xs[i] * xs[i]
        dl = dl + sq * (curv[i] - cfg.kappa)
        h = h + sq * cfg.kappa
    inv = dl.reciprocal()
    k = (xs[-1] - h) * inv - 0.5
    kp = k + 0.5
    # delta * dk/dx_j = -dh/dx_j - (k + 1/2) d delta/dx_j
    ddk = tuple(
        -(xs[j] * (2 * cfg.kappa)) - kp * xs[j] * (2 * (curv[j] - cfg.kappa)) for j in range(d - 1)
    )
    return NeckJets(cfg, xs, dl, inv, k, k * k - 0.25, ddk)


def keller_k_jet(cfg: GapConfig, x) -> Jet2:
    """Jet of the Keller ramp at ``x`` (batch of points)."""
    return neck_jets(cfg, x).k


def grading_radii(cfg: GapConfig, r: float) -> list[float]:
    """Radial breakpoints ``r 2^-j`` down to the first one below ``sqrt(eps/kappa0)/4``, then 0."""
    floor = math.sqrt(cfg.eps / cfg.kappa0) / 4
    radii = [r]
    while radii[-1] >= floor:
        radii.append(radii[-1] / 2)
    radii.append(0.0)
    return radii


def _random_directions(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    if dim == 2:
        theta = rng.uniform(0.0, 2 * math.pi, n)
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    g = rng.standard_normal((n, dim))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_neck(cfg: GapConfig, r: Optional[float], n: int, seed: int, r_min: float = 0.0) -> np.ndarray:
    """Deterministic stratified samples strictly inside the neck over ``r_min <= |x'| <= r``.

    Radial strata follow :func:`grading_radii`; within a stratum the radius is
    uniform, the direction uniform and the vertical fraction uniform in (0, 1).
    """
    r = cfg.R if r is None else r
    if r > cfg.R:
        raise ValueError(f"sampling radius {r} exceeds R = {cfg.R}")
    if n <= 0:
        return np.zeros((0, cfg.d))
    rng = np.random.default_rng(seed)
    radii = grading_radii(cfg, r)
    strata = [(lo, hi) for hi, lo in zip(radii[:-1], radii[1:]) if hi > r_min]
    strata = [(max(lo, r_min), hi) for lo, hi in strata]
    counts = np.full(len(strata), n // len(strata))
    counts[: n % len(strata)] += 1
    pts = []
    for (lo, hi), m in zip(strata, counts):
        if m == 0:
            continue
        rho = rng.uniform(lo, hi, m)
        dirs = _random_directions(rng, m, cfg.d - 1)
        xp = dirs * rho[:, None]
        t = rng.uniform(0.0, 1.0, m)
        t = np.clip(t, 1e-9, 1 - 1e-9)
        bottom, _ = gap_surfaces(cfg, xp)
        xd = bottom + t * delta(cfg, xp)
        pts.append(np.column_stack([xp, xd]))
    return np.concatenate(pts, axis=0)


def _lattice_directions(dim: int, n_angle: int) -> np.ndarray:
    if dim == 2:
        theta = 2 * math.pi * np.arange(n_angle) / n_angle
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    grid = np.array(np.meshgrid(*[[-1.0, 0.0, 1.0]] * dim, indexing="ij")).reshape(dim, -1).T
    grid = grid[np.any(grid != 0, axis=1)]
    return grid / np.linalg.norm(grid, axis=1, keepdims=True)


def neck_lattice(
    cfg: GapConfig,
    r: Optional[float] = None,
    r_min: float = 0.0,
    per_octave: int = 8,
    n_angle: int = 32,
    n_vertical: int = 9,
) -> np.ndarray:
    """Deterministic lattice over the closed neck: graded radii, fixed directions, vertical levels.

    Radii are ``r 2^(-i/per_octave)`` down to the grading floor (plus the axis
    when ``r_min = 0``); directions are equispaced angles (d = 3) or the 26
    normalized ``{-1, 0, 1}`` vectors (d >= 4); vertical fractions are
    equispaced on [0, 1] including both surfaces.
    """
    r = cfg.R if r is None else r
    floor = grading_radii(cfg, r)[-2]
    n_rad = int(math.ceil(per_octave * math.log2(r / floor))) + 1
    radii = r * 2.0 ** (-np.arange(n_rad) / per_octave)
    radii = radii[radii >= r_min]
    dirs = _lattice_directions(cfg.d - 1, n_angle)
    xp = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, cfg.d - 1)
    if r_min == 0.0:
        xp = np.vstack([np.zeros((1, cfg.d - 1)), xp])
    t = np.linspace(0.0, 1.0, n_vertical)
    bottom, _ = gap_surfaces(cfg, xp)
    dl = delta(cfg, xp)
    xd = bottom[:, None] + dl[:, None] * t[None, :]
    xp_rep = np.repeat(xp, n_vertical, axis=0)
    return np.column_stack([xp_rep, xd.reshape(-1)])


def sample_surface(cfg: GapConfig, r: Optional[float], n: int, seed: int, which: str) -> np.ndarray:
    """Deterministic samples on the wall (``which='bottom'``) or particle (``'top'``) over ``|x'| <= r``."""
    if which not in ("bottom", "top"):
        raise ValueError(f"which must be 'bottom' or 'top', got {which!r}")
    base = sample_neck(cfg, r, n, seed)
    xp = base[:, :-1]
    bottom, top = gap_surfaces(cfg, xp)
    return np.column_stack([xp, bottom if which == "bottom" else top])
