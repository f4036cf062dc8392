"""Energy pairings of the auxiliary fields, their eps-asymptotics and the coefficient system.

``a[alpha, beta] = int (2 mu e(v_alpha), e(v_beta))`` and
``Q[beta] = -int (2 mu e(v_0), e(v_beta))`` are integrated over the neck of
radius ``R`` only; the O(1) exterior contribution is an optional user matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DegenerateCurvature, InsufficientData, NotConverged, SingularSystem, UnsupportedFamily
from .fields import PHI1, PHI2, PHI3, FieldId, Rigid, all_rigid, eval_field, rigid_count
from .geometry import GapConfig, delta, neck_lattice
from .operators import energy_pairing, strain_of
from .quadrature import integrate_neck

DEFAULT_REL_TOL = 1e-8
DEFAULT_EPS_GRID = (1e-2, 3.16e-3, 1e-3, 3.16e-4, 1e-4)


# ---------------------------------------------------------------------------
# closed-form leading coefficients


def kappa_K(kappa1: float, kappa: float) -> float:
    if kappa1 <= kappa:
        raise DegenerateCurvature(f"DegenerateCurvature: kappa1={kappa1} must exceed kappa={kappa}")
    k0 = kappa1 - kappa
    return 9 / 25 * ((kappa1 + kappa) / k0) ** 2 + 72 / 25 * kappa1 * kappa / k0**2 + 6 / 25


def leading_coefficients(cfg: GapConfig) -> dict:
    """Stated leading constants: A11, A55, A15 multiply |ln eps|, A33 multiplies 1/eps."""
    if cfg.d != 3 or cfg.geometry != "spherical":
        raise UnsupportedFamily("leading coefficients are stated for d = 3 with a spherical top")
    mu, k1, kb = cfg.mu, cfg.kappa1, cfg.kappa
    k0, c = k1 - kb, k1 + kb
    K = kappa_K(k1, kb)
    return {
        "A11": mu * math.pi / k0 * (1 + (c / k0) ** 2 * K),
        "A33": mu * math.pi / (24 * k0**2),
        "A55": mu * math.pi / k0**3 * K,
        "A15": mu * math.pi * c / k0**3 * K,
        "a44_band": "bounded",
    }


# ---------------------------------------------------------------------------
# Gram matrices of energy pairings


@dataclass(frozen=True)
class Gram:
    fields: tuple
    values: np.ndarray
    errors: np.ndarray
    cells: int
    eps: float


def _pairs(m: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(m) for j in range(i, m)]


@lru_cache(maxsize=64)
def gram(cfg: GapConfig, fields: tuple, rel_tol: float = DEFAULT_REL_TOL) -> Gram:
    """All pairings ``int (2 mu e(v_i), e(v_j))`` over the neck, with error estimates.

    Off-diagonal convergence is judged relative to ``sqrt(G_ii G_jj)``, the
    Cauchy-Schwarz scale, so that entries vanishing by symmetry converge.
    """
    m = len(fields)
    pairs = _pairs(m)
    diag = [pairs.index((i, i)) for i in range(m)]

    def integrand(pts):
        strains = [strain_of(eval_field(cfg, f, pts, want_jets=False)) for f in fields]
        return np.stack([energy_pairing(cfg.mu, strains[i], strains[j]) for i, j in pairs], axis=1)

    def scale(total):
        d = np.abs(total[diag])
        return np.array([math.sqrt(d[i] * d[j]) for i, j in pairs])

    res = integrate_neck(cfg, integrand, rel_tol=rel_tol, scale=scale)
    if not res.converged:
        raise NotConverged(f"neck quadrature did not converge for {[f.label for f in fields]}")
    vals = np.zeros((m, m))
    errs = np.zeros((m, m))
    for p, (i, j) in enumerate(pairs):
        vals[i, j] = vals[j, i] = res.value[p]
        errs[i, j] = errs[j, i] = res.abs_error_estimate[p]
    return Gram(tuple(fields), vals, errs, res.cells, cfg.eps)


def stiffness_entry(cfg: GapConfig, alpha: int, beta: int, rel_tol: float = DEFAULT_REL_TOL) -> tuple[float, float]:
    fields = (Rigid(alpha),) if alpha == beta else (Rigid(alpha), Rigid(beta))
    g = gram(cfg, fields, rel_tol)
    j = 0 if alpha == beta else 1
    return float(g.values[0, j]), float(g.errors[0, j])


def load_entry(cfg: GapConfig, family: FieldId, beta: int, rel_tol: float = DEFAULT_REL_TOL) -> tuple[float, float]:
    g = gram(cfg, (family, Rigid(beta)), rel_tol)
    return -float(g.values[0, 1]), float(g.errors[0, 1])


@dataclass(frozen=True)
class StiffnessMatrix:
    values: np.ndarray
    errors: np.ndarray
    eps: float


@dataclass(frozen=True)
class LoadVector:
    values: np.ndarray
    errors: np.ndarray
    eps: float
    family: FieldId


def stiffness_matrix(cfg: GapConfig, rel_tol: float = DEFAULT_REL_TOL) -> StiffnessMatrix:
    g = gram(cfg, tuple(all_rigid(cfg)), rel_tol)
    return StiffnessMatrix(g.values, g.errors, cfg.eps)


def assemble(cfg: GapConfig, family: FieldId, rel_tol: float = DEFAULT_REL_TOL) -> tuple[StiffnessMatrix, LoadVector]:
    """Stiffness matrix and load vector from one shared quadrature."""
    if family.is_rigid:
        raise ValueError("the load family must be a boundary family")
    fields = tuple(all_rigid(cfg)) + (family,)
    g = gram(cfg, fields, rel_tol)
    m = rigid_count(cfg.d)
    a = StiffnessMatrix(g.values[:m, :m], g.errors[:m, :m], cfg.eps)
    q = LoadVector(-g.values[m, :m], g.errors[m, :m], cfg.eps, family)
    return a, q


# ---------------------------------------------------------------------------
# dense linear algebra


def lu_factor(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """Doolittle LU with partial pivoting: returns packed LU, row permutation and swap parity."""
    lu = np.array(a, dtype=float, copy=True)
    n = lu.shape[0]
    perm = np.arange(n)
    sign = 1
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if lu[p, k] == 0.0:
            raise SingularSystem("matrix is singular to working precision")
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
            sign = -sign
        lu[k + 1 :, k] /= lu[k, k]
        lu[k + 1 :, k + 1 :] -= np.outer(lu[k + 1 :, k], lu[k, k + 1 :])
    return lu, perm, sign


def lu_solve(lu: np.ndarray, perm: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = lu.shape[0]
    y = np.array(b, dtype=float)[perm]
    for i in range(n):
        y[i] -= lu[i, :i] @ y[:i]
    for i in reversed(range(n)):
        y[i] = (y[i] - lu[i, i + 1 :] @ y[i + 1 :]) / lu[i, i]
    return y


def laplace_det(a: np.ndarray) -> float:
    """Determinant by cofactor expansion with memoized column subsets (no elimination)."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    memo: dict = {}

    def minor(row: int, cols: int) -> float:
        if row == n:
            return 1.0
        key = cols
        if key in memo:
            return memo[key]
        terms = []
        sign = 1.0
        for j in range(n):
            if cols & (1 << j):
                continue
            terms.append(sign * a[row, j] * minor(row + 1, cols | (1 << j)))
            sign = -sign
        memo[key] = math.fsum(terms)
        return memo[key]

    return minor(0, 0)


def cramer_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    det = laplace_det(a)
    if det == 0.0:
        raise SingularSystem("zero determinant in Cramer's rule")
    out = np.empty(len(b))
    for i in range(len(b)):
        ai = np.array(a, dtype=float, copy=True)
        ai[:, i] = b
        out[i] = laplace_det(ai) / det
    return out


def elimination_pivots(a: np.ndarray) -> np.ndarray:
    """Pivots of Gaussian elimination without row exchanges (all positive iff positive definite)."""
    u = np.array(a, dtype=float, copy=True)
    n = u.shape[0]
    piv = np.empty(n)
    for k in range(n):
        piv[k] = u[k, k]
        if piv[k] == 0.0:
            piv[k + 1 :] = np.nan
            break
        u[k + 1 :, k + 1 :] -= np.outer(u[k + 1 :, k], u[k, k + 1 :]) / u[k, k]
    return piv


@dataclass(frozen=True)
class SystemSolution:
    C: np.ndarray
    det: float
    cond: float
    residual: float
    C_cramer: np.ndarray
    pivots: np.ndarray
    eps: float

    @property
    def positive_definite(self) -> bool:
        return bool(np.all(self.pivots > 0))

    @property
    def cramer_agreement(self) -> float:
        scale = max(float(np.max(np.abs(self.C))), 1e-300)
        return float(np.max(np.abs(self.C - self.C_cramer)) / scale)


def solve_system(a: np.ndarray, q: np.ndarray, eps: float = float("nan")) -> SystemSolution:
    """Solve ``sum_alpha C^alpha a[alpha, beta] = Q[beta]``; requires a positive determinant."""
    a = np.asarray(a, dtype=float)
    q = np.asarray(q, dtype=float)
    lu, perm, sign = lu_factor(a.T)
    det = sign * float(np.prod(np.diag(lu)))
    if not det > 0.0:
        raise SingularSystem(f"assembled matrix has non-positive determinant {det}")
    c = lu_solve(lu, perm, q)
    res = float(np.linalg.norm(a.T @ c - q))
    return SystemSolution(
        C=c,
        det=det,
        cond=float(np.linalg.cond(a)),
        residual=res,
        C_cramer=cramer_solve(a.T, q),
        pivots=elimination_pivots(a),
        eps=eps,
    )


def assemble_and_solve(
    cfg: GapConfig,
    family: FieldId,
    rel_tol: float = DEFAULT_REL_TOL,
    far_field: Optional[np.ndarray] = None,
) -> SystemSolution:
    a, q = assemble(cfg, family, rel_tol)
    mat = a.values
    if far_field is not None:
        ff = np.asarray(far_field, dtype=float)
        if ff.shape != mat.shape or not np.allclose(ff, ff.T, rtol=0, atol=0):
            raise ValueError("far_field must be a symmetric matrix of the stiffness shape")
        mat = mat + ff
    return solve_system(mat, q.values, cfg.eps)


def det_scaled(cfg: GapConfig, det: float) -> float:
    """``det eps / |ln eps|^4`` in d = 3; ``det eps`` for d >= 4 where tangential entries stay bounded."""
    if cfg.d == 3:
        return det * cfg.eps / abs(math.log(cfg.eps)) ** 4
    return det * cfg.eps


# ---------------------------------------------------------------------------
# sweep fits


BASES = ("log_abs", "inv", "const")


def basis_value(basis: str, eps: float) -> float:
    if basis == "log_abs":
        return abs(math.log(eps))
    if basis == "inv":
        return 1.0 / eps
    if basis == "const":
        return 0.0
    raise ValueError(f"unknown basis {basis!r}")


@dataclass(frozen=True)
class SweepFit:
    basis: str
    slope: float
    intercept: float
    deviation: float


def sweep_fit(records: Iterable[tuple[float, float]], basis: str) -> SweepFit:
    """Least squares ``value = slope * basis(eps) + intercept`` with max relative deviation."""
    recs = sorted((float(e), float(v)) for e, v in records)
    if basis not in BASES:
        raise ValueError(f"unknown basis {basis!r}")
    if len(recs) < 3 or len({e for e, _ in recs}) < len(recs):
        raise InsufficientData("sweep fits need at least 3 records with distinct eps")
    x = np.array([basis_value(basis, e) for e, _ in recs])
    y = np.array([v for _, v in recs])
    if basis == "const":
        slope, intercept = 0.0, float(np.mean(y))
    else:
        design = np.column_stack([x, np.ones_like(x)])
        (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
        slope, intercept = float(slope), float(intercept)
    fit = slope * x + intercept
    dev = float(np.max(np.abs(fit - y) / np.maximum(np.abs(y), 1e-300)))
    return SweepFit(basis, slope, intercept, dev)


# ---------------------------------------------------------------------------
# blow-up envelopes of the singular part


def envelope_bound(cfg: GapConfig, family: FieldId, xp: np.ndarray) -> np.ndarray:
    """Stated gradient envelope with unit constant."""
    rho = np.linalg.norm(xp, axis=1)
    dl = delta(cfg, xp)
    if cfg.d >= 4:
        if family.kind != PHI1:
            raise UnsupportedFamily("the d >= 4 envelope is stated for x_1^l e_1 data")
        return (cfg.eps + rho) / dl**2
    if family.kind == PHI2 and family.index == 1:
        return 1.0 / dl
    lg = abs(math.log(cfg.eps))
    return (1.0 + lg * rho) / (lg * dl)


def envelope_grid(cfg: GapConfig) -> np.ndarray:
    grid = neck_lattice(cfg, per_octave=2, n_angle=8, n_vertical=5)
    mid = np.zeros((1, cfg.d))
    mid[0, -1] = cfg.eps / 2
    return np.vstack([mid, grid])


@dataclass(frozen=True)
class EnvelopeRow:
    point: tuple
    grad_singular: float
    p_singular: float
    stress_singular: float
    bound_value: float
    ratio: float


def envelope_table(
    cfg: GapConfig, family: FieldId, sol: SystemSolution, grid: Optional[np.ndarray] = None
) -> list[EnvelopeRow]:
    """Singular part ``sum C^alpha v_alpha + v_0`` against the stated envelope on a grid.

    Pressures are reported after subtracting their median over the grid, the
    free constant of ``inf_c |p + c|``; the stress uses the same pressure.
    """
    pts = envelope_grid(cfg) if grid is None else np.atleast_2d(np.asarray(grid, dtype=float))
    ev0 = eval_field(cfg, family, pts)
    jac = ev0.jets.jacobian.copy()
    p = ev0.p_bar.copy()
    for alpha, c in enumerate(sol.C, start=1):
        ev = eval_field(cfg, Rigid(alpha), pts)
        jac += c * ev.jets.jacobian
        p += c * ev.p_bar
    p = p - np.median(p)
    e = 0.5 * (jac + np.swapaxes(jac, 1, 2))
    sigma = 2 * cfg.mu * e - p[:, None, None] * np.eye(cfg.d)[None, :, :]
    grad = np.linalg.norm(jac, axis=(1, 2))
    stress = np.linalg.norm(sigma, axis=(1, 2))
    bound = envelope_bound(cfg, family, pts[:, :-1])
    rows = []
    for i in range(len(pts)):
        rows.append(
            EnvelopeRow(
                tuple(float(c) for c in pts[i]),
                float(grad[i]),
                float(abs(p[i])),
                float(stress[i]),
                float(bound[i]),
                float(grad[i] / bound[i]),
            )
        )
    return rows
