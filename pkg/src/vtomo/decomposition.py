"""Helmholtz decompositions ``f = f_sol + d phi``.

Global flavour: ``phi = G * div f`` with the free-space Green's function
``G = ln|x| / 2pi``, by the same padded linear convolution used for the
normal operators.  Dirichlet flavour: five-point Poisson solve on a grid
aligned rectangle with zero boundary values, by conjugate gradients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import fft as sfft
from scipy.spatial import Delaunay, QhullError

from .errors import ConfigError, NumericalFailure
from .fields import CovectorField, Grid, ScalarField, divergence, gradient, laplacian
from .geometry import Rect
from .normal import DEFAULT_PAD, UNIT_CELL_LOG_R, _embed_hat, _offsets, _to_padded


@dataclass(eq=False)
class Decomposition:
    f_s: CovectorField
    phi: ScalarField
    flavor: str
    residual: float
    iterations: int = 0
    omega: Rect | None = None
    energy: list[float] = field(default_factory=list)

    @property
    def potential(self) -> CovectorField:
        return gradient(self.phi)


@lru_cache(maxsize=4)
def _log_kernel_hat(N: int, lo: float, hi: float, pad: int) -> np.ndarray:
    h = Grid(N, lo, hi).h
    M = (pad + 1) * N
    d = _offsets(M)
    R = np.hypot(d[:, None], d[None, :])
    R[0, 0] = 1.0
    G = np.log(h * R) / (2.0 * math.pi)
    # exact cell average of ln|x| / 2pi over the centre cell
    G[0, 0] = (math.log(h) + UNIT_CELL_LOG_R) / (2.0 * math.pi)
    out = sfft.rfft2(G)
    out.setflags(write=False)
    return out


def free_space_potential(rhs: ScalarField, pad: int = DEFAULT_PAD) -> ScalarField:
    """Solve ``lap phi = rhs`` in the plane, fixing the constant by a zero mean on the padding ring."""
    grid = rhs.grid
    M = (pad + 1) * grid.N
    conv = sfft.irfft2(_embed_hat(rhs.values, M) * _log_kernel_hat(grid.N, grid.lo, grid.hi, pad), s=(M, M))
    phi_pad = grid.h**2 * _to_padded(conv, grid, pad)
    if not np.all(np.isfinite(phi_pad)):
        raise NumericalFailure("free-space Poisson convolution produced non-finite values")
    pgrid = grid.padded(pad)
    sl = pgrid.crop_slice(grid)
    ring = np.ones(pgrid.shape, dtype=bool)
    ring[sl] = False
    phi_pad -= phi_pad[ring].mean()
    return ScalarField(grid, phi_pad[sl])


def helmholtz_global(f: CovectorField, pad: int = DEFAULT_PAD) -> Decomposition:
    div = divergence(f)
    phi = free_space_potential(div, pad)
    f_s = f - gradient(phi)
    m = f.grid.interior_mask()
    res = laplacian(phi).values[m] - div.values[m]
    den = np.linalg.norm(div.values[m])
    residual = float(np.linalg.norm(res) / den) if den > 0 else float(np.linalg.norm(res))
    return Decomposition(f_s, phi, "global", residual)


def snap_rect(grid: Grid, omega: Rect) -> tuple[int, int, int, int]:
    """Index bounds ``(i0, i1, j0, j1)`` of the cell centres nearest the rectangle corners.

    These nodes carry the zero boundary values; unknowns lie strictly inside.
    """
    def idx(x):
        return int(round((x - grid.lo) / grid.h - 0.5))

    i0, i1 = idx(omega.lo[0]), idx(omega.hi[0])
    j0, j1 = idx(omega.lo[1]), idx(omega.hi[1])
    if min(i0, j0) < 0 or max(i1, j1) > grid.N - 1:
        raise ConfigError("Dirichlet rectangle must lie inside the grid")
    if i1 - i0 < 2 or j1 - j0 < 2:
        raise ConfigError("Dirichlet rectangle has no interior nodes")
    return i0, i1, j0, j1


def _neg_laplacian(u: np.ndarray, h: float) -> np.ndarray:
    """Five-point ``-lap`` with zero Dirichlet data around the array."""
    p = np.pad(u, 1)
    return (4.0 * u - p[:-2, 1:-1] - p[2:, 1:-1] - p[1:-1, :-2] - p[1:-1, 2:]) / h**2


def conjugate_gradient(apply_A, b: np.ndarray, tol: float = 1e-8, maxiter: int = 10_000):
    """Plain CG for an SPD operator.

    Returns ``(x, iterations, relative_residual, energy)`` where ``energy`` is
    the history of ``x.Ax/2 - b.x``; it must not increase for an SPD operator
    and a violation raises ``NumericalFailure``.
    """
    x = np.zeros_like(b)
    bnorm = np.linalg.norm(b)
    energy = [0.0]
    if bnorm == 0.0:
        return x, 0, 0.0, energy
    r = b.copy()
    p = r.copy()
    rr = float(np.vdot(r, r))
    for it in range(1, maxiter + 1):
        Ap = apply_A(p)
        pAp = float(np.vdot(p, Ap))
        if pAp <= 0.0:
            raise NumericalFailure("operator is not positive definite", residual=math.sqrt(rr) / bnorm)
        alpha = rr / pAp
        x += alpha * p
        r -= alpha * Ap
        # J(x) = x.(Ax)/2 - b.x with Ax = b - r
        J = -0.5 * float(np.vdot(x, b + r))
        if J > energy[-1] + 1e-12 * max(1.0, abs(energy[-1])):
            raise NumericalFailure("CG energy increased; operator not SPD", residual=math.sqrt(rr) / bnorm)
        energy.append(J)
        rr_new = float(np.vdot(r, r))
        if math.sqrt(rr_new) <= tol * bnorm:
            return x, it, math.sqrt(rr_new) / bnorm, energy
        p = r + (rr_new / rr) * p
        rr = rr_new
    raise NumericalFailure(f"CG did not converge in {maxiter} iterations", residual=math.sqrt(rr) / bnorm)


def solve_poisson_dirichlet(rhs: ScalarField, omega: Rect, tol: float = 1e-8, maxiter: int = 10_000):
    """Solve ``lap phi = rhs`` on the snapped rectangle with ``phi = 0`` on its boundary nodes.

    Returns ``(phi, iterations, residual, energy)``; ``phi`` is zero outside the
    rectangle interior.
    """
    grid = rhs.grid
    i0, i1, j0, j1 = snap_rect(grid, omega)
    b = -rhs.values[i0 + 1:i1, j0 + 1:j1].copy()
    u, it, res, energy = conjugate_gradient(lambda v: _neg_laplacian(v, grid.h), b, tol, maxiter)
    phi = np.zeros(grid.shape)
    phi[i0 + 1:i1, j0 + 1:j1] = u
    return ScalarField(grid, phi), it, res, energy


def helmholtz_dirichlet(f: CovectorField, omega: Rect, tol: float = 1e-8, maxiter: int = 10_000) -> Decomposition:
    """Local decomposition on ``omega``; outside its interior ``f_s`` equals ``f``."""
    div = divergence(f)
    phi, it, res, energy = solve_poisson_dirichlet(div, omega, tol, maxiter)
    i0, i1, j0, j1 = snap_rect(f.grid, omega)
    dphi = gradient(phi).components
    fs = f.components.copy()
    fs[:, i0 + 1:i1, j0 + 1:j1] -= dphi[:, i0 + 1:i1, j0 + 1:j1]
    return Decomposition(CovectorField(f.grid, fs), phi, "dirichlet", res, it, omega, energy)


def potential_support_check(dec: Decomposition, f: CovectorField, threshold: float = 1e-6) -> dict:
    """Fraction of the potential's L1 mass outside the convex hull of ``spt(f)``."""
    if dec.flavor != "global":
        raise ConfigError("support check applies to the global decomposition")
    fmax = np.abs(f.components).max()
    phi_mass = np.abs(dec.phi.values)
    if fmax == 0.0 or phi_mass.sum() == 0.0:
        return {"leakage": 0.0, "support_cells": 0}
    support = np.abs(f.components).max(axis=0) > threshold * fmax
    X, Y = f.grid.mesh()
    pts = np.column_stack([X[support], Y[support]])
    allpts = np.column_stack([X.ravel(), Y.ravel()])
    try:
        inside = (Delaunay(pts).find_simplex(allpts) >= 0).reshape(f.grid.shape)
    except QhullError:
        inside = support
    inside |= support
    leak = float(phi_mass[~inside].sum() / phi_mass.sum())
    return {"leakage": leak, "support_cells": int(support.sum())}
