"""Forward X-ray transforms of scalar fields and one-forms, and their exact adjoints.

Every line is integrated with the composite midpoint rule on ``|t| <= T``
(``T`` the largest distance from the origin to the grid domain) using
``nt = ceil(2T / (h/2))`` samples, so the step is at most ``h/2``.  The field
is sampled by bilinear interpolation between cell centres with zero
extension.  The backprojectors are the literal transpose of these weights
with respect to the inner products ``h^2 * sum`` on the grid and
``d_angle * d_offset * sum`` on the line grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigError, NumericalFailure
from .fields import CovectorField, Grid, MatrixField, ScalarField, warn_support
from .geometry import LineGrid


@dataclass(frozen=True, eq=False)
class Sinogram:
    """Transform values on a line grid; masked-out bins are stored as zero."""

    grid: LineGrid
    values: np.ndarray
    mask: np.ndarray | None = None
    kind: str = "scalar"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.grid.shape:
            raise ConfigError(f"sinogram shape {v.shape} != line grid {self.grid.shape}")
        if self.kind not in ("scalar", "oneform"):
            raise ConfigError(f"unknown sinogram kind {self.kind!r}")
        if not np.all(np.isfinite(v)):
            raise ConfigError("sinogram contains non-finite values")
        if self.mask is not None:
            m = np.asarray(self.mask, dtype=bool)
            if m.shape != self.grid.shape:
                raise ConfigError("mask shape does not match the line grid")
            v = np.where(m, v, 0.0)
            object.__setattr__(self, "mask", m)
        object.__setattr__(self, "values", v)

    def with_mask(self, mask: np.ndarray | None) -> "Sinogram":
        return Sinogram(self.grid, self.values, mask, self.kind)

    def reversed(self) -> "Sinogram":
        m = None if self.mask is None else self.grid.reversed_values(self.mask)
        return Sinogram(self.grid, self.grid.reversed_values(self.values), m, self.kind)

    def dot(self, other: "Sinogram") -> float:
        return float(self.grid.line_weight * np.sum(self.values * other.values))

    def __add__(self, other):
        return Sinogram(self.grid, self.values + other.values, None, self.kind)

    def __sub__(self, other):
        return Sinogram(self.grid, self.values - other.values, None, self.kind)

    def __mul__(self, a: float):
        return Sinogram(self.grid, a * self.values, self.mask, self.kind)

    __rmul__ = __mul__


def _quadrature(grid: Grid) -> tuple[int, float]:
    t_max = math.sqrt(2.0) * max(abs(grid.lo), abs(grid.hi))
    nt = int(math.ceil(2.0 * t_max / (0.5 * grid.h)))
    return nt, 2.0 * t_max / nt


@njit(cache=True)
def _forward_kernel(data, lo, h, cos_a, sin_a, offsets, coef, nt, dt, out):
    n_comp, N, _ = data.shape
    for k in range(cos_a.shape[0]):
        c = cos_a[k]
        s = sin_a[k]
        for j in range(offsets.shape[0]):
            bx = -offsets[j] * s
            by = offsets[j] * c
            acc = 0.0
            for m in range(nt):
                t = (m - 0.5 * (nt - 1)) * dt
                u = (bx + t * c - lo) / h - 0.5
                v = (by + t * s - lo) / h - 0.5
                i0 = int(math.floor(u))
                j0 = int(math.floor(v))
                if i0 < -1 or i0 > N - 1 or j0 < -1 or j0 > N - 1:
                    continue
                fu = u - i0
                fv = v - j0
                val = 0.0
                for q in range(n_comp):
                    g = 0.0
                    if i0 >= 0 and j0 >= 0:
                        g += data[q, i0, j0] * (1.0 - fu) * (1.0 - fv)
                    if i0 + 1 < N and j0 >= 0:
                        g += data[q, i0 + 1, j0] * fu * (1.0 - fv)
                    if i0 >= 0 and j0 + 1 < N:
                        g += data[q, i0, j0 + 1] * (1.0 - fu) * fv
                    if i0 + 1 < N and j0 + 1 < N:
                        g += data[q, i0 + 1, j0 + 1] * fu * fv
                    val += coef[k, q] * g
                acc += val
            out[k, j] = acc * dt


@njit(cache=True)
def _adjoint_kernel(sino, lo, h, cos_a, sin_a, offsets, coef, nt, dt, scale, out):
    n_comp, N, _ = out.shape
    for k in range(cos_a.shape[0]):
        c = cos_a[k]
        s = sin_a[k]
        for j in range(offsets.shape[0]):
            w = sino[k, j]
            if w == 0.0:
                continue
            w = w * dt * scale
            bx = -offsets[j] * s
            by = offsets[j] * c
            for m in range(nt):
                t = (m - 0.5 * (nt - 1)) * dt
                u = (bx + t * c - lo) / h - 0.5
                v = (by + t * s - lo) / h - 0.5
                i0 = int(math.floor(u))
                j0 = int(math.floor(v))
                if i0 < -1 or i0 > N - 1 or j0 < -1 or j0 > N - 1:
                    continue
                fu = u - i0
                fv = v - j0
                for q in range(n_comp):
                    wq = w * coef[k, q]
                    if i0 >= 0 and j0 >= 0:
                        out[q, i0, j0] += wq * (1.0 - fu) * (1.0 - fv)
                    if i0 + 1 < N and j0 >= 0:
                        out[q, i0 + 1, j0] += wq * fu * (1.0 - fv)
                    if i0 >= 0 and j0 + 1 < N:
                        out[q, i0, j0 + 1] += wq * (1.0 - fu) * fv
                    if i0 + 1 < N and j0 + 1 < N:
                        out[q, i0 + 1, j0 + 1] += wq * fu * fv


def _coefficients(lines: LineGrid, kind: str) -> np.ndarray:
    c, s = lines.directions()
    if kind == "scalar":
        return np.ones((lines.n_angles, 1))
    return np.ascontiguousarray(np.stack([c, s], axis=1))


def _forward(data: np.ndarray, grid: Grid, lines: LineGrid, kind: str) -> np.ndarray:
    c, s = lines.directions()
    nt, dt = _quadrature(grid)
    out = np.zeros(lines.shape)
    _forward_kernel(np.ascontiguousarray(data), grid.lo, grid.h, c, s, lines.offsets, _coefficients(lines, kind), nt, dt, out)
    bad = ~np.isfinite(out)
    if bad.any():
        k, j = np.argwhere(bad)[0]
        raise NumericalFailure(f"non-finite line integral at line index ({k}, {j})", line_index=(int(k), int(j)))
    return out


def _adjoint(sino: Sinogram, grid: Grid, n_comp: int) -> np.ndarray:
    lines = sino.grid
    c, s = lines.directions()
    nt, dt = _quadrature(grid)
    out = np.zeros((n_comp,) + grid.shape)
    scale = lines.line_weight / grid.h**2
    _adjoint_kernel(np.ascontiguousarray(sino.values), grid.lo, grid.h, c, s, lines.offsets,
                    _coefficients(lines, sino.kind), nt, dt, scale, out)
    return out


def integrate_lines(field, angles, offsets, t_max: float) -> np.ndarray:
    """Line integrals on an arbitrary set of lines, ``|t| <= t_max``.

    ``angles`` and ``offsets`` are paired arrays (one line each).  Covector
    fields are integrated along the line direction; scalar fields plainly.
    Same midpoint/bilinear rule as the sinogram transforms.
    """
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    c = np.cos(angles)
    s = np.sin(angles)
    grid = field.grid
    nt = int(math.ceil(2.0 * t_max / (0.5 * grid.h)))
    dt = 2.0 * t_max / nt
    coef = np.ones((len(c), 1)) if isinstance(field, ScalarField) else np.stack([c, s], axis=1)
    offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
    out = np.zeros((len(c), 1))
    for k in range(len(c)):
        _forward_kernel(np.ascontiguousarray(field.data), grid.lo, grid.h, c[k:k + 1], s[k:k + 1],
                        offsets[k:k + 1], np.ascontiguousarray(coef[k:k + 1]), nt, dt, out[k:k + 1])
    return out[:, 0]


def xray_scalar(f: ScalarField, lines: LineGrid) -> Sinogram:
    """Line integrals of a scalar field over every line of ``lines``."""
    warn_support(f)
    return Sinogram(lines, _forward(f.data, f.grid, lines, "scalar"), kind="scalar")


def xray_oneform(f: CovectorField, lines: LineGrid) -> Sinogram:
    """Integrals of the tangential component ``f . theta`` along oriented lines."""
    warn_support(f)
    return Sinogram(lines, _forward(f.data, f.grid, lines, "oneform"), kind="oneform")


def xray_matrix(A: MatrixField, f: CovectorField, lines: LineGrid) -> Sinogram:
    """Generalised transform ``X_1(A f)``."""
    return xray_oneform(A.apply(f), lines)


def xray_transverse(f: CovectorField, lines: LineGrid) -> Sinogram:
    """Transverse ray transform: ``xray_matrix`` with the clockwise quarter turn."""
    return xray_matrix(MatrixField.rotation_b(f.grid), f, lines)


def backproject_scalar(sino: Sinogram, grid: Grid) -> ScalarField:
    if sino.kind != "scalar":
        raise ConfigError(f"backproject_scalar needs a scalar sinogram, got {sino.kind!r}")
    return ScalarField(grid, _adjoint(sino, grid, 1)[0])


def backproject_oneform(sino: Sinogram, grid: Grid) -> CovectorField:
    if sino.kind != "oneform":
        raise ConfigError(f"backproject_oneform needs a one-form sinogram, got {sino.kind!r}")
    return CovectorField(grid, _adjoint(sino, grid, 2))


def backproject_matrix(A: MatrixField, sino: Sinogram) -> CovectorField:
    """Adjoint of ``xray_matrix``: ``A^T`` applied to the one-form backprojection."""
    return A.transpose().apply(backproject_oneform(sino, A.grid))
