"""Normal operators as Riesz-kernel convolutions, the half Laplacian, and inversion.

In the plane the normal operators are

    N0 f = 2 |x|^-1 * f,        (N1 f)_i = sum_j 2 x_i x_j |x|^-3 * f_j,

with Fourier symbols ``4 pi / |xi|`` and ``(4 pi / |xi|) (delta_ij - xi_i xi_j / |xi|^2)``.
Hence ``f = (1/4pi) |xi| N0 f`` and ``f_sol = (1/4pi) |xi| N1 f``.

Kernels are point-sampled at grid offsets except for the singular cell,
which carries the exact cell average.  Convolutions are linear (not
circular): the source lives on the original grid, the output is produced on
the whole ``pad``-times larger grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft as sfft
from scipy.special import gamma

from .errors import ConfigError, NumericalFailure
from .fields import CovectorField, Grid, MatrixField, ScalarField
from .geometry import LineGrid
from .projector import backproject_oneform, backproject_scalar, xray_oneform, xray_scalar

DEFAULT_PAD = 4
INTERIOR_FRACTION = 0.6

# integral of 1/|x| over the unit square centred at the origin
UNIT_CELL_INV_R = 4.0 * math.log(1.0 + math.sqrt(2.0))
# integral of ln|x| over the same square
UNIT_CELL_LOG_R = -0.5 * math.log(2.0) - 1.5 + math.pi / 4.0


def sphere_area(k: int) -> float:
    """Surface measure of the unit sphere ``S^k`` in ``R^(k+1)``."""
    return 2.0 * math.pi ** ((k + 1) / 2) / gamma((k + 1) / 2)


@dataclass(frozen=True)
class InversionConstants:
    """Normalising constants of the inversion formulas for dimension ``n``.

    ``c1_published`` is the published value ``|S^n|``; ``c1_derived = (n-1) c0``
    follows from the Fourier symbol of the tensor kernel.  ``active`` selects
    which one ``recover_solenoidal`` uses.
    """

    n: int = 2
    active: str = "derived"

    def __post_init__(self):
        if self.active not in ("derived", "paper"):
            raise ConfigError(f"unknown constant choice {self.active!r}")

    @property
    def c0(self) -> float:
        return 1.0 / (2.0 * math.pi * sphere_area(self.n - 2))

    @property
    def c1_published(self) -> float:
        return sphere_area(self.n)

    @property
    def c1_derived(self) -> float:
        return (self.n - 1) * self.c0

    @property
    def c1(self) -> float:
        return self.c1_derived if self.active == "derived" else self.c1_published


@dataclass(frozen=True, eq=False)
class RieszKernelTable:
    """Sampled scalar and tensor kernels plus their transforms on the convolution grid.

    ``offsets`` holds integer cell offsets ``(d1, d2)`` in FFT order on an
    ``M x M`` array with ``M = (pad + 1) N``.
    """

    grid: Grid
    pad: int
    M: int
    scalar: np.ndarray
    tensor: np.ndarray
    scalar_hat: np.ndarray
    tensor_hat: np.ndarray

    @property
    def padded_grid(self) -> Grid:
        return self.grid.padded(self.pad)


def _offsets(M: int) -> np.ndarray:
    return np.fft.fftfreq(M, d=1.0 / M)


def riesz_kernels(grid: Grid, pad: int = DEFAULT_PAD) -> RieszKernelTable:
    return _riesz_kernels(grid.N, grid.lo, grid.hi, int(pad))


@lru_cache(maxsize=8)
def _riesz_kernels(N: int, lo: float, hi: float, pad: int) -> RieszKernelTable:
    grid = Grid(N, lo, hi)
    h = grid.h
    M = (pad + 1) * N
    d = _offsets(M)
    D1, D2 = np.meshgrid(d, d, indexing="ij")
    R = np.hypot(D1, D2)
    R[0, 0] = 1.0
    scalar = 2.0 / (h * R)
    scalar[0, 0] = 2.0 * UNIT_CELL_INV_R / h
    R3 = h * R**3
    tensor = np.empty((2, 2, M, M))
    tensor[0, 0] = 2.0 * D1 * D1 / R3
    tensor[1, 1] = 2.0 * D2 * D2 / R3
    tensor[0, 1] = 2.0 * D1 * D2 / R3
    tensor[1, 0] = tensor[0, 1]
    # trace of the singular cell is split evenly; odd off-diagonal averages to zero
    tensor[0, 0, 0, 0] = tensor[1, 1, 0, 0] = 0.5 * scalar[0, 0]
    tensor[0, 1, 0, 0] = tensor[1, 0, 0, 0] = 0.0
    scalar_hat = sfft.rfft2(scalar)
    tensor_hat = sfft.rfft2(tensor, axes=(-2, -1))
    for a in (scalar, tensor, scalar_hat, tensor_hat):
        a.setflags(write=False)
    return RieszKernelTable(grid, pad, M, scalar, tensor, scalar_hat, tensor_hat)


def _embed_hat(values: np.ndarray, M: int) -> np.ndarray:
    buf = np.zeros(values.shape[:-2] + (M, M))
    N = values.shape[-1]
    buf[..., :N, :N] = values
    return sfft.rfft2(buf, axes=(-2, -1))


def _to_padded(conv: np.ndarray, grid: Grid, pad: int) -> np.ndarray:
    """Reorder a circular convolution result into the padded-grid window."""
    off = grid.N * (pad - 1) // 2
    P = grid.N * pad
    return np.roll(conv, off, axis=(-2, -1))[..., :P, :P]


def _finish(out: np.ndarray, grid: Grid, pad: int, keep_padded: bool, cls):
    if not np.all(np.isfinite(out)):
        raise NumericalFailure("normal operator produced non-finite values")
    pgrid = grid.padded(pad)
    if keep_padded:
        return cls(pgrid, out if cls is CovectorField else out.reshape(pgrid.shape))
    sl = pgrid.crop_slice(grid)
    return cls(grid, out[..., sl[0], sl[1]])


def normal_scalar(f: ScalarField, pad: int = DEFAULT_PAD, keep_padded: bool = False) -> ScalarField:
    """``N0 f = 2 f * |x|^-1`` by kernel convolution.

    With ``keep_padded`` the full ``pad``-times larger output is returned; the
    inversion routines use it to keep the slow ``1/|x|`` tail.
    """
    k = riesz_kernels(f.grid, pad)
    conv = sfft.irfft2(_embed_hat(f.values, k.M) * k.scalar_hat, s=(k.M, k.M))
    out = f.grid.h**2 * _to_padded(conv, f.grid, pad)
    return _finish(out, f.grid, pad, keep_padded, ScalarField)


def normal_oneform(f: CovectorField, pad: int = DEFAULT_PAD, keep_padded: bool = False) -> CovectorField:
    """``(N1 f)_i = sum_j K_ij * f_j`` with ``K_ij = 2 x_i x_j / |x|^3``."""
    k = riesz_kernels(f.grid, pad)
    fh = _embed_hat(f.components, k.M)
    prod = np.einsum("ijab,jab->iab", k.tensor_hat, fh)
    conv = sfft.irfft2(prod, s=(k.M, k.M), axes=(-2, -1))
    out = f.grid.h**2 * _to_padded(conv, f.grid, pad)
    return _finish(out, f.grid, pad, keep_padded, CovectorField)


def normal_matrix(A: MatrixField, f: CovectorField, pad: int = DEFAULT_PAD) -> CovectorField:
    """``N_A f = A^T N1 (A f)`` pointwise."""
    return A.transpose().apply(normal_oneform(A.apply(f), pad))


def normal_scalar_composition(f: ScalarField, lines: LineGrid) -> ScalarField:
    """``X0^* X0 f`` through the discrete projector pair."""
    return backproject_scalar(xray_scalar(f, lines), f.grid)


def normal_oneform_composition(f: CovectorField, lines: LineGrid) -> CovectorField:
    return backproject_oneform(xray_oneform(f, lines), f.grid)


def _abs_xi(M: int, h: float) -> np.ndarray:
    k1 = 2.0 * np.pi * np.fft.fftfreq(M, d=h)
    k2 = 2.0 * np.pi * np.fft.rfftfreq(M, d=h)
    return np.hypot(k1[:, None], k2[None, :])


WINDOWS = (None, "hann")


def _window(xi: np.ndarray, h: float, window: str | None) -> np.ndarray | float:
    """Radial apodisation reaching zero at the grid Nyquist ``pi / h``."""
    if window is None:
        return 1.0
    if window == "hann":
        kn = math.pi / h
        return np.where(xi < kn, 0.5 * (1.0 + np.cos(math.pi * xi / kn)), 0.0)
    raise ConfigError(f"unknown window {window!r}; choose from {WINDOWS}")


def _half_laplacian_periodic(data: np.ndarray, h: float, window: str | None = None) -> np.ndarray:
    M = data.shape[-1]
    xi = _abs_xi(M, h)
    return sfft.irfft2(sfft.rfft2(data, axes=(-2, -1)) * (xi * _window(xi, h, window)), s=(M, M), axes=(-2, -1))


def half_laplacian(field, pad: int = DEFAULT_PAD, periodic: bool = False):
    """Fourier multiplier ``|xi|`` applied componentwise.

    By default the field is zero-padded to ``pad`` times its size before the
    transform and cropped afterwards.  ``periodic=True`` treats the array as
    one period (used on already padded data and for plane-wave checks).
    """
    grid = field.grid
    if periodic:
        return field.with_data(_half_laplacian_periodic(field.data, grid.h))
    pgrid = grid.padded(pad)
    sl = pgrid.crop_slice(grid)
    buf = np.zeros((field.data.shape[0],) + pgrid.shape)
    buf[:, sl[0], sl[1]] = field.data
    out = _half_laplacian_periodic(buf, grid.h)
    return field.with_data(out[:, sl[0], sl[1]])


def _spectral_inverse(field, c: float, grid: Grid | None, pad: int, window: str | None = None):
    if grid is None:
        pgrid = field.grid.padded(pad)
        sl = pgrid.crop_slice(field.grid)
        buf = np.zeros((field.data.shape[0],) + pgrid.shape)
        buf[:, sl[0], sl[1]] = field.data
        return field.with_data(c * _half_laplacian_periodic(buf, field.grid.h, window)[:, sl[0], sl[1]])
    sl = field.grid.crop_slice(grid)
    out = c * _half_laplacian_periodic(field.data, field.grid.h, window)[:, sl[0], sl[1]]
    return type(field)(grid, out[0] if isinstance(field, ScalarField) else out)


def invert_scalar(n0f: ScalarField, constants: InversionConstants | None = None,
                  grid: Grid | None = None, pad: int = DEFAULT_PAD, window: str | None = None) -> ScalarField:
    """``f = c0 |xi| N0 f``.

    Pass the padded output of ``normal_scalar(..., keep_padded=True)`` together
    with the target ``grid``; the result is then accurate on the central
    window.  Without ``grid`` the input is zero-padded and the truncated tail
    of ``N0 f`` degrades the result.

    ``window="hann"`` tapers the filter to zero at the grid Nyquist.  Use it
    when ``n0f`` comes from backprojected data: the transposed projector
    leaves near-Nyquist streaks that the bare ``|xi|`` amplifies.
    """
    k = constants or InversionConstants()
    return _spectral_inverse(n0f, k.c0, grid, pad, window)


def recover_solenoidal(n1f: CovectorField, constants: InversionConstants | None = None,
                       grid: Grid | None = None, pad: int = DEFAULT_PAD, window: str | None = None) -> CovectorField:
    """``f_sol = c1 |xi| N1 f`` componentwise; same padding and window contract as ``invert_scalar``."""
    k = constants or InversionConstants()
    return _spectral_inverse(n1f, k.c1, grid, pad, window)


def interior_rel_error(est, truth, fraction: float = INTERIOR_FRACTION) -> float:
    """Relative L2 error over the central window."""
    m = truth.grid.interior_mask(fraction)
    num = np.sqrt(np.sum((est.data - truth.data)[:, m] ** 2))
    den = np.sqrt(np.sum(truth.data[:, m] ** 2))
    return float(num / den) if den > 0 else float(num)


def calibrate_c1(phantom: CovectorField, pad: int = DEFAULT_PAD, fraction: float = INTERIOR_FRACTION) -> float:
    """Empirical solenoidal-inversion constant for a solenoidal phantom.

    Least-squares ratio between the phantom and ``|xi| N1 phantom`` over the
    central window.
    """
    m = phantom.grid.interior_mask(fraction)
    truth = phantom.components[:, m]
    if np.sqrt(np.sum(truth**2)) < 1e-12 * max(1.0, np.abs(phantom.components).max()) or not np.any(truth):
        raise ConfigError("calibration phantom is (near) zero on the interior window")
    raw = _spectral_inverse(normal_oneform(phantom, pad, keep_padded=True), 1.0, phantom.grid, pad)
    est = raw.components[:, m]
    return float(np.sum(est * truth) / np.sum(est * est))


def calibration_report(phantom: CovectorField, pad: int = DEFAULT_PAD, n: int = 2) -> dict:
    """Calibrated ``c1`` next to the derived and published constants."""
    k = InversionConstants(n)
    c = calibrate_c1(phantom, pad)
    return {
        "c1_calibrated": c,
        "c1_derived": k.c1_derived,
        "c1_published": k.c1_published,
        "rel_error_vs_derived": abs(c - k.c1_derived) / k.c1_derived,
        "published_over_calibrated": k.c1_published / c,
    }
