"""Grid-sampled scalar, covector and matrix fields on a square cell-centred grid.

Arrays are indexed ``values[i, j]`` with ``i`` along x and ``j`` along y.
Derivatives use second-order central differences in the interior and
first-order one-sided differences on the outer ring (``np.gradient`` with
``edge_order=1``).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigError

SUPPORT_RADIUS = 0.9
DET_EPS = 1e-8


@dataclass(frozen=True)
class Grid:
    """Uniform ``N x N`` cell-centred grid on ``[lo, hi]^2``."""

    N: int
    lo: float = -1.0
    hi: float = 1.0
    n: int = 2

    def __post_init__(self):
        if self.n != 2:
            raise ConfigError(f"only n=2 grids are supported, got n={self.n}")
        if int(self.N) != self.N or self.N < 8:
            raise ConfigError(f"grid needs N >= 8 samples per axis, got {self.N}")
        if not self.hi > self.lo:
            raise ConfigError(f"empty domain [{self.lo}, {self.hi}]")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / self.N

    @property
    def shape(self) -> tuple[int, int]:
        return (self.N, self.N)

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.hi - self.lo)

    @property
    def half_diagonal(self) -> float:
        """Half the diagonal of the domain, measured from its centre."""
        return float(np.sqrt(2.0) * self.half_width)

    @property
    def domain(self) -> list[list[float]]:
        return [[self.lo, self.hi], [self.lo, self.hi]]

    @property
    def coords(self) -> np.ndarray:
        """Cell-centre coordinates along one axis."""
        return self.lo + (np.arange(self.N) + 0.5) * self.h

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.coords, self.coords, indexing="ij")

    def padded(self, pad: int) -> "Grid":
        """Same spacing and centre, ``pad`` times as many cells per axis."""
        pad = int(pad)
        if pad < 1:
            raise ConfigError("padding factor must be >= 1")
        if (self.N * (pad - 1)) % 2:
            raise ConfigError("padding must keep the original cells centred (N*(p-1) even)")
        hw = pad * self.half_width
        return Grid(self.N * pad, self.center - hw, self.center + hw)

    def crop_slice(self, inner: "Grid") -> tuple[slice, slice]:
        """Index window of ``inner`` when it sits centred inside this grid."""
        if not np.isclose(inner.h, self.h, rtol=1e-12, atol=0.0):
            raise ConfigError("grids have different spacing")
        off = (inner.lo - self.lo) / self.h
        i0 = int(round(off))
        if abs(off - i0) > 1e-6 or i0 < 0 or i0 + inner.N > self.N:
            raise ConfigError("inner grid is not aligned inside the outer grid")
        return (slice(i0, i0 + inner.N), slice(i0, i0 + inner.N))

    def interior_mask(self, fraction: float = 0.6) -> np.ndarray:
        """Cells inside the central window covering ``fraction`` of each axis."""
        x = np.abs(self.coords - self.center) <= fraction * self.half_width
        return x[:, None] & x[None, :]

    def to_header(self) -> dict:
        return {"n": self.n, "shape": [self.N, self.N], "domain": self.domain}


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{what} contains non-finite values")


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.grid.shape:
            raise ConfigError(f"scalar field shape {v.shape} != grid shape {self.grid.shape}")
        _check_finite(v, "scalar field")
        object.__setattr__(self, "values", v)

    kind = "scalar"

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @property
    def data(self) -> np.ndarray:
        """Values stacked component-major (here one component)."""
        return self.values[None]

    def with_data(self, data: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, np.asarray(data).reshape(self.grid.shape))

    def __add__(self, other):
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, a: float):
        return ScalarField(self.grid, a * self.values)

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class CovectorField:
    grid: Grid
    components: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.components, dtype=np.float64)
        if c.shape != (self.grid.n,) + self.grid.shape:
            raise ConfigError(f"covector field shape {c.shape} does not match grid")
        _check_finite(c, "covector field")
        object.__setattr__(self, "components", c)

    kind = "covector"

    @classmethod
    def zeros(cls, grid: Grid) -> "CovectorField":
        return cls(grid, np.zeros((grid.n,) + grid.shape))

    @classmethod
    def from_components(cls, grid: Grid, f1, f2) -> "CovectorField":
        return cls(grid, np.stack([np.asarray(f1, float), np.asarray(f2, float)]))

    @property
    def f1(self) -> np.ndarray:
        return self.components[0]

    @property
    def f2(self) -> np.ndarray:
        return self.components[1]

    @property
    def data(self) -> np.ndarray:
        return self.components

    def with_data(self, data: np.ndarray) -> "CovectorField":
        return CovectorField(self.grid, data)

    def __add__(self, other):
        return CovectorField(self.grid, self.components + other.components)

    def __sub__(self, other):
        return CovectorField(self.grid, self.components - other.components)

    def __mul__(self, a: float):
        return CovectorField(self.grid, a * self.components)

    __rmul__ = __mul__

    def __neg__(self):
        return CovectorField(self.grid, -self.components)


@dataclass(frozen=True, eq=False)
class MatrixField:
    """Pointwise invertible 2x2 matrix field, ``entries[i, j]`` is ``A_ij(x)``."""

    grid: Grid
    entries: np.ndarray
    constant: bool = False
    det_eps: float = DET_EPS

    kind = "matrix"

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.float64)
        if e.shape == (2, 2):
            e = np.broadcast_to(e[:, :, None, None], (2, 2) + self.grid.shape).copy()
            object.__setattr__(self, "constant", True)
        if e.shape != (2, 2) + self.grid.shape:
            raise ConfigError(f"matrix field shape {e.shape} does not match grid")
        _check_finite(e, "matrix field")
        det = e[0, 0] * e[1, 1] - e[0, 1] * e[1, 0]
        if np.min(np.abs(det)) < self.det_eps:
            raise ConfigError(f"matrix field is not invertible: min |det A| = {np.min(np.abs(det)):.3e}")
        object.__setattr__(self, "entries", e)

    @classmethod
    def constant_matrix(cls, grid: Grid, matrix) -> "MatrixField":
        return cls(grid, np.asarray(matrix, dtype=float), constant=True)

    @classmethod
    def identity(cls, grid: Grid) -> "MatrixField":
        return cls.constant_matrix(grid, np.eye(2))

    @classmethod
    def rotation_b(cls, grid: Grid) -> "MatrixField":
        """Clockwise quarter turn ``B(v1, v2) = (v2, -v1)``."""
        return cls.constant_matrix(grid, [[0.0, 1.0], [-1.0, 0.0]])

    @property
    def data(self) -> np.ndarray:
        return self.entries.reshape((4,) + self.grid.shape)

    def with_data(self, data: np.ndarray) -> "MatrixField":
        return MatrixField(self.grid, np.asarray(data).reshape((2, 2) + self.grid.shape))

    def apply(self, f: CovectorField) -> CovectorField:
        return CovectorField(self.grid, np.einsum("ijxy,jxy->ixy", self.entries, f.components))

    def transpose(self) -> "MatrixField":
        return MatrixField(self.grid, self.entries.transpose(1, 0, 2, 3), self.constant)

    def inverse(self) -> "MatrixField":
        e = self.entries
        det = e[0, 0] * e[1, 1] - e[0, 1] * e[1, 0]
        inv = np.stack([np.stack([e[1, 1], -e[0, 1]]), np.stack([-e[1, 0], e[0, 0]])]) / det
        return MatrixField(self.grid, inv, self.constant)


Field = ScalarField | CovectorField


def gradient(phi: ScalarField) -> CovectorField:
    h = phi.grid.h
    g1, g2 = np.gradient(phi.values, h, h, edge_order=1)
    return CovectorField(phi.grid, np.stack([g1, g2]))


def divergence(f: CovectorField) -> ScalarField:
    h = f.grid.h
    d = np.gradient(f.f1, h, axis=0, edge_order=1) + np.gradient(f.f2, h, axis=1, edge_order=1)
    return ScalarField(f.grid, d)


def curl2d(f: CovectorField) -> ScalarField:
    """Scalar curl ``*df = d1 f2 - d2 f1``."""
    if f.grid.n != 2:
        raise ConfigError("curl2d is only defined for n = 2")
    h = f.grid.h
    c = np.gradient(f.f2, h, axis=0, edge_order=1) - np.gradient(f.f1, h, axis=1, edge_order=1)
    return ScalarField(f.grid, c)


def laplacian(phi: ScalarField) -> ScalarField:
    """``divergence(gradient(phi))``, the wide (2h) central-difference Laplacian."""
    return divergence(gradient(phi))


def mollifier_kernel(eps: float, h: float) -> np.ndarray:
    """Standard bump ``exp(-1/(1-|x/eps|^2))`` sampled at grid offsets, unit discrete mass."""
    m = int(np.ceil(eps / h))
    off = np.arange(-m, m + 1) * h
    r2 = (off[:, None] ** 2 + off[None, :] ** 2) / eps**2
    k = np.zeros_like(r2)
    inside = r2 < 1.0
    k[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return k / k.sum()


def mollify(field, eps: float):
    """Convolve with the standard mollifier of radius ``eps`` (componentwise).

    The kernel is normalised so that its grid sum is one, so the discrete
    mass ``h^2 * sum(values)`` is preserved for fields away from the edge.
    """
    h = field.grid.h
    if eps < 2 * h:
        raise ConfigError(f"mollifier radius {eps} under-resolved; need eps >= 2h = {2 * h}")
    k = mollifier_kernel(eps, h)
    out = np.stack([ndimage.convolve(c, k, mode="constant", cval=0.0) for c in field.data])
    return field.with_data(out)


def support_margin(field, radius: float = SUPPORT_RADIUS) -> float:
    """Fraction of the field's L1 mass lying outside ``|x| < radius``."""
    X, Y = field.grid.mesh()
    outside = X**2 + Y**2 >= radius**2
    mag = np.abs(field.data).sum(axis=0)
    total = mag.sum()
    if total == 0.0:
        return 0.0
    return float(mag[outside].sum() / total)


def warn_support(field, radius: float = SUPPORT_RADIUS, tol: float = 1e-8) -> None:
    frac = support_margin(field, radius)
    if frac > tol:
        warnings.warn(
            f"{frac:.2e} of the field mass lies outside radius {radius}; line integrals may be truncated",
            RuntimeWarning,
            stacklevel=3,
        )
