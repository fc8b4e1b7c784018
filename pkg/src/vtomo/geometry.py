"""Oriented lines, sinogram line grids and regions of interest.

A line is ``p(t) = s * nrm + t * theta`` with ``theta = (cos a, sin a)`` and
``nrm = (-sin a, cos a)``.  Angles cover the full circle so that every line
and its reversal are both present.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Line:
    angle: float
    offset: float

    @property
    def theta(self) -> np.ndarray:
        return np.array([math.cos(self.angle), math.sin(self.angle)])

    @property
    def normal(self) -> np.ndarray:
        return np.array([-math.sin(self.angle), math.cos(self.angle)])

    @property
    def base(self) -> np.ndarray:
        return self.offset * self.normal

    def point(self, t):
        """Points ``z + t theta``, shape ``t.shape + (2,)``."""
        t = np.asarray(t, dtype=float)
        return self.base + t[..., None] * self.theta


def reverse(line: Line) -> Line:
    """Same point set, opposite orientation."""
    return Line((line.angle + math.pi) % TWO_PI, -line.offset)


@dataclass(frozen=True)
class LineGrid:
    """Equally spaced angles on ``[0, 2pi)`` times bin-centred offsets in ``[-s_max, s_max]``."""

    n_angles: int
    n_offsets: int
    s_max: float = math.sqrt(2.0)

    def __post_init__(self):
        if self.n_angles < 16 or self.n_offsets < 16:
            raise ConfigError("line grid needs n_angles >= 16 and n_offsets >= 16")
        if self.n_angles % 2:
            raise ConfigError("n_angles must be even so the grid is closed under reversal")
        if not self.s_max > 0:
            raise ConfigError("s_max must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_angles, self.n_offsets)

    @property
    def d_angle(self) -> float:
        return TWO_PI / self.n_angles

    @property
    def d_offset(self) -> float:
        return 2.0 * self.s_max / self.n_offsets

    @property
    def line_weight(self) -> float:
        return self.d_angle * self.d_offset

    @property
    def angles(self) -> np.ndarray:
        return TWO_PI * np.arange(self.n_angles) / self.n_angles

    @property
    def offsets(self) -> np.ndarray:
        # exactly antisymmetric: offsets[-1 - j] == -offsets[j]
        return (np.arange(self.n_offsets) - 0.5 * (self.n_offsets - 1)) * self.d_offset

    def directions(self) -> tuple[np.ndarray, np.ndarray]:
        """``(cos a_k, sin a_k)``; the second half is the exact negation of the first."""
        half = self.n_angles // 2
        a = self.angles[:half]
        c, s = np.cos(a), np.sin(a)
        return np.concatenate([c, -c]), np.concatenate([s, -s])

    def line(self, k: int, j: int) -> Line:
        return Line(float(self.angles[k]), float(self.offsets[j]))

    def reversed_values(self, values: np.ndarray) -> np.ndarray:
        """Sinogram re-indexed so entry ``(k, j)`` holds the value on the reversed line."""
        k = (np.arange(self.n_angles) + self.n_angles // 2) % self.n_angles
        return values[k][:, ::-1]

    def to_header(self) -> dict:
        return {"n_angles": self.n_angles, "n_offsets": self.n_offsets, "s_max": self.s_max}


@dataclass(frozen=True)
class Disk:
    center: tuple[float, float]
    radius: float
    role: str = "V"

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigError("disk radius must be positive")
        if self.role not in ("V", "C"):
            raise ConfigError(f"unknown region role {self.role!r}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    def contains(self, x, y):
        cx, cy = self.center
        return (x - cx) ** 2 + (y - cy) ** 2 < self.radius**2

    def meets(self, cos_a, sin_a, s, t_clip=None):
        cx, cy = self.center
        return np.abs(-cx * sin_a + cy * cos_a - s) < self.radius

    def bbox(self):
        cx, cy = self.center
        r = self.radius
        return (cx - r, cy - r), (cx + r, cy + r)

    def to_json(self) -> dict:
        return {"type": "disk", "center": list(self.center), "radius": self.radius, "role": self.role}


@dataclass(frozen=True)
class Rect:
    lo: tuple[float, float]
    hi: tuple[float, float]
    role: str = "V"

    def __post_init__(self):
        lo = (float(self.lo[0]), float(self.lo[1]))
        hi = (float(self.hi[0]), float(self.hi[1]))
        if not (lo[0] < hi[0] and lo[1] < hi[1]):
            raise ConfigError("rectangle needs lo < hi on both axes")
        if self.role not in ("V", "C"):
            raise ConfigError(f"unknown region role {self.role!r}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.lo[0] + self.hi[0]), 0.5 * (self.lo[1] + self.hi[1]))

    def contains(self, x, y):
        return (x > self.lo[0]) & (x < self.hi[0]) & (y > self.lo[1]) & (y < self.hi[1])

    def meets(self, cos_a, sin_a, s, t_clip=2.0 * math.sqrt(2.0)):
        """Slab clipping of the segment ``|t| <= t_clip`` against the open rectangle."""
        cos_a, sin_a, s = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (cos_a, sin_a, s)))
        t_lo = np.full(s.shape, -float(t_clip))
        t_hi = np.full(s.shape, float(t_clip))
        ok = np.ones(s.shape, dtype=bool)
        for base, d, lo, hi in ((-s * sin_a, cos_a, self.lo[0], self.hi[0]), (s * cos_a, sin_a, self.lo[1], self.hi[1])):
            par = np.abs(d) < 1e-15
            ok &= ~par | ((base > lo) & (base < hi))
            with np.errstate(divide="ignore", invalid="ignore"):
                t1 = (lo - base) / d
                t2 = (hi - base) / d
            t_lo = np.where(par, t_lo, np.maximum(t_lo, np.minimum(t1, t2)))
            t_hi = np.where(par, t_hi, np.minimum(t_hi, np.maximum(t1, t2)))
        return ok & (t_lo < t_hi)

    def bbox(self):
        return self.lo, self.hi

    def to_json(self) -> dict:
        return {"type": "rect", "lo": list(self.lo), "hi": list(self.hi), "role": self.role}


Region = Disk | Rect


def region_from_json(d: dict) -> Region:
    kind = d.get("type")
    role = d.get("role", "V")
    if kind == "disk":
        return Disk(tuple(d["center"]), d["radius"], role)
    if kind == "rect":
        return Rect(tuple(d["lo"]), tuple(d["hi"]), role)
    raise ConfigError(f"unknown region type {kind!r}")


def check_region_in_domain(region: Region, lo: float, hi: float) -> None:
    (x0, y0), (x1, y1) = region.bbox()
    if x1 <= lo or x0 >= hi or y1 <= lo or y0 >= hi:
        raise ConfigError("region does not intersect the grid domain")


def line_meets_region(line: Line, region: Region, t_clip: float = 2.0 * math.sqrt(2.0)) -> bool:
    c, s = math.cos(line.angle), math.sin(line.angle)
    return bool(region.meets(c, s, line.offset, t_clip))


def partial_mask(grid: LineGrid, region: Region, mode: str = "through", t_clip: float = 2.0 * math.sqrt(2.0)) -> np.ndarray:
    """Boolean ``(n_angles, n_offsets)`` mask of measured lines.

    ``through`` keeps lines meeting the region, ``avoiding`` keeps the rest.
    """
    c, s = grid.directions()
    hit = region.meets(c[:, None], s[:, None], grid.offsets[None, :], t_clip)
    hit = np.broadcast_to(hit, grid.shape).copy()
    if mode == "through":
        return hit
    if mode == "avoiding":
        return ~hit
    raise ConfigError(f"unknown mask mode {mode!r}")
