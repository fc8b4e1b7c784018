"""Analytic test fields with known potentials, decompositions and supports.

The basic building block is a Gaussian bump ``a * exp(-r^2/sigma^2)``
multiplied by a C-infinity cutoff that equals one for ``r <= R/2`` and zero
for ``r >= R``.  Derivatives are evaluated in closed form at the cell
centres, never by differencing samples.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError
from .fields import SUPPORT_RADIUS, CovectorField, Grid, ScalarField
from .geometry import Disk, Rect, region_from_json

KINDS = (
    "gaussian_scalar",
    "gradient",
    "curl",
    "mixed",
    "disk_indicator",
    "closed_in_region",
    "sphere_bundle_pair",
)


def _g(x):
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def _g1(x):
    out = np.zeros_like(x)
    pos = x > 0
    xp = x[pos]
    out[pos] = np.exp(-1.0 / xp) / xp**2
    return out


def _g2(x):
    out = np.zeros_like(x)
    pos = x > 0
    xp = x[pos]
    out[pos] = np.exp(-1.0 / xp) * (1.0 - 2.0 * xp) / xp**4
    return out


def cutoff(r, R):
    """Smooth step ``w(r)`` with ``w = 1`` on ``[0, R/2]``, ``w = 0`` beyond ``R``; returns (w, w', w'')."""
    r = np.asarray(r, dtype=float)
    r0 = 0.5 * R
    kappa = 1.0 / (R - r0)
    t = np.clip((r - r0) * kappa, -1.0, 2.0)
    a, b = _g(1.0 - t), _g(t)
    a1, b1 = -_g1(1.0 - t), _g1(t)
    a2, b2 = _g2(1.0 - t), _g2(t)
    D = a + b
    w = np.where(t <= 0, 1.0, 0.0)
    w1 = np.zeros_like(r)
    w2 = np.zeros_like(r)
    mid = (t > 0) & (t < 1)
    Dm = D[mid]
    num1 = a1[mid] * b[mid] - a[mid] * b1[mid]
    w[mid] = a[mid] / Dm
    w1[mid] = kappa * num1 / Dm**2
    w2[mid] = kappa**2 * ((a2[mid] * b[mid] - a[mid] * b2[mid]) / Dm**2 - 2.0 * num1 * (a1[mid] + b1[mid]) / Dm**3)
    return w, w1, w2


@dataclass(frozen=True)
class Bump:
    """Windowed Gaussian ``amplitude * exp(-|x-c|^2/sigma^2) * w(|x-c|)`` supported in ``|x-c| < radius``."""

    center: tuple[float, float] = (0.0, 0.0)
    sigma: float = 0.25
    amplitude: float = 1.0
    radius: float = 0.8

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        if self.sigma <= 0 or self.radius <= 0:
            raise ConfigError("bump sigma and radius must be positive")
        if np.hypot(*self.center) + self.radius > SUPPORT_RADIUS + 1e-12:
            raise ConfigError(f"bump support |c| + R = {np.hypot(*self.center) + self.radius:.3f} exceeds {SUPPORT_RADIUS}")

    def profile(self, r):
        """Radial profile F(r) and the combinations F'(r)/r and F''(r)."""
        s2 = self.sigma**2
        G = self.amplitude * np.exp(-(r**2) / s2)
        w, w1, w2 = cutoff(r, self.radius)
        # w1 vanishes for r <= radius/2, so w1/r is safe
        w1_over_r = np.divide(w1, r, out=np.zeros_like(r), where=w1 != 0)
        F = G * w
        F1_over_r = G * (-2.0 / s2 * w + w1_over_r)
        F2 = G * ((-2.0 / s2 + 4.0 * r**2 / s2**2) * w - 4.0 * r / s2 * w1 + w2)
        return F, F1_over_r, F2

    def evaluate(self, X, Y):
        """Value, gradient (2 arrays) and Laplacian at the points ``(X, Y)``."""
        dx, dy = X - self.center[0], Y - self.center[1]
        r = np.hypot(dx, dy)
        F, F1r, F2 = self.profile(r)
        return F, F1r * dx, F1r * dy, F2 + F1r


def _sum_bumps(bumps, X, Y):
    val = np.zeros_like(X)
    gx = np.zeros_like(X)
    gy = np.zeros_like(X)
    lap = np.zeros_like(X)
    for b in bumps:
        v, bx, by, bl = b.evaluate(X, Y)
        val += v
        gx += bx
        gy += by
        lap += bl
    return val, gx, gy, lap


@dataclass
class PhantomSpec:
    """Phantom recipe.

    ``bumps`` build the scalar potential phi (or g); ``curl_bumps`` build the
    stream function psi.  ``region`` is the set V that the stream-function
    part must avoid (``closed_in_region``).
    """

    kind: str
    bumps: list[Bump] = field(default_factory=list)
    curl_bumps: list[Bump] = field(default_factory=list)
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 0.5
    region: Disk | Rect | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown phantom kind {self.kind!r}")
        self.bumps = [b if isinstance(b, Bump) else Bump(**b) for b in self.bumps]
        self.curl_bumps = [b if isinstance(b, Bump) else Bump(**b) for b in self.curl_bumps]
        if isinstance(self.region, dict):
            self.region = region_from_json(self.region)
        if self.kind == "disk_indicator" and np.hypot(*self.center) + self.radius > SUPPORT_RADIUS + 1e-12:
            raise ConfigError("disk indicator exceeds the support radius")
        if self.kind == "closed_in_region":
            if self.region is None:
                raise ConfigError("closed_in_region needs a region V")
            for b in self.curl_bumps:
                if _bump_meets_region(b, self.region):
                    raise ConfigError("stream-function bump support meets the region V")

    def check_grid(self, grid: Grid) -> None:
        for b in self.bumps + self.curl_bumps:
            if b.sigma < 3 * grid.h:
                raise ConfigError(f"bump width sigma = {b.sigma} below 3h = {3 * grid.h}")

    def to_json(self) -> dict:
        d = asdict(self)
        d["region"] = None if self.region is None else self.region.to_json()
        return d

    @classmethod
    def from_json(cls, d: dict | str) -> "PhantomSpec":
        if isinstance(d, str):
            d = json.loads(d)
        d = dict(d)
        if "center" in d:
            d["center"] = tuple(d["center"])
        return cls(**d)


def _bump_meets_region(b: Bump, region) -> bool:
    if isinstance(region, Disk):
        return np.hypot(b.center[0] - region.center[0], b.center[1] - region.center[1]) < b.radius + region.radius
    # distance from bump centre to the rectangle
    dx = max(region.lo[0] - b.center[0], 0.0, b.center[0] - region.hi[0])
    dy = max(region.lo[1] - b.center[1], 0.0, b.center[1] - region.hi[1])
    return np.hypot(dx, dy) < b.radius


@dataclass
class Phantom:
    """Generated field plus its analytic ground truth."""

    field: ScalarField | CovectorField | tuple
    parts: dict


def make_with_parts(spec: PhantomSpec, grid: Grid) -> Phantom:
    spec.check_grid(grid)
    X, Y = grid.mesh()
    kind = spec.kind
    if kind == "disk_indicator":
        ind = ((X - spec.center[0]) ** 2 + (Y - spec.center[1]) ** 2 < spec.radius**2).astype(float)
        f = ScalarField(grid, ind)
        return Phantom(f, {"indicator": f})

    phi, px, py, lap_phi = _sum_bumps(spec.bumps, X, Y)
    psi, sx, sy, lap_psi = _sum_bumps(spec.curl_bumps, X, Y)
    phi_f = ScalarField(grid, phi)
    psi_f = ScalarField(grid, psi)
    grad = CovectorField.from_components(grid, px, py)
    curl = CovectorField.from_components(grid, sy, -sx)
    parts = {
        "phi": phi_f,
        "psi": psi_f,
        "potential": grad,
        "solenoidal": curl,
        "laplacian_phi": ScalarField(grid, lap_phi),
        # *d(curl psi) = -lap psi
        "curl_of_field": ScalarField(grid, -lap_psi),
    }
    if kind == "gaussian_scalar":
        return Phantom(phi_f, parts)
    if kind == "gradient":
        return Phantom(grad, parts)
    if kind == "curl":
        return Phantom(curl, parts)
    if kind in ("mixed", "closed_in_region"):
        return Phantom(grad + curl, parts)
    # sphere_bundle_pair: g from the scalar bumps, f = curl psi
    return Phantom((phi_f, curl), parts)


def make(spec: PhantomSpec, grid: Grid):
    """Evaluate a phantom on ``grid`` (scalar, covector, or ``(g, f)`` pair)."""
    return make_with_parts(spec, grid).field


def random_family(seed: int, count: int, kind: str = "curl", grid: Grid | None = None) -> list[PhantomSpec]:
    """Seeded family of phantoms with one to three bumps each."""
    rng = np.random.default_rng(seed)
    hmin = 0.0 if grid is None else 3 * grid.h
    specs = []
    for _ in range(count):
        bumps = []
        for _ in range(int(rng.integers(1, 4))):
            radius = float(rng.uniform(0.45, 0.6))
            rho = float(rng.uniform(0.0, SUPPORT_RADIUS - radius))
            ang = float(rng.uniform(0, 2 * np.pi))
            sigma = max(float(rng.uniform(0.15, 0.3)), hmin)
            amp = float(rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 1.5))
            bumps.append(Bump((rho * np.cos(ang), rho * np.sin(ang)), sigma, amp, radius))
        if kind == "curl":
            specs.append(PhantomSpec("curl", curl_bumps=bumps, seed=seed))
        elif kind in ("gradient", "gaussian_scalar"):
            specs.append(PhantomSpec(kind, bumps=bumps, seed=seed))
        else:
            raise ConfigError(f"random families support curl/gradient/gaussian_scalar, not {kind!r}")
    return specs


# Named defaults used by the experiments and the CLI.
def default_spec(name: str) -> PhantomSpec:
    if name == "gaussian_scalar":
        return PhantomSpec("gaussian_scalar", bumps=[Bump((0.0, 0.0), 0.25, 1.0, 0.85)])
    if name == "gradient":
        return PhantomSpec("gradient", bumps=[Bump((0.03, -0.02), 0.25, 1.0, 0.85)])
    if name == "curl":
        return PhantomSpec("curl", curl_bumps=[Bump((-0.03, 0.02), 0.25, 1.0, 0.85)])
    if name == "mixed":
        return PhantomSpec(
            "mixed",
            bumps=[Bump((0.03, 0.01), 0.25, 1.0, 0.85)],
            curl_bumps=[Bump((-0.03, -0.01), 0.25, 1.0, 0.85)],
        )
    if name == "disk_indicator":
        return PhantomSpec("disk_indicator", center=(0.0, 0.0), radius=0.5)
    if name == "closed_in_region":
        return PhantomSpec(
            "closed_in_region",
            bumps=[Bump((-0.2, 0.0), 0.2, 1.0, 0.7)],
            curl_bumps=[Bump((0.4, 0.1), 0.15, 1.0, 0.45)],
            region=Disk((-0.45, 0.0), 0.2),
        )
    if name == "sphere_bundle_pair":
        return PhantomSpec(
            "sphere_bundle_pair",
            bumps=[Bump((0.1, 0.0), 0.25, 1.0, 0.75)],
            curl_bumps=[Bump((-0.1, 0.1), 0.22, 1.0, 0.75)],
        )
    raise ConfigError(f"no default phantom named {name!r}")
