"""Numerical checks of the partial-data and unique-continuation statements.

Each check returns an :class:`ExperimentReport` whose metrics carry explicit
tolerances.  A grid cannot certify vanishing to infinite order at a point,
so wherever that hypothesis would appear the checks use vanishing on an
open set instead.  "If and only if" statements are tested as two one-sided
checks: gradients give null data, and fields with a nonzero solenoidal part
give visibly nonzero data.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .decomposition import helmholtz_global
from .errors import ConfigError
from . import phantoms
from .fields import SUPPORT_RADIUS, CovectorField, Grid, MatrixField, ScalarField, curl2d, divergence, gradient
from .geometry import Disk, Line, LineGrid, Region, partial_mask, region_from_json, reverse
from .phantoms import Bump, PhantomSpec
from .normal import (
    DEFAULT_PAD,
    INTERIOR_FRACTION,
    InversionConstants,
    interior_rel_error,
    normal_oneform,
    normal_scalar,
    recover_solenoidal,
)
from .projector import (
    Sinogram,
    backproject_oneform,
    integrate_lines,
    xray_matrix,
    xray_oneform,
    xray_scalar,
    xray_transverse,
)

SURROGATE_NOTE = "vanishing on an open set stands in for vanishing to infinite order at a point"

DEFAULT_TOLERANCES = {
    "commutation": 0.05,
    "commutation_abs": 1e-2,
    "gauge": 1e-3,
    "control": 1e-1,
    "closed_on_V": 1e-2,
    "solenoidal_fraction": 1e-2,
    "stokes": 1e-3,
    "stokes_refinement": 1.8,
    "parity": 1e-12,
    "transverse_part": 0.10,
    "transverse_full": 0.12,
    "transverse_null": 1e-2,
    "support_data": 1e-3,
    "support_exterior_curl": 1e-2,
}


@dataclass
class Metric:
    label: str
    value: float
    tol: float
    bound: str = "upper"

    @property
    def passed(self) -> bool:
        if not math.isfinite(self.value):
            return False
        return self.value <= self.tol if self.bound == "upper" else self.value >= self.tol

    def to_json(self) -> dict:
        return {"label": self.label, "value": self.value, "tol": self.tol, "bound": self.bound, "pass": self.passed}


@dataclass
class ExperimentReport:
    name: str
    config: dict = field(default_factory=dict)
    metrics: list[Metric] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    values: dict = field(default_factory=dict)

    def add(self, label: str, value: float, tol: float, bound: str = "upper") -> Metric:
        m = Metric(label, float(value), float(tol), bound)
        self.metrics.append(m)
        return m

    @property
    def passed(self) -> bool:
        return all(m.passed for m in self.metrics)

    def metric(self, label: str) -> Metric:
        for m in self.metrics:
            if m.label == label:
                return m
        raise KeyError(label)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "config": self.config,
            "metrics": [m.to_json() for m in self.metrics],
            "pass": self.passed,
            "notes": self.notes,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=False)


def _tol(tolerances: dict | None, key: str) -> float:
    if tolerances and key in tolerances:
        return float(tolerances[key])
    return DEFAULT_TOLERANCES[key]


def _norm(a: np.ndarray) -> float:
    return float(np.sqrt(np.sum(a * a)))


def _ratio(num: float, den: float) -> float:
    if den == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return num / den


def check_commutation(f: CovectorField, pad: int = DEFAULT_PAD, tolerances: dict | None = None,
                      fraction: float = INTERIOR_FRACTION) -> ExperimentReport:
    """Compare ``curl(N1 f)`` with ``N0(curl f) / (n-1)`` on the central window."""
    rep = ExperimentReport("commutation", {"N": f.grid.N, "pad": pad})
    rep.notes.append(SURROGATE_NOTE)
    m = f.grid.interior_mask(fraction)
    lhs = curl2d(normal_oneform(f, pad)).values
    rhs = normal_scalar(curl2d(f), pad).values / (f.grid.n - 1)
    diff = _norm((lhs - rhs)[m])
    r_norm = _norm(rhs[m])
    # scale of all first derivatives pushed through N0
    scale = _norm(normal_scalar(ScalarField(f.grid, np.abs(divergence(f).values) + np.abs(curl2d(f).values)), pad).values[m])
    rep.values.update(lhs=lhs, rhs=rhs)
    if r_norm > 1e-2 * scale:
        rep.add("relative_residual", diff / r_norm, _tol(tolerances, "commutation"))
    else:
        tol = _tol(tolerances, "commutation_abs")
        rep.notes.append("degenerate right-hand side; residual reported against the derivative scale")
        rep.add("absolute_residual", _ratio(diff, scale), tol)
        rep.add("lhs_norm", _ratio(_norm(lhs[m]), scale), tol)
        rep.add("rhs_norm", _ratio(r_norm, scale), tol)
    return rep


def check_gauge_partial(phi: ScalarField, V: Region, lines: LineGrid, control: CovectorField | None = None,
                        tolerances: dict | None = None) -> ExperimentReport:
    """Data of ``d phi`` on lines through ``V`` against a matched solenoidal reference.

    The reference is ``X1`` of the quarter-turned gradient, a divergence-free
    field of the same pointwise magnitude.
    """
    mask = partial_mask(lines, V, "through")
    if not mask.any():
        raise ConfigError("region V meets none of the lines")
    rep = ExperimentReport("gauge", {"N": phi.grid.N, "lines": lines.to_header(), "V": V.to_json()})
    df = gradient(phi)
    data = xray_oneform(df, lines)
    reference = xray_transverse(df, lines)
    ref = np.abs(reference.values).max()
    masked = np.abs(data.values[mask]).max()
    rep.add("masked_data_rel", _ratio(masked, ref), _tol(tolerances, "gauge"))
    rep.values.update(sinogram=data.values, mask=mask)
    if control is not None:
        sc = xray_oneform(control, lines).values
        rep.add("control_masked_rel", _ratio(np.abs(sc[mask]).max(), np.abs(sc).max()), _tol(tolerances, "control"), "lower")
    return rep


def _closed_on_region(f: CovectorField, V: Region | None) -> float:
    """``max |*df|`` on ``V`` (whole grid if None) over the first-derivative scale."""
    c = np.abs(curl2d(f).values)
    if V is None:
        inside = np.ones(c.shape, dtype=bool)
    else:
        X, Y = f.grid.mesh()
        inside = V.contains(X, Y)
    scale = c.max() + np.abs(divergence(f).values).max()
    return _ratio(c[inside].max() if inside.any() else 0.0, scale)


def partial_data_uniqueness(f: CovectorField, V: Region, lines: LineGrid, pad: int = DEFAULT_PAD,
                            tolerances: dict | None = None) -> ExperimentReport:
    """One-sided checks of: closed on V and null data through V  <=>  f is a gradient."""
    rep = ExperimentReport("partial_data", {"N": f.grid.N, "lines": lines.to_header(), "V": V.to_json(), "pad": pad})
    rep.notes.append(SURROGATE_NOTE)
    mask = partial_mask(lines, V, "through")
    if not mask.any():
        raise ConfigError("region V meets none of the lines")
    data = xray_oneform(f, lines).values
    reference = np.abs(xray_transverse(f, lines).values).max()
    own = np.abs(data).max()
    masked = np.abs(data[mask]).max()
    closed = _closed_on_region(f, V)
    dec = helmholtz_global(f, pad)
    m = f.grid.interior_mask()
    delta = _ratio(_norm(dec.f_s.components[:, m]), _norm(f.components[:, m]))
    eps_ref = _ratio(masked, reference)
    eps_own = _ratio(masked, own)
    rep.values.update(eps_data_reference=eps_ref, eps_data_own=eps_own, delta=delta, closed_on_V=closed, mask=mask)
    tol_closed = _tol(tolerances, "closed_on_V")
    tol_data = _tol(tolerances, "gauge")
    tol_delta = _tol(tolerances, "solenoidal_fraction")
    rep.add("closed_on_V", closed, tol_closed)
    if delta <= tol_delta:
        # gradient branch: data through V must vanish
        rep.add("masked_data_rel_reference", eps_ref, tol_data)
        rep.add("solenoidal_fraction", delta, tol_delta)
    else:
        # contrapositive: a solenoidal part must show up in the data through V
        rep.notes.append("solenoidal part present; checking that data through V is visibly nonzero")
        rep.add("masked_data_rel_own", eps_own, _tol(tolerances, "control"), "lower")
    return rep


def stokes_loop(f: CovectorField, line: Line, h_shift: float, tolerances: dict | None = None,
                refine: bool = True, n_strip: int = 16) -> ExperimentReport:
    """Loop integral over the strip between ``line`` and its reversed shift against the enclosed curl.

    With ``nu`` the counterclockwise normal, the loop ``line + line_h`` with
    ``line_h = h_shift nu + reverse(line)`` bounds the strip counterclockwise,
    so ``X1 f(line) + X1 f(line_h)`` equals the strip integral of ``*df``.
    """
    grid = f.grid
    if h_shift < grid.h:
        raise ConfigError(f"strip width {h_shift} is below the grid spacing {grid.h}")
    t_cap = math.sqrt(2.0) * 1.05
    rep = ExperimentReport("stokes", {"N": grid.N, "angle": line.angle, "offset": line.offset, "h_shift": h_shift})
    curl = curl2d(f)

    def sides(hs):
        shifted = reverse(Line(line.angle, line.offset + hs))
        L = float(integrate_lines(f, [line.angle, shifted.angle], [line.offset, shifted.offset], t_cap).sum())
        du = hs / n_strip
        u = line.offset + (np.arange(n_strip) + 0.5) * du
        R = float(du * integrate_lines(curl, np.full(n_strip, line.angle), u, t_cap).sum())
        return L, R

    on_line = float(integrate_lines(curl, [line.angle], [line.offset], t_cap)[0])
    fmax = float(np.abs(f.components).max())

    def residual(hs, L, R):
        # a priori bound |L| <= |f|_inf * length of the loop
        return abs(L - R) / max(abs(L), abs(R), fmax * (4.0 * t_cap + 2.0 * hs), 1e-300)

    L, R = sides(h_shift)
    quotient_err = abs(R / h_shift - on_line)
    rep.values.update(L=L, R=R, quotient_error=quotient_err, curl_line_integral=on_line,
                      residual_vs_sides=abs(L - R) / max(abs(L), abs(R), 1e-300))
    rep.add("stokes_residual", residual(h_shift, L, R), _tol(tolerances, "stokes"))
    if refine and h_shift / 2 >= grid.h:
        L2, R2 = sides(h_shift / 2)
        err2 = abs(R2 / (h_shift / 2) - on_line)
        rep.values.update(quotient_error_half=err2)
        rep.add("stokes_residual_half", residual(h_shift / 2, L2, R2), _tol(tolerances, "stokes"))
        if _closed_on_region(f, None) > _tol(tolerances, "closed_on_V"):
            rep.add("limit_quotient_refinement", _ratio(quotient_err, err2), _tol(tolerances, "stokes_refinement"), "lower")
        else:
            rep.notes.append("closed field: the limit quotient sits at the quadrature floor")
    return rep


def decouple_sphere_bundle(sino: Sinogram) -> tuple[Sinogram, Sinogram]:
    """Split data of ``g + f`` on oriented lines into its even (scalar) and odd (one-form) parts."""
    lines = sino.grid
    if lines.n_angles % 2:
        raise ConfigError("line grid is not closed under reversal")
    rev = lines.reversed_values(sino.values)
    mask = None
    if sino.mask is not None:
        mask = sino.mask & lines.reversed_values(sino.mask)
    even = Sinogram(lines, 0.5 * (sino.values + rev), mask, "scalar")
    odd = Sinogram(lines, 0.5 * (sino.values - rev), mask, "oneform")
    return even, odd


def sphere_bundle_check(g: ScalarField, f: CovectorField, lines: LineGrid, tolerances: dict | None = None) -> ExperimentReport:
    rep = ExperimentReport("sphere_bundle", {"N": g.grid.N, "lines": lines.to_header()})
    x0 = xray_scalar(g, lines)
    x1 = xray_oneform(f, lines)
    combined = Sinogram(lines, x0.values + x1.values, None, "scalar")
    even, odd = decouple_sphere_bundle(combined)
    tol = _tol(tolerances, "parity")
    scale = np.abs(combined.values).max() or 1.0
    rep.add("even_error", np.abs(even.values - x0.values).max() / scale, tol)
    rep.add("odd_error", np.abs(odd.values - x1.values).max() / scale, tol)
    rep.add("reassembly_error", np.abs(even.values + odd.values - combined.values).max() / scale, tol)
    return rep


def solenoidal_from_data(sino: Sinogram, grid: Grid, pad: int = DEFAULT_PAD,
                         constants: InversionConstants | None = None, window: str | None = "hann") -> CovectorField:
    """Backproject one-form data onto the padded grid and apply the solenoidal inversion."""
    n1 = backproject_oneform(sino, grid.padded(pad))
    return recover_solenoidal(n1, constants, grid=grid, pad=pad, window=window)


def transverse_complement(f: CovectorField, lines: LineGrid, truth: dict | None = None, pad: int = DEFAULT_PAD,
                          constants: InversionConstants | None = None, tolerances: dict | None = None) -> ExperimentReport:
    """Recover both Helmholtz parts from ``X1`` and ``X_perp`` data.

    ``truth`` may hold the exact ``solenoidal`` and ``potential`` parts; when
    absent they come from the global decomposition of ``f``.
    """
    k = constants or InversionConstants()
    grid = f.grid
    rep = ExperimentReport("transverse", {"N": grid.N, "lines": lines.to_header(), "pad": pad, "c1": k.c1})
    if truth is None:
        dec = helmholtz_global(f, pad)
        truth = {"solenoidal": dec.f_s, "potential": dec.potential}
    B = MatrixField.rotation_b(grid)
    fs_rec = solenoidal_from_data(xray_oneform(f, lines), grid, pad, k)
    bfs_rec = solenoidal_from_data(xray_transverse(f, lines), grid, pad, k)
    # B^-1 = -B
    dphi_rec = -B.apply(bfs_rec)
    full = fs_rec + dphi_rec
    rep.values.update(solenoidal=fs_rec, potential=dphi_rec, full=full)
    m = grid.interior_mask()
    fnorm = _norm(f.components[:, m])
    tol_part = _tol(tolerances, "transverse_part")
    tol_null = _tol(tolerances, "transverse_null")
    for label, est, exact in (("solenoidal", fs_rec, truth["solenoidal"]), ("potential", dphi_rec, truth["potential"])):
        enorm = _norm(exact.components[:, m])
        if enorm > tol_null * fnorm:
            rep.add(f"{label}_rel_error", interior_rel_error(est, exact), tol_part)
        else:
            rep.add(f"{label}_null", _ratio(_norm(est.components[:, m]), fnorm), tol_null)
    rep.add("full_rel_error", interior_rel_error(full, f) if fnorm > 0 else 0.0, _tol(tolerances, "transverse_full"))
    return rep


def support_theorem_demo(f: CovectorField, A: MatrixField, C: Disk, lines: LineGrid,
                         control: CovectorField | None = None, tolerances: dict | None = None) -> ExperimentReport:
    """Data of ``A f`` on lines avoiding ``C`` and the curl of ``A f`` outside ``C``."""
    rep = ExperimentReport("support_theorem", {"N": f.grid.N, "lines": lines.to_header(), "C": C.to_json()})
    mask = partial_mask(lines, C, "avoiding")
    data = xray_matrix(A, f, lines).values
    sup_all = np.abs(data).max()
    rep.add("avoiding_data_rel", _ratio(np.abs(data[mask]).max() if mask.any() else 0.0, sup_all),
            _tol(tolerances, "support_data"))
    X, Y = f.grid.mesh()
    curl = np.abs(curl2d(A.apply(f)).values)
    outside = ~C.contains(X, Y)
    rep.add("exterior_curl_rel", _ratio(curl[outside].max(), curl.max()), _tol(tolerances, "support_exterior_curl"))
    rep.values.update(sinogram=data, mask=mask)
    if control is not None:
        sc = xray_matrix(A, control, lines).values
        rep.add("control_avoiding_rel", _ratio(np.abs(sc[mask]).max(), np.abs(sc).max()), _tol(tolerances, "control"), "lower")
    return rep


def varying_matrix(grid: Grid, strength: float = 0.3) -> MatrixField:
    """Smooth, everywhere invertible weight ``I + strength * M(x)`` used by the support demo."""
    X, Y = grid.mesh()
    e = np.empty((2, 2) + grid.shape)
    e[0, 0] = 1.0 + strength * np.sin(X)
    e[0, 1] = strength * Y
    e[1, 0] = -strength * X
    e[1, 1] = 1.0 + strength * np.cos(Y) * 0.5
    return MatrixField(grid, e)


def support_demo_fields(grid: Grid, A: MatrixField, C: Disk) -> tuple[CovectorField, CovectorField]:
    """Construct ``f`` with ``A f = d phi + curl psi_C`` (``psi_C`` inside ``C``) and a control.

    The control has ``A f = curl psi`` with ``psi`` supported outside ``C``.
    """
    margin = max(2.0 * grid.h, 0.05)
    r_in = C.radius - margin
    if r_in <= 3 * grid.h:
        raise ConfigError("region C is too small for an interior stream function")
    inner = Bump(C.center, max(r_in / 3.0, 3 * grid.h), 1.0, r_in)
    outer = _outside_bump(grid, C, margin)
    phi = Bump((0.0, 0.0), 0.25, 1.0, 0.85)
    target = PhantomSpec("mixed", bumps=[phi], curl_bumps=[inner])
    control = PhantomSpec("curl", curl_bumps=[outer])
    Ainv = A.inverse()
    return Ainv.apply(phantoms.make(target, grid)), Ainv.apply(phantoms.make(control, grid))


def _outside_bump(grid: Grid, C: Disk, margin: float) -> Bump:
    # place the bump on the far side of the origin from C
    cx, cy = C.center
    d = math.hypot(cx, cy)
    ux, uy = (-cx / d, -cy / d) if d > 0 else (1.0, 0.0)
    for rho in np.linspace(0.7, 0.1, 13):
        centre = (rho * ux, rho * uy)
        gap = math.hypot(centre[0] - cx, centre[1] - cy) - C.radius - margin
        radius = min(gap, SUPPORT_RADIUS - rho)
        if radius >= 9 * grid.h:
            return Bump(centre, radius / 3.0, 1.0, radius)
    raise ConfigError("no room for a control stream function outside C")


@dataclass
class ExperimentConfig:
    """Desk-scale defaults shared by the named experiments."""

    N: int = 128
    n_angles: int = 360
    n_offsets: int = 256
    s_max: float = math.sqrt(2.0)
    pad: int = DEFAULT_PAD
    seed: int = 0
    family_size: int = 5
    tolerances: dict = field(default_factory=dict)
    V: dict | None = None
    C: dict | None = None

    def __post_init__(self):
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown tolerance keys {sorted(unknown)}")
        if any(float(v) <= 0 for v in self.tolerances.values()):
            raise ConfigError("tolerances must be positive")
        Grid(self.N)
        LineGrid(self.n_angles, self.n_offsets, self.s_max)

    @property
    def grid(self) -> Grid:
        return Grid(self.N)

    @property
    def lines(self) -> LineGrid:
        return LineGrid(self.n_angles, self.n_offsets, self.s_max)

    def region(self, which: str, default: Region) -> Region:
        d = getattr(self, which)
        return default if d is None else region_from_json(d)

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _phantom(name: str, grid: Grid):
    return phantoms.make_with_parts(phantoms.default_spec(name), grid)


def _run_commutation(cfg: ExperimentConfig) -> ExperimentReport:
    grid = cfg.grid
    rep = ExperimentReport("commutation", cfg.to_json())
    rep.notes.append(SURROGATE_NOTE)
    for i, spec in enumerate(phantoms.random_family(cfg.seed, cfg.family_size, "curl", grid)):
        sub = check_commutation(phantoms.make(spec, grid), cfg.pad, cfg.tolerances)
        for m in sub.metrics:
            rep.add(f"phantom{i}_{m.label}", m.value, m.tol, m.bound)
    return rep


def _run_gauge(cfg: ExperimentConfig) -> ExperimentReport:
    grid = cfg.grid
    V = cfg.region("V", Disk((0.0, 0.0), 0.2))
    phi = _phantom("gradient", grid).parts["phi"]
    rep = check_gauge_partial(phi, V, cfg.lines, _phantom("curl", grid).field, cfg.tolerances)
    rep.config = cfg.to_json()
    return rep


def _run_partial_data(cfg: ExperimentConfig) -> ExperimentReport:
    grid = cfg.grid
    spec = phantoms.default_spec("closed_in_region")
    V = cfg.region("V", spec.region)
    rep = ExperimentReport("partial_data", cfg.to_json())
    rep.notes.append(SURROGATE_NOTE)
    for tag, f in (("gradient", _phantom("gradient", grid).field), ("closed_in_region", phantoms.make(spec, grid))):
        sub = partial_data_uniqueness(f, V, cfg.lines, cfg.pad, cfg.tolerances)
        for m in sub.metrics:
            rep.add(f"{tag}_{m.label}", m.value, m.tol, m.bound)
    return rep


def _run_stokes(cfg: ExperimentConfig) -> ExperimentReport:
    grid = cfg.grid
    rep = stokes_loop(_phantom("curl", grid).field, Line(0.3, 0.1), 4 * grid.h, cfg.tolerances)
    rep.config.update(cfg.to_json())
    return rep


def _run_sphere_bundle(cfg: ExperimentConfig) -> ExperimentReport:
    g, f = _phantom("sphere_bundle_pair", cfg.grid).field
    rep = sphere_bundle_check(g, f, cfg.lines, cfg.tolerances)
    rep.config = cfg.to_json()
    return rep


def _run_transverse(cfg: ExperimentConfig) -> ExperimentReport:
    ph = _phantom("mixed", cfg.grid)
    rep = transverse_complement(ph.field, cfg.lines, ph.parts, cfg.pad, tolerances=cfg.tolerances)
    rep.config = cfg.to_json()
    return rep


def _run_support(cfg: ExperimentConfig) -> ExperimentReport:
    grid = cfg.grid
    C = cfg.region("C", Disk((0.25, 0.1), 0.35, "C"))
    if not isinstance(C, Disk):
        raise ConfigError("the support demo needs a disk C")
    A = varying_matrix(grid)
    f, control = support_demo_fields(grid, A, C)
    rep = support_theorem_demo(f, A, C, cfg.lines, control, cfg.tolerances)
    rep.config = cfg.to_json()
    return rep


EXPERIMENTS = {
    "commutation": _run_commutation,
    "gauge": _run_gauge,
    "partial_data": _run_partial_data,
    "stokes": _run_stokes,
    "sphere_bundle": _run_sphere_bundle,
    "transverse": _run_transverse,
    "support": _run_support,
}


def run_named(name: str, config: ExperimentConfig | None = None) -> ExperimentReport:
    """Run one of ``EXPERIMENTS`` with the given (or default) configuration."""
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    return EXPERIMENTS[name](config or ExperimentConfig())
