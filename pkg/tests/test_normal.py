import math

import numpy as np
import pytest
from scipy import integrate

from vtomo.errors import ConfigError
from vtomo.fields import CovectorField, Grid, MatrixField, ScalarField
from vtomo.geometry import LineGrid
from vtomo.normal import (
    UNIT_CELL_INV_R,
    UNIT_CELL_LOG_R,
    InversionConstants,
    calibrate_c1,
    calibration_report,
    half_laplacian,
    interior_rel_error,
    invert_scalar,
    normal_matrix,
    normal_oneform,
    normal_oneform_composition,
    normal_scalar,
    normal_scalar_composition,
    recover_solenoidal,
    riesz_kernels,
    sphere_area,
)
from vtomo.projector import backproject_oneform, xray_oneform


def test_singular_cell_integrals_against_quadrature():
    inv_r, _ = integrate.dblquad(lambda y, x: 1 / math.hypot(x, y), 0, 0.5, 0, 0.5, epsabs=1e-12)
    log_r, _ = integrate.dblquad(lambda y, x: math.log(math.hypot(x, y)), 0, 0.5, 0, 0.5, epsabs=1e-12)
    assert 4 * inv_r == pytest.approx(UNIT_CELL_INV_R, rel=1e-9)
    assert UNIT_CELL_INV_R == pytest.approx(3.52549, abs=1e-5)
    assert 4 * log_r == pytest.approx(UNIT_CELL_LOG_R, rel=1e-9)


def test_constants():
    k = InversionConstants()
    assert sphere_area(1) == pytest.approx(2 * math.pi)
    assert sphere_area(2) == pytest.approx(4 * math.pi)
    assert k.c0 == pytest.approx(1 / (4 * math.pi), rel=1e-15)
    assert k.c1 == k.c1_derived == pytest.approx(1 / (4 * math.pi))
    assert InversionConstants(active="paper").c1 == pytest.approx(4 * math.pi)
    with pytest.raises(ConfigError):
        InversionConstants(active="guess")


def test_kernel_table_invariants():
    k = riesz_kernels(Grid(32), 4)
    assert np.array_equal(k.tensor[0, 1], k.tensor[1, 0])
    assert np.allclose(k.tensor[0, 0] + k.tensor[1, 1], k.scalar, rtol=1e-14, atol=0)
    assert (k.scalar > 0).all()
    assert k.scalar[0, 0] * Grid(32).h == pytest.approx(2 * 4 * math.log(1 + math.sqrt(2)))


def test_tensor_kernel_fourier_symbol():
    # sampled transform vs (4 pi/|xi|)(delta - xi xi/|xi|^2) in a mid band, off the axes
    g = Grid(64)
    k = riesz_kernels(g, 4)
    h = g.h
    k1 = 2 * np.pi * np.fft.fftfreq(k.M, d=h)
    k2 = 2 * np.pi * np.fft.rfftfreq(k.M, d=h)
    K1, K2 = np.meshgrid(k1, k2, indexing="ij")
    X = np.hypot(K1, K2)
    band = (X >= 4) & (X < 32) & (np.abs(K1) > 2) & (np.abs(K2) > 2)
    sym = 4 * np.pi / X[band]
    S = h * h * k.scalar_hat.real[band]
    T = h * h * k.tensor_hat.real[:, :, band]
    KK = np.stack([np.stack([K1 * K1, K1 * K2]), np.stack([K2 * K1, K2 * K2])])[:, :, band] / X[band] ** 2
    assert np.abs(S / sym - 1).max() < 0.06
    for i in range(2):
        for j in range(2):
            exact = sym * ((i == j) - KK[i, j])
            assert (np.abs(T[i, j] - exact) / sym).max() < 0.05


def _disk(grid, r=0.5):
    X, Y = grid.mesh()
    return (X**2 + Y**2 < r**2).astype(float)


def test_scalar_point_value(grid):
    out = normal_scalar(ScalarField(grid, _disk(grid)))
    c = grid.N // 2
    assert out.values[c - 1:c + 1, c - 1:c + 1].mean() == pytest.approx(2 * math.pi, rel=0.02)


def test_oneform_point_value(grid):
    d = _disk(grid)
    out = normal_oneform(CovectorField(grid, np.stack([d, np.zeros_like(d)])))
    c = grid.N // 2
    v1 = out.f1[c - 1:c + 1, c - 1:c + 1].mean()
    v2 = out.f2[c - 1:c + 1, c - 1:c + 1].mean()
    assert v1 == pytest.approx(math.pi, rel=0.02)
    assert abs(v2) <= 1e-3 * abs(v1)


def test_zero_input(small_grid):
    assert np.all(normal_scalar(ScalarField.zeros(small_grid)).values == 0)
    assert np.all(normal_oneform(CovectorField.zeros(small_grid)).components == 0)


def test_kernel_vs_composition(named, lines):
    g = named("gaussian_scalar").field
    a, b = normal_scalar(g), normal_scalar_composition(g, lines)
    assert np.linalg.norm((a - b).values) / np.linalg.norm(a.values) <= 0.03
    f = named("curl").field
    a, b = normal_oneform(f), normal_oneform_composition(f, lines)
    assert np.linalg.norm((a - b).components) / np.linalg.norm(a.components) <= 0.03


def test_normal_matrix_cases(named):
    f = named("mixed").field
    grid = f.grid
    n1 = normal_oneform(f)
    assert np.array_equal(normal_matrix(MatrixField.identity(grid), f).components, n1.components)
    assert np.allclose(normal_matrix(MatrixField.constant_matrix(grid, 2 * np.eye(2)), f).components, 4 * n1.components)
    B = MatrixField.rotation_b(grid)
    explicit = B.transpose().apply(normal_oneform(B.apply(f)))
    assert np.array_equal(normal_matrix(B, f).components, explicit.components)


def test_trace_contraction(named):
    g = named("gaussian_scalar").field
    z = np.zeros_like(g.values)
    e1 = normal_oneform(CovectorField(g.grid, np.stack([g.values, z]))).f1
    e2 = normal_oneform(CovectorField(g.grid, np.stack([z, g.values]))).f2
    n0 = normal_scalar(g).values
    assert np.allclose(e1 + e2, n0, rtol=0, atol=1e-12 * np.abs(n0).max())


def test_translation_equivariance():
    from vtomo import phantoms

    grid = Grid(64)
    shift = 3
    spec = phantoms.PhantomSpec("curl", curl_bumps=[phantoms.Bump((0.0, 0.0), 0.2, 1.0, 0.6)])
    moved = phantoms.PhantomSpec("curl", curl_bumps=[phantoms.Bump((shift * grid.h, 0.0), 0.2, 1.0, 0.6)])
    a = normal_oneform(phantoms.make(spec, grid)).components
    b = normal_oneform(phantoms.make(moved, grid)).components
    win = slice(16, 44)
    assert np.allclose(b[:, win.start + shift:win.stop + shift, win], a[:, win, win], rtol=0, atol=1e-10 * np.abs(a).max())


def test_half_laplacian_plane_wave():
    g = Grid(64)
    X, Y = g.mesh()
    period = g.hi - g.lo
    kv = 2 * np.pi / period * np.array([3, -2])
    wave = ScalarField(g, np.sin(kv[0] * X + kv[1] * Y))
    out = half_laplacian(wave, periodic=True)
    assert np.allclose(out.values, np.linalg.norm(kv) * wave.values, rtol=0, atol=1e-10)


def test_half_laplacian_twice_is_minus_laplacian(rng):
    g = Grid(32)
    v = rng.normal(size=g.shape)
    f = ScalarField(g, v - v.mean())
    twice = half_laplacian(half_laplacian(f, periodic=True), periodic=True).values
    kx = 2 * np.pi * np.fft.fftfreq(g.N, d=g.h)
    lap = np.real(np.fft.ifft2(np.fft.fft2(f.values) * (kx[:, None] ** 2 + kx[None, :] ** 2)))
    assert np.linalg.norm(twice - lap) <= 1e-8 * np.linalg.norm(lap)


def test_half_laplacian_constant():
    g = Grid(16)
    assert np.allclose(half_laplacian(ScalarField(g, np.full(g.shape, 3.0)), periodic=True).values, 0, atol=1e-12)


def test_invert_scalar(named):
    g = named("gaussian_scalar").field
    est = invert_scalar(normal_scalar(g, keep_padded=True), grid=g.grid)
    assert interior_rel_error(est, g) <= 0.10


def test_invert_scalar_zero_and_linearity(named, rng):
    g = named("gaussian_scalar").field
    grid = g.grid
    z = invert_scalar(normal_scalar(ScalarField.zeros(grid), keep_padded=True), grid=grid)
    assert np.all(z.values == 0)
    h = ScalarField(grid, g.values[::-1, :])
    a, b = 0.3, -2.0
    lhs = invert_scalar(normal_scalar(a * g + b * h, keep_padded=True), grid=grid).values
    rhs = (a * invert_scalar(normal_scalar(g, keep_padded=True), grid=grid)
           + b * invert_scalar(normal_scalar(h, keep_padded=True), grid=grid)).values
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-12 * np.abs(rhs).max())


def test_recover_solenoidal_cases(named):
    f = named("curl").field
    est = recover_solenoidal(normal_oneform(f, keep_padded=True), grid=f.grid)
    assert interior_rel_error(est, f) <= 0.10
    d = named("gradient").field
    m = d.grid.interior_mask()
    est = recover_solenoidal(normal_oneform(d, keep_padded=True), grid=d.grid)
    assert np.linalg.norm(est.components[:, m]) <= 1e-2 * np.linalg.norm(d.components[:, m])
    ph = named("mixed")
    est = recover_solenoidal(normal_oneform(ph.field, keep_padded=True), grid=ph.field.grid)
    assert interior_rel_error(est, ph.parts["solenoidal"]) <= 0.10


def test_recover_from_data_with_window(named, lines):
    f = named("curl").field
    n1 = backproject_oneform(xray_oneform(f, lines), f.grid.padded(4))
    bare = interior_rel_error(recover_solenoidal(n1, grid=f.grid), f)
    hann = interior_rel_error(recover_solenoidal(n1, grid=f.grid, window="hann"), f)
    assert hann <= 0.03 < bare
    with pytest.raises(ConfigError):
        recover_solenoidal(n1, grid=f.grid, window="kaiser")


def test_zero_pad_path_is_worse(named):
    g = named("gaussian_scalar").field
    padded = interior_rel_error(invert_scalar(normal_scalar(g, keep_padded=True), grid=g.grid), g)
    cropped = interior_rel_error(invert_scalar(normal_scalar(g)), g)
    assert padded < cropped


def test_calibrate_c1(named):
    f = named("curl").field
    c = calibrate_c1(f)
    assert c == pytest.approx(1 / (4 * math.pi), rel=0.10)
    assert calibrate_c1(5.0 * f) == pytest.approx(c, rel=1e-6)
    # the printed value is off by roughly (4 pi)^2
    assert InversionConstants(active="paper").c1 / c == pytest.approx((4 * math.pi) ** 2, rel=0.10)
    with pytest.raises(ConfigError):
        calibrate_c1(CovectorField.zeros(f.grid))


def test_calibration_report(named):
    rep = calibration_report(named("curl").field)
    assert rep["rel_error_vs_derived"] <= 0.10
    assert rep["c1_published"] == pytest.approx(4 * math.pi)
    assert rep["published_over_calibrated"] > 100
