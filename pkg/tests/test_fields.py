import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vtomo.errors import ConfigError
from vtomo.fields import (
    CovectorField,
    Grid,
    MatrixField,
    ScalarField,
    curl2d,
    divergence,
    gradient,
    laplacian,
    mollifier_kernel,
    mollify,
    support_margin,
    warn_support,
)


def test_grid_geometry():
    g = Grid(64)
    assert g.h == pytest.approx(2 / 64)
    assert g.coords[0] == pytest.approx(-1 + g.h / 2)
    assert g.coords[-1] == pytest.approx(1 - g.h / 2)
    X, Y = g.mesh()
    assert X[3, 5] == g.coords[3] and Y[3, 5] == g.coords[5]


@pytest.mark.parametrize("kw", [dict(N=4), dict(N=16, lo=1.0, hi=1.0), dict(N=16, n=3)])
def test_grid_rejects_bad_input(kw):
    with pytest.raises(ConfigError):
        Grid(**kw)


def test_padded_grid_keeps_cells_aligned():
    g = Grid(32)
    p = g.padded(4)
    assert p.N == 128 and p.h == pytest.approx(g.h)
    sl = p.crop_slice(g)
    assert np.allclose(p.coords[sl[0]], g.coords)


def test_interior_mask_fraction():
    g = Grid(100)
    m = g.interior_mask(0.6)
    assert m.sum() == 60 * 60


def test_fields_reject_nan_and_bad_shape():
    g = Grid(16)
    with pytest.raises(ConfigError):
        ScalarField(g, np.full(g.shape, np.nan))
    with pytest.raises(ConfigError):
        CovectorField(g, np.zeros((3,) + g.shape))


def test_field_arithmetic():
    g = Grid(16)
    a = CovectorField(g, np.ones((2,) + g.shape))
    b = 2.0 * a - a
    assert np.array_equal((b + a).components, 2 * np.ones((2,) + g.shape))
    assert np.array_equal((-a).components, -a.components)


def test_gradient_of_zero_and_linear():
    g = Grid(32)
    X, Y = g.mesh()
    assert np.all(gradient(ScalarField.zeros(g)).components == 0)
    d = gradient(ScalarField(g, X))
    assert np.allclose(d.f1, 1.0) and np.allclose(d.f2, 0.0)


def test_gradient_gaussian_second_order():
    errs = []
    for N in (64, 128):
        g = Grid(N)
        X, Y = g.mesh()
        s2 = 0.09
        phi = np.exp(-(X**2 + Y**2) / s2)
        d = gradient(ScalarField(g, phi))
        m = g.interior_mask()
        errs.append(np.abs(d.f1 - (-2 * X / s2) * phi)[m].max())
    assert errs[0] / errs[1] > 3.5


def test_divergence_and_curl_of_linear_fields():
    g = Grid(32)
    X, Y = g.mesh()
    m = g.interior_mask(0.9)
    assert np.allclose(divergence(CovectorField.from_components(g, X, Y)).values[m], 2.0)
    assert np.allclose(curl2d(CovectorField.from_components(g, -Y, X)).values[m], 2.0)
    assert np.allclose(divergence(CovectorField.from_components(g, np.ones_like(X), 2 * np.ones_like(X))).values, 0.0)


def _bandlimited(g, rng, K=4):
    X, Y = g.mesh()
    phi = np.zeros_like(X)
    for _ in range(6):
        k = rng.uniform(-K, K, 2)
        phi += rng.normal() * np.sin(k[0] * X + k[1] * Y + rng.uniform(0, 2 * np.pi))
    return ScalarField(g, phi * np.exp(-4 * (X**2 + Y**2)))


def test_curl_of_gradient_vanishes(rng):
    state = rng.bit_generator.state
    errs = []
    for N in (64, 128):
        rng.bit_generator.state = state
        g = Grid(N)
        phi = _bandlimited(g, rng)
        m = g.interior_mask(0.9)
        errs.append(np.abs(curl2d(gradient(phi)).values[m]).max())
    # central differences commute exactly in the interior
    assert max(errs) < 1e-9


def test_div_curl_is_zero(rng):
    state = rng.bit_generator.state
    errs = []
    for N in (64, 128):
        rng.bit_generator.state = state
        g = Grid(N)
        psi = _bandlimited(g, rng)
        d = gradient(psi)
        curl = CovectorField.from_components(g, d.f2, -d.f1)
        errs.append(np.abs(divergence(curl).values[g.interior_mask(0.9)]).max())
    assert max(errs) < 1e-9


def test_curl_of_analytic_curl_matches_minus_laplacian(named, grid):
    ph = named("curl")
    m = grid.interior_mask()
    err = np.abs(curl2d(ph.field).values - ph.parts["curl_of_field"].values)[m].max()
    assert err < 1e-2 * np.abs(ph.parts["curl_of_field"].values).max()


def test_curl_rejects_non_planar():
    g = Grid(16)
    f = CovectorField.zeros(g)
    object.__setattr__(g, "n", 3)
    with pytest.raises(ConfigError):
        curl2d(f)


def test_laplacian_quadratic():
    g = Grid(32)
    X, Y = g.mesh()
    assert np.allclose(laplacian(ScalarField(g, X**2 + Y**2)).values[g.interior_mask(0.8)], 4.0)


def test_matrix_field_validation_and_inverse(rng):
    g = Grid(16)
    with pytest.raises(ConfigError):
        MatrixField.constant_matrix(g, [[1.0, 2.0], [2.0, 4.0]])
    e = rng.normal(size=(2, 2) + g.shape) + 3 * np.eye(2)[:, :, None, None]
    A = MatrixField(g, e)
    f = CovectorField(g, rng.normal(size=(2,) + g.shape))
    assert np.allclose(A.inverse().apply(A.apply(f)).components, f.components)
    assert np.array_equal(A.transpose().entries[0, 1], A.entries[1, 0])


def test_rotation_b():
    g = Grid(16)
    f = CovectorField.from_components(g, np.ones(g.shape), 2 * np.ones(g.shape))
    Bf = MatrixField.rotation_b(g).apply(f)
    assert np.allclose(Bf.f1, 2.0) and np.allclose(Bf.f2, -1.0)


def test_mollify_zero_and_mass():
    g = Grid(128)
    X, Y = g.mesh()
    assert np.all(mollify(ScalarField.zeros(g), 0.1).values == 0)
    disk = ScalarField(g, (X**2 + Y**2 < 0.25).astype(float))
    out = mollify(disk, 0.1)
    assert out.values.sum() == pytest.approx(disk.values.sum(), rel=1e-6)


def test_mollify_spike_reproduces_kernel():
    g = Grid(64)
    eps = 0.2
    spike = np.zeros(g.shape)
    spike[32, 32] = 1.0
    out = mollify(ScalarField(g, spike), eps).values
    # direct evaluation of the bump at the grid offsets, normalised independently
    off = (np.arange(g.N) - 32) * g.h
    r2 = (off[:, None] ** 2 + off[None, :] ** 2) / eps**2
    direct = np.where(r2 < 1, np.exp(-1 / np.where(r2 < 1, 1 - r2, 1.0)), 0.0)
    direct /= direct.sum()
    assert np.allclose(out, direct, rtol=0, atol=1e-14)


def test_mollifier_kernel_unit_sum():
    assert mollifier_kernel(0.1, 0.01).sum() == pytest.approx(1.0)


def test_mollify_rejects_small_radius():
    g = Grid(32)
    with pytest.raises(ConfigError):
        mollify(ScalarField.zeros(g), g.h)


def test_mollify_commutes_with_gradient(rng):
    errs = []
    for N in (64, 128):
        g = Grid(N)
        X, Y = g.mesh()
        phi = ScalarField(g, np.exp(-(X**2 + Y**2) / 0.1))
        a = gradient(mollify(phi, 0.15)).components
        b = mollify(gradient(phi), 0.15).components
        m = g.interior_mask()
        errs.append(np.abs(a - b)[:, m].max())
    assert errs[1] < 1e-10 or errs[0] / errs[1] > 3.5


def test_support_margin_and_warning():
    g = Grid(32)
    f = ScalarField(g, np.ones(g.shape))
    assert support_margin(f) > 0.3
    with pytest.warns(RuntimeWarning):
        warn_support(f)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), c=st.floats(-3, 3))
def test_gradient_exact_on_affine(a, b, c):
    g = Grid(16)
    X, Y = g.mesh()
    d = gradient(ScalarField(g, a * X + b * Y + c))
    assert np.allclose(d.f1, a, atol=1e-10) and np.allclose(d.f2, b, atol=1e-10)
