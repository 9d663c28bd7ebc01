import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smcf.errors import GridError, NonFinite
from smcf.grid import Field, Grid, Interpolant, bump, bump_derivative, dealias, lp_project, read_snapshot, write_snapshot

TWO_PI = 2 * math.pi


@pytest.fixture
def g2():
    return Grid((32, 16), (TWO_PI, 4.0))


@pytest.mark.parametrize("sizes", [(12,), (2,), (8, 6), (4, 4, 4)])
def test_bad_sizes(sizes):
    with pytest.raises(GridError):
        Grid(sizes, (1.0,) * len(sizes))


def test_bad_length():
    with pytest.raises(GridError):
        Grid((8,), (0.0,))
    with pytest.raises(GridError):
        Grid((8,), (math.inf,))


def test_derivatives_of_trig_polynomial(g2):
    X = g2.mesh
    kx, ky = 3.0, TWO_PI * 2 / 4.0
    f = np.sin(kx * X[..., 0]) * np.cos(ky * X[..., 1])
    fx = kx * np.cos(kx * X[..., 0]) * np.cos(ky * X[..., 1])
    fy = -ky * np.sin(kx * X[..., 0]) * np.sin(ky * X[..., 1])
    G = g2.grad(f)
    assert G.shape == g2.shape + (2,)
    np.testing.assert_allclose(G[..., 0], fx, atol=1e-12)
    np.testing.assert_allclose(G[..., 1], fy, atol=1e-12)
    np.testing.assert_allclose(g2.diff(f, 0, 2), -(kx**2) * f, atol=1e-11)
    H = g2.hessian(f)
    np.testing.assert_allclose(H[..., 0, 1], H[..., 1, 0])
    np.testing.assert_allclose(H[..., 0, 1], g2.diff(g2.diff(f, 1), 0), atol=1e-11)
    np.testing.assert_allclose(g2.laplacian(f), -(kx**2 + ky**2) * f, atol=1e-10)


def test_grad_hessian_matches_separate_calls(g2):
    rng = np.random.default_rng(1)
    a = rng.normal(size=g2.shape + (3,))
    gr, he = g2.grad_hessian(a)
    np.testing.assert_allclose(gr, g2.grad(a), atol=1e-12)
    np.testing.assert_allclose(he, g2.hessian(a), atol=1e-12)


def test_nyquist_mode_has_zero_odd_derivative():
    g = Grid((8,), (TWO_PI,))
    f = np.cos(4 * g.mesh[..., 0])
    np.testing.assert_allclose(g.diff(f, 0), 0, atol=1e-14)
    np.testing.assert_allclose(g.diff(f, 0, 2), -16 * f, atol=1e-12)


def test_poisson_roundtrip(g2):
    rng = np.random.default_rng(2)
    f = rng.normal(size=g2.shape)
    u = g2.solve_poisson(f)
    np.testing.assert_allclose(g2.laplacian(u), f - f.mean(), atol=1e-10)
    assert abs(u.mean()) < 1e-13


def test_shift_translates_trig_polynomial():
    g = Grid((16,), (TWO_PI,))
    x = g.mesh[..., 0]
    np.testing.assert_allclose(g.shift(np.sin(2 * x), 0, 0.3), np.sin(2 * (x + 0.3)), atol=1e-13)


def test_bump_profile():
    r = np.linspace(0, 3, 301)
    b = bump(r)
    assert np.all(b[r <= 1] == 1) and np.all(b[r >= 2] == 0)
    assert np.all(np.diff(b) <= 1e-15)
    mid = (r[1:] + r[:-1]) / 2
    np.testing.assert_allclose(np.diff(b) / np.diff(r), bump_derivative(mid), atol=2e-3)


def test_lp_pieces_sum_to_identity(g2):
    rng = np.random.default_rng(3)
    a = rng.normal(size=g2.shape)
    np.testing.assert_allclose(g2.lp(a, 2.0) + g2.lp(a, 2.0, "above"), a, atol=1e-13)
    np.testing.assert_allclose(g2.lp(a, g2.lp_cover()), a, atol=1e-13)
    # dyadic bands telescope
    bands = sum(g2.lp(a, h, "band") for h in range(1, 5))
    np.testing.assert_allclose(bands, g2.lp(a, 4.0) - g2.lp(a, 0.0), atol=1e-12)


def test_density_integrates_to_increment(g2):
    rng = np.random.default_rng(4)
    a = rng.normal(size=g2.shape)
    hs = np.linspace(1.0, 3.0, 801)
    acc = np.trapezoid([g2.lp(a, h, "density") for h in hs], hs, axis=0)
    np.testing.assert_allclose(acc, g2.lp(a, 3.0) - g2.lp(a, 1.0), atol=1e-5)


def test_unknown_projector(g2):
    with pytest.raises(GridError):
        g2.lp(np.zeros(g2.shape), 1.0, "sideways")


def test_dealias_keeps_low_modes():
    g = Grid((12 * 2 + 8,), (TWO_PI,))
    x = g.mesh[..., 0]
    low, high = np.cos(10 * x), np.cos(11 * x)
    np.testing.assert_allclose(g.dealias(low + high), low, atol=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([(8,), (16, 8), (4, 32)]))
def test_parseval(seed, sizes):
    g = Grid(sizes, tuple(1.0 + i for i in range(len(sizes))))
    a = np.random.default_rng(seed).normal(size=g.shape + (2,))
    assert math.isclose(g.spectral_l2_norm(a), g.l2_norm(a), rel_tol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-2.0, 6.0))
def test_projector_is_contraction_and_linear(seed, h):
    g = Grid((16, 16), (TWO_PI, TWO_PI))
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(2,) + g.shape)
    assert g.l2_norm(g.lp(a, h)) <= g.l2_norm(a) * (1 + 1e-12)
    np.testing.assert_allclose(g.lp(2 * a - b, h), 2 * g.lp(a, h) - g.lp(b, h), atol=1e-12)


def test_field_wrappers(g2):
    X = g2.mesh
    f = Field(g2, np.sin(X[..., 0]))
    assert f.components == 1
    assert not f.values.flags.writeable
    np.testing.assert_allclose(lp_project(f, 10).values, f.values, atol=1e-13)
    np.testing.assert_allclose(dealias(f).values, f.values, atol=1e-13)
    with pytest.raises(NonFinite):
        Field(g2, np.full(g2.shape, np.nan))
    with pytest.raises(GridError):
        Field(g2, np.zeros((3, 3)))


def test_interpolant_exact_on_trig_polynomials(g2):
    X = g2.mesh
    ky = TWO_PI / 4.0
    vals = np.stack([np.sin(X[..., 0] + 2 * ky * X[..., 1]), np.cos(2 * X[..., 0])], -1)
    lin = np.array([[1.0, 0.0], [0.5, 2.0]])
    ip = Interpolant(g2, vals, lin)
    p = np.array([[0.123, 3.1], [5.7, 0.01]])
    v, gr = ip(p, order=1)
    x, y = p[:, 0], p[:, 1]
    exp = np.stack([np.sin(x + 2 * ky * y), np.cos(2 * x)], -1) + p @ lin.T
    np.testing.assert_allclose(v, exp, atol=1e-12)
    np.testing.assert_allclose(gr[:, 0, 1], -2 * np.sin(2 * x) + lin[1, 0], atol=1e-12)
    np.testing.assert_allclose(gr[:, 1, 0], 2 * ky * np.cos(x + 2 * ky * y) + lin[0, 1], atol=1e-12)


def test_interpolant_1d_hessian():
    g = Grid((16,), (TWO_PI,))
    ip = Interpolant(g, np.sin(3 * g.mesh[..., 0]))
    v, d1, d2 = ip([[0.4]], order=2)
    assert math.isclose(d2[0, 0, 0, 0], -9 * math.sin(1.2), abs_tol=1e-12)


def test_snapshot_roundtrip(tmp_path, g2):
    rng = np.random.default_rng(5)
    v = rng.normal(size=g2.shape + (4,))
    p = tmp_path / "s.smcf"
    write_snapshot(p, g2, v, 0.1 + 0.2, {"lin": [1.0, 0.5], "tag": "x"})
    g, w, t, kv = read_snapshot(p)
    assert g == g2 and t == 0.1 + 0.2
    np.testing.assert_array_equal(w, v)
    assert kv == {"lin": "1.0,0.5", "tag": "x"}
    assert p.read_bytes().startswith(b"SMCF1 d=2 N=32,16 ")


def test_snapshot_rejects_garbage(tmp_path):
    p = tmp_path / "bad"
    p.write_bytes(b"NOPE\n")
    with pytest.raises(GridError):
        read_snapshot(p)
