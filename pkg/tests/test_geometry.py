import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smcf.errors import FrameMismatch, NotNormal, RankDeficient
from smcf.frame import connection, frame_from_normals
from smcf.generators import circle, clifford, graph_bump, graph_random
from smcf.geometry import (
    Immersion,
    codazzi_residual,
    complex_shape,
    compute_geometry,
    covariant_derivative,
    curvature_tensors,
    gauss_residual,
    intrinsic_riemann,
    j_rotate,
    laplace_beltrami,
    ricci_equation_residual,
    tensor_norm_sq,
    volume,
)
from smcf.grid import Grid

TWO_PI = 2 * math.pi


def g1(n=32):
    return Grid((n,), (TWO_PI,))


def g2(n=32):
    return Grid((n, n), (TWO_PI, TWO_PI))


@pytest.mark.parametrize("r", [0.5, 1.0, 3.0])
def test_circle_closed_forms(r):
    im, fr = circle(g1(), r)
    geo = compute_geometry(im)
    x = im.grid.mesh[..., 0]
    np.testing.assert_allclose(geo.g[..., 0, 0], r * r, rtol=1e-13)
    np.testing.assert_allclose(geo.gamma, 0, atol=1e-13)
    sh = complex_shape(geo, fr)
    np.testing.assert_allclose(sh.lam[..., 0, 0], r, rtol=1e-13)
    np.testing.assert_allclose(sh.psi, 1 / r, rtol=1e-13)
    H = -np.stack([np.cos(x), np.sin(x), 0 * x], -1) / r
    np.testing.assert_allclose(geo.H, H, atol=1e-13)
    assert math.isclose(volume(geo), TWO_PI * r, rel_tol=1e-13)
    np.testing.assert_allclose(laplace_beltrami(np.cos(x), geo), -np.cos(x) / r**2, atol=1e-12)


def test_clifford_closed_forms():
    im, fr = clifford(g2(), 1.0, 2.0)
    geo = compute_geometry(im)
    np.testing.assert_allclose(geo.g[..., 0, 0], 1.0, rtol=1e-13)
    np.testing.assert_allclose(geo.g[..., 1, 1], 4.0, rtol=1e-13)
    np.testing.assert_allclose(geo.g[..., 0, 1], 0.0, atol=1e-13)
    sh = complex_shape(geo, fr)
    np.testing.assert_allclose(sh.lam[..., 0, 0], 1.0, atol=1e-13)
    np.testing.assert_allclose(sh.lam[..., 1, 1], 2.0j, atol=1e-13)
    np.testing.assert_allclose(sh.lam[..., 0, 1], 0.0, atol=1e-13)
    np.testing.assert_allclose(sh.psi, 1 + 0.5j, atol=1e-13)
    np.testing.assert_allclose(tensor_norm_sq(sh.lam, geo.g_inv, 2), 1.25, rtol=1e-13)
    assert math.isclose(volume(geo), 2 * TWO_PI**2, rel_tol=1e-13)
    # flat torus: both curvature forms vanish identically
    R, Ric = curvature_tensors(sh, geo)
    np.testing.assert_allclose(R, 0, atol=1e-13)
    np.testing.assert_allclose(intrinsic_riemann(geo), 0, atol=1e-13)


def test_flat_immersion():
    g = g2(8)
    lin = np.zeros((4, 2))
    lin[0, 0] = lin[1, 1] = 1
    im = Immersion(g, np.zeros(g.shape + (4,)), lin)
    geo = compute_geometry(im)
    np.testing.assert_allclose(geo.g, np.broadcast_to(np.eye(2), g.shape + (2, 2)))
    np.testing.assert_allclose(geo.Lambda, 0)
    np.testing.assert_allclose(im.values[..., :2], g.mesh)


def test_rank_deficient():
    g = g2(8)
    with pytest.raises(RankDeficient):
        compute_geometry(Immersion(g, np.zeros(g.shape + (4,))))


def test_shape_checks():
    g = g2(8)
    with pytest.raises(ValueError):
        Immersion(g, np.zeros(g.shape + (3,)))
    with pytest.raises(ValueError):
        Immersion(g, np.zeros(g.shape + (4,)), np.zeros((4, 3)))
    im, fr = graph_bump(g)
    other, ofr = graph_bump(g2(16))
    with pytest.raises(FrameMismatch):
        complex_shape(compute_geometry(im), ofr)


@pytest.mark.parametrize("make", [lambda g: graph_bump(g), lambda g: graph_random(g, seed=2, kmax=3)])
def test_structure_equations_hold_on_graphs(make):
    im, fr = make(g2(64))
    geo = compute_geometry(im)
    sh = complex_shape(geo, fr)
    assert gauss_residual(sh, geo) < 1e-8
    assert codazzi_residual(sh, geo, fr.A) < 1e-8
    assert ricci_equation_residual(sh, geo, fr.A) < 1e-8


def test_second_fundamental_form_is_normal():
    im, fr = graph_bump(g2())
    geo = compute_geometry(im)
    tang = np.einsum("...abn,...cn->...abc", geo.Lambda, geo.dF)
    np.testing.assert_allclose(tang, 0, atol=1e-13)
    np.testing.assert_allclose(
        np.real(complex_shape(geo, fr).lam),
        np.einsum("...abn,...n->...ab", geo.Lambda, fr.nu1),
        atol=1e-13,
    )


def test_metric_compatibility():
    im, _ = graph_bump(g2())
    geo = compute_geometry(im)
    np.testing.assert_allclose(covariant_derivative(geo.g, geo), 0, atol=1e-11)


def test_j_rotate():
    im, fr = graph_bump(g2(16))
    np.testing.assert_allclose(j_rotate(fr.nu1, fr), fr.nu2, atol=1e-15)
    np.testing.assert_allclose(j_rotate(j_rotate(fr.nu2, fr), fr), -fr.nu2, atol=1e-15)
    with pytest.raises(NotNormal):
        j_rotate(compute_geometry(im).dF[..., 0, :], fr)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.25, 4.0), st.floats(0.0, TWO_PI))
def test_scaling_and_rotation_covariance(mu, theta):
    im, fr = graph_bump(g2(16))
    geo = compute_geometry(im)
    sh = complex_shape(geo, fr)
    c, s = math.cos(theta), math.sin(theta)
    Q = np.eye(4)
    Q[2:, 2:] = [[c, -s], [s, c]]
    im2 = Immersion(im.grid, mu * im.periodic @ Q.T, mu * Q @ im.linear)
    fr2 = frame_from_normals(im.grid, fr.nu1 @ Q.T, fr.nu2 @ Q.T)
    geo2 = compute_geometry(im2)
    sh2 = complex_shape(geo2, fr2)
    np.testing.assert_allclose(geo2.g, mu**2 * geo.g, rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(sh2.lam, mu * sh.lam, atol=1e-12 * mu)
    np.testing.assert_allclose(sh2.psi, sh.psi / mu, atol=1e-12 / mu)
    np.testing.assert_allclose(fr2.A, connection(im.grid, fr.nu1, fr.nu2), atol=1e-13)
    assert math.isclose(volume(geo2), mu**2 * volume(geo), rel_tol=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.floats(-3.0, 3.0))
def test_volume_invariant_under_translation(delta):
    im, _ = graph_bump(g2(32))
    g = im.grid
    # x -> x + delta e_1 keeps the same surface
    shifted = g.shift(im.periodic, 0, delta) + delta * im.linear[:, 0]
    im2 = Immersion(g, shifted, im.linear)
    assert math.isclose(volume(compute_geometry(im2)), volume(compute_geometry(im)), rel_tol=1e-12)
