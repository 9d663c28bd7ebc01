import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smcf.errors import BadDelta, CapExceeded, FamilyTooShort
from smcf.generators import circle, clifford, flat, graph_bump, helix
from smcf.geometry import complex_shape, compute_geometry
from smcf.grid import Grid
from smcf.norms import (
    K_CAP,
    FrequencyEnvelope,
    _h_integral,
    build_family,
    extrinsic_sobolev,
    frequency_envelope,
    intrinsic_sobolev,
    xs_norm,
    ys_zs_norms,
)

TWO_PI = 2 * math.pi


def line(n=32):
    return Grid((n,), (TWO_PI,))


def square(n=32):
    return Grid((n, n), (TWO_PI, TWO_PI))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 10), st.floats(0.0, 4.0), st.floats(0.0, 2.0))
def test_extrinsic_sobolev_of_a_mode(k, s, hom):
    g = line()
    f = np.sin(k * g.mesh[..., 0])
    exp = (1 + k * k) ** (s / 2) * k**hom * math.sqrt(math.pi)
    assert math.isclose(extrinsic_sobolev(f, s, g, homogeneous=hom), exp, rel_tol=1e-12)


def test_homogeneous_weight_kills_constants():
    g = square(8)
    assert extrinsic_sobolev(np.ones(g.shape), 2.0, g, homogeneous=1.0) == 0.0
    assert math.isclose(extrinsic_sobolev(np.ones(g.shape), 2.0, g), TWO_PI, rel_tol=1e-13)


@pytest.mark.parametrize("r", [0.5, 2.0])
def test_intrinsic_sobolev_on_circles(r):
    im, _ = circle(line(64), r)
    geo = compute_geometry(im)
    x = im.grid.mesh[..., 0]
    assert math.isclose(intrinsic_sobolev(np.ones(64), geo, k=3), math.sqrt(TWO_PI * r), rel_tol=1e-12)
    # arclength s = r x: |d^l f / ds^l|^2 = (k/r)^(2l) |f|^2
    f = np.sin(3 * x)
    exp = math.sqrt(sum((3 / r) ** (2 * l) for l in range(3)) * math.pi * r)
    assert math.isclose(intrinsic_sobolev(f, geo, k=2), exp, rel_tol=1e-10)


def test_intrinsic_sobolev_cap():
    im, _ = circle(line(16))
    with pytest.raises(CapExceeded):
        intrinsic_sobolev(np.ones(16), compute_geometry(im), k=K_CAP + 1)
    with pytest.raises(ValueError):
        intrinsic_sobolev(np.ones(16), compute_geometry(im), k=-1)


def test_charge_enters_intrinsic_norm():
    # nabla^A of e^{ix} with A = -1 vanishes
    im, _ = circle(line(32))
    geo = compute_geometry(im)
    z = np.exp(1j * im.grid.mesh[..., 0])
    A = -np.ones((32, 1))
    assert math.isclose(intrinsic_sobolev(z, geo, A, 2), math.sqrt(TWO_PI), rel_tol=1e-12)


def test_h_integral_tail_is_exact_for_constants():
    im, fr = graph_bump(square(16))
    fam = build_family(im, fr, dh=0.01)
    vals = np.full(len(fam), 2.0)
    rate = -0.7
    exp = 2.0 * 2.0 ** (2 * fam.h0 * rate) / (2 * -rate * math.log(2))
    assert math.isclose(_h_integral(fam, vals, rate), exp, rel_tol=1e-4)
    assert _h_integral(fam, vals, 0.5) == math.inf
    vals[-1] = 0.0
    assert math.isfinite(_h_integral(fam, vals, 0.5))


def test_family_reaches_the_state():
    im, fr = graph_bump(square(32))
    fam = build_family(im, fr)
    assert fam.h_values[-1] >= im.grid.lp_cover() - 1e-12
    np.testing.assert_allclose(fam.members[-1].lam, complex_shape(compute_geometry(im), fr).lam, atol=1e-12)
    assert np.all(np.diff(fam.h_values) == pytest.approx(0.25))
    with pytest.raises(FamilyTooShort):
        xs_norm(build_family(im, fr, h0=4.0), 2.5)


@pytest.mark.parametrize(
    "make",
    [lambda: circle(line(64)), lambda: helix(line(64)), lambda: graph_bump(square(32))],
    ids=["circle", "helix", "graph_bump"],
)
def test_xs_dominates_hs(make):
    im, fr = make()
    lam = complex_shape(compute_geometry(im), fr).lam
    fam = build_family(im, fr)
    hs = extrinsic_sobolev(lam, 2.5, im.grid)
    xe = xs_norm(fam, 2.5)
    assert hs <= xe <= 10 * hs
    xi = xs_norm(fam, 2.5, "intrinsic")
    assert 0.1 <= xi / xe <= 10


def test_xs_of_circle_closed_form():
    # every member equals the state and lambda is constant, so each H^k norm is ||lambda||_2
    # and X^2 = ||lambda||^2 (1 + 1 + max_N 1 / (2 (N - s) ln 2)), the max at N = floor(2s)
    im, fr = circle(line(64))
    fam = build_family(im, fr)
    lam = complex_shape(compute_geometry(im), fr).lam
    exact = math.sqrt(2 + 1 / (2 * (5 - 2.5) * math.log(2))) * im.grid.l2_norm(lam)
    val = xs_norm(fam, 2.5)
    # trapezoid rule in h with dh = 0.25 on the exponential weight
    assert val == pytest.approx(exact, rel=5e-3)
    assert xs_norm(build_family(im, fr, dh=0.05), 2.5) == pytest.approx(exact, rel=5e-4)
    with pytest.raises(ValueError):
        xs_norm(fam, 2.5, "sideways")


def test_flat_norms_vanish():
    im, fr = flat(square(16))
    fam = build_family(im, fr)
    assert xs_norm(fam, 2.5) == 0.0
    assert ys_zs_norms(fam, 2.5) == (0.0, 0.0)


def test_ys_zs_of_clifford_vanish():
    # constant metric and zero connection: the homogeneous weight removes the mean;
    # what is left is rounding seen through weights of order |k|^7
    im, fr = clifford(square(16))
    y, z = ys_zs_norms(build_family(im, fr), 2.5)
    assert y < 1e-7 and z < 1e-7


def test_ys_zs_positive_on_graphs():
    im, fr = graph_bump(square(32))
    y, z = ys_zs_norms(build_family(im, fr), 2.5)
    assert y > 0 and z > 0


def test_envelope_validation_and_shape():
    im, fr = graph_bump(square(32))
    with pytest.raises(BadDelta):
        frequency_envelope(im, fr, 2.5, 1.5)
    with pytest.raises(BadDelta):
        frequency_envelope(im, fr, 2.5, 0.0)
    env = frequency_envelope(im, fr, 2.5, 1.0)
    assert env.slowly_varying()
    ddF = im.grid.hessian(im.periodic)
    dnu = np.concatenate([im.grid.grad(fr.nu1), im.grid.grad(fr.nu2)], axis=-1)
    ref = extrinsic_sobolev(ddF, 2.5, im.grid) + extrinsic_sobolev(dnu, 2.5, im.grid)
    assert 1 / 3 <= env.l2() / ref <= 3


def test_envelope_algebra():
    env = FrequencyEnvelope(1.0, 0, np.array([1.0, 0.5, 0.25]))
    assert env.slowly_varying()
    q = 0.25
    assert math.isclose(env.l2(), math.sqrt(1 + 0.25 + 0.0625 + 0.0625 * q / (1 - q)))
    assert not FrequencyEnvelope(1.0, 0, np.array([1.0, 0.1])).slowly_varying()


@settings(max_examples=15, deadline=None)
@given(st.floats(-3, 3).filter(lambda c: abs(c) > 1e-3), st.floats(0.5, 4.0))
def test_extrinsic_norm_is_homogeneous(c, s):
    g = square(16)
    f = np.random.default_rng(0).normal(size=g.shape + (2,))
    assert math.isclose(extrinsic_sobolev(c * f, s, g), abs(c) * extrinsic_sobolev(f, s, g), rel_tol=1e-12)
