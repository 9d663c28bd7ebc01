import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smcf.errors import NonInteger, NotTransversal, Obstructed, SeedNotNormal
from smcf.frame import (
    axis_loop,
    connection,
    coulomb_rotate,
    exterior_frame,
    frame_errors,
    glue_frames,
    heat_gauge_B,
    parallel_transport_frame,
    pullback_frame,
    rectangle_loop,
    rotate_frame,
    winding_number,
)
from smcf.generators import circle, clifford, graph_bump, helix
from smcf.geometry import complex_shape, compute_geometry
from smcf.grid import Grid

TWO_PI = 2 * math.pi


def square(n=32):
    return Grid((n, n), (TWO_PI, TWO_PI))


@pytest.mark.parametrize(
    "make",
    [lambda: circle(Grid((32,), (TWO_PI,))), lambda: helix(Grid((32,), (TWO_PI,))), lambda: clifford(square()), lambda: graph_bump(square(64))],
    ids=["circle", "helix", "clifford", "graph_bump"],
)
def test_generator_frames_satisfy_invariants(make):
    im, fr = make()
    errs = frame_errors(fr, compute_geometry(im))
    assert errs["orthonormal"] < 1e-13
    assert errs["normal"] < 1e-13
    assert errs["connection"] < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_rotation_law(c):
    im, fr = graph_bump(square(64))
    g = im.grid
    x, y = g.mesh[..., 0], g.mesh[..., 1]
    theta = c[0] * np.sin(x) + c[1] * np.cos(x + y) + c[2]
    rot = rotate_frame(fr, theta)
    geo = compute_geometry(im)
    np.testing.assert_allclose(rot.m, np.exp(1j * theta)[..., None] * fr.m, atol=1e-13)
    np.testing.assert_allclose(rot.A, connection(g, rot.nu1, rot.nu2), atol=1e-11)
    lam, lam_r = complex_shape(geo, fr).lam, complex_shape(geo, rot).lam
    np.testing.assert_allclose(lam_r, np.exp(1j * theta)[..., None, None] * lam, atol=1e-13)


def test_coulomb_gauge_divergence_free_and_idempotent():
    im, fr = graph_bump(square(64))
    g = im.grid
    x = g.mesh[..., 0]
    twisted = rotate_frame(fr, np.sin(x) + 0.3 * np.cos(2 * x))
    c = coulomb_rotate(twisted)
    div = sum(g.diff(c.A[..., a], a) for a in range(2))
    assert np.max(np.abs(div)) < 1e-10
    again = coulomb_rotate(c)
    assert np.max(np.abs(again.m - c.m)) < 1e-12


def test_coulomb_matches_reference():
    im, fr = graph_bump(square())
    g = im.grid
    ref = rotate_frame(fr, np.cos(g.mesh[..., 1])).A
    c = coulomb_rotate(fr, reference_A=ref)
    div = sum(g.diff((c.A - ref)[..., a], a) for a in range(2))
    assert np.max(np.abs(div)) < 1e-10


def test_exterior_frame_needs_transversality():
    im, _ = clifford(square(16))
    with pytest.raises(NotTransversal):
        exterior_frame(im)


def test_pullback_to_same_immersion_is_identity():
    im, fr = graph_bump(square())
    pb = pullback_frame(fr, im)
    np.testing.assert_allclose(pb.m, fr.m, atol=1e-14)


def test_parallel_transport_reproduces_parallel_frames():
    # both frames have A = 0, so transport from any seed recovers them
    im, fr = circle(Grid((64,), (TWO_PI,)), 1.5)
    tr = parallel_transport_frame(im, base=(5,), seed=(fr.nu1[5], fr.nu2[5]))
    np.testing.assert_allclose(tr.m, fr.m, atol=1e-9)
    im, fr = clifford(square(32))
    tr = parallel_transport_frame(im, base=(3, 7), seed=(fr.nu1[3, 7], fr.nu2[3, 7]))
    np.testing.assert_allclose(tr.m, fr.m, atol=1e-8)


def test_parallel_transport_rejects_bad_seed():
    im, fr = circle(Grid((16,), (TWO_PI,)))
    with pytest.raises(SeedNotNormal):
        parallel_transport_frame(im, seed=(fr.nu1[0], fr.nu1[0]))
    with pytest.raises(SeedNotNormal):
        parallel_transport_frame(im)


@settings(max_examples=10, deadline=None)
@given(st.integers(-2, 2))
def test_winding_number_of_rotated_frame(k):
    im, fr = graph_bump(square(32))
    x = im.grid.mesh[..., 0]
    rot = rotate_frame(fr, k * x)
    assert winding_number(rot, fr, axis_loop(im.grid, 0, at=4)) == k
    assert winding_number(rot, fr, axis_loop(im.grid, 1, at=4)) == 0


def test_winding_rejects_underresolved_loop():
    im, fr = graph_bump(square(8))
    rot = rotate_frame(fr, 2 * im.grid.mesh[..., 0])
    with pytest.raises(NonInteger):
        winding_number(rot, fr, axis_loop(im.grid, 0))


def test_glue_frames():
    im, fr = graph_bump(square(32))
    g = im.grid
    x, y = g.mesh[..., 0] - math.pi, g.mesh[..., 1] - math.pi
    r2 = x**2 + y**2
    chi = np.clip(2 - r2, 0, 1)
    inner = rotate_frame(fr, 0.7 * np.exp(-r2))
    glued = glue_frames(inner, fr, chi)
    on, off = chi == 1, chi == 0
    np.testing.assert_allclose(glued.m[on], inner.m[on], atol=1e-13)
    np.testing.assert_allclose(glued.m[off], fr.m[off], atol=1e-13)
    # a relative phase that winds around the patch cannot be glued
    vortex = rotate_frame(fr, np.arctan2(y + 1e-3, x + 1e-3))
    with pytest.raises(Obstructed):
        glue_frames(vortex, fr, chi, loop=rectangle_loop((8, 8), (24, 24)))


def test_heat_gauge_B_vanishes_on_parallel_frames():
    im, fr = clifford(square(16))
    np.testing.assert_allclose(heat_gauge_B(fr, compute_geometry(im)), 0, atol=1e-13)
