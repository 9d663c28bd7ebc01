"""Orthonormal frames of the normal bundle and the gauge choices built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import Degenerate, NonInteger, NotTransversal, Obstructed, SeedNotNormal
from .geometry import GeometryBundle, Immersion, compute_geometry, covariant_derivative
from .grid import Grid

__all__ = [
    "GaugeFrame",
    "frame_from_normals",
    "frame_errors",
    "rotate_frame",
    "parallel_transport_frame",
    "exterior_frame",
    "winding_number",
    "axis_loop",
    "rectangle_loop",
    "glue_frames",
    "coulomb_rotate",
    "pullback_frame",
    "heat_gauge_B",
    "with_B",
]

DEGENERACY_FLOOR = 0.5


@dataclass(frozen=True, eq=False)
class GaugeFrame:
    grid: Grid
    nu1: np.ndarray = field(repr=False)
    nu2: np.ndarray = field(repr=False)
    A: np.ndarray = field(repr=False)
    B: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.B is None:
            object.__setattr__(self, "B", np.zeros(self.grid.shape))

    @property
    def m(self):
        return self.nu1 + 1j * self.nu2


def connection(grid: Grid, nu1, nu2):
    """A_a = d_a nu1 . nu2, by spectral differentiation."""
    return np.einsum("...an,...n->...a", grid.grad(nu1), nu2)


def frame_from_normals(grid: Grid, nu1, nu2, B=None) -> GaugeFrame:
    return GaugeFrame(grid, nu1, nu2, connection(grid, nu1, nu2), B)


def frame_errors(frame: GaugeFrame, geo: GeometryBundle) -> dict:
    """Worst violations of the frame invariants."""
    n1, n2 = frame.nu1, frame.nu2
    dot = lambda a, b: np.einsum("...n,...n->...", a, b)  # noqa: E731
    orth = max(
        float(np.max(np.abs(dot(n1, n1) - 1))),
        float(np.max(np.abs(dot(n2, n2) - 1))),
        float(np.max(np.abs(dot(n1, n2)))),
    )
    normal = max(
        float(np.max(np.abs(np.einsum("...an,...n->...a", geo.dF, v)))) for v in (n1, n2)
    )
    a_err = float(np.max(np.abs(frame.A - connection(frame.grid, n1, n2))))
    return {"orthonormal": orth, "normal": normal, "connection": a_err}


def rotate_frame(frame: GaugeFrame, theta, dtheta=None) -> GaugeFrame:
    """m -> e^{i theta} m with A -> A - d theta."""
    c, s = np.cos(theta)[..., None], np.sin(theta)[..., None]
    nu1 = c * frame.nu1 - s * frame.nu2
    nu2 = s * frame.nu1 + c * frame.nu2
    if dtheta is None:
        dtheta = frame.grid.grad(theta)
    return GaugeFrame(frame.grid, nu1, nu2, frame.A - dtheta, frame.B)


def _project_orthonormalize(v1, v2, geo, floor=DEGENERACY_FLOOR, err=Degenerate):
    """Project onto the normal space and Gram-Schmidt; raise ``err`` on collapse."""
    b1 = geo.normal_projection(v1)
    n1 = np.linalg.norm(b1, axis=-1)
    if np.min(n1) <= floor:
        raise err(f"projected first normal has norm {float(np.min(n1)):.3f} <= {floor}")
    nu1 = b1 / n1[..., None]
    b2 = geo.normal_projection(v2)
    bb2 = b2 - np.einsum("...n,...n->...", b2, nu1)[..., None] * nu1
    n2 = np.linalg.norm(bb2, axis=-1)
    if np.min(n2) <= floor:
        raise err(f"projected second normal has norm {float(np.min(n2)):.3f} <= {floor}")
    return nu1, bb2 / n2[..., None]


# -- parallel transport ----------------------------------------------------------


def _transport_generator(geo: GeometryBundle, axis):
    """G v = -g^{ab} d_a F (d_b d_axis F . v), as a matrix field."""
    return -np.einsum("...ab,...an,...bm->...nm", geo.g_inv, geo.dF, geo.ddF[..., :, axis, :])


def _rhs(G, n1, n2):
    g1 = np.einsum("...nm,...m->...n", G, n1)
    g2 = np.einsum("...nm,...m->...n", G, n2)
    return g1, g2 - n1 * np.einsum("...n,...n->...", g1, n2)[..., None]


def _rk4_line(G_int, G_half, y1, y2, start, h, axis_len):
    """Integrate outward from index ``start`` along the leading axis of G arrays.

    ``G_int[k]`` holds the generator at point k, ``G_half[k]`` at k + 1/2.
    ``y1, y2`` are the seeds at ``start``; returns arrays over the full line.
    """
    out1 = np.empty((axis_len,) + y1.shape)
    out2 = np.empty_like(out1)
    out1[start], out2[start] = y1, y2
    for direction in (1, -1):
        a, b = y1.copy(), y2.copy()
        k = start
        while 0 <= k + direction < axis_len:
            step = direction * h
            Gk = G_int[k]
            Gm = G_half[k] if direction == 1 else G_half[k - 1]
            Gn = G_int[k + direction]
            k1 = _rhs(Gk, a, b)
            k2 = _rhs(Gm, a + 0.5 * step * k1[0], b + 0.5 * step * k1[1])
            k3 = _rhs(Gm, a + 0.5 * step * k2[0], b + 0.5 * step * k2[1])
            k4 = _rhs(Gn, a + step * k3[0], b + step * k3[1])
            a = a + step / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            b = b + step / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            k += direction
            out1[k], out2[k] = a, b
    return out1, out2


def _half_geometry(im: Immersion, axis):
    h = im.grid.spacing[axis]
    shifted = im.with_periodic(im.grid.shift(im.periodic, axis, 0.5 * h))
    return compute_geometry(shifted)


def parallel_transport_frame(im: Immersion, base=None, seed=None, geo=None, raw=False):
    """Transport an orthonormal normal pair from ``base`` over the chart.

    The chart is the cut-open fundamental domain.  For d = 2 the pair is
    first carried along axis 0 on the base row, then along axis 1 from every
    point of that row.  Each leg is classical RK4 at grid spacing, with the
    generator sampled at half points by spectral translation.
    """
    grid = im.grid
    d = grid.dim
    geo = compute_geometry(im) if geo is None else geo
    base = tuple(0 for _ in range(d)) if base is None else tuple(int(b) for b in base)
    if seed is None:
        raise SeedNotNormal("a seed pair is required")
    s1, s2 = (np.asarray(v, float) for v in seed)
    tang = geo.dF[base]
    bad = max(
        abs(s1 @ s1 - 1), abs(s2 @ s2 - 1), abs(s1 @ s2),
        float(np.max(np.abs(tang @ s1))), float(np.max(np.abs(tang @ s2))),
    )
    if bad > 1e-8:
        raise SeedNotNormal(f"seed fails orthonormality/normality by {bad:.2e}")

    G0 = _transport_generator(geo, 0)
    G0h = _transport_generator(_half_geometry(im, 0), 0)
    h0 = grid.spacing[0]
    if d == 1:
        n1, n2 = _rk4_line(G0, G0h, s1, s2, base[0], h0, grid.sizes[0])
    else:
        j0 = base[1]
        r1, r2 = _rk4_line(G0[:, j0], G0h[:, j0], s1, s2, base[0], h0, grid.sizes[0])
        G1 = np.moveaxis(_transport_generator(geo, 1), 1, 0)
        G1h = np.moveaxis(_transport_generator(_half_geometry(im, 1), 1), 1, 0)
        c1, c2 = _rk4_line(G1, G1h, r1, r2, j0, grid.spacing[1], grid.sizes[1])
        n1, n2 = np.moveaxis(c1, 0, 1), np.moveaxis(c2, 0, 1)
    if raw:
        return n1, n2
    n1, n2 = _project_orthonormalize(n1, n2, geo)
    return frame_from_normals(grid, n1, n2)


# -- exterior frame, winding and gluing ------------------------------------------


def exterior_frame(im: Immersion, constants=None, geo=None) -> GaugeFrame:
    """Project two constant ambient vectors onto the normal space and orthonormalize.

    The default constants are the last two standard basis vectors.
    """
    geo = compute_geometry(im) if geo is None else geo
    n = im.n
    if constants is None:
        e = np.eye(n)
        constants = (e[n - 2], e[n - 1])
    c1, c2 = (np.broadcast_to(np.asarray(c, float), im.grid.shape + (n,)) for c in constants)
    nu1, nu2 = _project_orthonormalize(c1, c2, geo, err=NotTransversal)
    return frame_from_normals(im.grid, nu1, nu2)


def axis_loop(grid: Grid, axis=0, at=0):
    """Closed grid path running once around the torus along ``axis``."""
    idx = np.zeros((grid.sizes[axis], grid.dim), dtype=int)
    idx[:, axis] = np.arange(grid.sizes[axis])
    if grid.dim == 2:
        idx[:, 1 - axis] = at
    return idx


def rectangle_loop(lo, hi):
    """Counter-clockwise boundary of the index rectangle [lo, hi] (d = 2)."""
    (i0, j0), (i1, j1) = lo, hi
    pts = [(i, j0) for i in range(i0, i1)]
    pts += [(i1, j) for j in range(j0, j1)]
    pts += [(i, j1) for i in range(i1, i0, -1)]
    pts += [(i0, j) for j in range(j1, j0, -1)]
    return np.array(pts, dtype=int)


def _relative_phase(frame_a, frame_b):
    """z with m_a = z m_b (|z| = 1 when both frames span the same plane)."""
    return 0.5 * np.einsum("...n,...n->...", frame_a.m, np.conj(frame_b.m))


def winding_number(frame_a: GaugeFrame, frame_b: GaugeFrame, loop) -> int:
    """Rotation number of the relative phase of two frames around a closed path.

    The line integral of d(theta) is accumulated from the chord increments
    Im(conj(z_k) z_{k+1}) / (|z_k| |z_{k+1}|), so under-resolved loops show
    up as a non-integer sum.
    """
    loop = np.asarray(loop, dtype=int)
    z = _relative_phase(frame_a, frame_b)[tuple(loop.T)]
    if np.min(np.abs(z)) < 0.5:
        raise NonInteger("frames do not span a common normal plane on the loop")
    zn = np.roll(z, -1)
    inc = np.imag(np.conj(z) * zn) / (np.abs(z) * np.abs(zn))
    w = float(np.sum(inc)) / (2 * math.pi)
    k = round(w)
    if abs(w - k) > 0.1:
        raise NonInteger(f"discrete winding {w:.3f} is not within 0.1 of an integer")
    return int(k)


def _lift(theta, base):
    """Continuous lift of a phase field along the transport path ordering."""
    def unwrap_from(line, k):
        out = np.empty_like(line)
        out[k:] = np.unwrap(line[k:], axis=0)
        out[: k + 1] = np.unwrap(line[: k + 1][::-1], axis=0)[::-1]
        return out

    if theta.ndim == 1:
        return unwrap_from(theta, base[0])
    i0, j0 = base
    row = unwrap_from(theta[:, j0], i0)
    # shift each column so it passes through the lifted row value
    cols = unwrap_from(theta.T, j0).T
    cols = cols + (row - cols[:, j0])[:, None]
    return cols


def glue_frames(interior: GaugeFrame, exterior: GaugeFrame, cutoff, loop=None) -> GaugeFrame:
    """m = exp(i chi theta) m_ext where m_int = exp(i theta) m_ext on supp chi."""
    grid = interior.grid
    chi = np.asarray(cutoff, float)
    z = _relative_phase(interior, exterior)
    base = np.unravel_index(int(np.argmax(chi)), chi.shape)
    if grid.dim == 2:
        if loop is None:
            supp = np.argwhere(chi > 1e-14)
            lo = np.maximum(supp.min(axis=0) - 1, 0)
            hi = np.minimum(supp.max(axis=0) + 1, np.array(grid.shape) - 1)
            loop = rectangle_loop(lo, hi)
        w = winding_number(interior, exterior, loop)
        if w != 0:
            raise Obstructed(f"relative phase winds {w} times around the gluing region")
    theta = _lift(np.angle(z), base)
    phase = chi * theta
    c, s = np.cos(phase)[..., None], np.sin(phase)[..., None]
    m_ext = exterior.m
    m = (c + 1j * s) * m_ext
    return frame_from_normals(grid, np.real(m), np.imag(m))


# -- gauges ------------------------------------------------------------------------


def coulomb_rotate(frame: GaugeFrame, geo: GeometryBundle = None, reference_A=None) -> GaugeFrame:
    """Rotate by the zero-mean solution of Laplace(theta) = div(A - A_ref)."""
    grid = frame.grid
    A = frame.A if reference_A is None else frame.A - reference_A
    div = sum(grid.diff(A[..., a], a) for a in range(grid.dim))
    theta = grid.solve_poisson(div)
    return rotate_frame(frame, theta, grid.grad(theta))


def pullback_frame(frame_src: GaugeFrame, im_dst: Immersion, geo_dst: GeometryBundle = None) -> GaugeFrame:
    """Carry a frame to a nearby immersion by projection and Gram-Schmidt."""
    geo_dst = compute_geometry(im_dst) if geo_dst is None else geo_dst
    nu1, nu2 = _project_orthonormalize(frame_src.nu1, frame_src.nu2, geo_dst)
    return frame_from_normals(im_dst.grid, nu1, nu2)


def heat_gauge_B(frame: GaugeFrame, geo: GeometryBundle):
    """B = nabla^a A_a = g^{ab}(d_a A_b - Gamma^c_ab A_c)."""
    DA = covariant_derivative(frame.A, geo)
    return np.einsum("...ab,...ab->...", geo.g_inv, DA)


def with_B(frame: GaugeFrame, B) -> GaugeFrame:
    return replace(frame, B=np.asarray(B, float))
