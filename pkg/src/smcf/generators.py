"""Initial-data generators.

Every generator returns an ``(Immersion, GaugeFrame)`` pair.  Graph data get
their frame from ``exterior_frame`` followed by ``coulomb_rotate``.  Curves
and the Clifford torus have no globally transversal pair of constant ambient
vectors, so they carry their closed-form frames instead.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError, UnknownGenerator
from .frame import GaugeFrame, coulomb_rotate, exterior_frame, frame_from_normals
from .geometry import Immersion, compute_geometry
from .grid import Grid

__all__ = ["GENERATORS", "generate_initial_data", "data_report", "flat", "circle", "helix", "clifford", "graph_bump", "graph_random"]


def _phase(grid: Grid):
    """Angle coordinates 2 pi x / L on each axis."""
    X = grid.mesh
    return tuple(2 * math.pi * X[..., a] / grid.lengths[a] for a in range(grid.dim))


def _need(grid: Grid, d, name):
    if grid.dim != d:
        raise ConfigError(f"generator {name} needs a {d}-dimensional grid, got {grid.dim}")


def flat(grid: Grid):
    d = grid.dim
    n = d + 2
    lin = np.zeros((n, d))
    lin[:d, :d] = np.eye(d)
    im = Immersion(grid, np.zeros(grid.shape + (n,)), lin)
    e = np.eye(n)
    ones = np.ones(grid.shape + (1,))
    return im, frame_from_normals(grid, ones * e[d], ones * e[d + 1])


def circle(grid: Grid, radius=1.0):
    _need(grid, 1, "circle")
    (t,) = _phase(grid)
    z = np.zeros_like(t)
    im = Immersion(grid, np.stack([radius * np.cos(t), radius * np.sin(t), z], -1))
    nu1 = -np.stack([np.cos(t), np.sin(t), z], -1)
    nu2 = np.stack([z, z, z + 1], -1)
    return im, frame_from_normals(grid, nu1, nu2)


def helix(grid: Grid, radius=1.0, pitch=0.5):
    """One turn of a helix per period; the axial climb is the linear part."""
    _need(grid, 1, "helix")
    (t,) = _phase(grid)
    z = np.zeros_like(t)
    scale = 2 * math.pi / grid.lengths[0]
    lin = np.array([[0.0], [0.0], [pitch * scale]])
    im = Immersion(grid, np.stack([radius * np.cos(t), radius * np.sin(t), z], -1), lin)
    tang = np.stack([-radius * np.sin(t), radius * np.cos(t), z + pitch], -1) / math.hypot(radius, pitch)
    nu1 = -np.stack([np.cos(t), np.sin(t), z], -1)
    nu2 = np.cross(tang, nu1)
    return im, frame_from_normals(grid, nu1, nu2)


def clifford(grid: Grid, r1=1.0, r2=2.0):
    _need(grid, 2, "clifford")
    x, y = _phase(grid)
    z = np.zeros_like(x)
    im = Immersion(grid, np.stack([r1 * np.cos(x), r1 * np.sin(x), r2 * np.cos(y), r2 * np.sin(y)], -1))
    nu1 = -np.stack([np.cos(x), np.sin(x), z, z], -1)
    nu2 = -np.stack([z, z, np.cos(y), np.sin(y)], -1)
    return im, frame_from_normals(grid, nu1, nu2)


def _graph(grid: Grid, p1, p2):
    lin = np.zeros((4, 2))
    lin[0, 0] = lin[1, 1] = 1.0
    z = np.zeros_like(p1)
    im = Immersion(grid, np.stack([z, z, p1, p2], -1), lin)
    return im, coulomb_rotate(exterior_frame(im))


def graph_bump(grid: Grid, width=1.0, amplitude=0.25):
    """Periodic bump exp(-(2 - cos - cos)/w^2) centred in the box, tilted in the fourth coordinate."""
    _need(grid, 2, "graph_bump")
    x, y = _phase(grid)
    b = amplitude * np.exp(-(2 - np.cos(x - math.pi) - np.cos(y - math.pi)) / width**2)
    return _graph(grid, b, b * np.sin(x))


def graph_random(grid: Grid, seed=0, s=2.5, amplitude=0.1, kmax=None):
    """Random graph with Fourier coefficients ~ <k>^-(s + 2 + d/2), rescaled to max slope ``amplitude``.

    The decay puts the second derivatives at the edge of H^s.  ``kmax`` caps
    the band (default: the dealiased range, a third of the grid).
    """
    _need(grid, 2, "graph_random")
    rng = np.random.default_rng(seed)
    kmax = grid.sizes[0] // 3 if kmax is None else int(kmax)
    if kmax < 1:
        raise ConfigError("kmax must be at least 1")
    kx = np.fft.fftfreq(grid.sizes[0], 1.0 / grid.sizes[0])
    ky = np.fft.fftfreq(grid.sizes[1], 1.0 / grid.sizes[1])
    K = np.stack(np.meshgrid(kx, ky, indexing="ij"), -1)
    band = (np.abs(K).max(-1) <= kmax) & (np.abs(K).max(-1) >= 1)
    decay = (1.0 + np.sum(K**2, -1)) ** (-(s + 2 + grid.dim / 2) / 2)
    out = []
    for _ in range(2):
        c = (rng.normal(size=K.shape[:2]) + 1j * rng.normal(size=K.shape[:2])) * decay * band
        out.append(np.real(np.fft.ifft2(c)) * grid.npoints)
    slope = max(np.abs(grid.grad(p)).max() for p in out)
    p1, p2 = (amplitude * p / slope for p in out)
    return _graph(grid, p1, p2)


GENERATORS = {
    "flat": flat,
    "circle": circle,
    "helix": helix,
    "clifford": clifford,
    "graph_bump": graph_bump,
    "graph_random": graph_random,
}


def generate_initial_data(name, grid: Grid, params=None, seed=None):
    try:
        gen = GENERATORS[name]
    except KeyError:
        raise UnknownGenerator(f"unknown generator {name!r}; choose from {sorted(GENERATORS)}") from None
    params = dict(params or {})
    if seed is not None and name == "graph_random":
        params["seed"] = seed
    try:
        return gen(grid, **params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {name}: {exc}") from None


def data_report(im: Immersion, frame: GaugeFrame, s=2.5) -> dict:
    """Metric ellipticity constant c0 and ||lambda||_{H^s} of the data."""
    from .geometry import complex_shape
    from .norms import extrinsic_sobolev

    geo = compute_geometry(im)
    ev = geo.metric_eigenvalues()
    c0 = float(min(ev.min(), 1.0 / ev.max()))
    lam = complex_shape(geo, frame).lam
    return {"c0": c0, "lambda_Hs": extrinsic_sobolev(lam, s, im.grid)}
