"""Periodic grids, Fourier differentiation and Littlewood-Paley projectors.

Arrays living on a grid carry the spatial axes first, in grid order, followed
by any number of component axes.  A scalar field on a 64x64 grid has shape
``(64, 64)``, an immersion into R^4 has shape ``(64, 64, 4)`` and a metric has
shape ``(64, 64, 2, 2)``.  All transforms act on the leading ``grid.dim`` axes
only.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import GridError, NonFinite

__all__ = [
    "Grid",
    "Field",
    "Interpolant",
    "bump",
    "bump_derivative",
    "spectral_derivative",
    "lp_project",
    "dealias",
    "write_snapshot",
    "read_snapshot",
]

_LN2 = math.log(2.0)


# -- the Littlewood-Paley bump -------------------------------------------------
#
# phi(r) = 1 on r <= 1, 0 on r >= 2, and on (1, 2) the classical C-infinity
# smooth step  phi(r) = f(2 - r) / (f(2 - r) + f(r - 1))  with f(t) = exp(-1/t).
# All derivatives vanish at both ends, phi is monotone non-increasing.


def _f(t):
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _fp(t):
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos]) / t[pos] ** 2
    return out


def bump(r):
    """Smooth radial cutoff, equal to 1 for r <= 1 and 0 for r >= 2."""
    r = np.asarray(r, dtype=float)
    t = np.clip(r - 1.0, 0.0, 1.0)
    a, b = _f(1.0 - t), _f(t)
    return a / (a + b)


def bump_derivative(r):
    """d(phi)/dr; zero outside (1, 2)."""
    r = np.asarray(r, dtype=float)
    t = np.clip(r - 1.0, 0.0, 1.0)
    a, b = _f(1.0 - t), _f(t)
    ap, bp = -_fp(1.0 - t), _fp(t)
    out = (ap * b - a * bp) / (a + b) ** 2
    out[(r <= 1.0) | (r >= 2.0)] = 0.0
    return out


@dataclass(frozen=True)
class Grid:
    """Periodic box [0, L_1) x ... x [0, L_d) sampled with N_a points per axis."""

    sizes: tuple
    lengths: tuple

    def __post_init__(self):
        sizes = tuple(int(n) for n in np.atleast_1d(self.sizes))
        lengths = tuple(float(v) for v in np.atleast_1d(self.lengths))
        if len(sizes) not in (1, 2):
            raise GridError(f"grid dimension must be 1 or 2, got {len(sizes)}")
        if len(lengths) != len(sizes):
            raise GridError("sizes and lengths must have the same length")
        for n in sizes:
            if n < 4 or n & (n - 1):
                raise GridError(f"grid size {n} is not a power of two >= 4")
        for v in lengths:
            if not (v > 0 and math.isfinite(v)):
                raise GridError(f"box length {v} must be positive and finite")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "lengths", lengths)

    # -- geometry of the lattice
    @property
    def dim(self):
        return len(self.sizes)

    @property
    def shape(self):
        return self.sizes

    @property
    def npoints(self):
        return int(np.prod(self.sizes))

    @property
    def spacing(self):
        return tuple(L / n for L, n in zip(self.lengths, self.sizes))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @property
    def box_volume(self):
        return float(np.prod(self.lengths))

    @cached_property
    def axes(self):
        return tuple(range(self.dim))

    @cached_property
    def coords(self):
        return tuple(np.arange(n) * h for n, h in zip(self.sizes, self.spacing))

    @cached_property
    def mesh(self):
        """Coordinates of every grid point, shape ``(*shape, dim)``."""
        return np.stack(np.meshgrid(*self.coords, indexing="ij"), axis=-1)

    def wavenumbers(self, axis):
        """Angular wavenumbers 2 pi k / L in FFT order, k = -N/2 .. N/2 - 1."""
        n, L = self.sizes[axis], self.lengths[axis]
        return np.fft.fftfreq(n, d=1.0 / n) * (2 * np.pi / L)

    def index_wavenumbers(self, axis):
        n = self.sizes[axis]
        return np.fft.fftfreq(n, d=1.0 / n)

    # -- half-spectrum bookkeeping (real transforms along the last axis)
    @cached_property
    def spectral_shape(self):
        return self.sizes[:-1] + (self.sizes[-1] // 2 + 1,)

    @cached_property
    def _k(self):
        ks = []
        for a in range(self.dim):
            n, L = self.sizes[a], self.lengths[a]
            if a == self.dim - 1:
                k = np.fft.rfftfreq(n, d=1.0 / n) * (2 * np.pi / L)
            else:
                k = np.fft.fftfreq(n, d=1.0 / n) * (2 * np.pi / L)
            shp = [1] * self.dim
            shp[a] = k.size
            ks.append(k.reshape(shp))
        return ks

    @cached_property
    def _k_odd(self):
        # Nyquist row removed: odd derivatives of the Nyquist mode are not real
        out = []
        for a, k in enumerate(self._k):
            k = k.copy()
            n = self.sizes[a]
            idx = [slice(None)] * self.dim
            idx[a] = n // 2
            k[tuple(idx)] = 0.0
            out.append(k)
        return out

    @cached_property
    def kabs(self):
        """|xi| on the half spectrum."""
        return np.sqrt(sum(np.broadcast_to(k**2, self.spectral_shape) for k in self._k))

    @cached_property
    def _dealias_mask(self):
        mask = np.ones(self.spectral_shape, dtype=bool)
        for a in range(self.dim):
            n = self.sizes[a]
            if a == self.dim - 1:
                j = np.fft.rfftfreq(n, d=1.0 / n)
            else:
                j = np.fft.fftfreq(n, d=1.0 / n)
            shp = [1] * self.dim
            shp[a] = j.size
            mask &= (np.abs(j) <= n / 3).reshape(shp)
        return mask

    # -- transforms
    def _check(self, a):
        if a.shape[: self.dim] != self.shape:
            raise GridError(f"array of shape {a.shape} does not live on grid {self.shape}")

    def fft(self, a):
        a = np.asarray(a)
        self._check(a)
        return np.fft.rfftn(a, axes=self.axes)

    def ifft(self, ah):
        return np.fft.irfftn(ah, s=self.shape, axes=self.axes)

    def _b(self, m, a):
        """Broadcast a spectral multiplier against an array with trailing axes."""
        return m.reshape(m.shape + (1,) * (a.ndim - self.dim))

    def multiply(self, a, symbol):
        """Apply a real-valued Fourier multiplier given on the half spectrum."""
        if np.iscomplexobj(a):
            return self.multiply(a.real, symbol) + 1j * self.multiply(a.imag, symbol)
        ah = self.fft(a)
        return self.ifft(ah * self._b(np.broadcast_to(symbol, self.spectral_shape), ah))

    def diff(self, a, axis, order=1):
        """Spectral derivative of order ``order`` along ``axis``."""
        if not 0 <= axis < self.dim:
            raise GridError(f"axis {axis} out of range for a {self.dim}-d grid")
        if order < 1:
            raise GridError("derivative order must be >= 1")
        a = np.asarray(a)
        if np.iscomplexobj(a):
            return self.diff(a.real, axis, order) + 1j * self.diff(a.imag, axis, order)
        k = (self._k_odd if order % 2 else self._k)[axis]
        ah = self.fft(a)
        return self.ifft(ah * self._b((1j * k) ** order, ah))

    def grad(self, a):
        """Gradient with the new index placed right after the spatial axes."""
        a = np.asarray(a)
        if np.iscomplexobj(a):
            return self.grad(a.real) + 1j * self.grad(a.imag)
        ah = self.fft(a)
        parts = [self.ifft(ah * self._b(1j * k, ah)) for k in self._k_odd]
        return np.stack(parts, axis=self.dim)

    def hessian(self, a):
        """Second derivatives, shape ``(*shape, d, d, *rest)``."""
        a = np.asarray(a)
        if np.iscomplexobj(a):
            return self.hessian(a.real) + 1j * self.hessian(a.imag)
        return self._hessian_from(self.fft(a), a.shape[self.dim :])

    def grad_hessian(self, a):
        """Gradient and Hessian of a real array from a single transform."""
        a = np.asarray(a)
        ah = self.fft(a)
        g = np.stack([self.ifft(ah * self._b(1j * k, ah)) for k in self._k_odd], axis=self.dim)
        return g, self._hessian_from(ah, a.shape[self.dim :])

    def _hessian_from(self, ah, rest):
        d = self.dim
        out = np.empty(self.shape + (d, d) + tuple(rest))
        for i in range(d):
            for j in range(i, d):
                if i == j:
                    sym = -(self._k[i] ** 2)
                else:
                    sym = -(self._k_odd[i] * self._k_odd[j])
                v = self.ifft(ah * self._b(np.broadcast_to(sym, self.spectral_shape), ah))
                sp = (slice(None),) * d
                out[sp + (i, j)] = v
                out[sp + (j, i)] = v
        return out

    def laplacian(self, a):
        return self.multiply(a, -self.kabs**2)

    def solve_poisson(self, f):
        """Zero-mean solution of the flat equation  Laplace(u) = f - mean(f)."""
        k2 = self.kabs**2
        inv = np.zeros_like(k2)
        inv[k2 > 0] = -1.0 / k2[k2 > 0]
        return self.multiply(f, inv)

    def shift(self, a, axis, delta):
        """Spectral translate: returns x -> a(x + delta e_axis)."""
        a = np.asarray(a)
        if np.iscomplexobj(a):
            return self.shift(a.real, axis, delta) + 1j * self.shift(a.imag, axis, delta)
        ah = self.fft(a)
        k = self._k[axis]
        ph = np.exp(1j * k * delta)
        # keep the Nyquist row real so the result stays a real field
        n = self.sizes[axis]
        idx = [slice(None)] * self.dim
        idx[axis] = n // 2
        ph = np.broadcast_to(ph, ph.shape).copy()
        ph[tuple(idx)] = np.cos(k[tuple(idx)] * delta)
        return self.ifft(ah * self._b(np.broadcast_to(ph, self.spectral_shape), ah))

    # -- Littlewood-Paley
    def lp_symbol(self, h, kind):
        r = self.kabs / 2.0**h
        if kind == "below":
            return bump(r)
        if kind == "above":
            return 1.0 - bump(r)
        if kind == "band":
            return bump(r) - bump(2.0 * r)
        if kind == "density":
            # continuous piece P_h = d/dh P_{<h}; integrates to the identity in h
            return -_LN2 * r * bump_derivative(r)
        raise GridError(f"unknown projector kind {kind!r}")

    def lp(self, a, h, kind="below"):
        return self.multiply(a, self.lp_symbol(h, kind))

    def lp_cover(self):
        """Smallest h with P_{<h} equal to the identity on this grid."""
        return math.log2(max(float(self.kabs.max()), 1e-300))

    def dealias(self, a):
        return self.multiply(a, self._dealias_mask.astype(float))

    # -- integration
    def integrate(self, a):
        """Sum over the lattice times the cell volume (spatial axes only)."""
        return np.sum(a, axis=self.axes) * self.cell_volume

    def l2_norm(self, a):
        a = np.asarray(a)
        return math.sqrt(float(np.sum(np.abs(a) ** 2)) * self.cell_volume)

    def spectral_l2_norm(self, a, weight=None):
        """L^2 norm computed from the full spectrum, optionally weighted."""
        a = np.asarray(a)
        self._check(a)
        ah = np.fft.fftn(a, axes=self.axes)
        w = 1.0 if weight is None else self._b(weight, ah)
        tot = float(np.sum(np.abs(ah * w) ** 2))
        return math.sqrt(tot * self.box_volume) / self.npoints

    @cached_property
    def kabs_full(self):
        ks = np.meshgrid(*[self.wavenumbers(a) for a in range(self.dim)], indexing="ij")
        return np.sqrt(sum(k**2 for k in ks))


@dataclass(frozen=True, eq=False)
class Field:
    """Sampled real (or complex) field with ``components`` values per point."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, copy=True)
        if v.ndim == self.grid.dim:
            v = v[..., None]
        if v.shape[: self.grid.dim] != self.grid.shape:
            raise GridError(f"values of shape {v.shape} do not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise NonFinite("field contains NaN or Inf")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def components(self):
        return int(np.prod(self.values.shape[self.grid.dim :]))


def spectral_derivative(f: Field, axis: int, order: int = 1) -> Field:
    """Componentwise derivative d^order/dx_axis^order via (ik)^order."""
    return Field(f.grid, f.grid.diff(f.values, axis, order))


def lp_project(f: Field, h: float, kind: str = "below") -> Field:
    """Littlewood-Paley projection P_{<h}, P_h (dyadic band) or P_{>h}."""
    return Field(f.grid, f.grid.lp(f.values, h, kind))


def dealias(f: Field) -> Field:
    """Two-thirds rule: drop every mode with |k_a| > N_a / 3 on some axis."""
    return Field(f.grid, f.grid.dealias(f.values))


class Interpolant:
    """Trigonometric interpolant of grid data at arbitrary points.

    ``values`` has shape ``(*grid.shape, *comp)``; an optional constant matrix
    ``linear`` of shape ``(*comp, d)`` adds the non-periodic part ``linear @ x``.
    """

    def __init__(self, grid: Grid, values, linear=None):
        self.grid = grid
        v = np.asarray(values, dtype=float)
        self.comp_shape = v.shape[grid.dim :]
        c = int(np.prod(self.comp_shape)) if self.comp_shape else 1
        v = v.reshape(grid.shape + (c,))
        self.coef = np.fft.fftn(v, axes=grid.axes) / grid.npoints
        self.k = [grid.wavenumbers(a) for a in range(grid.dim)]
        self.linear = None if linear is None else np.asarray(linear, float).reshape(c, grid.dim)

    def __call__(self, points, order=0):
        """Evaluate at ``points`` of shape (P, d).

        Returns value (P, c) and, for ``order >= 1``, gradient (P, d, c) and,
        for ``order >= 2``, Hessian (P, d, d, c).
        """
        p = np.atleast_2d(np.asarray(points, float))
        d = self.grid.dim
        E = [np.exp(1j * np.outer(p[:, a], self.k[a])) for a in range(d)]
        ik = [1j * k for k in self.k]
        c = self.coef.shape[-1]
        P = p.shape[0]
        if d == 1:
            def ev(o):
                return np.real((E[0] * ik[0] ** o) @ self.coef)
            val = ev(0)
            grad = ev(1)[:, None, :] if order >= 1 else None
            hess = ev(2)[:, None, None, :] if order >= 2 else None
        else:
            n1, n2 = self.grid.sizes
            C = self.coef.reshape(n1, n2 * c)
            T = {o: ((E[0] * ik[0] ** o) @ C).reshape(P, n2, c) for o in range(order + 1)}
            E2 = {o: E[1] * ik[1] ** o for o in range(order + 1)}

            def ev(o1, o2):
                return np.real(np.einsum("plc,pl->pc", T[o1], E2[o2]))
            val = ev(0, 0)
            grad = hess = None
            if order >= 1:
                grad = np.stack([ev(1, 0), ev(0, 1)], axis=1)
            if order >= 2:
                hxy = ev(1, 1)
                hess = np.stack(
                    [np.stack([ev(2, 0), hxy], axis=1), np.stack([hxy, ev(0, 2)], axis=1)],
                    axis=1,
                )
        if self.linear is not None:
            val = val + p @ self.linear.T
            if grad is not None:
                grad = grad + self.linear.T[None, :, :]
        out = [val]
        if order >= 1:
            out.append(grad)
        if order >= 2:
            out.append(hess)
        return out[0] if order == 0 else tuple(out)


# -- snapshot files ----------------------------------------------------------------

_MAGIC = "SMCF1"


def _fmt_float(x):
    return repr(float(x))


def write_snapshot(path, grid: Grid, values, t=0.0, extra=None):
    """Write ``values`` (shape ``(*grid.shape, c)``) as a snapshot file.

    The header is ``SMCF1 d=<d> N=<N1,..> L=<L1,..> c=<c> t=<time>`` plus any
    ``extra`` key=value tokens, terminated by a newline.  The payload is
    little-endian float64, row-major over the grid axes, components fastest.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim == grid.dim:
        v = v[..., None]
    c = int(np.prod(v.shape[grid.dim :]))
    v = v.reshape(grid.shape + (c,))
    tokens = [
        _MAGIC,
        f"d={grid.dim}",
        "N=" + ",".join(str(n) for n in grid.sizes),
        "L=" + ",".join(_fmt_float(x) for x in grid.lengths),
        f"c={c}",
        f"t={_fmt_float(t)}",
    ]
    for key, val in (extra or {}).items():
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", key):
            raise ValueError(f"bad header key {key!r}")
        if isinstance(val, (list, tuple, np.ndarray)):
            val = ",".join(_fmt_float(x) for x in np.ravel(val))
        tokens.append(f"{key}={val}")
    header = (" ".join(tokens) + "\n").encode("ascii")
    Path(path).write_bytes(header + v.astype("<f8").tobytes(order="C"))


def read_snapshot(path):
    """Inverse of :func:`write_snapshot`; returns (grid, values, t, extra)."""
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    tokens = raw[:nl].decode("ascii").split()
    if not tokens or tokens[0] != _MAGIC:
        raise GridError(f"{path}: not an SMCF1 snapshot")
    kv = dict(tok.split("=", 1) for tok in tokens[1:])
    d = int(kv.pop("d"))
    sizes = tuple(int(x) for x in kv.pop("N").split(","))
    lengths = tuple(float(x) for x in kv.pop("L").split(","))
    c = int(kv.pop("c"))
    t = float(kv.pop("t"))
    grid = Grid(sizes, lengths)
    if grid.dim != d:
        raise GridError(f"{path}: header dimension mismatch")
    data = np.frombuffer(raw[nl + 1 :], dtype="<f8")
    if data.size != grid.npoints * c:
        raise GridError(f"{path}: payload has {data.size} values, expected {grid.npoints * c}")
    return grid, data.reshape(grid.shape + (c,)).astype(float), t, kv
