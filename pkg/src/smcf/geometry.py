"""Pointwise differential geometry of sampled immersions.

An immersion is stored as a periodic part plus a constant linear part,
``F(x) = linear @ x + periodic(x)``, so graphs over a flat torus (whose first
coordinates grow linearly) are handled without breaking periodicity of any
derivative.  All derivatives are spectral.

Index conventions for arrays (spatial axes omitted):

* ``dF[a, :]``         = d_a F
* ``ddF[a, b, :]``      = d_a d_b F
* ``g[a, b]``, ``g_inv[a, b]``
* ``gamma[c, a, b]``    = Gamma^c_{ab}
* ``Lambda[a, b, :]``   = normal part of d_a d_b F
* ``lam[a, b]``         = complex second fundamental form
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import FrameMismatch, NotNormal, RankDeficient
from .grid import Grid

EPS_RANK = 1e-8

__all__ = [
    "EPS_RANK",
    "Immersion",
    "GeometryBundle",
    "ComplexShape",
    "compute_geometry",
    "complex_shape",
    "curvature_tensors",
    "intrinsic_riemann",
    "gauss_residual",
    "codazzi_residual",
    "ricci_equation_residual",
    "j_rotate",
    "volume",
    "covariant_derivative",
    "raise_index",
    "lower_index",
    "tensor_norm_sq",
    "laplace_beltrami",
]


@dataclass(frozen=True, eq=False)
class Immersion:
    grid: Grid
    periodic: np.ndarray = field(repr=False)
    linear: np.ndarray = field(default=None, repr=False)
    time: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.periodic, dtype=float)
        if p.shape[: self.grid.dim] != self.grid.shape or p.ndim != self.grid.dim + 1:
            raise ValueError(f"immersion array of shape {p.shape} does not fit grid {self.grid.shape}")
        n = p.shape[-1]
        if n != self.grid.dim + 2:
            raise ValueError(f"expected {self.grid.dim + 2} ambient components, got {n}")
        lin = np.zeros((n, self.grid.dim)) if self.linear is None else np.asarray(self.linear, float)
        if lin.shape != (n, self.grid.dim):
            raise ValueError(f"linear part must have shape {(n, self.grid.dim)}")
        object.__setattr__(self, "periodic", p)
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "time", float(self.time))

    @classmethod
    def from_values(cls, grid, values, linear=None, time=0.0):
        values = np.asarray(values, float)
        lin = np.zeros((values.shape[-1], grid.dim)) if linear is None else np.asarray(linear, float)
        return cls(grid, values - grid.mesh @ lin.T, lin, time)

    @property
    def n(self):
        return self.periodic.shape[-1]

    @property
    def values(self):
        return self.periodic + self.grid.mesh @ self.linear.T

    def with_periodic(self, periodic, time=None):
        return replace(self, periodic=periodic, time=self.time if time is None else time)

    def advanced(self, velocity, dt):
        """F + dt * velocity with time advanced by dt (velocity is periodic)."""
        return replace(self, periodic=self.periodic + dt * velocity, time=self.time + dt)

    def lp(self, h, kind="below"):
        return replace(self, periodic=self.grid.lp(self.periodic, h, kind))


@dataclass(frozen=True, eq=False)
class GeometryBundle:
    grid: Grid
    dF: np.ndarray = field(repr=False)
    ddF: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)
    g_inv: np.ndarray = field(repr=False)
    det_g: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)
    Lambda: np.ndarray = field(repr=False)
    H: np.ndarray = field(repr=False)

    @property
    def dim(self):
        return self.grid.dim

    @property
    def sqrt_det(self):
        return np.sqrt(self.det_g)

    def integrate(self, f):
        """Integral of a scalar field against dvol_g."""
        return float(self.grid.integrate(f * self.sqrt_det))

    def metric_eigenvalues(self):
        return np.linalg.eigvalsh(self.g)

    def tangential_projection(self, v):
        """Tangential component g^{ab} (v . F_a) F_b of an ambient vector field."""
        c = np.einsum("...an,...n->...a", self.dF, v)
        return np.einsum("...ab,...a,...bn->...n", self.g_inv, c, self.dF)

    def normal_projection(self, v):
        return v - self.tangential_projection(v)


@dataclass(frozen=True, eq=False)
class ComplexShape:
    grid: Grid
    lam: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)


def _invert(g):
    d = g.shape[-1]
    if d == 1:
        det = g[..., 0, 0]
        with np.errstate(divide="ignore"):
            inv = 1.0 / det[..., None, None]
        return inv, det
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
    inv = np.empty_like(g)
    with np.errstate(divide="ignore", invalid="ignore"):  # degenerate points are rejected by the caller
        inv[..., 0, 0] = g[..., 1, 1] / det
        inv[..., 1, 1] = g[..., 0, 0] / det
        inv[..., 0, 1] = inv[..., 1, 0] = -g[..., 0, 1] / det
    return inv, det


def compute_geometry(im: Immersion) -> GeometryBundle:
    """Metric, inverse, Christoffel symbols, second fundamental form and H."""
    grid = im.grid
    dF, ddF = grid.grad_hessian(im.periodic)
    dF = dF + im.linear.T
    g = np.einsum("...an,...bn->...ab", dF, dF)
    g = 0.5 * (g + np.swapaxes(g, -1, -2))
    g_inv, det = _invert(g)
    if not np.all(det > EPS_RANK):
        raise RankDeficient(f"det g reached {float(det.min()):.3e} (threshold {EPS_RANK})")
    gl = np.einsum("...abn,...sn->...abs", ddF, dF)
    gamma = np.einsum("...cs,...abs->...cab", g_inv, gl)
    Lam = ddF - np.einsum("...cab,...cn->...abn", gamma, dF)
    H = np.einsum("...ab,...abn->...n", g_inv, Lam)
    return GeometryBundle(grid, dF, ddF, g, g_inv, det, gamma, Lam, H)


def complex_shape(geo: GeometryBundle, frame) -> ComplexShape:
    """lambda_ab = d_a d_b F . (nu1 + i nu2) and its trace psi."""
    if frame.grid != geo.grid:
        raise FrameMismatch("frame and geometry live on different grids")
    m = frame.nu1 + 1j * frame.nu2
    lam = np.einsum("...abn,...n->...ab", geo.ddF, m)
    psi = np.einsum("...ab,...ab->...", geo.g_inv, lam)
    return ComplexShape(geo.grid, lam, psi)


# -- tensor calculus -----------------------------------------------------------


def _letters(k, skip=""):
    pool = [c for c in string.ascii_lowercase if c not in skip]
    return "".join(pool[:k])


def _apply(M, T, pos, dim):
    """sum_z M[..., a, z] T[..., z, ...] with z at tensor slot ``pos``; a takes its place."""
    ax = dim + pos
    Tm = np.moveaxis(T, ax, -1)
    rest = Tm.ndim - dim - 1
    Mb = M.reshape(M.shape[:dim] + (1,) * rest + M.shape[-2:])
    out = Mb[..., 0] * Tm[..., :1]
    for z in range(1, Tm.shape[-1]):
        out = out + Mb[..., z] * Tm[..., z : z + 1]
    return np.moveaxis(out, -1, ax)


def raise_index(T, g_inv, pos, dim):
    """Raise tensor index ``pos`` (counted after the spatial axes)."""
    return _apply(g_inv, T, pos, dim)


def lower_index(T, g, pos, dim):
    return raise_index(T, g, pos, dim)


def tensor_norm_sq(T, g_inv, dim):
    """|T|_g^2 pointwise, all indices of T covariant."""
    r = T.ndim - dim
    U = T
    for i in range(r):
        U = raise_index(U, g_inv, i, dim)
    return np.real(np.sum(U * np.conj(T), axis=tuple(range(dim, T.ndim))))


def covariant_derivative(T, geo: GeometryBundle, A=None):
    """nabla^A_c T_{a1..ar} with the derivative index placed first.

    Every index of ``T`` is covariant.  ``A`` adds the charge term i A_c T;
    pass ``None`` for uncharged tensors.
    """
    d = geo.dim
    r = T.ndim - d
    out = geo.grid.grad(T)
    for i in range(r):
        # Gamma^z_{c a_i} T_{.. z ..} for each derivative direction c
        term = np.stack([_apply(np.swapaxes(geo.gamma[..., :, c, :], -1, -2), T, i, d) for c in range(d)], axis=d)
        out = out - term
    if A is not None:
        out = out + 1j * A.reshape(A.shape + (1,) * r) * T[(Ellipsis, None) + (slice(None),) * r]
    return out


def laplace_beltrami(f, geo: GeometryBundle):
    """Delta_g f = g^{ab}(d_a d_b f - Gamma^c_ab d_c f) for scalar (or vector of scalars) f."""
    grid = geo.grid
    extra = f.ndim - grid.dim
    if extra > 1:
        raise ValueError("laplace_beltrami accepts scalars or stacks of scalars")
    trail = "n" if extra else ""
    hf = grid.hessian(f)
    gf = grid.grad(f)
    V = np.einsum("...ab,...cab->...c", geo.g_inv, geo.gamma)
    return np.einsum(f"...ab,...ab{trail}->...{trail}", geo.g_inv, hf) - np.einsum(
        f"...c,...c{trail}->...{trail}", V, gf
    )


# -- curvature -----------------------------------------------------------------


def _mixed(lam, g_inv):
    """lambda^c_a = g^{cs} lambda_{sa}."""
    return np.einsum("...cs,...sa->...ca", g_inv, lam)


def curvature_tensors(shape: ComplexShape, geo: GeometryBundle):
    """Riemann R_{sgab} and Ricci tensors from the complex second fundamental form."""
    lam = shape.lam
    if shape.grid != geo.grid:
        raise FrameMismatch("shape and geometry live on different grids")
    R = np.real(
        np.einsum("...bg,...as->...sgab", lam, np.conj(lam))
        - np.einsum("...ag,...bs->...sgab", lam, np.conj(lam))
    )
    lam_up = _mixed(lam, geo.g_inv)  # lambda^a_b
    Ric = np.real(
        lam * np.conj(shape.psi)[..., None, None]
        - np.einsum("...ga,...ab->...gb", lam, np.conj(lam_up))
    )
    return R, Ric


def intrinsic_riemann(geo: GeometryBundle):
    """R_{sgab} from the metric alone, via derivatives of the Christoffel symbols.

    R^r_{gab} = d_a Gamma^r_{bg} - d_b Gamma^r_{ag}
                + Gamma^r_{al} Gamma^l_{bg} - Gamma^r_{bl} Gamma^l_{ag}
    """
    G = geo.gamma
    dG = geo.grid.grad(G)  # dG[e, r, a, b] = d_e Gamma^r_{ab}
    t1 = np.einsum("...arbg->...rgab", dG)
    t2 = np.einsum("...brag->...rgab", dG)
    t3 = np.einsum("...ral,...lbg->...rgab", G, G)
    t4 = np.einsum("...rbl,...lag->...rgab", G, G)
    Rup = t1 - t2 + t3 - t4
    return np.einsum("...sr,...rgab->...sgab", geo.g, Rup)


def gauss_residual(shape: ComplexShape, geo: GeometryBundle) -> float:
    R, _ = curvature_tensors(shape, geo)
    return float(np.max(np.abs(R - intrinsic_riemann(geo))))


def codazzi_residual(shape: ComplexShape, geo: GeometryBundle, A) -> float:
    """max |nabla^A_a lambda_bc - nabla^A_b lambda_ac|."""
    C = covariant_derivative(shape.lam, geo, A)
    return float(np.max(np.abs(C - np.swapaxes(C, -3, -2))))


def ricci_equation_residual(shape: ComplexShape, geo: GeometryBundle, A) -> float:
    """max |d_a A_b - d_b A_a - Im(lambda^c_a conj(lambda_bc))|."""
    dA = geo.grid.grad(A)
    curl = dA - np.swapaxes(dA, -1, -2)
    lam = shape.lam
    rhs = np.imag(np.einsum("...cs,...sa,...bc->...ab", geo.g_inv, lam, np.conj(lam)))
    return float(np.max(np.abs(curl - rhs)))


def j_rotate(v, frame, tol=1e-8):
    """Rotate a normal field by a quarter turn: J nu1 = nu2, J nu2 = -nu1."""
    a = np.einsum("...n,...n->...", v, frame.nu1)
    b = np.einsum("...n,...n->...", v, frame.nu2)
    rest = v - a[..., None] * frame.nu1 - b[..., None] * frame.nu2
    scale = max(1.0, float(np.max(np.abs(v))))
    if np.max(np.abs(rest)) > tol * scale:
        raise NotNormal(f"vector field has tangential part {float(np.max(np.abs(rest))):.2e}")
    return a[..., None] * frame.nu2 - b[..., None] * frame.nu1


def volume(geo: GeometryBundle) -> float:
    """Induced volume: integral of sqrt(det g) over the parameter box."""
    return float(geo.grid.integrate(geo.sqrt_det))
