"""Time evolution of immersions and residuals of the gauge-fixed system.

The direct integrator advances F by classical RK4 on

    d_t F = -Im(psi conj(m)) + V^c d_c F,

the normal part being J H in the frame's orientation; swapping nu1 and nu2
(the opposite orientation of the normal plane) reverses the flow.  Two frame policies
are available: ``pullback`` re-projects the previous frame onto every stage
(B is then diagnostic), and ``heat`` integrates the frame's own equation of
motion with B = nabla^a A_a, which is what the gauge-system residuals need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InsufficientSamples, NotDiffeomorphism, Unstable
from .frame import (
    GaugeFrame,
    _project_orthonormalize,
    frame_from_normals,
    heat_gauge_B,
    pullback_frame,
    with_B,
)
from .geometry import (
    ComplexShape,
    GeometryBundle,
    Immersion,
    complex_shape,
    compute_geometry,
    covariant_derivative,
    laplace_beltrami,
)
from .grid import Interpolant

__all__ = [
    "FlowConfig",
    "EulerSchemeConfig",
    "heat_field",
    "smcf_velocity",
    "step_rk4",
    "integrate",
    "willmore_operator",
    "willmore_velocity",
    "willmore_regularize",
    "euler_step",
    "run_regularized_euler",
    "GaugeSample",
    "sample_state",
    "schrodinger_residual",
    "parabolic_residual",
    "compatibility_residual",
    "heat_reparametrize",
]

SCHEMES = ("rk4_direct", "regularized_euler")
GROWTH_FLOOR = 1e-4


# -- configuration ------------------------------------------------------------------


@dataclass(frozen=True)
class FlowConfig:
    """Time-stepping parameters.

    ``dt`` is the output/bookkeeping step; each step is split into
    ``substeps`` RK4 steps, and the stability bound applies to the substep.
    """

    dt: float
    t_end: float
    scheme: str = "rk4_direct"
    cfl_safety: float = 0.5
    substeps: int = 1

    def __post_init__(self):
        errs = []
        if not self.dt > 0:
            errs.append(f"dt must be positive (got {self.dt})")
        if not self.t_end >= 0:
            errs.append(f"t_end must be non-negative (got {self.t_end})")
        if self.scheme not in SCHEMES:
            errs.append(f"scheme must be one of {SCHEMES} (got {self.scheme!r})")
        if not 0 < self.cfl_safety <= 1:
            errs.append(f"cfl_safety must lie in (0, 1] (got {self.cfl_safety})")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            errs.append(f"substeps must be a positive integer (got {self.substeps})")
        if errs:
            raise ConfigError("; ".join(errs))

    @property
    def nsteps(self):
        return int(round(self.t_end / self.dt))

    def dt_limit(self, geo: GeometryBundle):
        h = min(geo.grid.spacing)
        ginv = float(np.max(np.linalg.eigvalsh(geo.g_inv)))
        return self.cfl_safety * h * h / ginv

    def check(self, geo: GeometryBundle):
        lim = self.dt_limit(geo)
        sub = self.dt / self.substeps
        if sub > lim * (1 + 1e-12):
            raise ConfigError(
                f"time step {sub:.3e} exceeds the stability bound {lim:.3e}"
                f" (cfl_safety * h^2 / max|g^-1|); raise substeps or lower dt"
            )


@dataclass(frozen=True)
class EulerSchemeConfig:
    epsilon: float
    willmore_substeps: int = 8
    splitting_constant: float | None = None

    def __post_init__(self):
        errs = []
        if not self.epsilon > 0:
            errs.append(f"epsilon must be positive (got {self.epsilon})")
        if int(self.willmore_substeps) != self.willmore_substeps or self.willmore_substeps < 4:
            errs.append(f"willmore_substeps must be an integer >= 4 (got {self.willmore_substeps})")
        if self.splitting_constant is not None and not self.splitting_constant > 0:
            errs.append(f"splitting_constant must be positive (got {self.splitting_constant})")
        if errs:
            raise ConfigError("; ".join(errs))

    @property
    def willmore_time(self):
        return self.epsilon**1.5


# -- direct flow -------------------------------------------------------------------


def heat_field(geo: GeometryBundle):
    """V^c = g^{ab} Gamma^c_ab, the advection field of heat coordinates."""
    return np.einsum("...ab,...cab->...c", geo.g_inv, geo.gamma)


def _resolve_V(V, im, geo):
    if V is None:
        return None
    if isinstance(V, str):
        if V != "heat":
            raise ValueError(f"unknown advection field {V!r}")
        return heat_field(geo)
    if callable(V):
        return V(im, geo)
    return np.asarray(V, float)


def smcf_velocity(im: Immersion, frame: GaugeFrame, V=None, geo=None, dealias=True):
    """-Im(psi conj(m)) + V^c d_c F."""
    geo = compute_geometry(im) if geo is None else geo
    shape = complex_shape(geo, frame)
    vel = -np.imag(shape.psi[..., None] * np.conj(frame.m))
    if V is not None:
        vel = vel + np.einsum("...c,...cn->...n", V, geo.dF)
    return im.grid.dealias(vel) if dealias else vel


def _frame_rate(geo, frame, vel, B):
    """Equation of motion of the normals for a given velocity and B."""
    dv = geo.grid.grad(vel)
    out = []
    for nu, other, sgn in ((frame.nu1, frame.nu2, 1.0), (frame.nu2, frame.nu1, -1.0)):
        c = np.einsum("...an,...n->...a", dv, nu)
        tang = np.einsum("...ab,...a,...bn->...n", geo.g_inv, c, geo.dF)
        out.append(sgn * B[..., None] * other - tang)
    return out


def step_rk4(im: Immersion, frame: GaugeFrame, dt, V=None, gauge="pullback", connection=True):
    """One classical RK4 step; returns the new immersion and frame.

    With ``connection=False`` the pullback policy leaves A stale; it is not
    read by the dynamics and ``integrate`` refreshes it at output steps.
    """
    if gauge == "pullback":
        def stage(p):
            # stage frames only feed psi and m, so the connection is skipped
            cur = im.with_periodic(p)
            geo = compute_geometry(cur)
            n1, n2 = _project_orthonormalize(frame.nu1, frame.nu2, geo)
            fr = GaugeFrame(im.grid, n1, n2, frame.A)
            return smcf_velocity(cur, fr, _resolve_V(V, cur, geo), geo)

        p0 = im.periodic
        k1 = stage(p0)
        k2 = stage(p0 + 0.5 * dt * k1)
        k3 = stage(p0 + 0.5 * dt * k2)
        k4 = stage(p0 + dt * k3)
        new = im.with_periodic(p0 + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4), im.time + dt)
        geo = compute_geometry(new)
        if connection:
            return new, pullback_frame(frame, new, geo)
        n1, n2 = _project_orthonormalize(frame.nu1, frame.nu2, geo)
        return new, GaugeFrame(im.grid, n1, n2, frame.A)

    if gauge != "heat":
        raise ValueError(f"unknown gauge {gauge!r}")

    def rhs(p, n1, n2):
        cur = im.with_periodic(p)
        geo = compute_geometry(cur)
        fr = frame_from_normals(im.grid, n1, n2)
        vel = smcf_velocity(cur, fr, _resolve_V(V, cur, geo), geo)
        B = heat_gauge_B(fr, geo)
        r1, r2 = _frame_rate(geo, fr, vel, B)
        return vel, r1, r2

    y0 = (im.periodic, frame.nu1, frame.nu2)
    k1 = rhs(*y0)
    k2 = rhs(*(a + 0.5 * dt * b for a, b in zip(y0, k1)))
    k3 = rhs(*(a + 0.5 * dt * b for a, b in zip(y0, k2)))
    k4 = rhs(*(a + dt * b for a, b in zip(y0, k3)))
    y = [a + dt / 6 * (b + 2 * c + 2 * e + f) for a, b, c, e, f in zip(y0, k1, k2, k3, k4)]
    new = im.with_periodic(y[0], im.time + dt)
    geo = compute_geometry(new)
    n1, n2 = _project_orthonormalize(y[1], y[2], geo)
    fr = frame_from_normals(im.grid, n1, n2)
    return new, with_B(fr, heat_gauge_B(fr, geo))


def integrate(im, frame, cfg: FlowConfig, V=None, gauge="pullback", observer=None):
    """Advance to ``cfg.t_end``; ``observer(im, frame, step)`` sees every output step."""
    cfg.check(compute_geometry(im))
    sub = cfg.dt / cfg.substeps
    t0 = im.time
    if observer is not None:
        observer(im, frame, 0)
    for n in range(1, cfg.nsteps + 1):
        for j in range(cfg.substeps):
            im, frame = step_rk4(im, frame, sub, V, gauge, connection=j == cfg.substeps - 1)
        # pin the clock to the nominal output time to avoid summation drift
        im = im.with_periodic(im.periodic, t0 + n * cfg.dt)
        if observer is not None:
            observer(im, frame, n)
    return im, frame


# -- Willmore-DeTurck regularization --------------------------------------------------


def _charged_laplacian(f, geo, A):
    D = covariant_derivative(f, geo, A)
    DD = covariant_derivative(D, geo, A)
    return D, DD, np.einsum("...ab,...ab->...", geo.g_inv, DD)


def willmore_operator(geo: GeometryBundle, frame: GaugeFrame, shape: ComplexShape = None):
    """Complex scalar L with normal Willmore velocity Re(L conj(m))."""
    shape = complex_shape(geo, frame) if shape is None else shape
    gi, A = geo.g_inv, frame.A
    psi, lam = shape.psi, shape.lam
    Dpsi, DDpsi, Lpsi = _charged_laplacian(psi, geo, A)
    _, _, L2psi = _charged_laplacian(Lpsi, geo, A)
    lam_uu = np.einsum("...ac,...bd,...cd->...ab", gi, gi, lam)
    grad2 = np.real(np.einsum("...ab,...a,...b->...", gi, Dpsi, np.conj(Dpsi)))
    dabs2 = geo.grid.grad(np.abs(psi) ** 2)
    dabs2_up = np.einsum("...sr,...r->...s", gi, dabs2)

    L = L2psi
    L = L + np.einsum("...ab,...ab->...", lam_uu, np.real(lam * np.conj(Lpsi)[..., None, None]))
    L = L - np.einsum("...ab,...ab->...", lam_uu, np.real(Dpsi[..., :, None] * np.conj(Dpsi)[..., None, :]))
    L = L + 1.5 * psi * grad2
    inner = 2 * np.real(np.einsum("...as,...a->...s", lam_uu, np.conj(Dpsi))) + 0.5 * dabs2_up
    L = L + np.einsum("...s,...s->...", Dpsi, inner)
    L = L + psi * np.real(np.einsum("...as,...sa->...", lam_uu, np.conj(DDpsi)))
    L = L + np.einsum("...sa,...as->...", DDpsi, np.real(lam_uu * np.conj(psi)[..., None, None]))
    return L


def willmore_velocity(im: Immersion, frame: GaugeFrame, geo=None):
    """Right side of the Willmore-DeTurck flow: Re(L conj(m)) + U^c d_c F."""
    geo = compute_geometry(im) if geo is None else geo
    L = willmore_operator(geo, frame)
    normal = np.real(L)[..., None] * frame.nu1 + np.imag(L)[..., None] * frame.nu2
    V = heat_field(geo)
    U = laplace_beltrami(laplace_beltrami(V, geo), geo)
    return normal + np.einsum("...c,...cn->...n", U, geo.dF)


def willmore_regularize(im: Immersion, frame: GaugeFrame, cfg: EulerSchemeConfig):
    """Flow by the Willmore-DeTurck velocity for Willmore time epsilon^(3/2).

    Each substep treats c |k|^6 implicitly and the remainder explicitly.
    """
    grid = im.grid
    ds = cfg.willmore_time / cfg.willmore_substeps
    k6 = grid.kabs**6
    for _ in range(cfg.willmore_substeps):
        geo = compute_geometry(im)
        frame = pullback_frame(frame, im, geo)
        if cfg.splitting_constant is None:
            c = float(np.min(np.linalg.eigvalsh(geo.g_inv))) ** 3
        else:
            c = cfg.splitting_constant
        W = willmore_velocity(im, frame, geo)
        Fh = grid.fft(im.periodic)
        Wh = grid.fft(W)
        den = grid._b(1.0 + ds * c * k6, Fh)
        new_h = (Fh + ds * (Wh + grid._b(c * k6, Fh) * Fh)) / den
        a0, a1 = np.abs(Fh), np.abs(new_h)
        # modes far below the spectrum's peak may be driven by the source; only
        # resolved modes are tested for amplification
        floor = GROWTH_FLOOR * max(float(a0.max()), 1e-300)
        grow = a1[a0 > floor] / a0[a0 > floor]
        if grow.size and float(grow.max()) > 10.0:
            raise Unstable(f"a Fourier mode grew by {float(grow.max()):.1f}x in one Willmore substep")
        im = im.with_periodic(grid.ifft(new_h))
    geo = compute_geometry(im)
    return im, pullback_frame(frame, im, geo)


def euler_step(im_eps: Immersion, frame_eps: GaugeFrame, epsilon, geo=None) -> Immersion:
    """F_1 = F_eps - eps Im(psi_eps conj(m_eps)), time advanced by eps."""
    vel = smcf_velocity(im_eps, frame_eps, geo=geo, dealias=False)
    return im_eps.advanced(vel, epsilon)


def run_regularized_euler(im0, frame0, epsilon, t_end, cfg: EulerSchemeConfig = None, observer=None):
    """Alternate Willmore regularization and Euler steps; returns the list of iterates."""
    cfg = EulerSchemeConfig(epsilon) if cfg is None else cfg
    n = t_end / epsilon
    if abs(n - round(n)) > 1e-9 * max(1.0, n):
        raise ConfigError(f"t_end / epsilon = {n} is not an integer")
    n = int(round(n))
    im, fr = im0, frame0
    traj = [im]
    if observer is not None:
        observer(im, fr, 0)
    for j in range(1, n + 1):
        im_e, fr_e = willmore_regularize(im, fr, cfg)
        im = euler_step(im_e, fr_e, epsilon)
        im = im.with_periodic(im.periodic, im0.time + j * epsilon)
        fr = pullback_frame(fr_e, im)
        traj.append(im)
        if observer is not None:
            observer(im, fr, j)
    return traj


# -- residuals of the gauge-fixed system --------------------------------------------


@dataclass(frozen=True, eq=False)
class GaugeSample:
    t: float
    geo: GeometryBundle = field(repr=False)
    frame: GaugeFrame = field(repr=False)
    shape: ComplexShape = field(repr=False)
    V: np.ndarray = field(repr=False)


def sample_state(im: Immersion, frame: GaugeFrame, V="heat") -> GaugeSample:
    geo = compute_geometry(im)
    Vf = _resolve_V(V, im, geo)
    if Vf is None:
        Vf = np.zeros(im.grid.shape + (im.grid.dim,))
    return GaugeSample(im.time, geo, frame, complex_shape(geo, frame), Vf)


def _time_derivatives(series, getter):
    """Fourth-order central differences at interior samples 2..n-3."""
    if len(series) < 5:
        raise InsufficientSamples(f"need at least 5 time slices, got {len(series)}")
    t = np.array([s.t for s in series])
    dt = np.diff(t)
    if np.max(np.abs(dt - dt[0])) > 1e-9 * abs(dt[0]):
        raise InsufficientSamples("time slices are not uniformly spaced")
    h = dt[0]
    vals = [getter(s) for s in series]
    out = []
    for i in range(2, len(series) - 2):
        out.append((i, (vals[i - 2] - 8 * vals[i - 1] + 8 * vals[i + 1] - vals[i + 2]) / (12 * h)))
    return out


def _contractions(geo, lam):
    gi = geo.g_inv
    lam_ud = np.einsum("...gs,...sa->...ga", gi, lam)  # lambda^g_a
    lam_uu = np.einsum("...ac,...bd,...cd->...ab", gi, gi, lam)
    return lam_ud, lam_uu


def _schrodinger_rhs(geo, lam, psi, V):
    lam_ud, lam_uu = _contractions(geo, lam)
    V_low = np.einsum("...ab,...b->...a", geo.g, V)
    DV = covariant_derivative(V_low, geo)  # [b, c] = nabla_b V_c
    T1 = 1j * np.einsum("...ga,...bg->...ab", lam_ud, DV)
    T2 = np.swapaxes(T1, -1, -2)
    T3 = psi[..., None, None] * np.real(np.einsum("...ad,...db->...ab", lam, np.conj(lam_ud)))
    # outer[p, q, r, s] = Re(l_pq conj(l_rs))
    outer = np.real(lam[..., :, :, None, None] * np.conj(lam)[..., None, None, :, :])
    R1 = np.einsum("...sdab,...sd->...ab", outer, lam_uu)  # Re(l_sd conj(l_ab)) l^{sd}
    R2 = np.einsum("...sbad,...sd->...ab", outer, lam_uu)  # Re(l_sb conj(l_ad)) l^{sd}
    T4 = -(R1 - R2)
    T5 = -np.einsum("...am,...ms,...sb->...ab", lam, np.conj(lam_ud), lam_ud)
    return T1 + T2 + T3 + T4 + T5


def schrodinger_residual(series):
    """Max-norm residual of the covariant Schrodinger equation for lambda per interior sample.

    B is taken from each sample's frame; the heat integrator stores
    B = nabla^a A_a there.
    """
    out = []
    for i, dlam in _time_derivatives(series, lambda s: s.shape.lam):
        s = series[i]
        geo, lam, A, B, V = s.geo, s.shape.lam, s.frame.A, s.frame.B, s.V
        D = covariant_derivative(lam, geo, A)  # [c, a, b]
        DD = covariant_derivative(D, geo, A)  # [s, c, a, b]
        lhs = 1j * (dlam + 1j * B[..., None, None] * lam - np.einsum("...c,...cab->...ab", V, D))
        lhs = lhs + np.einsum("...sc,...scab->...ab", geo.g_inv, DD)
        res = lhs - _schrodinger_rhs(geo, lam, s.shape.psi, V)
        out.append(float(np.max(np.abs(res))))
    return np.array(out)


def _metric_rhs(geo, lam, psi):
    gi, g, G = geo.g_inv, geo.g, geo.gamma
    lam_ud, _ = _contractions(geo, lam)
    G_low = np.einsum("...sr,...rab->...abs", g, G)  # Gamma_{ab,s}
    dgi = geo.grid.grad(gi)  # [m, a, b] = d_m g^{ab}
    r = 2 * np.real(lam * np.conj(psi)[..., None, None] - np.einsum("...ms,...sn->...mn", lam, np.conj(lam_ud)))
    r = r + 2 * np.imag(psi[..., None, None] * np.conj(lam))
    r = r - 2 * np.einsum("...ab,...mbs,...san->...mn", gi, G_low, G)
    q = np.einsum("...mab,...abn->...mn", dgi, G_low)
    return r + q + np.swapaxes(q, -1, -2)


def _connection_rhs(geo, lam, psi, A, V):
    gi = geo.g_inv
    lam_ud, lam_uu = _contractions(geo, lam)
    T = np.imag(np.einsum("...ga,...sg->...as", lam_ud, np.conj(lam)))  # Im(l^g_a conj(l_sg))
    DT = covariant_derivative(T, geo)  # [c, a, s]
    r = np.einsum("...cs,...cas->...a", gi, DT)
    X = np.real(lam * np.conj(psi)[..., None, None])  # X_{ga}
    DX = covariant_derivative(X, geo)  # [r, g, a]
    r = r + np.einsum("...rg,...rga->...a", gi, DX)
    r = r - 0.5 * geo.grid.grad(np.abs(psi) ** 2)
    coef = np.real(
        np.einsum("...sa->...as", lam_ud) * np.conj(psi)[..., None, None]
        - np.einsum("...ab,...bs->...as", lam, np.conj(lam_uu))
    )
    r = r - np.einsum("...as,...s->...a", coef, A)
    K = np.imag(np.einsum("...ga,...gs->...as", lam_ud, np.conj(lam)))
    return r - np.einsum("...as,...s->...a", K, V)


def parabolic_residual(series):
    """Residuals of the metric and connection heat equations per interior sample."""
    gres = []
    for i, dg in _time_derivatives(series, lambda s: s.geo.g):
        s = series[i]
        geo = s.geo
        lhs = dg - np.einsum("...ab,...abmn->...mn", geo.g_inv, geo.grid.hessian(geo.g))
        gres.append(float(np.max(np.abs(lhs - _metric_rhs(geo, s.shape.lam, s.shape.psi)))))
    ares = []
    for i, dA in _time_derivatives(series, lambda s: s.frame.A):
        s = series[i]
        geo, A = s.geo, s.frame.A
        DDA = covariant_derivative(covariant_derivative(A, geo), geo)  # [s, r, a]
        lhs = dA - np.einsum("...sr,...sra->...a", geo.g_inv, DDA)
        ares.append(float(np.max(np.abs(lhs - _connection_rhs(geo, s.shape.lam, s.shape.psi, A, s.V)))))
    return np.array(gres), np.array(ares)


def compatibility_residual(series):
    """Residual of d_t A_a - d_a B against its curvature expression."""
    out = []
    for i, dA in _time_derivatives(series, lambda s: s.frame.A):
        s = series[i]
        geo, lam, psi, A, V = s.geo, s.shape.lam, s.shape.psi, s.frame.A, s.V
        lam_ud, _ = _contractions(geo, lam)
        Dpsi = covariant_derivative(psi, geo, A)
        rhs = np.real(np.einsum("...ga,...g->...a", lam_ud, np.conj(Dpsi)))
        K = np.imag(np.einsum("...ga,...gs->...as", lam_ud, np.conj(lam)))
        rhs = rhs - np.einsum("...as,...s->...a", K, V)
        res = dA - geo.grid.grad(s.frame.B) - rhs
        out.append(float(np.max(np.abs(res))))
    return np.array(out)


# -- heat reparametrization ------------------------------------------------------------


def heat_reparametrize(im: Immersion, t_relax, max_newton=30, tol=1e-12):
    """Move to coordinates y solving d_t y = Delta_g y (g frozen), y(0) = x.

    Returns F o y^{-1} resampled on the grid.
    """
    if t_relax == 0:
        return im
    grid = im.grid
    d = grid.dim
    geo = compute_geometry(im)
    V = heat_field(geo)
    lim = 0.25 * min(grid.spacing) ** 2 / float(np.max(np.linalg.eigvalsh(geo.g_inv)))
    n = max(1, math.ceil(t_relax / lim))
    h = t_relax / n

    def rhs(u):
        return laplace_beltrami(u, geo) - V

    u = np.zeros(grid.shape + (d,))
    for _ in range(n):
        k1 = rhs(u)
        k2 = rhs(u + 0.5 * h * k1)
        k3 = rhs(u + 0.5 * h * k2)
        k4 = rhs(u + h * k3)
        u = u + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    jac = np.eye(d) + np.swapaxes(grid.grad(u), -1, -2)  # [c, a] = d_a y^c
    det = np.linalg.det(jac)
    if float(np.min(det)) <= 0.1:
        raise NotDiffeomorphism(f"Jacobian determinant reached {float(np.min(det)):.3f}")

    q = grid.mesh.reshape(-1, d)
    iu = Interpolant(grid, u)
    x = q - iu(q)
    for _ in range(max_newton):
        val, gr = iu(x, order=1)
        r = x + val - q
        if float(np.max(np.abs(r))) < tol:
            break
        J = np.eye(d)[None] + np.swapaxes(gr, 1, 2)
        x = x - np.linalg.solve(J, r[..., None])[..., 0]
    else:
        raise NotDiffeomorphism("inverse coordinate map did not converge")
    iF = Interpolant(grid, im.periodic)
    p = iF(x) + (x - q) @ im.linear.T
    return im.with_periodic(p.reshape(grid.shape + (im.n,)))
