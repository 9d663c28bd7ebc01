"""Linearization diagnostics, L^2 distance between surfaces and uniqueness runs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientSamples, NoNearestPoint, NotGraphLike
from .flows import FlowConfig, GaugeSample, _time_derivatives, sample_state, step_rk4
from .frame import GaugeFrame
from .geometry import GeometryBundle, Immersion, complex_shape, compute_geometry, covariant_derivative
from .grid import Interpolant
from .norms import intrinsic_sobolev

__all__ = [
    "LinearizedState",
    "decompose_variation",
    "LinearSample",
    "linear_series",
    "linearized_residual",
    "omega_energy",
    "energy_growth",
    "l2_distance",
    "matched_reparametrization",
    "UniquenessReport",
    "uniqueness_experiment",
]

NEWTON_ITERS = 20
MIN_ENERGY_SAMPLES = 10


@dataclass(frozen=True, eq=False)
class LinearizedState:
    """omega = Xi . m and U^c of a variation dF = Xi + U^c d_c F."""

    omega: np.ndarray = field(repr=False)
    U: np.ndarray = field(repr=False)
    Xi: np.ndarray = field(repr=False)
    source: tuple = ()

    def reconstruct(self, geo: GeometryBundle):
        return self.Xi + np.einsum("...c,...cn->...n", self.U, geo.dF)


def decompose_variation(geo: GeometryBundle, frame: GaugeFrame, variation, source=()) -> LinearizedState:
    variation = np.asarray(variation, float)
    if variation.shape != geo.dF.shape[:-2] + geo.dF.shape[-1:]:
        raise ValueError(f"variation has shape {variation.shape}, expected {geo.dF.shape[:-2] + geo.dF.shape[-1:]}")
    c = np.einsum("...bn,...n->...b", geo.dF, variation)
    U = np.einsum("...cb,...b->...c", geo.g_inv, c)
    Xi = variation - np.einsum("...c,...cn->...n", U, geo.dF)
    omega = np.einsum("...n,...n->...", Xi, frame.nu1) + 1j * np.einsum("...n,...n->...", Xi, frame.nu2)
    return LinearizedState(omega, U, Xi, tuple(source))


# -- linearized equations along co-evolved pairs ------------------------------------


@dataclass(frozen=True, eq=False)
class LinearSample:
    base: GaugeSample = field(repr=False)
    state: LinearizedState = field(repr=False)
    dV: np.ndarray = field(default=None, repr=False)

    @property
    def t(self):
        return self.base.t


def linear_series(base: list, perturbed: list, separation: float, V="none"):
    """Pair up two trajectories (lists of (Immersion, GaugeFrame)) sampled at equal times.

    ``V`` names the tangential field both runs used: ``"none"`` for the
    direct integrator, ``"heat"`` for the heat gauge.
    """
    if len(base) != len(perturbed):
        raise InsufficientSamples("trajectories have different lengths")
    field_ = None if V == "none" else V
    out = []
    for (ia, fa), (ib, fb) in zip(base, perturbed):
        if abs(ia.time - ib.time) > 1e-12:
            raise InsufficientSamples(f"samples at t = {ia.time} and {ib.time} are not aligned")
        sa = sample_state(ia, fa, field_)
        var = (ib.values - ia.values) / separation
        st = decompose_variation(sa.geo, fa, var, ("base", "perturbed"))
        dV = None
        if field_ is not None:
            dV = (sample_state(ib, fb, field_).V - sa.V) / separation
        out.append(LinearSample(sa, st, dV))
    return out


def _omega_residual(s: GaugeSample, omega, domega, B):
    geo, lam, A, V = s.geo, s.shape.lam, s.frame.A, s.V
    D = covariant_derivative(omega, geo, A)
    DD = covariant_derivative(D, geo, A)
    lhs = 1j * (domega + 1j * B * omega - np.einsum("...c,...c->...", V, D))
    lhs = lhs + np.einsum("...ab,...ab->...", geo.g_inv, DD)
    lam_uu = np.einsum("...ac,...bd,...cd->...ab", geo.g_inv, geo.g_inv, lam)
    coef = np.real(lam_uu * np.conj(omega)[..., None, None])
    rhs = -np.einsum("...ab,...ab->...", coef, lam)
    return lhs - rhs


def _U_rhs(s: GaugeSample, st: LinearizedState, dV):
    geo, lam, psi, A, V = s.geo, s.shape.lam, s.shape.psi, s.frame.A, s.V
    U_low = np.einsum("...ab,...b->...a", geo.g, st.U)
    Dw = covariant_derivative(st.omega, geo, A)
    dpsi = covariant_derivative(psi, geo, A)
    lam_bar_ud = np.einsum("...gs,...sa->...ga", geo.g_inv, np.conj(lam))  # conj(lambda)^g_a
    out = np.imag(psi[..., None] * np.conj(Dw)) - np.imag(dpsi * np.conj(st.omega)[..., None])
    out = out + 2 * np.einsum("...ga,...g->...a", np.imag(psi[..., None, None] * lam_bar_ud), U_low)
    if dV is not None:
        V_low = np.einsum("...ab,...b->...a", geo.g, V)
        DV = covariant_derivative(V_low, geo)  # [a, c] = nabla_a V_c
        DV_mixed = np.einsum("...ac,...cg->...ag", DV, geo.g_inv)  # nabla_a V^g
        DU = covariant_derivative(U_low, geo)  # [s, a] = nabla_s U_a
        out = out + np.einsum("...ab,...b->...a", geo.g, dV)
        out = out + np.einsum("...ag,...g->...a", DV_mixed, U_low)
        out = out + np.einsum("...s,...sa->...a", V, DU)
    return out


def linearized_residual(series: list, parts=False):
    """Left-minus-right of the evolution equations for omega and U, by time differencing.

    Each entry is relative to the sample's max |omega| + max |U|.  With
    ``parts=True`` the omega and U residuals are returned separately.
    B = d_t nu1 . nu2 is measured from the frames by the same differencing,
    since a projected frame only has B = 0 up to O(dt).
    """
    dom = dict(_time_derivatives(series, lambda s: s.state.omega))
    dnu = dict(_time_derivatives(series, lambda s: s.base.frame.nu1))
    dU = dict(
        _time_derivatives(series, lambda s: np.einsum("...ab,...b->...a", s.base.geo.g, s.state.U))
    )
    ro, ru = [], []
    for i in sorted(dom):
        s = series[i]
        scale = float(np.max(np.abs(s.state.omega)) + np.max(np.abs(s.state.U))) or 1.0
        B = np.einsum("...n,...n->...", dnu[i], s.base.frame.nu2)
        ro.append(float(np.max(np.abs(_omega_residual(s.base, s.state.omega, dom[i], B)))) / scale)
        ru.append(float(np.max(np.abs(dU[i] - _U_rhs(s.base, s.state, s.dV)))) / scale)
    ro, ru = np.array(ro), np.array(ru)
    if parts:
        return ro, ru
    return np.maximum(ro, ru)


def omega_energy(sample: LinearSample, order=0) -> float:
    b = sample.base
    return intrinsic_sobolev(sample.state.omega, b.geo, b.frame.A, order) ** 2


def energy_growth(series: list, order=0) -> float:
    """max over the window of d/dt log ||omega||^2 in L^2 (order 0) or H^1 (order 1)."""
    if len(series) < MIN_ENERGY_SAMPLES:
        raise InsufficientSamples(f"need at least {MIN_ENERGY_SAMPLES} samples, got {len(series)}")
    t = np.array([s.t for s in series])
    E = np.array([omega_energy(s, order) for s in series])
    if np.all(E == 0):
        return 0.0
    if np.any(E <= 0):
        raise InsufficientSamples("omega vanishes on part of the window")
    rate = np.gradient(np.log(E), t, edge_order=2)
    return float(np.max(rate))


# -- distances between surfaces -------------------------------------------------------


def _nearest(ib: Interpolant, targets, seeds, tol):
    """Minimise |F_b(y) - p|^2 from each seed by damped Newton; returns y and distances."""
    y = seeds.copy()
    P, d = y.shape
    val, gr, hs = ib(y, order=2)
    r = val - targets
    phi = 0.5 * np.sum(r * r, -1)
    active = np.ones(P, bool)
    for _ in range(NEWTON_ITERS):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        ga = np.einsum("pan,pn->pa", gr[idx], r[idx])
        Ha = np.einsum("pan,pbn->pab", gr[idx], gr[idx]) + np.einsum("pabn,pn->pab", hs[idx], r[idx])
        Gn = np.einsum("pan,pbn->pab", gr[idx], gr[idx])
        ok = np.linalg.eigvalsh(Ha)[:, 0] > 1e-10 * np.linalg.eigvalsh(Gn)[:, -1]
        H = np.where(ok[:, None, None], Ha, Gn)  # fall back to Gauss-Newton if indefinite
        step = -np.linalg.solve(H, ga[..., None])[..., 0]
        lam = np.ones(idx.size)
        for _ in range(30):
            ny = y[idx] + lam[:, None] * step
            nv = ib(ny)
            nphi = 0.5 * np.sum((nv - targets[idx]) ** 2, -1)
            bad = nphi > phi[idx] + 1e-14 * (1 + phi[idx])
            if not np.any(bad):
                break
            lam = np.where(bad, lam * 0.5, lam)
        y[idx] = y[idx] + lam[:, None] * step
        val_i, gr_i, hs_i = ib(y[idx], order=2)
        val[idx], gr[idx], hs[idx] = val_i, gr_i, hs_i
        r[idx] = val_i - targets[idx]
        phi[idx] = 0.5 * np.sum(r[idx] ** 2, -1)
        conv = np.linalg.norm(lam[:, None] * step, axis=-1) < tol
        active[idx[conv]] = False
    if np.any(active):
        raise NoNearestPoint(f"nearest-point search did not converge at {int(active.sum())} points")
    return y, np.sqrt(2 * phi)


def _grid_seeds(im_b: Immersion, targets, chunk=512):
    pts = im_b.values.reshape(-1, im_b.n)
    q = im_b.grid.mesh.reshape(-1, im_b.grid.dim)
    best = np.empty(targets.shape[0], int)
    for i in range(0, targets.shape[0], chunk):
        t = targets[i : i + chunk]
        d2 = np.sum(t * t, -1)[:, None] - 2 * t @ pts.T + np.sum(pts * pts, -1)[None, :]
        best[i : i + chunk] = np.argmin(d2, axis=1)
    return q[best]


def l2_distance(im_a: Immersion, im_b: Immersion, tol=1e-11) -> float:
    """(integral over Sigma_a of dist(x, Sigma_b)^2 dvol_a)^(1/2)."""
    if im_a.grid.dim != im_b.grid.dim or im_a.n != im_b.n:
        raise ValueError("surfaces live in different spaces")
    targets = im_a.values.reshape(-1, im_a.n)
    seeds = _grid_seeds(im_b, targets)
    ib = Interpolant(im_b.grid, im_b.periodic, im_b.linear)
    _, dist = _nearest(ib, targets, seeds, tol * max(im_b.grid.lengths))
    geo = compute_geometry(im_a)
    return math.sqrt(max(geo.integrate(dist.reshape(im_a.grid.shape) ** 2), 0.0))


def _graph_slope(im: Immersion):
    d = im.grid.dim
    lin = im.linear
    ref = np.zeros_like(lin)
    ref[:d, :d] = np.eye(d)
    if not np.allclose(lin, ref, atol=1e-12):
        raise NotGraphLike("immersion is not a graph over its first coordinates")
    dp = im.grid.grad(im.periodic)
    base = np.abs(dp[..., :d]).max()
    return float(max(np.abs(dp[..., d:]).max(), base))


def matched_reparametrization(im_a: Immersion, im_b: Immersion, slope_bound=0.5, tol=1e-12) -> Immersion:
    """Reparametrize ``im_b`` so that F_b(y(x)) - F_a(x) is normal to Sigma_a at F_a(x)."""
    for im in (im_a, im_b):
        if _graph_slope(im) > slope_bound:
            raise NotGraphLike(f"graph slope exceeds {slope_bound}")
    grid, d = im_a.grid, im_a.grid.dim
    geo = compute_geometry(im_a)
    q = grid.mesh.reshape(-1, d)
    Fa = im_a.values.reshape(-1, im_a.n)
    Ta = geo.dF.reshape(-1, d, im_a.n)
    ib = Interpolant(grid, im_b.periodic, im_b.linear)
    y = q.copy()
    for _ in range(4 * NEWTON_ITERS):
        val, gr = ib(y, order=1)
        res = np.einsum("pan,pn->pa", Ta, val - Fa)
        if float(np.max(np.abs(res))) < tol:
            break
        J = np.einsum("pan,pbn->pab", Ta, gr)
        y = y - np.linalg.solve(J, res[..., None])[..., 0]
    else:
        raise NotGraphLike("normal-ray matching did not converge")
    per = ib(y) - q @ im_b.linear.T
    return im_b.with_periodic(per.reshape(grid.shape + (im_b.n,)))


# -- uniqueness ------------------------------------------------------------------------


@dataclass
class UniquenessReport:
    rows: list
    c_fit: float
    ratio: float
    bound: float
    lambda_linf_sq: float

    @property
    def passed(self) -> bool:
        return self.ratio <= self.bound

    def csv(self) -> str:
        lines = ["t,d_L2,omega_L2,omega_H1,U_L2,C_fit"]
        for r in self.rows:
            lines.append(",".join(repr(float(v)) for v in (r["t"], r["d_L2"], r["omega_L2"], r["omega_H1"], r["U_L2"], self.c_fit)))
        return "\n".join(lines) + "\n"

    def verdict(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} uniqueness d(T)/d(0) = {self.ratio:.6g} <= 1.1 exp(C_fit T) = {self.bound:.6g}"


def _is_graph(im):
    try:
        _graph_slope(im)
    except NotGraphLike:
        return False
    return True


def uniqueness_experiment(data_a, data_b, T, dt, substeps=1, samples=20) -> UniquenessReport:
    """Co-evolve two nearby solutions by the direct integrator and compare d_L2 with the Gronwall fit."""
    (ia, fa), (ib, fb) = data_a, data_b
    nsteps = max(int(round(T / dt)), 1)
    stride = max(nsteps // samples, 1)
    cfg = FlowConfig(dt=dt, t_end=T, substeps=substeps)
    cfg.check(compute_geometry(ia))
    cfg.check(compute_geometry(ib))
    graph = _is_graph(ia) and _is_graph(ib)
    rows, series, lam_max = [], [], 0.0
    sub = dt / substeps

    def record():
        nonlocal lam_max
        mb = matched_reparametrization(ia, ib) if graph else ib
        s = sample_state(ia, fa, None)
        st = decompose_variation(s.geo, fa, mb.values - ia.values, ("a", "b"))
        ls = LinearSample(s, st)
        series.append(ls)
        lam_sq = np.einsum("...ab,...ab->...", np.einsum("...ac,...bd,...cd->...ab", s.geo.g_inv, s.geo.g_inv, s.shape.lam), np.conj(s.shape.lam))
        lam_max = max(lam_max, float(np.max(np.real(lam_sq))))
        U_low = np.einsum("...ab,...b->...a", s.geo.g, st.U)
        rows.append(
            {
                "t": ia.time,
                "d_L2": l2_distance(ia, ib),
                "omega_L2": math.sqrt(omega_energy(ls)),
                "omega_H1": math.sqrt(omega_energy(ls, 1)),
                "U_L2": intrinsic_sobolev(U_low, s.geo, None, 0),
            }
        )

    record()
    for n in range(1, nsteps + 1):
        for _ in range(substeps):
            ia, fa = step_rk4(ia, fa, sub)
            ib, fb = step_rk4(ib, fb, sub)
        t = n * dt
        ia = ia.with_periodic(ia.periodic, t)
        ib = ib.with_periodic(ib.periodic, t)
        if n % stride == 0:
            record()
    c_fit = energy_growth(series)
    d0, dT = rows[0]["d_L2"], rows[-1]["d_L2"]
    ratio = dT / d0 if d0 > 0 else 0.0
    bound = 1.1 * math.exp(max(c_fit, 0.0) * rows[-1]["t"])
    return UniquenessReport(rows, c_fit, ratio, bound, lam_max)
