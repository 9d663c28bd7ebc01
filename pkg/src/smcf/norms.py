"""Sobolev norms, regularization-family norms and frequency envelopes.

The family norms are evaluated on the canonical low-pass family
F^(h) = P_{<h} F, h = h0, h0 + dh, ... up to the first h at which P_{<h} is
the identity on the grid.  Past that point every member equals the original
state, so each h-integral has an exact geometric tail that is added in
closed form.  Because the infimum over all regularizations is not searched,
the X^s, Y^{s+1} and Z^s values are upper bounds for the true norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadDelta, CapExceeded, FamilyTooShort
from .frame import GaugeFrame, pullback_frame
from .geometry import GeometryBundle, Immersion, complex_shape, compute_geometry, covariant_derivative, tensor_norm_sq
from .grid import Grid

__all__ = [
    "K_CAP",
    "intrinsic_sobolev",
    "extrinsic_sobolev",
    "FamilyMember",
    "RegularizationFamily",
    "build_family",
    "xs_norm",
    "ys_zs_norms",
    "FrequencyEnvelope",
    "frequency_envelope",
]

K_CAP = 6
MIN_SAMPLES = 8


def _intrinsic_levels(tensor, geo: GeometryBundle, A, k):
    """integral |nabla^{A,l} T|_g^2 dvol for l = 0..k."""
    T = np.asarray(tensor)
    out = []
    for lvl in range(k + 1):
        if lvl:
            T = covariant_derivative(T, geo, A)
        out.append(geo.integrate(tensor_norm_sq(T, geo.g_inv, geo.dim)))
    return np.array(out)


def intrinsic_sobolev(tensor, geo: GeometryBundle, A=None, k: int = 0) -> float:
    """sqrt(sum_{l<=k} integral |nabla^{A,l} T|_g^2 dvol), all indices of T covariant."""
    if k > K_CAP:
        raise CapExceeded(f"intrinsic Sobolev order {k} exceeds the cap {K_CAP}")
    if k < 0:
        raise ValueError("order must be non-negative")
    return math.sqrt(max(float(np.sum(_intrinsic_levels(tensor, geo, A, k))), 0.0))


def _sobolev_weight(grid: Grid, s, homogeneous=0.0):
    k = grid.kabs_full
    w = (1.0 + k * k) ** (0.5 * s)
    if homogeneous:
        w = w * k**homogeneous
    return w


def extrinsic_sobolev(f, s: float, grid: Grid, homogeneous: float = 0.0) -> float:
    """||<xi>^s |xi|^homogeneous f^||_{L^2}, summed over components.

    ``homogeneous`` realises |D|^sigma; it is zero for the plain H^s norm.
    """
    f = np.asarray(f)
    return grid.spectral_l2_norm(f, _sobolev_weight(grid, s, homogeneous))


# -- regularization family ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FamilyMember:
    h: float
    geo: GeometryBundle = field(repr=False)
    frame: GaugeFrame = field(repr=False)
    lam: np.ndarray = field(repr=False)


@dataclass(frozen=True, eq=False)
class RegularizationFamily:
    grid: Grid
    h_values: np.ndarray
    members: tuple = field(repr=False)
    dh: float = 0.25

    @property
    def h0(self):
        return float(self.h_values[0])

    def __len__(self):
        return len(self.members)

    def derivative(self, getter):
        """d/dh of a member quantity by centered differences (one-sided at the ends)."""
        vals = np.stack([getter(m) for m in self.members])
        return np.gradient(vals, self.h_values, axis=0, edge_order=2)


def build_family(im: Immersion, frame: GaugeFrame, h0: float = 0.0, dh: float = 0.25, h_max=None):
    """Canonical family P_{<h} F with frames P_{<h} nu carried by projection and Gram-Schmidt."""
    grid = im.grid
    top = grid.lp_cover() if h_max is None else h_max
    n = max(int(math.ceil((top - h0) / dh - 1e-12)), 0) + 1
    hs = h0 + dh * np.arange(n)
    members = []
    for h in hs:
        imh = im.lp(h)
        geo = compute_geometry(imh)
        smooth = GaugeFrame(grid, grid.lp(frame.nu1, h), grid.lp(frame.nu2, h), frame.A)
        fr = pullback_frame(smooth, imh, geo)
        members.append(FamilyMember(float(h), geo, fr, complex_shape(geo, fr).lam))
    return RegularizationFamily(grid, hs, tuple(members), dh)


def _require(family):
    if len(family) < MIN_SAMPLES:
        raise FamilyTooShort(f"family has {len(family)} samples, need at least {MIN_SAMPLES}")


def _h_integral(family, values, rate):
    """integral_{h0}^inf 2^{2 h rate} v(h) dh, trapezoid on the samples plus the exact tail.

    Beyond the last sample v is constant; the tail needs rate < 0 unless v vanishes there.
    """
    h = family.h_values
    w = 2.0 ** (2 * h * rate)
    body = float(np.trapezoid(w * values, h)) if len(h) > 1 else 0.0
    last = float(values[-1])
    if last == 0.0:
        return body
    if rate >= 0:
        return math.inf
    return body + last * 2.0 ** (2 * h[-1] * rate) / (-2 * rate * math.log(2))


def _member_norms_sq(m: FamilyMember, grid, orders, flavor):
    """Squared H^k / intrinsic H^k norms of lambda^(h) for each requested k."""
    if flavor == "intrinsic":
        top = max(orders)
        if top > K_CAP:
            raise CapExceeded(f"intrinsic Sobolev order {top} exceeds the cap {K_CAP}")
        cum = np.cumsum(_intrinsic_levels(m.lam, m.geo, m.frame.A, top))
        return {k: float(cum[k]) for k in orders}
    return {k: extrinsic_sobolev(m.lam, k, grid) ** 2 for k in orders}


def xs_norm(family: RegularizationFamily, s: float, flavor: str = "extrinsic") -> float:
    """The four-term X^s expression of lambda on the family."""
    if flavor not in ("intrinsic", "extrinsic"):
        raise ValueError(f"unknown flavor {flavor!r}")
    _require(family)
    grid, h0 = family.grid, family.h0
    fs = math.floor(s)
    Ns = (math.floor(2 * s), math.floor(2 * s) + 1)
    table = [_member_norms_sq(m, grid, (fs, fs + 1) + Ns, flavor) for m in family.members]
    t = 2.0 ** (2 * h0 * (s - fs)) * table[0][fs] + 2.0 ** (2 * h0 * (s - fs - 1)) * table[0][fs + 1]
    t += max(_h_integral(family, np.array([row[N] for row in table]), s - N) for N in Ns)
    mu = family.derivative(lambda m: m.lam)
    if flavor == "intrinsic":
        vals = np.array([intrinsic_sobolev(mu[i], m.geo, m.frame.A, 0) ** 2 for i, m in enumerate(family.members)])
    else:
        vals = np.array([grid.spectral_l2_norm(mu[i]) ** 2 for i in range(len(family))])
    vals[-1] = 0.0  # the family is constant past its last sample
    t += _h_integral(family, vals, s)
    return math.sqrt(t)


def ys_zs_norms(family: RegularizationFamily, s: float):
    """(Y^{s+1} of g, Z^s of A) at the initial time with delta_d = 0, sigma_d = 1."""
    _require(family)
    grid = family.grid
    sig = 1.0
    m0 = family.members[0]
    y = extrinsic_sobolev(m0.geo.g, s + 1 - sig, grid, homogeneous=sig) ** 2
    z = extrinsic_sobolev(m0.frame.A, s, grid) ** 2
    by = bz = 0.0
    for N in (math.floor(2 * s), math.floor(2 * s) + 1):
        gv = np.array([extrinsic_sobolev(m.geo.g, N + 1 - sig, grid, homogeneous=sig) ** 2 for m in family.members])
        av = np.array([extrinsic_sobolev(m.frame.A, N, grid) ** 2 for m in family.members])
        by = max(by, _h_integral(family, gv, s - N))
        bz = max(bz, _h_integral(family, av, s - N))
    y += by
    z += bz
    dg = family.derivative(lambda m: m.geo.g)
    dA = family.derivative(lambda m: m.frame.A)
    gv = np.array([extrinsic_sobolev(dg[i], 1.0, grid) ** 2 for i in range(len(family))])
    av = np.array([grid.spectral_l2_norm(dA[i]) ** 2 for i in range(len(family))])
    gv[-1] = av[-1] = 0.0
    y += _h_integral(family, gv, s)
    z += _h_integral(family, av, s)
    return math.sqrt(y), math.sqrt(z)


# -- frequency envelopes -------------------------------------------------------------


@dataclass(frozen=True)
class FrequencyEnvelope:
    """c_j for j = j0 .. j0 + len(c) - 1; beyond the last index c decays by 2^-delta per step."""

    delta: float
    j0: int
    c: np.ndarray = field(repr=False)

    def l2(self) -> float:
        q = 2.0 ** (-2 * self.delta)
        tail = float(self.c[-1]) ** 2 * q / (1 - q) if len(self.c) else 0.0
        return math.sqrt(float(np.sum(self.c**2)) + tail)

    def slowly_varying(self, rtol=1e-12) -> bool:
        j = np.arange(len(self.c))
        bound = 2.0 ** (self.delta * np.abs(j[:, None] - j[None, :])) * self.c[None, :]
        return bool(np.all(self.c[:, None] <= bound * (1 + rtol) + 1e-300))


def _envelope_inputs(im: Immersion, frame: GaugeFrame):
    grid = im.grid
    ddF = grid.hessian(im.periodic)
    dnu = np.concatenate([grid.grad(frame.nu1), grid.grad(frame.nu2)], axis=-1)
    return ddF, dnu


def frequency_envelope(im: Immersion, frame: GaugeFrame, s: float, delta: float, h0: int = 0, dh: float = 0.25):
    """Slowly varying envelope of d^2 F and d nu at regularity s."""
    grid = im.grid
    d = grid.dim
    if not 0 < delta < s - d / 2:
        raise BadDelta(f"delta = {delta} must lie in (0, s - d/2) = (0, {s - d / 2})")
    ddF, dnu = _envelope_inputs(im, frame)
    low = extrinsic_sobolev(grid.lp(ddF, h0), s, grid) + extrinsic_sobolev(grid.lp(dnu, h0), s, grid)
    kmax = int(math.ceil(grid.lp_cover())) + 1
    ks = np.arange(h0, max(kmax, h0 + 1))
    band = []
    for k in ks:
        hs = k + dh * np.arange(int(round(1 / dh)) + 1)
        vals = []
        for h in hs:
            a = grid.l2_norm(grid.lp(ddF, h, "density")) ** 2
            b = grid.l2_norm(grid.lp(dnu, h, "density")) ** 2
            vals.append(2.0 ** (2 * h * s) * (a + b))
        band.append(math.sqrt(max(float(np.trapezoid(vals, hs)), 0.0)))
    band = np.array(band)
    j = ks
    c = 2.0 ** (-delta * np.abs(j - h0)) * low
    c = c + np.array([np.sum(2.0 ** (-delta * np.abs(jj - ks)) * band) for jj in j])
    return FrequencyEnvelope(float(delta), int(h0), c)
