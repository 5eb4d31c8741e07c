"""Built-in immersions, user-defined charts and the Babich-Bobenko annulus.

Every chart is isothermal: the first fundamental form is e^{2 lambda}(du^2 + dv^2).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as P

from . import jets
from .jets import Jet, JetDomainError
from .kernels import rk4_profile

TWO_PI = 2.0 * math.pi


class SurfaceError(ValueError):
    pass


@dataclass
class Chart:
    """A rectangle of the parameter plane with a jet evaluator."""

    name: str
    domain: tuple[float, float, float, float]
    periodic_u: bool
    periodic_v: bool
    jet: Callable[[np.ndarray, np.ndarray], np.ndarray]
    exprs: tuple[str, ...] | None = None
    owns: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    # exact shape of the owned part, for quadrature: ("rect", u0, u1, v0, v1) or ("disk", cu, cv, R)
    region: tuple | None = None

    @property
    def quad_region(self) -> tuple:
        return self.region if self.region is not None else ("rect",) + tuple(self.domain)

    @property
    def u0(self):
        return self.domain[0]

    @property
    def u1(self):
        return self.domain[1]

    @property
    def v0(self):
        return self.domain[2]

    @property
    def v1(self):
        return self.domain[3]

    def grid(self, n_u: int, n_v: int | None = None):
        """Node grid: periodic directions exclude the endpoint, others are cell centred."""
        n_v = n_u if n_v is None else n_v
        u = _axis(self.u0, self.u1, n_u, self.periodic_u)
        v = _axis(self.v0, self.v1, n_v, self.periodic_v)
        U, V = np.meshgrid(u, v, indexing="ij")
        return u, v, U, V

    def owned(self, u, v) -> np.ndarray:
        if self.owns is None:
            return np.ones(np.broadcast_shapes(np.shape(u), np.shape(v)), dtype=bool)
        return self.owns(u, v)


def _axis(a, b, n, periodic):
    h = (b - a) / n
    if periodic:
        return a + h * np.arange(n)
    return a + h * (np.arange(n) + 0.5)


@dataclass
class SurfaceSpec:
    name: str
    ambient: str
    charts: list[Chart]
    euler_characteristic: int
    metadata: dict = field(default_factory=dict)
    transitions: dict = field(default_factory=dict)
    builtin_id: str | None = None
    params: dict = field(default_factory=dict)

    @property
    def chart(self) -> Chart:
        return self.charts[0]

    def chart_named(self, name: str) -> Chart:
        for c in self.charts:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def is_willmore(self):
        return self.metadata.get("is_willmore")

    @property
    def closed(self) -> bool:
        return bool(self.metadata.get("closed", False))


# ---------------------------------------------------------------------------
# expression-backed charts
# ---------------------------------------------------------------------------


def expression_chart(name, exprs, domain, periodic_u, periodic_v, owns=None, region=None) -> Chart:
    asts = [jets.parse_expression(e) for e in exprs]

    def evaluator(u, v):
        return jets.stack([jets.evaluate(a, u, v) for a in asts])

    return Chart(name, tuple(float(x) for x in domain), periodic_u, periodic_v, evaluator, tuple(exprs), owns,
                 region)


def _fmt(x: float) -> str:
    return repr(float(x))


def sphere(r: float = 1.0, T: float = 12.0) -> SurfaceSpec:
    if r <= 0:
        raise SurfaceError("sphere radius must be positive")
    R = _fmt(r)
    # Mercator chart: u is the isothermal latitude, v the longitude
    exprs = (f"{R}*cos(v)/cosh(u)", f"{R}*sin(v)/cosh(u)", f"{R}*sinh(u)/cosh(u)")
    chart = expression_chart("mercator", exprs, (-T, T, 0.0, TWO_PI), False, True)
    meta = {"totally_umbilic": True, "is_willmore": True, "closed": True, "E": 0.0, "W": 4 * math.pi,
            "note": "poles lie outside the chart; the omitted caps carry O(exp(-2T)) of the area"}
    return SurfaceSpec("sphere", "R3", [chart], 2, meta, builtin_id="sphere", params={"r": r})


def plane(half_width: float = 1.0) -> SurfaceSpec:
    a = float(half_width)
    chart = expression_chart("plane", ("u", "v", "0"), (-a, a, -a, a), False, False)
    return SurfaceSpec("plane", "R3", [chart], 1, {"totally_umbilic": True, "is_willmore": True},
                       builtin_id="plane", params={"half_width": a})


def torus_rev(R: float = 2.0, r: float = 1.0) -> SurfaceSpec:
    """Torus of revolution in isothermal coordinates (u around the axis, v along the meridian)."""
    if not (R > 0 and r > 0 and R > r):
        raise SurfaceError("torus_rev needs R > r > 0")
    c = math.sqrt(R * R - r * r)
    k = _fmt(c / r)
    cc, rr, RR, cr = _fmt(c * c), _fmt(r), _fmt(R), _fmt(c * r)
    den = f"({RR} - {rr}*cos({k}*v))"
    exprs = (f"{cc}*cos(u)/{den}", f"{cc}*sin(u)/{den}", f"-{cr}*sin({k}*v)/{den}")
    chart = expression_chart("torus", exprs, (0.0, TWO_PI, 0.0, TWO_PI * r / c), True, True)
    willmore = abs(R / r - math.sqrt(2.0)) < 1e-12
    meta = {"is_willmore": willmore, "closed": True, "conformally_minimal": "S3" if willmore else None}
    if willmore:
        meta.update({"E": 4 * math.pi**2, "W": 2 * math.pi**2, "minimal_area_s3": 2 * math.pi**2,
                     "minimal_s3_representative": "clifford"})
    return SurfaceSpec("torus_rev", "R3", [chart], 0, meta, builtin_id="torus_rev", params={"R": R, "r": r})


def clifford() -> SurfaceSpec:
    s = _fmt(1.0 / math.sqrt(2.0))
    exprs = (f"{s}*cos(u)", f"{s}*sin(u)", f"{s}*cos(v)", f"{s}*sin(v)")
    chart = expression_chart("clifford", exprs, (0.0, TWO_PI, 0.0, TWO_PI), True, True)
    meta = {"is_willmore": True, "closed": True, "conformally_minimal": "S3", "E": 4 * math.pi**2,
            "area": 2 * math.pi**2, "minimal_area_s3": 2 * math.pi**2, "minimal_s3_representative": "clifford"}
    return SurfaceSpec("clifford", "S3", [chart], 0, meta, builtin_id="clifford", params={})


def clifford_r3() -> SurfaceSpec:
    """The stereographic image of the Clifford torus: torus_rev(sqrt 2, 1)."""
    spec = torus_rev(math.sqrt(2.0), 1.0)
    spec.name = "clifford_r3"
    spec.builtin_id = "clifford_r3"
    spec.params = {}
    return spec


def great_sphere(T: float = 12.0) -> SurfaceSpec:
    exprs = ("cos(v)/cosh(u)", "sin(v)/cosh(u)", "sinh(u)/cosh(u)", "0")
    chart = expression_chart("mercator", exprs, (-T, T, 0.0, TWO_PI), False, True)
    meta = {"totally_umbilic": True, "is_willmore": True, "closed": True, "E": 0.0}
    return SurfaceSpec("great_sphere", "S3", [chart], 2, meta, builtin_id="great_sphere", params={})


def inverted_catenoid(neck: float = 1.0, cx: float = 0.0, cy: float = 0.0, cz: float = 0.0,
                      T: float = 8.0) -> SurfaceSpec:
    """Inversion x -> x/|x|^2 of the catenoid (translated by -center).

    Main chart: (u, v) = (angle, height parameter t), isothermal.  The two
    catenoidal ends (t -> +/-inf) become two points sent to the origin; they
    are covered by the cap charts ``end_plus`` / ``end_minus`` with the
    conformal coordinate z = exp(-(t + i u)) (resp. exp(t + i u)).
    """
    if neck <= 0:
        raise SurfaceError("neck must be positive")
    a = _fmt(neck)

    def inverted(X, Y, Z):
        n2 = f"(({X})^2 + ({Y})^2 + ({Z})^2)"
        return (f"({X})/{n2}", f"({Y})/{n2}", f"({Z})/{n2}")

    sh = lambda c: f" - {_fmt(c)}" if c else ""
    X = f"{a}*cosh(v)*cos(u){sh(cx)}"
    Y = f"{a}*cosh(v)*sin(u){sh(cy)}"
    Z = f"{a}*v{sh(cz)}"
    main = expression_chart("cylinder", inverted(X, Y, Z), (0.0, TWO_PI, -T, T), True, False,
                            owns=lambda u, v: np.abs(v) <= math.log(2.0),
                            region=("rect", 0.0, TWO_PI, -math.log(2.0), math.log(2.0)))
    r2 = "(u^2 + v^2)"
    Xp = f"{a}*(u/{r2} + u)/2{sh(cx)}"
    Yp = f"{a}*(-v/{r2} - v)/2{sh(cy)}"
    Zp = f"-{a}*log({r2})/2{sh(cz)}"
    Xm = f"{a}*(u + u/{r2})/2{sh(cx)}"
    Ym = f"{a}*(v + v/{r2})/2{sh(cy)}"
    Zm = f"{a}*log({r2})/2{sh(cz)}"
    cap_owns = lambda u, v: u * u + v * v < 0.25
    cap_p = expression_chart("end_plus", inverted(Xp, Yp, Zp), (-0.6, 0.6, -0.6, 0.6), False, False, cap_owns,
                              ("disk", 0.0, 0.0, 0.5))
    cap_m = expression_chart("end_minus", inverted(Xm, Ym, Zm), (-0.6, 0.6, -0.6, 0.6), False, False, cap_owns,
                              ("disk", 0.0, 0.0, 0.5))

    def to_plus(u, v):
        r = np.exp(-v)
        return r * np.cos(u), -r * np.sin(u)

    def to_minus(u, v):
        r = np.exp(v)
        return r * np.cos(u), r * np.sin(u)

    meta = {
        "is_willmore": True,
        "closed": True,
        "conformally_minimal": "R3",
        "ends": 2,
        "E": 8 * math.pi,
        "W": 8 * math.pi,
        "end_preimages": [("end_plus", (0.0, 0.0)), ("end_minus", (0.0, 0.0))],
        "expected_multiplicity_sum": 0,
    }
    spec = SurfaceSpec("inverted_catenoid", "R3", [main, cap_p, cap_m], 2, meta,
                       transitions={("cylinder", "end_plus"): to_plus, ("cylinder", "end_minus"): to_minus},
                       builtin_id="inverted_catenoid",
                       params={"neck": neck, "cx": cx, "cy": cy, "cz": cz})
    return spec


# ---------------------------------------------------------------------------
# Babich-Bobenko annulus
# ---------------------------------------------------------------------------

_SERIES_ORDER = 18


def _pad(c, K=_SERIES_ORDER):
    c = np.asarray(c, dtype=float)[: K + 1]
    out = np.zeros(K + 1)
    out[: len(c)] = c
    return out


def _smul(a, b):
    return _pad(P.polymul(a, b))


def _srecip(a):
    out = np.zeros_like(a)
    out[0] = 1.0 / a[0]
    for k in range(1, len(a)):
        out[k] = -np.dot(a[1 : k + 1], out[k - 1 :: -1][:k]) / a[0]
    return out


def _ssincos(p):
    """sin and cos of a series with zero constant term."""
    s = np.zeros_like(p)
    c = np.zeros_like(p)
    term = np.zeros_like(p)
    term[0] = 1.0
    for k in range(len(p)):
        if k % 2 == 0:
            c += (-1) ** (k // 2) * term
        else:
            s += (-1) ** (k // 2) * term
        term = _smul(term, p) / (k + 1)
    return s, c


def profile_series(rho0: float, shape: float, K: int = _SERIES_ORDER):
    """Taylor coefficients at the crossing of theta - pi/2, rho, zeta and w in arclength s.

    The crossing is a regular singular point of the ODE; the s^2 coefficient
    of theta is free (``shape``), all others follow order by order.
    """
    p = np.zeros(K + 1)
    p[1] = 1.0 / rho0
    p[2] = shape
    for _ in range(K + 2):
        sp, cp = _ssincos(p)
        cos_t, sin_t = -sp, cp
        rho = _pad(P.polyint(cos_t), K)
        rho[0] = rho0
        zeta = _pad(P.polyint(sin_t), K)
        rhs = -2.0 * _smul(_pad(cos_t[1:], K), _srecip(_pad(zeta[1:], K))) - _smul(sin_t, _srecip(rho))
        new = p.copy()
        for k in range(1, K + 1):
            if k != 2:
                new[k] = (rhs[k - 1] - 2.0 * p[k]) / (k - 2)
        p = new
    sp, cp = _ssincos(p)
    rho = _pad(P.polyint(-sp), K)
    rho[0] = rho0
    zeta = _pad(P.polyint(cp), K)
    w = _pad(P.polyint(_srecip(rho)), K)
    return p, rho, zeta, w


@dataclass
class ProfileCurve:
    """Sampled meridian (rho(s), zeta(s)) with tangent angle theta and isothermal coordinate w."""

    s: np.ndarray
    rho: np.ndarray
    zeta: np.ndarray
    theta: np.ndarray
    w: np.ndarray
    step: float
    s_switch: float
    series: tuple
    rho0: float
    shape: float
    richardson_error: float

    @property
    def drho(self):
        return np.cos(self.theta)

    @property
    def dzeta(self):
        return np.sin(self.theta)

    def w_of_s(self, s):
        return np.interp(s, self.s, self.w)

    def s_of_w(self, w):
        return np.interp(w, self.w, self.s)


def integrate_profile(rho0: float, shape: float, zeta_stop: float, step: float = 1e-4,
                      s_switch: float = 0.05, check: bool = True) -> ProfileCurve:
    """RK4 in arclength away from the crossing, power series near it."""
    if rho0 <= 0:
        raise SurfaceError("neck parameter must be positive")
    if step < 1e-8:
        raise SurfaceError("step-size underflow")
    series = profile_series(rho0, shape)
    p, rho_c, zeta_c, w_c = series
    branches = []
    err = 0.0
    for sgn in (1.0, -1.0):
        s0 = sgn * s_switch
        y0 = np.array([P.polyval(s0, rho_c), P.polyval(s0, zeta_c), 0.5 * math.pi + P.polyval(s0, p),
                       P.polyval(s0, w_c)])
        nmax = int(50.0 / step)
        traj, status = rk4_profile(y0, sgn * step, nmax, zeta_stop, 1e-6)
        if status != 0:
            reason = {1: "profile reached the axis", 2: "step budget exhausted", 3: "ODE blow-up"}[status]
            raise SurfaceError(f"{reason} before |zeta| = {zeta_stop}")
        if check:
            half, _ = rk4_profile(y0, 0.5 * sgn * step, 2 * nmax, zeta_stop, 1e-6)
            m = min(len(traj), (len(half) + 1) // 2)
            diff = np.abs(traj[:m, :3] - half[: 2 * m : 2][:m, :3]).max() / 15.0
            err = max(err, float(diff))
        s_vals = s0 + sgn * step * np.arange(len(traj))
        branches.append((s_vals, traj))
    n_mid = int(round(2 * s_switch / step))
    s_mid = np.linspace(-s_switch, s_switch, n_mid + 1)[1:-1]
    mid = np.stack([P.polyval(s_mid, rho_c), P.polyval(s_mid, zeta_c), 0.5 * math.pi + P.polyval(s_mid, p),
                    P.polyval(s_mid, w_c)], axis=1)
    (sp, tp), (sm, tm) = branches
    s = np.concatenate([sm[::-1], s_mid, sp])
    traj = np.concatenate([tm[::-1], mid, tp])
    return ProfileCurve(s, traj[:, 0], traj[:, 1], traj[:, 2], traj[:, 3], step, s_switch, series, rho0, shape, err)


def _profile_f(theta, rho, zeta):
    return -2.0 * np.cos(theta) / zeta - np.sin(theta) / rho


def profile_state(prof: ProfileCurve, w):
    """(s, rho, zeta, theta, theta_s, theta_ss) at isothermal coordinates ``w``."""
    w = np.asarray(w, dtype=float)
    if np.any(w < prof.w[0]) or np.any(w > prof.w[-1]):
        raise JetDomainError("point outside the integrated profile")
    p, rho_c, zeta_c, w_c = prof.series
    idx = np.clip(np.searchsorted(prof.w, w), 1, len(prof.w) - 1)
    left = prof.w[idx - 1]
    idx = np.where(np.abs(w - left) < np.abs(prof.w[idx] - w), idx - 1, idx)
    s_k = prof.s[idx]
    near = np.abs(s_k) <= prof.s_switch
    out_s = np.empty_like(w)
    rho = np.empty_like(w)
    zeta = np.empty_like(w)
    theta = np.empty_like(w)
    t1 = np.empty_like(w)
    t2 = np.empty_like(w)
    if np.any(near):
        wn = w[near]
        s = prof.s[idx[near]].copy()
        dw = P.polyder(w_c)
        for _ in range(8):
            s = s - (P.polyval(s, w_c) - wn) / P.polyval(s, dw)
        out_s[near] = s
        rho[near] = P.polyval(s, rho_c)
        zeta[near] = P.polyval(s, zeta_c)
        theta[near] = 0.5 * math.pi + P.polyval(s, p)
        t1[near] = P.polyval(s, P.polyder(p))
        t2[near] = P.polyval(s, P.polyder(p, 2))
    far = ~near
    if np.any(far):
        k = idx[far]
        y = np.stack([prof.rho[k], prof.zeta[k], prof.theta[k]])
        h = w[far] - prof.w[k]

        def f(y):
            r, z, t = y
            return np.stack([r * np.cos(t), r * np.sin(t), r * _profile_f(t, r, z), np.ones_like(r)])

        # one RK4 step in w, carrying s along as a fourth component
        y4 = np.concatenate([y, prof.s[k][None]])
        k1 = f(y4[:3])
        k1[3] = y4[0]
        a = y4 + 0.5 * h * k1
        k2 = f(a[:3])
        k2[3] = a[0]
        b = y4 + 0.5 * h * k2
        k3 = f(b[:3])
        k3[3] = b[0]
        c = y4 + h * k3
        k4 = f(c[:3])
        k4[3] = c[0]
        yn = y4 + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        r, z, t, s = yn
        out_s[far], rho[far], zeta[far], theta[far] = s, r, z, t
        ft = _profile_f(t, r, z)
        t1[far] = ft
        f_theta = 2.0 * np.sin(t) / z - np.cos(t) / r
        f_rho = np.sin(t) / (r * r)
        f_zeta = 2.0 * np.cos(t) / (z * z)
        t2[far] = f_theta * ft + f_rho * np.cos(t) + f_zeta * np.sin(t)
    return out_s, rho, zeta, theta, t1, t2


def _w_derivs(rho, c, sn, t1, t2):
    """Derivatives in w of rho and zeta (d/dw = rho d/ds)."""
    rs, rss, rsss = c, -sn * t1, -c * t1 * t1 - sn * t2
    zs, zss, zsss = sn, c * t1, -sn * t1 * t1 + c * t2
    sw = rho
    sww = rho * rs
    swww = rho * (rs * rs + rho * rss)

    def conv(fs, fss, fsss):
        return fs * sw, fss * sw**2 + fs * sww, fsss * sw**3 + 3 * fss * sw * sww + fs * swww

    return conv(rs, rss, rsss), conv(zs, zss, zsss)


def profile_jet(prof: ProfileCurve, offset=(0.0, 0.0, 0.0)):
    ox, oy, oz = offset

    def evaluator(u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        shape = np.broadcast_shapes(u.shape, v.shape)
        u = np.broadcast_to(u, shape)
        v = np.broadcast_to(v, shape)
        _, rho, zeta, theta, t1, t2 = profile_state(prof, v.ravel())
        c, sn = np.cos(theta), np.sin(theta)
        (rw, rww, rwww), (zw, zww, zwww) = _w_derivs(rho, c, sn, t1, t2)
        rj = np.zeros((10,) + shape)
        zj = np.zeros((10,) + shape)
        for arr, vals in ((rj, (rho, rw, rww, rwww)), (zj, (zeta, zw, zww, zwww))):
            arr[jets.VAL] = vals[0].reshape(shape)
            arr[jets.DV] = vals[1].reshape(shape)
            arr[jets.DVV] = vals[2].reshape(shape)
            arr[jets.DVVV] = vals[3].reshape(shape)
        uj = Jet.variable("u", u)
        rjet = Jet(rj)
        x = rjet * jets.cos(uj) + ox
        y = rjet * jets.sin(uj) + oy
        z = Jet(zj) + oz
        return jets.stack([x, y, z])

    return evaluator


def bb_annulus(neck: float = 1.0, half_height: float = 0.5, shape: float = 0.3, step: float = 1e-4,
               offset=(0.0, 0.0, 0.0)) -> SurfaceSpec:
    """Surface of revolution whose meridian solves zeta H + n^3 = 0 through an orthogonal crossing.

    ``neck`` is the radius of the crossing circle and ``shape`` the free s^2
    coefficient of the tangent angle in units of 1/neck^2 (shape = 0 gives a
    round sphere).  ``half_height`` is measured in units of ``neck``.
    """
    if neck <= 0:
        raise SurfaceError("neck parameter must be positive")
    if half_height <= 0:
        raise SurfaceError("half_height must be positive")
    params = {"neck": neck, "half_height": half_height, "shape": shape}
    half_height = half_height * neck
    prof = integrate_profile(neck, shape / neck**2, zeta_stop=1.25 * half_height + 0.05 * neck,
                             step=step * neck)
    s_lo = np.interp(-half_height, prof.zeta, prof.s)
    s_hi = np.interp(half_height, prof.zeta, prof.s)
    if not (np.all(np.diff(prof.zeta) > 0)):
        raise SurfaceError("profile is not a graph over the height in the requested range")
    w_lo, w_hi = prof.w_of_s(s_lo), prof.w_of_s(s_hi)
    # the chart runs a little past the annulus so that stencils fit at its edges
    e_lo = prof.w_of_s(np.interp(-1.15 * half_height, prof.zeta, prof.s))
    e_hi = prof.w_of_s(np.interp(1.15 * half_height, prof.zeta, prof.s))
    chart = Chart("annulus", (0.0, TWO_PI, float(e_lo), float(e_hi)), True, False, profile_jet(prof, offset),
                  region=("rect", 0.0, TWO_PI, float(w_lo), float(w_hi)))
    meta = {
        "is_willmore": True,
        "closed": False,
        "bb_type": True,
        "profile": prof,
        "crossing_w": float(prof.w_of_s(0.0)),
        "crossing_length": TWO_PI * neck,
        "plane_height": float(offset[2]),
    }
    return SurfaceSpec("bb_annulus", "R3", [chart], 0, meta, builtin_id="bb_annulus",
                       params=params)


def stacked_bb(neck_a: float = 1.0, neck_b: float = 0.8, gap: float = 3.0) -> SurfaceSpec:
    """Two BB annuli one above the other: a configuration with two umbilic curves."""
    a = bb_annulus(neck_a)
    b = bb_annulus(neck_b, offset=(0.0, 0.0, gap))
    cb = b.chart
    cb.name = "annulus_upper"
    meta = {"is_willmore": True, "closed": False, "bb_type": True, "components": 2}
    return SurfaceSpec("stacked_bb", "R3", [a.chart, cb], 0, meta, builtin_id="stacked_bb",
                       params={"neck_a": neck_a, "neck_b": neck_b, "gap": gap})


# ---------------------------------------------------------------------------
# stereographic lift
# ---------------------------------------------------------------------------


def inverse_stereographic_jet(j3: np.ndarray) -> np.ndarray:
    """Jets of sigma^{-1}(x) = (2x, |x|^2 - 1)/(|x|^2 + 1) from jets of x (north pole e4)."""
    comps = [Jet(j3[:, i]) for i in range(3)]
    n2 = comps[0] * comps[0] + comps[1] * comps[1] + comps[2] * comps[2]
    inv = jets.reciprocal(n2 + 1.0)
    out = [c * 2.0 * inv for c in comps] + [(n2 - 1.0) * inv]
    return jets.stack(out)


def s3_lift(spec: SurfaceSpec) -> SurfaceSpec:
    if spec.ambient != "R3":
        raise SurfaceError("s3_lift expects an R3 surface")
    charts = []
    for c in spec.charts:
        ev = c.jet
        charts.append(Chart(c.name, c.domain, c.periodic_u, c.periodic_v,
                            lambda u, v, ev=ev: inverse_stereographic_jet(ev(u, v)), None, c.owns,
                            c.region))
    meta = dict(spec.metadata)
    return SurfaceSpec(spec.name + "_s3", "S3", charts, spec.euler_characteristic, meta,
                       dict(spec.transitions), None, dict(spec.params))


# ---------------------------------------------------------------------------
# registry and JSON
# ---------------------------------------------------------------------------

BUILTINS: dict[str, Callable[..., SurfaceSpec]] = {
    "sphere": sphere,
    "plane": plane,
    "torus_rev": torus_rev,
    "clifford": clifford,
    "clifford_r3": clifford_r3,
    "great_sphere": great_sphere,
    "inverted_catenoid": inverted_catenoid,
    "bb_annulus": bb_annulus,
    "stacked_bb": stacked_bb,
}

BUILTIN_DOCS = {
    "sphere": "round sphere of radius r (Mercator chart), chi=2, totally umbilic",
    "plane": "flat chart (u, v, 0)",
    "torus_rev": "torus of revolution R > r (isothermal chart), chi=0; Willmore iff R/r = sqrt 2",
    "clifford": "Clifford torus in S3, (cos u, sin u, cos v, sin v)/sqrt 2",
    "clifford_r3": "stereographic Clifford torus, torus_rev(sqrt 2, 1)",
    "great_sphere": "totally geodesic 2-sphere in S3",
    "inverted_catenoid": "catenoid inverted in a point off the surface, chi=2, two end-preimages",
    "bb_annulus": "rotational Babich-Bobenko annulus around one umbilic circle",
    "stacked_bb": "two BB annuli stacked vertically (two umbilic curves)",
}


def builtin(name: str, **params) -> SurfaceSpec:
    if name not in BUILTINS:
        raise SurfaceError(f"unknown builtin {name!r}; choose from {sorted(BUILTINS)}")
    try:
        return BUILTINS[name](**{k: float(v) for k, v in params.items()})
    except TypeError as exc:
        raise SurfaceError(f"invalid parameters for {name}: {exc}") from None


def from_dict(data: dict) -> SurfaceSpec:
    if "builtin" in data and data["builtin"]:
        b = data["builtin"]
        spec = builtin(b["id"], **b.get("params", {}))
        if "name" in data:
            spec.name = data["name"]
        return spec
    try:
        ambient = data["ambient"]
        dom = data["domain"]
        comps = data["components"]
        chi = int(data["euler_characteristic"])
    except KeyError as exc:
        raise SurfaceError(f"surface file is missing {exc}") from None
    if ambient not in ("R3", "S3"):
        raise SurfaceError("ambient must be 'R3' or 'S3'")
    if len(comps) != (3 if ambient == "R3" else 4):
        raise SurfaceError(f"{ambient} surfaces need {3 if ambient == 'R3' else 4} components")
    chart = expression_chart(
        "user", comps, (dom["u0"], dom["u1"], dom["v0"], dom["v1"]),
        bool(dom.get("periodic_u", False)), bool(dom.get("periodic_v", False)),
    )
    closed = chart.periodic_u and chart.periodic_v
    return SurfaceSpec(data.get("name", "user"), ambient, [chart], chi,
                       {"closed": closed, "is_willmore": data.get("is_willmore")})


def load_surface(path) -> SurfaceSpec:
    with open(Path(path), encoding="utf-8") as fh:
        data = json.load(fh)
    return from_dict(data)


def to_dict(spec: SurfaceSpec) -> dict:
    if spec.builtin_id is not None:
        return {"name": spec.name, "builtin": {"id": spec.builtin_id, "params": spec.params}}
    c = spec.chart
    return {
        "name": spec.name,
        "ambient": spec.ambient,
        "domain": {"u0": c.u0, "u1": c.u1, "v0": c.v0, "v1": c.v1,
                   "periodic_u": c.periodic_u, "periodic_v": c.periodic_v},
        "components": list(c.exprs or ()),
        "euler_characteristic": spec.euler_characteristic,
    }
