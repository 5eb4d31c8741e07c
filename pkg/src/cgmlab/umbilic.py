"""Umbilic set {phi = 0}: detection, normal-form classification, curve tracing and the geodesic test."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, interpolate, linalg, ndimage, optimize

from .cgm import _frame
from .fundamental import geometry_at
from .minkowski import eta_matrix

TAU_A = 1e-4
TAU_B = 1e-3
NEWTON_MAXIT = 50
ZERO_TOL = 1e-10
N_ANGLES = 64


class ClassificationError(ValueError):
    pass


class TraceError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# the field phi on a chart
# ---------------------------------------------------------------------------


@dataclass
class PhiField:
    """phi as a function of chart coordinates, with the conformal factor of g."""

    phi: Callable
    domain: tuple
    periodic_u: bool = False
    periodic_v: bool = False
    lam: Callable | None = None
    jac: Callable | None = None
    H: Callable | None = None
    name: str = "chart"
    owns: Callable | None = None
    chart: object = None
    ambient: str | None = None

    @property
    def periods(self):
        u0, u1, v0, v1 = self.domain
        return (u1 - u0 if self.periodic_u else None, v1 - v0 if self.periodic_v else None)

    def wrap(self, u, v):
        u0, u1, v0, v1 = self.domain
        if self.periodic_u:
            u = u0 + np.mod(u - u0, u1 - u0)
        if self.periodic_v:
            v = v0 + np.mod(v - v0, v1 - v0)
        return u, v

    def inside(self, u, v, margin=0.0):
        u0, u1, v0, v1 = self.domain
        ok = True
        if not self.periodic_u:
            ok = ok and (u0 + margin <= u <= u1 - margin)
        if not self.periodic_v:
            ok = ok and (v0 + margin <= v <= v1 - margin)
        return ok

    def __call__(self, u, v):
        u, v = self.wrap(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        return self.phi(u, v)

    def lam_grad(self, u, v, h=1e-5):
        """(lambda, lambda_u, lambda_v)."""
        if self.lam is None:
            z = np.zeros(np.broadcast_shapes(np.shape(u), np.shape(v)))
            return z, z, z
        out = self.lam(*self.wrap(np.asarray(u, float), np.asarray(v, float)))
        if isinstance(out, tuple):
            return out
        lu = (self.lam(u + h, v) - self.lam(u - h, v)) / (2 * h)
        lv = (self.lam(u, v + h) - self.lam(u, v - h)) / (2 * h)
        return out, lu, lv

    def jacobian(self, u, v, h=1e-6):
        """Real 2x2 Jacobian of (Re phi, Im phi) with respect to (u, v)."""
        if self.jac is not None:
            pu, pv = self.jac(*self.wrap(np.asarray(u, float), np.asarray(v, float)))
        else:
            pu = (-self(u + 2 * h, v) + 8 * self(u + h, v) - 8 * self(u - h, v) + self(u - 2 * h, v)) / (12 * h)
            pv = (-self(u, v + 2 * h) + 8 * self(u, v + h) - 8 * self(u, v - h) + self(u, v - 2 * h)) / (12 * h)
        return np.array([[np.real(pu), np.real(pv)], [np.imag(pu), np.imag(pv)]])


def field_from_chart(chart, ambient: str) -> PhiField:
    def phi(u, v):
        return geometry_at(chart, ambient, u, v).phi

    def lam(u, v):
        g = geometry_at(chart, ambient, u, v)
        return g.lam, 2.0 * g.lam_z.real, -2.0 * g.lam_z.imag

    def jac(u, v):
        g = geometry_at(chart, ambient, u, v)
        return g.phi_z + g.phi_zb, 1j * (g.phi_z - g.phi_zb)

    def H(u, v):
        return geometry_at(chart, ambient, u, v).H

    return PhiField(phi, chart.domain, chart.periodic_u, chart.periodic_v, lam, jac, H, chart.name, chart.owns,
                    chart, ambient)


def synthetic_field(phi, domain=(-1.0, 1.0, -1.0, 1.0), periodic_u=False, periodic_v=False, lam=None,
                    H=None, name="synthetic") -> PhiField:
    return PhiField(phi, tuple(domain), periodic_u, periodic_v, lam, None, H, name)


# ---------------------------------------------------------------------------
# report types
# ---------------------------------------------------------------------------


@dataclass
class UmbilicPoint:
    chart: str
    u: float
    v: float
    kind: str
    m: int
    n: int
    coeffs: dict
    fit_residual: float
    phi_abs: float = 0.0
    flags: list = field(default_factory=list)

    def as_json(self):
        c = self.coeffs
        return {
            "chart": self.chart, "u": self.u, "v": self.v, "kind": self.kind, "m": self.m, "n": self.n,
            "coeffs": {"C": [c["C"].real, c["C"].imag], "a": [c["a"].real, c["a"].imag], "b": c["b"]},
            "residual": self.fit_residual, "phi_abs": self.phi_abs, "flags": list(self.flags),
        }


@dataclass
class UmbilicCurve:
    chart: str
    polyline: np.ndarray
    closed: bool
    length_g: float
    k_g_max: float = float("nan")
    geodesic: bool = False
    H_variation: float = float("nan")
    H_constant: bool | None = None
    singular_points: list = field(default_factory=list)
    max_phi: float = 0.0
    flags: list = field(default_factory=list)

    def as_json(self):
        return {
            "chart": self.chart,
            "polyline": np.asarray(self.polyline).tolist(),
            "closed": self.closed,
            "length_g": self.length_g,
            "k_g_max": self.k_g_max,
            "geodesic": self.geodesic,
            "H_variation": self.H_variation,
            "H_constant": self.H_constant,
            "max_phi": self.max_phi,
            "singular_points": [p.as_json() for p in self.singular_points],
            "flags": list(self.flags),
        }


@dataclass
class Candidate:
    chart: str
    u: float
    v: float
    winding: int
    phi_abs: float
    resolved: bool
    note: str = ""


@dataclass
class UmbilicReport:
    points: list
    curves: list
    unresolved: list
    grid_n: int
    orientation: str = "n = Phi_u x Phi_v / |Phi_u x Phi_v|"

    @property
    def total_multiplicity(self):
        return sum(p.n for p in self.points)

    def as_json(self):
        return {
            "grid_n": self.grid_n,
            "orientation": self.orientation,
            "points": [p.as_json() for p in self.points],
            "curves": [c.as_json() for c in self.curves],
            "unresolved": [asdict(c) for c in self.unresolved],
            "total_multiplicity": self.total_multiplicity,
        }

    def dumps(self):
        return json.dumps(self.as_json(), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# detection
# ---------------------------------------------------------------------------


def _grid(f: PhiField, n: int):
    u0, u1, v0, v1 = f.domain

    def axis(a, b, periodic):
        if periodic:
            return a + (b - a) * np.arange(n) / n
        return a + (b - a) * (np.arange(n) + 0.5) / n

    return axis(u0, u1, f.periodic_u), axis(v0, v1, f.periodic_v)


def _wrapped(d):
    return (d + np.pi) % (2 * np.pi) - np.pi


def _cells(P, pu, pv):
    """Corner values of every cell (c00, c10, c11, c01), wrapping periodic axes."""
    c00 = P
    c10 = np.roll(P, -1, axis=0)
    c01 = np.roll(P, -1, axis=1)
    c11 = np.roll(c10, -1, axis=1)
    nu = P.shape[0] if pu else P.shape[0] - 1
    nv = P.shape[1] if pv else P.shape[1] - 1
    return [c[:nu, :nv] for c in (c00, c10, c11, c01)]


def loop_winding(f: PhiField, u, v, du, dv, k: int = 8) -> int:
    """Winding number of phi around the rectangle [u, u+du] x [v, v+dv]."""
    t = np.arange(k) / k
    us = np.concatenate([u + du * t, np.full(k, u + du), u + du * (1 - t), np.full(k, u)])
    vs = np.concatenate([np.full(k, v), v + dv * t, np.full(k, v + dv), v + dv * (1 - t)])
    a = np.angle(f(us, vs))
    return int(round(np.sum(_wrapped(np.diff(np.append(a, a[0])))) / (2 * np.pi)))


def newton_refine(f: PhiField, u, v, maxit: int = NEWTON_MAXIT, tol: float = ZERO_TOL):
    """Damped Gauss-Newton on (Re phi, Im phi). Returns (u, v, |phi|, converged)."""
    x = np.array([u, v], dtype=float)
    F = f(x[0], x[1])
    r = abs(F)
    for _ in range(maxit):
        if r < tol:
            return x[0], x[1], r, True
        J = f.jacobian(x[0], x[1])
        step = -np.linalg.pinv(J, rcond=1e-10) @ np.array([F.real, F.imag])
        t = 1.0
        while t > 1e-6:
            y = x + t * step
            if f.inside(y[0], y[1]):
                Fy = f(y[0], y[1])
                if abs(Fy) < r:
                    break
            t *= 0.5
        else:
            break
        x, F, r = y, Fy, abs(Fy)
        if np.linalg.norm(t * step) < 1e-16 * (1 + np.linalg.norm(x)):
            break
    return x[0], x[1], r, r < tol


def winding_bisect(f: PhiField, u, v, du, dv, levels: int = 40):
    """Shrink a rectangle with non-zero winding around its singular point."""
    w = loop_winding(f, u, v, du, dv)
    if w == 0:
        return None
    for _ in range(levels):
        du, dv = du / 2, dv / 2
        for a, b in ((u, v), (u + du, v), (u, v + dv), (u + du, v + dv)):
            if loop_winding(f, a, b, du, dv) != 0:
                u, v = a, b
                break
        else:
            # the singular point sits on a sub-cell edge: recentre
            u, v = u + du / 2, v + dv / 2
            if loop_winding(f, u, v, du, dv) == 0:
                break
    return u + du / 2, v + dv / 2, w


def _label_periodic(mask, pu, pv):
    lab, nlab = ndimage.label(mask, structure=np.ones((3, 3)))
    parent = list(range(nlab + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def join(a, b):
        if a and b:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[rb] = ra

    if pu:
        for j in range(mask.shape[1]):
            for dj in (-1, 0, 1):
                jj = j + dj
                if 0 <= jj < mask.shape[1]:
                    join(lab[0, j], lab[-1, jj])
    if pv:
        for i in range(mask.shape[0]):
            for di in (-1, 0, 1):
                ii = i + di
                if 0 <= ii < mask.shape[0]:
                    join(lab[i, 0], lab[ii, -1])
    roots = np.array([find(a) for a in range(nlab + 1)])
    lab = roots[lab]
    ids = [x for x in np.unique(lab) if x]
    return lab, ids


def scan_candidates(f: PhiField, n: int):
    """Cells flagged by winding, by a linearised zero inside the cell, or by a dip of |phi|."""
    us, vs = _grid(f, n)
    U, V = np.meshgrid(us, vs, indexing="ij")
    P = f(U, V)
    du = us[1] - us[0]
    dv = vs[1] - vs[0]
    c00, c10, c11, c01 = _cells(P, f.periodic_u, f.periodic_v)
    ang = [np.angle(c) for c in (c00, c10, c11, c01)]
    wind = sum(_wrapped(ang[(k + 1) % 4] - ang[k]) for k in range(4)) / (2 * np.pi)
    wind = np.rint(wind).astype(int)
    # linearised zero: phi ~ p0 + J x on the cell
    p0 = 0.25 * (c00 + c10 + c11 + c01)
    ju = 0.5 * ((c10 - c00) + (c11 - c01)) / du
    jv = 0.5 * ((c01 - c00) + (c11 - c10)) / dv
    J = np.stack([np.stack([ju.real, jv.real], -1), np.stack([ju.imag, jv.imag], -1)], -2)
    b = -np.stack([p0.real, p0.imag], -1)
    x = np.einsum("...ij,...j->...i", np.linalg.pinv(J, rcond=1e-8), b)
    resid = np.linalg.norm(np.einsum("...ij,...j->...i", J, x) - b, axis=-1)
    jn = np.linalg.norm(J, axis=(-2, -1))
    lin = (np.abs(x[..., 0]) <= 0.6 * du) & (np.abs(x[..., 1]) <= 0.6 * dv) & (resid <= 0.05 * jn * max(du, dv))
    # node dips of |phi| mapped to the cell they start
    A = np.abs(P)
    neigh = []
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                neigh.append(np.roll(np.roll(A, di, 0), dj, 1))
    neigh = np.stack(neigh)
    dip = (A <= neigh.min(axis=0)) & (A < 0.5 * neigh.mean(axis=0))
    if not f.periodic_u:
        dip[[0, -1], :] = False
    if not f.periodic_v:
        dip[:, [0, -1]] = False
    dip = dip[: wind.shape[0], : wind.shape[1]]
    mask = (wind != 0) | lin | dip
    return dict(U=U, V=V, P=P, du=du, dv=dv, wind=wind, mask=mask, lin=lin)


def detect_umbilic_set(f: PhiField, grid_n: int = 128, trace: bool = True, classify: bool = True,
                       curve_min_cells: int = 12, seed: int = 0) -> UmbilicReport:
    if grid_n < 64:
        raise ValueError("grid_n must be at least 64")
    sc = scan_candidates(f, grid_n)
    lab, ids = _label_periodic(sc["mask"], f.periodic_u, f.periodic_v)
    du, dv = sc["du"], sc["dv"]
    h = min(du, dv)
    points, curves, unresolved = [], [], []
    seeds_pts = []
    for k in ids:
        cells = np.argwhere(lab == k)
        cu = sc["U"][cells[:, 0], cells[:, 1]]
        cv = sc["V"][cells[:, 0], cells[:, 1]]
        corners = np.abs(sc["P"][cells[:, 0], cells[:, 1]])
        if len(cells) >= curve_min_cells:
            i = int(np.argmin(corners))
            u, v, r, ok = newton_refine(f, cu[i] + du / 2, cv[i] + dv / 2)
            if ok:
                seeds_pts.append(("curve", u, v))
                continue
        winding = sc["wind"][cells[:, 0], cells[:, 1]]
        wcells = cells[winding != 0]
        found = False
        i = int(np.argmin(corners))
        u, v, r, ok = newton_refine(f, cu[i] + du / 2, cv[i] + dv / 2)
        if ok:
            seeds_pts.append(("point", u, v))
            found = True
        elif len(wcells):
            # phi need not vanish at a winding singularity (ends of inverted minimal surfaces)
            for c in wcells:
                res = winding_bisect(f, sc["U"][c[0], c[1]], sc["V"][c[0], c[1]], du, dv)
                if res is not None:
                    seeds_pts.append(("pole", res[0], res[1]))
                    found = True
                    break
        if not found and (len(wcells) or corners.min() < 1e-3 * np.median(np.abs(sc["P"]))):
            unresolved.append(Candidate(f.name, float(cu[i]), float(cv[i]), int(winding.sum()), float(r), False,
                                        "Newton did not converge"))
    # curves first, so isolated seeds lying on them are absorbed
    for kind, u, v in seeds_pts:
        if kind != "curve":
            continue
        if any(_near_curve(c, f, u, v, 2 * h) for c in curves):
            continue
        if trace:
            try:
                c = trace_umbilic_curve(f, (u, v), step=0.5 * h)
            except TraceError as exc:
                unresolved.append(Candidate(f.name, u, v, 0, 0.0, False, f"trace failed: {exc}"))
                continue
            curves.append(c)
    taken = []
    for kind, u, v in seeds_pts:
        if kind == "curve":
            continue
        if any(_near_curve(c, f, u, v, 2 * h) for c in curves):
            continue
        if f.owns is not None and not bool(f.owns(np.array(u), np.array(v))):
            continue
        if any(abs(u - a) < h and abs(v - b) < h for a, b in taken):
            continue
        taken.append((u, v))
        if classify:
            try:
                p = classify_umbilic(f, (u, v), [4 * h, 8 * h, 16 * h], curves=curves,
                                     require_zero=(kind != "pole"), seed=seed)
            except ClassificationError as exc:
                unresolved.append(Candidate(f.name, u, v, 0, float(abs(f(u, v))), False, str(exc)))
                continue
            if kind == "pole":
                p.flags.append("phi_nonvanishing_singularity")
            points.append(p)
        else:
            points.append(UmbilicPoint(f.name, u, v, "unclassified", 0, 0, {"C": 0j, "a": 0j, "b": 0.0}, 0.0,
                                       float(abs(f(u, v)))))
    return UmbilicReport(points, curves, unresolved, grid_n)


def detect_surface(spec, grid_n: int = 128, **kw) -> UmbilicReport:
    """Run detection on every chart of a surface and merge the reports."""
    merged = UmbilicReport([], [], [], grid_n)
    for chart in spec.charts:
        r = detect_umbilic_set(field_from_chart(chart, spec.ambient), grid_n, **kw)
        merged.points += r.points
        merged.curves += r.curves
        merged.unresolved += r.unresolved
    for c in merged.curves:
        if spec.ambient == "R3":
            chart = spec.chart_named(c.chart)
            f = field_from_chart(chart, spec.ambient)
            c.H_constant = curve_h_dichotomy(f, c)[0] == "H_constant"
    return merged


def _near_curve(c: UmbilicCurve, f: PhiField, u, v, tol):
    if c.chart != f.name:
        return False
    P = np.asarray(c.polyline)
    du = P[:, 0] - u
    dv = P[:, 1] - v
    pu, pv = f.periods
    if pu:
        du = _wrap_period(du, pu)
    if pv:
        dv = _wrap_period(dv, pv)
    return bool(np.min(np.hypot(du, dv)) < tol)


def _wrap_period(d, p):
    return (d + p / 2) % p - p / 2


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

_BASIS = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)]


def _circle_samples(f, u, v, radii, n_ang=N_ANGLES, offset=0.0):
    th = offset + 2 * np.pi * np.arange(n_ang) / n_ang
    Z = np.concatenate([r * np.exp(1j * th) for r in radii])
    vals = f(u + Z.real, v + Z.imag)
    return Z, vals


def ray_slope(Z, vals, radii, n_ang):
    """Median over rays of the least-squares slope of log|phi| against log r."""
    A = np.abs(vals).reshape(len(radii), n_ang)
    lr = np.log(radii)
    good = np.all(A > 1e-300, axis=0) & (A.min(axis=0) > 1e-8 * A.max())
    if not np.any(good):
        raise ClassificationError("phi vanishes on every probe ray")
    la = np.log(A[:, good])
    lrc = lr - lr.mean()
    slopes = (lrc[:, None] * (la - la.mean(axis=0))).sum(axis=0) / (lrc**2).sum()
    return float(np.median(slopes))


def fit_normal_form(Z, vals, m):
    """Least-squares fit of F = phi / z^m by monomials z^j zbar^k (j + k <= 3)."""
    F = vals / Z**m
    B = np.stack([Z**j * np.conj(Z) ** k for j, k in _BASIS], axis=1)
    coef, *_ = np.linalg.lstsq(B, F, rcond=None)
    resid = np.linalg.norm(B @ coef - F) / max(np.linalg.norm(F), 1e-300)
    return coef, resid, F


def classify_umbilic(f: PhiField, p, probe_radii, curves=(), require_zero: bool = True, on_curve=None,
                     tau_a: float = TAU_A, tau_b: float = TAU_B, seed: int = 0) -> UmbilicPoint:
    """Normal-form classification at a refined candidate p = (u, v).

    m is the smallest integer (from the ray slope s, tried as s - 1 then s)
    for which F = phi/z^m has a non-degenerate zbar coefficient.
    """
    u, v = p
    phi0 = float(abs(f(u, v)))
    flags = []
    if require_zero and phi0 >= ZERO_TOL:
        flags.append("not_a_zero")
    radii = np.asarray(sorted(probe_radii), dtype=float)
    rng = np.random.default_rng(seed)
    Z, vals = _circle_samples(f, u, v, radii, offset=rng.uniform(0, 2 * np.pi / N_ANGLES))
    s = int(round(ray_slope(Z, vals, radii, N_ANGLES)))
    r0 = radii[0]
    small = slice(0, N_ANGLES)
    chosen = None
    for m in (s - 1, s):
        coef, resid, F = fit_normal_form(Z, vals, m)
        f00, f01 = coef[0], coef[2]
        top = np.abs(F[small]).max()
        if abs(f01) * r0 > 1e-3 * top or (m == s and abs(f00) > 1e-3 * top):
            chosen = (m, coef, resid, F)
            break
    if chosen is None:
        raise ClassificationError("zbar coefficient of the normal form vanishes (classification failure)")
    m, coef, resid, F = chosen
    f00, f10, f01 = coef[0], coef[1], coef[2]
    if abs(f01) * r0 > 1e-3 * np.abs(F[small]).max():
        C = -2j * f01
        b = float(abs(f10 / f01))
    else:
        # F(0) != 0 with no zbar term: type I, normalised by F(0) itself
        flags.append("zbar_coefficient_zero")
        C, b = complex(f00), float("nan")
        f01 = 0.0
    a = f00 / C
    if abs(f00) > tau_a * abs(f01):
        kind, n = "I", m
        if m <= 0:
            flags.append("non_umbilic")
            n = 0
    elif abs(b - 1.0) > tau_b:
        kind, n = "II", m + 1
    else:
        if on_curve is None:
            on_curve = any(_near_curve(c, f, u, v, 1e-6 + 1e-3 * r0) for c in curves) or _zero_line_through(
                f, u, v, m, radii[0])
        if on_curve:
            kind, n = "IV_singular", m
        else:
            kind, n = "III-or-II (ambiguous)", m + 1
    pt = UmbilicPoint(f.name, float(u), float(v), kind, int(m), int(n), {"C": complex(C), "a": complex(a), "b": b},
                      float(resid), phi0, flags)
    return pt


def _zero_line_through(f, u, v, m, r, n_ang: int = 256) -> bool:
    """Does F = phi/z^m vanish at two or more points of the circle of radius r?"""
    th = 2 * np.pi * (np.arange(n_ang) + 0.5) / n_ang

    def F(t):
        z = r * np.exp(1j * t)
        return f(u + z.real, v + z.imag) / z**m

    vals = F(th)
    top = np.abs(vals).max()
    hits = 0
    for k in range(n_ang):
        a, b = abs(vals[k]), abs(vals[(k + 1) % n_ang])
        c = abs(vals[k - 1])
        if a <= b and a <= c and a < 0.2 * top:
            dt = 2 * np.pi / n_ang
            t0 = th[k]
            res = optimize.minimize_scalar(lambda s: abs(F(np.array([t0 + s]))[0]), bounds=(-dt, dt),
                                           method="bounded", options={"xatol": 1e-15})
            if res.fun < 1e-9 * top:
                hits += 1
    return hits >= 2


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------


def _kernel(J):
    _, s, Vt = np.linalg.svd(J)
    return Vt[-1], s


def _correct(f: PhiField, x, tol, maxit=30):
    for _ in range(maxit):
        F = f(x[0], x[1])
        if abs(F) < tol:
            return x, abs(F)
        J = f.jacobian(x[0], x[1])
        x = x - np.linalg.pinv(J, rcond=1e-8) @ np.array([F.real, F.imag])
    return x, abs(f(x[0], x[1]))


def trace_umbilic_curve(f: PhiField, seed, step: float = 0.01, max_steps: int = 200000,
                        tol: float = 1e-12) -> UmbilicCurve:
    """Predictor-corrector continuation of the zero line of phi through ``seed``."""
    x0, r0 = _correct(f, np.array(seed, dtype=float), tol)
    if r0 > 1e-9:
        raise TraceError("seed is not in the Newton basin of the zero set")
    t0, s = _kernel(f.jacobian(*x0))
    if s[1] > 1e-6 * max(s[0], 1e-300):
        raise TraceError("zero is isolated (full-rank Jacobian), not on a curve")
    pu, pv = f.periods

    def march(direction):
        pts = [x0.copy()]
        t = direction * t0
        x = x0.copy()
        for _ in range(max_steps):
            h = step
            while True:
                y, r = _correct(f, x + h * t, tol)
                if r < 1e-9 and np.linalg.norm(y - x) < 2 * h:
                    break
                h *= 0.5
                if h < 1e-6 * step:
                    raise TraceError("step collapse")
            if not f.inside(y[0], y[1]):
                return pts, False
            tn, _ = _kernel(f.jacobian(*y))
            if np.dot(tn, t) < 0:
                tn = -tn
            pts.append(y)
            x, t = y, tn
            if len(pts) > 3:
                d = y - x0
                if pu:
                    d[0] = _wrap_period(d[0], pu)
                if pv:
                    d[1] = _wrap_period(d[1], pv)
                if np.linalg.norm(d) < 0.5 * step:
                    pts[-1] = x0 + (y - x0 - d)
                    return pts, True
        raise TraceError("curve did not close within the step budget")

    fwd, closed = march(1.0)
    if closed:
        pts = np.array(fwd)
    else:
        bwd, _ = march(-1.0)
        pts = np.array(bwd[::-1] + fwd[1:])
    phis = np.abs(f(pts[:, 0], pts[:, 1]))
    L = curve_length_g(f, pts)
    c = UmbilicCurve(f.name, pts, closed, L, max_phi=float(phis.max()))
    if not closed:
        c.flags.append("open: left the chart")
    kg = geodesic_curvature(f, c)
    c.k_g_max = float(np.max(np.abs(kg)))
    c.geodesic = c.k_g_max < 1e-5
    c.singular_points = _singular_points_on(f, c)
    return c


def _param(pts):
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(seg)])


def curve_length_g(f: PhiField, pts) -> float:
    """Composite Simpson of e^lambda along the polyline."""
    t = _param(pts)
    lam = f.lam_grad(pts[:, 0], pts[:, 1])[0]
    return float(integrate.simpson(np.exp(lam), x=t))


def _spline(c: UmbilicCurve):
    pts = np.asarray(c.polyline)
    t = _param(pts)
    if c.closed:
        return interpolate.CubicSpline(t, pts, bc_type="periodic" if np.allclose(pts[0], pts[-1]) else "not-a-knot"), t
    return interpolate.CubicSpline(t, pts), t


def geodesic_curvature(f: PhiField, c: UmbilicCurve):
    """k_g = e^{-lambda}(k_0 + d lambda / d n) for g = e^{2 lambda}(du^2 + dv^2)."""
    pts = np.asarray(c.polyline)
    if c.closed:
        drift = pts[-1] - pts[0]
        t = _param(pts)
        T = t[-1]
        per = pts - np.outer(t / T, drift)
        sp = interpolate.CubicSpline(t, per, bc_type="periodic")
        d1 = sp(t, 1) + drift / T
        d2 = sp(t, 2)
    else:
        sp, t = _spline(c)
        d1, d2 = sp(t, 1), sp(t, 2)
    speed = np.linalg.norm(d1, axis=1)
    k0 = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / speed**3
    nrm = np.stack([-d1[:, 1], d1[:, 0]], axis=1) / speed[:, None]
    lam, lu, lv = f.lam_grad(pts[:, 0], pts[:, 1])
    return np.exp(-lam) * (k0 + nrm[:, 0] * lu + nrm[:, 1] * lv)


def _singular_points_on(f: PhiField, c: UmbilicCurve):
    """Zeros of the leading (first-order) coefficient of phi along the curve."""
    pts = np.asarray(c.polyline)
    g = np.array([np.linalg.norm(f.jacobian(*p), 2) for p in pts])
    med = np.median(g)
    out = []
    for k in range(1, len(g) - 1):
        if g[k] <= g[k - 1] and g[k] <= g[k + 1] and g[k] < 1e-3 * med:
            h = np.linalg.norm(pts[k + 1] - pts[k - 1])
            try:
                p = classify_umbilic(f, tuple(pts[k]), [h, 2 * h, 4 * h], on_curve=True)
            except ClassificationError:
                continue
            if p.kind == "IV_singular":
                out.append(p)
    return out


def curve_h_dichotomy(f_or_H, c: UmbilicCurve | None = None, tol: float = 1e-6):
    """("H_constant", 0) or ("H_critical_points", k) from H sampled along a closed curve."""
    if c is None:
        H = np.asarray(f_or_H, dtype=float)
    else:
        pts = np.asarray(c.polyline)
        H = np.asarray(f_or_H.H(pts[:, 0], pts[:, 1]), dtype=float)
        if c.closed and len(H) > 1:
            H = H[:-1]
    osc = float(H.max() - H.min())
    if c is not None:
        c.H_variation = osc
    if osc < tol * (1.0 + np.abs(H).max()):
        return "H_constant", 0
    dH = np.diff(np.append(H, H[0]))
    sgn = np.sign(dH[np.abs(dH) > 1e-14 * (1 + np.abs(H).max())])
    changes = int(np.sum(sgn != np.roll(sgn, 1)))
    return "H_critical_points", changes


# ---------------------------------------------------------------------------
# geodesic / Babich-Bobenko test
# ---------------------------------------------------------------------------


@dataclass
class BBReport:
    k_g_max: float
    planar: bool
    orthogonal: bool
    H_hyp_residual: float
    conf_e: list | None
    conf_e_residual: float | None
    plane_normal: list
    plane_point: list
    plane_residual: float
    orthogonality_defect: float

    @property
    def passed(self):
        return self.k_g_max < 1e-5 and self.planar and self.orthogonal and self.H_hyp_residual < 1e-6

    def as_json(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def conformal_plane(nu, Y):
    """e with eta(e, e) = 1 minimising sum eta(nu, e)^2 + eta(Y, e)^2."""
    E = eta_matrix()
    A = np.concatenate([nu, Y]) @ E
    M = A.T @ A
    w, vecs = linalg.eig(M, E)
    best = None
    for k in range(5):
        if abs(w[k].imag) > 1e-8 * (1 + abs(w[k])) or not np.all(np.abs(vecs[:, k].imag) < 1e-12):
            continue
        e = vecs[:, k].real
        q = e @ E @ e
        if q <= 0:
            continue
        e = e / math.sqrt(q)
        val = float(np.sum((A @ e) ** 2))
        if best is None or val < best[1]:
            best = (e, val)
    if best is None:
        return None, None
    e, val = best
    i = int(np.argmax(np.abs(e)))
    if e[i] < 0:
        e = -e
    return e, val


def geodesic_bb_test(chart, curve: UmbilicCurve, ambient: str = "R3", grid_n: int = 64,
                     planar_tol: float = 1e-8, orth_tol: float = 1e-6) -> BBReport:
    if ambient != "R3":
        raise ValueError("geodesic_bb_test needs an R3 surface")
    f = field_from_chart(chart, ambient)
    pts = np.asarray(curve.polyline)
    if curve.closed:
        pts = pts[:-1]
    g = geometry_at(chart, ambient, pts[:, 0], pts[:, 1])
    X = g.X
    c0 = X.mean(axis=0)
    _, sv, Vt = np.linalg.svd(X - c0)
    e_p = Vt[-1]
    size = max(sv[0] / math.sqrt(len(X)), 1e-300)
    plane_res = float(np.max(np.abs((X - c0) @ e_p)))
    planar = plane_res < planar_tol * max(1.0, size)
    defect = float(np.max(np.abs(g.n @ e_p)))
    orthogonal = defect < orth_tol
    kg = geodesic_curvature(f, curve)
    _, _, U, V = chart.grid(grid_n)
    G = geometry_at(chart, ambient, U, V)
    zeta = (G.X - c0) @ e_p
    Hh = float(np.max(np.abs(zeta * G.H + G.n @ e_p)))
    fr = _frame(g, ambient)
    e, val = conformal_plane(fr.nu, fr.Y)
    return BBReport(float(np.max(np.abs(kg))), bool(planar), bool(orthogonal), Hh,
                    None if e is None else e.tolist(), val, e_p.tolist(), c0.tolist(), plane_res, defect)
