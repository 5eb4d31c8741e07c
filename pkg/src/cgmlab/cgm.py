"""Conformal Gauss map, Bryant's quartic, curvatures of Y and structure-equation residuals."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import stencil
from .fundamental import LocalGeometry, geometry_at, local_geometry
from .minkowski import eta_dot

QUARTIC_TOL = 1e-6
# a point is too close to the umbilic set when |phi| < RESOLVE * h * |grad phi|
RESOLVE = 8.0
FLOOR = 1e-6


class UmbilicProximityError(ValueError):
    pass


class RouteDisagreement(ArithmeticError):
    """The two evaluations of Q disagree: discretisation fault."""


@dataclass
class ConformalFrame:
    Y: np.ndarray
    Yz: np.ndarray
    nu: np.ndarray
    e2rho: np.ndarray
    Q: np.ndarray | None = None
    psi: np.ndarray | None = None
    ambient: str = "R3"

    @property
    def H(self):
        """Mean curvature read off Y: Y5 - Y4 in R3, Y5 in S3."""
        if self.ambient == "S3":
            return self.Y[..., 4]
        return self.Y[..., 4] - self.Y[..., 3]


def _null_vector(geom: LocalGeometry, ambient: str):
    X = geom.X
    if ambient == "R3":
        x2 = np.einsum("...i,...i->...", X, X)
        return np.concatenate([X, (0.5 * (x2 - 1.0))[..., None], (0.5 * (x2 + 1.0))[..., None]], axis=-1)
    return np.concatenate([X, np.ones(X.shape[:-1] + (1,))], axis=-1)


def _frame(geom: LocalGeometry, ambient: str) -> ConformalFrame:
    X, n = geom.X, geom.n
    nu = _null_vector(geom, ambient)
    if ambient == "R3":
        nx = np.einsum("...i,...i->...", n, X)[..., None]
        tail = np.concatenate([n, nx, nx], axis=-1)
        xz = np.einsum("...i,...i->...", X, geom.Xzb)[..., None]
        nu_zb = np.concatenate([geom.Xzb, xz, xz], axis=-1)
    else:
        tail = np.concatenate([n, np.zeros(n.shape[:-1] + (1,))], axis=-1)
        nu_zb = np.concatenate([geom.Xzb, np.zeros(n.shape[:-1] + (1,))], axis=-1)
    Y = geom.H[..., None] * nu + tail
    Yz = geom.Hz[..., None] * nu - (geom.phi / geom.e2l)[..., None] * nu_zb
    with np.errstate(divide="ignore", invalid="ignore"):
        psi = np.where(geom.phi != 0, np.angle(geom.phi), np.nan)
    return ConformalFrame(Y, Yz, nu, geom.e2rho, None, psi, ambient)


def conformal_gauss_map_r3(jet) -> ConformalFrame:
    return _frame(local_geometry(jet, "R3"), "R3")


def conformal_gauss_map_s3(jet) -> ConformalFrame:
    return _frame(local_geometry(jet, "S3"), "S3")


def conformal_gauss_map(chart, ambient: str, u, v) -> ConformalFrame:
    return _frame(geometry_at(chart, ambient, u, v), ambient)


# ---------------------------------------------------------------------------
# pointwise fields used inside stencils
# ---------------------------------------------------------------------------


class Fields:
    """Evaluators of analytic fields on a chart, for use with stencils."""

    def __init__(self, chart, ambient: str):
        self.chart = chart
        self.ambient = ambient
        self.c = 0.0 if ambient == "R3" else 1.0

    def geom(self, u, v) -> LocalGeometry:
        return geometry_at(self.chart, self.ambient, u, v)

    def Yz(self, u, v):
        return _frame(self.geom(u, v), self.ambient).Yz

    def phi_z(self, u, v):
        return self.geom(u, v).phi_z

    def dlogphi(self, u, v):
        g = self.geom(u, v)
        return g.phi_z / g.phi

    def rho_z(self, u, v):
        g = self.geom(u, v)
        return 0.5 * (g.phi_z / g.phi + np.conj(g.phi_zb) / np.conj(g.phi)) - g.lam_z

    def Q_explicit(self, u, v, h):
        g = self.geom(u, v)
        phi_zzb = stencil.d_zb(self.phi_z, u, v, h)
        return (phi_zzb * g.phi - g.phi_z * g.phi_zb) / g.e2l + g.phi**2 * (g.H**2 + self.c) / 4.0

    def Q_frame(self, u, v, h):
        Yzz = stencil.d_z(self.Yz, u, v, h)
        return eta_dot(Yzz, Yzz)


def _pts(u, v):
    u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    return u, v


def bryant_quartic(chart, ambient: str, u, v, h: float = 1e-3, tol: float | None = QUARTIC_TOL,
                   both: bool = False):
    """Q by the explicit phi-formula, cross-checked against <Y_zz, Y_zz>_eta."""
    u, v = _pts(u, v)
    stencil.check_fits(chart, u, v, h)
    F = Fields(chart, ambient)
    q2 = F.Q_explicit(u, v, h)
    q1 = F.Q_frame(u, v, h)
    if tol is not None:
        scale = 1.0 + np.abs(q2)
        if np.any(np.abs(q1 - q2) > tol * scale):
            raise RouteDisagreement(f"Q routes disagree by {np.max(np.abs(q1 - q2) / scale):.3e}")
    return (q2, q1) if both else q2


@dataclass
class CurvatureField:
    KY: np.ndarray
    KYperp: np.ndarray
    one_minus_KY_plus_iKYperp: np.ndarray
    KY_identity: np.ndarray
    residuals: dict = field(default_factory=dict)
    mask: np.ndarray | None = None


def resolvable(geom: LocalGeometry, h: float, floor: float = FLOOR):
    """Points whose distance to the umbilic set is resolved by a stencil of step h."""
    a = np.abs(geom.phi)
    grad = np.abs(geom.phi_z) + np.abs(geom.phi_zb)
    scale = np.abs(geom.phi) * np.exp(-geom.lam)
    med = np.median(scale) if scale.size else 0.0
    return (a > RESOLVE * h * grad) & (scale > floor * med)


def curvature_fields(chart, ambient: str, u, v, h: float = 1e-3, strict: bool = True,
                     mask_h: float | None = None) -> CurvatureField:
    """K_Y, K_Y-perp and all structure-equation residuals at chart points.

    With ``strict`` an error is raised near the umbilic set; otherwise those
    points are NaN and reported in ``mask``.  ``mask_h`` (default h) sets the
    step used for that proximity test, so runs at different h can share a mask.
    """
    u, v = _pts(u, v)
    stencil.check_fits(chart, u, v, 4 * h, reach=1)
    F = Fields(chart, ambient)
    g = F.geom(u, v)
    ok = resolvable(g, max(h, mask_h or h))
    if strict and not np.all(ok):
        raise UmbilicProximityError("point too close to the umbilic set for curvature evaluation")
    fr = _frame(g, ambient)
    e2rho = g.e2rho
    with np.errstate(divide="ignore", invalid="ignore"):
        Q = F.Q_explicit(u, v, h)
        Qr = Q * g.e2l / g.phi**2
        rho_zzb = stencil.d_zb(F.rho_z, u, v, h).real
        KY = -4.0 * rho_zzb / e2rho
        rhs = 4.0 * Qr / e2rho
        KYperp = rhs.imag
        KY_id = 1.0 - rhs.real
        Yzzb = stencil.d_zb(F.Yz, u, v, h)
        harm = np.linalg.norm(Yzzb + 0.5 * e2rho[..., None] * fr.Y, axis=-1)
        phi_zb = stencil.d_zb(lambda a, b: F.geom(a, b).phi, u, v, h)
        Hz = stencil.d_z(lambda a, b: F.geom(a, b).H, u, v, h)
        gc = np.abs(phi_zb - g.e2l * Hz)
        qhol = np.abs(stencil.d_zb(lambda a, b: F.Q_explicit(a, b, h), u, v, h))
        gauss = np.abs(2.0 * rho_zzb - 2.0 * Qr.real + 0.5 * e2rho)
        ricci = np.abs(stencil.d_zb(F.dlogphi, u, v, h).imag - Qr.imag)
    res = {"harmonicity": harm, "gauss_codazzi": gc, "q_holomorphy": qhol, "gauss_eq": gauss, "ricci_eq": ricci}
    if not np.all(ok):
        bad = ~ok
        KY = np.where(bad, np.nan, KY)
        KYperp = np.where(bad, np.nan, KYperp)
        KY_id = np.where(bad, np.nan, KY_id)
        rhs = np.where(bad, np.nan, rhs)
        for k in ("q_holomorphy", "gauss_eq", "ricci_eq"):
            res[k] = np.where(bad, np.nan, res[k])
    return CurvatureField(KY, KYperp, rhs, KY_id, res, ok)


def gauss_curvatures(chart, ambient: str, u, v, h: float = 1e-3):
    """(K_Y, K_Y-perp) without the residual suite: Liouville for K_Y, Q for K_Y-perp."""
    u, v = _pts(u, v)
    stencil.check_fits(chart, u, v, h)
    F = Fields(chart, ambient)
    g = F.geom(u, v)
    with np.errstate(divide="ignore", invalid="ignore"):
        KY = -4.0 * stencil.d_zb(F.rho_z, u, v, h).real / g.e2rho
        KYperp = (4.0 * F.Q_explicit(u, v, h) * g.e2l / g.phi**2 / g.e2rho).imag
    return KY, KYperp


def suite_grid(chart, n: int, margin: float, region=None):
    """n x n nodes; non-periodic directions keep ``margin`` away from the chart edge."""
    u0, u1, v0, v1 = region if region is not None else chart.domain

    def axis(a, b, periodic, lo, hi):
        if periodic and region is None:
            return a + (b - a) * np.arange(n) / n
        a, b = max(a, lo + margin), min(b, hi - margin)
        return a + (b - a) * (np.arange(n) + 0.5) / n

    u = axis(u0, u1, chart.periodic_u, chart.u0, chart.u1)
    v = axis(v0, v1, chart.periodic_v, chart.v0, chart.v1)
    return np.meshgrid(u, v, indexing="ij")


def default_step(chart, n: int, region=None) -> float:
    u0, u1, v0, v1 = region if region is not None else chart.domain
    return min(u1 - u0, v1 - v0) / n


def residual_maxima(chart, ambient: str, n: int = 128, h: float | None = None, region=None,
                    mask_h: float | None = None, margin: float | None = None) -> dict:
    """Max of each structure residual over an n x n grid of the chart (or of ``region``).

    Points masked as too close to the umbilic set are left out; the count is
    reported under ``masked``.
    """
    if h is None:
        h = default_step(chart, n, region)
    if margin is None:
        margin = 4.5 * max(h, mask_h or h)
    U, V = suite_grid(chart, n, margin, region)
    cf = curvature_fields(chart, ambient, U, V, h, strict=False, mask_h=mask_h)
    out = {k: float(np.nanmax(r)) if np.any(np.isfinite(r)) else float("nan") for k, r in cf.residuals.items()}
    out["masked"] = int(np.sum(~cf.mask))
    return out


def refinement_ratios(chart, ambient: str, n: int = 128, h: float | None = None, region=None):
    """Residual maxima at steps h and h/2 on the same grid and the same umbilic mask."""
    if h is None:
        h = default_step(chart, n, region)
    margin = 4.5 * h
    a = residual_maxima(chart, ambient, n, h, region, mask_h=h, margin=margin)
    b = residual_maxima(chart, ambient, n, h / 2, region, mask_h=h, margin=margin)
    return a, b


# ---------------------------------------------------------------------------
# field dumps
# ---------------------------------------------------------------------------

CSV_COLUMNS = ("u", "v", "lambda", "H", "re_phi", "im_phi", "e2rho", "KY", "KYperp", "harmonicity",
               "gauss_codazzi", "q_holomorphy", "gauss_eq", "ricci_eq")


def field_table(chart, ambient: str, n: int = 64, h: float | None = None):
    if h is None:
        h = min(chart.u1 - chart.u0, chart.v1 - chart.v0) / n / 4
    U, V = suite_grid(chart, n, 4.5 * h)
    g = geometry_at(chart, ambient, U, V)
    cf = curvature_fields(chart, ambient, U, V, h, strict=False)
    cols = [U, V, g.lam, g.H, g.phi.real, g.phi.imag, g.e2rho, cf.KY, cf.KYperp] + [
        cf.residuals[k] for k in CSV_COLUMNS[9:]
    ]
    return np.stack([np.ravel(c) for c in cols], axis=1)


def write_fields_csv(path, chart, ambient: str, n: int = 64) -> None:
    rows = field_table(chart, ambient, n)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([f"{x:.12g}" for x in r])
