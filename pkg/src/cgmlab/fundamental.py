"""First and second fundamental forms of charts into R^3 and S^3.

Complex quantities use z = u + iv and the Wirtinger derivatives
d_z = (d_u - i d_v)/2.  In an isothermal chart g = e^{2 lambda}|dz|^2 and

    phi = 2 <Phi_zz, n>,   H = 2 e^{-2 lambda} <Phi_zzbar, n>,
    n_z = -H Phi_z - e^{-2 lambda} phi Phi_zbar.

The same formulas hold for S^3 with N in place of n.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import jets, stencil

ISO_TOL = 1e-8


class ImmersionError(ValueError):
    """Degenerate metric: the chart is not an immersion here."""


class NotIsothermalError(ValueError):
    pass


class OffSphereError(ValueError):
    pass


@dataclass
class FundamentalData:
    """Pointwise (vectorised) fundamental data; matrix axes are trailing."""

    ambient: str
    position: np.ndarray
    g: np.ndarray
    lam: np.ndarray
    normal: np.ndarray
    A: np.ndarray
    H: np.ndarray
    Aring: np.ndarray
    phi: np.ndarray
    h0_coeff: np.ndarray
    isothermal: np.ndarray

    @property
    def Aring_norm2(self):
        """|A-ring|^2_g."""
        gi = np.linalg.inv(self.g)
        M = gi @ self.Aring
        return np.einsum("...ij,...ji->...", M, M)

    @property
    def trace_Aring(self):
        gi = np.linalg.inv(self.g)
        return np.einsum("...ij,...ji->...", gi, self.Aring)

    @property
    def principal_curvatures(self):
        gi = np.linalg.inv(self.g)
        k = np.linalg.eigvals(gi @ self.A).real
        return np.sort(k, axis=-1)

    @property
    def area_density(self):
        return np.sqrt(np.linalg.det(self.g))

    @property
    def willmore_density(self):
        """|A-ring|^2_g dvol_g per unit du dv."""
        return self.Aring_norm2 * self.area_density


def _components_last(jet):
    return np.moveaxis(np.asarray(jet), 1, -1)


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def cross4(a, b, c):
    """Vector orthogonal to a, b, c in R^4 with det(a, b, c, x) = <cross4, x>."""
    M = np.stack([a, b, c], axis=-2)
    out = np.empty(M.shape[:-2] + (4,))
    for i in range(4):
        cols = [j for j in range(4) if j != i]
        out[..., i] = (-1) ** (i + 3) * np.linalg.det(M[..., cols])
    return out


def _finish(ambient, X, Xu, Xv, Xuu, Xuv, Xvv, n, iso_tol):
    g = np.stack([np.stack([_dot(Xu, Xu), _dot(Xu, Xv)], -1), np.stack([_dot(Xv, Xu), _dot(Xv, Xv)], -1)], -2)
    det = np.linalg.det(g)
    if np.any(~(det > 1e-24 * np.maximum(1.0, g[..., 0, 0] ** 2))):
        raise ImmersionError("degenerate metric (det g <= tol)")
    A = np.stack([np.stack([_dot(Xuu, n), _dot(Xuv, n)], -1), np.stack([_dot(Xuv, n), _dot(Xvv, n)], -1)], -2)
    gi = np.linalg.inv(g)
    H = 0.5 * np.einsum("...ij,...ji->...", gi, A)
    Aring = A - H[..., None, None] * g
    iso = (np.abs(g[..., 0, 0] - g[..., 1, 1]) + np.abs(g[..., 0, 1])) < iso_tol * g[..., 0, 0]
    lam = 0.5 * np.log(g[..., 0, 0])
    phi = Aring[..., 0, 0] - 1j * Aring[..., 0, 1]
    h0 = 0.5 * (A[..., 0, 0] - A[..., 1, 1]) - 1j * A[..., 0, 1]
    return FundamentalData(ambient, X, g, lam, n, A, H, Aring, phi, h0, iso)


def fundamental_r3(jet, iso_tol: float = ISO_TOL) -> FundamentalData:
    J = _components_last(jet)
    if J.shape[-1] != 3:
        raise ValueError("fundamental_r3 needs a 3-component jet")
    X, Xu, Xv, Xuu, Xuv, Xvv = J[:6]
    c = np.cross(Xu, Xv)
    nc = np.linalg.norm(c, axis=-1)
    if np.any(~(nc > 1e-14)):
        raise ImmersionError("degenerate metric (det g <= tol)")
    n = c / nc[..., None]
    return _finish("R3", X, Xu, Xv, Xuu, Xuv, Xvv, n, iso_tol)


def s3_normal(X, Xu, Xv):
    """Unit normal of a surface in S^3, oriented as det(Psi, Psi_u, Psi_v, N) > 0."""
    c = cross4(X, Xu, Xv)
    nc = np.linalg.norm(c, axis=-1)
    if np.any(~(nc > 1e-14)):
        raise ImmersionError("degenerate metric (det g <= tol)")
    return c / nc[..., None]


def fundamental_s3(jet, iso_tol: float = ISO_TOL, sphere_tol: float = 1e-10) -> FundamentalData:
    J = _components_last(jet)
    if J.shape[-1] != 4:
        raise ValueError("fundamental_s3 needs a 4-component jet")
    X, Xu, Xv, Xuu, Xuv, Xvv = J[:6]
    if np.any(np.abs(np.linalg.norm(X, axis=-1) - 1.0) > sphere_tol):
        raise OffSphereError("point off the unit sphere")
    n = s3_normal(X, Xu, Xv)
    return _finish("S3", X, Xu, Xv, Xuu, Xuv, Xvv, n, iso_tol)


def fundamental(jet, ambient: str, iso_tol: float = ISO_TOL) -> FundamentalData:
    return fundamental_r3(jet, iso_tol) if ambient == "R3" else fundamental_s3(jet, iso_tol)


# ---------------------------------------------------------------------------
# complex-analytic data in isothermal charts
# ---------------------------------------------------------------------------


@dataclass
class LocalGeometry:
    fd: FundamentalData
    X: np.ndarray
    Xz: np.ndarray
    Xzb: np.ndarray
    e2l: np.ndarray
    e2l_z: np.ndarray
    n: np.ndarray
    n_z: np.ndarray
    H: np.ndarray
    Hz: np.ndarray
    phi: np.ndarray
    phi_z: np.ndarray
    phi_zb: np.ndarray

    @property
    def lam(self):
        return 0.5 * np.log(self.e2l)

    @property
    def lam_z(self):
        return 0.5 * self.e2l_z / self.e2l

    @property
    def e2rho(self):
        return np.abs(self.phi) ** 2 / self.e2l

    @property
    def gauss_codazzi(self):
        """d_zbar phi - e^{2 lambda} d_z H from exact jets."""
        return self.phi_zb - self.e2l * self.Hz



def local_geometry(jet, ambient: str, iso_tol: float = ISO_TOL, check_isothermal: bool = True) -> LocalGeometry:
    fd = fundamental(jet, ambient, iso_tol)
    if check_isothermal and not np.all(fd.isothermal):
        raise NotIsothermalError("chart is not isothermal: |g11 - g22| + |g12| >= tol * g11")
    cd = jets.complex_derivatives(jets.Jet(_components_last(jet)))
    X = cd["value"]
    Xz, Xzb, Xzz, Xzzb = cd["z"], cd["zb"], cd["zz"], cd["zzb"]
    Xzzz, Xzzzb = cd["zzz"], cd["zzzb"]
    n = fd.normal

    def dot(a, b):
        return np.einsum("...i,...i->...", a, b)

    e2l = 2.0 * dot(Xz, Xzb).real
    e2l_z = 2.0 * dot(Xzz, Xzb) + 2.0 * dot(Xz, Xzzb)
    H = 2.0 * dot(Xzzb, n).real / e2l
    phi = 2.0 * dot(Xzz, n)
    em2l = 1.0 / e2l
    n_z = -H[..., None] * Xz - (em2l * phi)[..., None] * Xzb
    n_zb = n_z.conj()
    phi_z = 2.0 * dot(Xzzz, n) + 2.0 * dot(Xzz, n_z)
    phi_zb = 2.0 * dot(Xzzzb, n) + 2.0 * dot(Xzz, n_zb)
    Hz = -2.0 * em2l**2 * e2l_z * dot(Xzzb, n).real + 2.0 * em2l * (dot(Xzzzb, n) + dot(Xzzb, n_z))
    return LocalGeometry(fd, X, Xz, Xzb, e2l, e2l_z, n, n_z, H, Hz, phi, phi_z, phi_zb)


def geometry_at(chart, ambient: str, u, v, **kw) -> LocalGeometry:
    return local_geometry(chart.jet(np.asarray(u, dtype=float), np.asarray(v, dtype=float)), ambient, **kw)


def mean_curvature_gradient(chart, ambient: str, u, v, method: str = "jet", h: float = 1e-3):
    """d_z H at chart points, from exact jets or from a fourth-order stencil on H."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if method == "jet":
        return geometry_at(chart, ambient, u, v).Hz
    if method != "stencil":
        raise ValueError("method must be 'jet' or 'stencil'")
    stencil.check_fits(chart, u, v, h)
    return stencil.d_z(lambda a, b: fundamental(chart.jet(a, b), ambient).H, u, v, h)


def gauss_codazzi_residual(chart, ambient: str, u, v, h: float = 1e-3):
    """|d_zbar phi - e^{2 lambda} d_z H| with d_zbar phi and d_z H both by stencil."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    stencil.check_fits(chart, u, v, h)
    e2l = np.exp(2.0 * fundamental(chart.jet(u, v), ambient).lam)
    phi_zb = stencil.d_zb(lambda a, b: fundamental(chart.jet(a, b), ambient).phi, u, v, h)
    Hz = stencil.d_z(lambda a, b: fundamental(chart.jet(a, b), ambient).H, u, v, h)
    return np.abs(phi_zb - e2l * Hz)
