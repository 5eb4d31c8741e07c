"""Willmore energies E = int |A-ring|^2 and W = int H^2, and the space-form identities.

In S^3 the Willmore energy is W = int (H^2 + 1) dvol_g, so that E = 2W - 4 pi chi
holds in both ambients.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import gaussbonnet as gb
from .fundamental import geometry_at


# harmonicity residual above which a surface is reported as not Willmore
WILLMORE_FLOOR = 1e-4


class EnergyError(ValueError):
    pass


def harmonicity_residual(surface, n: int = 32, h: float = 1e-3) -> float:
    """Max |Y_{z zbar} + (e^{2 rho}/2) Y| over an n x n grid of the first chart."""
    from .cgm import residual_maxima

    return residual_maxima(surface.charts[0], surface.ambient, n, h)["harmonicity"]


def _h2_density(chart, ambient, u, v, h=None):
    def f(a, b):
        g = geometry_at(chart, ambient, a, b)
        c = 0.0 if ambient == "R3" else 1.0
        return (g.H**2 + c) * g.e2l

    return gb._chunked(f, u, v)


def _e_density(chart, ambient, u, v, h=None):
    return 2.0 * gb.gy_area_density(chart, ambient, u, v)


def willmore_energies(surface, res: gb.Resolution | None = None, check: bool = False, rtol: float = 1e-6):
    """(E, W) by quadrature over the owned parts of the atlas.

    On open surfaces W is NaN and E covers the truncated domain only.  With
    ``check`` both are recomputed at 1.5x resolution and a QuadratureError is
    raised when they move by more than ``rtol`` relative.
    """
    res = res or gb.Resolution()

    def run(r):
        rules = gb.quadrature_rules(surface, None, 0.0, r)
        E = gb._integrate(rules, surface.ambient, _e_density, None)
        W = gb._integrate(rules, surface.ambient, _h2_density, None) if surface.closed else float("nan")
        return E, W

    E, W = run(res)
    if check:
        E2, W2 = run(res.scaled(1.5))
        for a, b, name in ((E, E2, "E"), (W, W2, "W")):
            if np.isfinite(a) and abs(a - b) > rtol * (1.0 + abs(b)):
                raise gb.QuadratureError(f"{name} not converged: {b:.12g}, Richardson estimate {abs(a - b):.3e}")
        E, W = E2, W2
    return E, W


def area(surface, res: gb.Resolution | None = None) -> float:
    rules = gb.quadrature_rules(surface, None, 0.0, res or gb.Resolution())
    return gb._integrate(rules, surface.ambient, gb.area_density, None)


# ---------------------------------------------------------------------------
# the three identities
# ---------------------------------------------------------------------------


def _check(name, lhs, rhs, **extra):
    out = {"name": name, "lhs": float(lhs), "rhs": float(rhs), "gap": float(abs(lhs - rhs))}
    out.update(extra)
    return out


def crossing_length_euclid(surface, curve, n: int = 20000) -> float:
    """Euclidean length of the image of an umbilic curve (the 1-dimensional Hausdorff measure)."""
    ch = surface.chart_named(curve.chart)
    f, T = gb._curve_spline(curve)
    pts = f(np.linspace(0.0, T, n + 1))
    X = np.moveaxis(ch.jet(pts[:, 0], pts[:, 1]), 1, -1)[0]
    return float(np.sum(np.linalg.norm(np.diff(X, axis=0), axis=1)))


def _hyperbolic_density(height):
    def dens(chart, ambient, u, v, h=None):
        def f(a, b):
            g = geometry_at(chart, ambient, a, b)
            return g.e2l / (g.X[..., 2] - height) ** 2

        return gb._chunked(f, u, v)

    return dens


def bb_integrand_identity(surface, u, v, h: float = 1e-3):
    """|-4 Q h0^{-2} dvol_g - dvol_g / zeta^2| per unit du dv, relative to dvol_g / zeta^2."""
    from .cgm import Fields

    ch = surface.charts[0]
    height = surface.metadata.get("plane_height", 0.0)
    F = Fields(ch, surface.ambient)
    g = F.geom(u, v)
    lhs = -4.0 * F.Q_explicit(u, v, h) * g.e2l / g.phi**2
    rhs = g.e2l / (g.X[..., 2] - height) ** 2
    return np.abs(lhs - rhs) / np.abs(rhs)


def renormalized_area_table(surface, report=None, eps_min=gb.EPS_MIN, eps_max=gb.EPS_MAX,
                            steps=gb.EPS_STEPS, res=None, grid_n: int = 256) -> dict:
    """A(eps) = int_{d > eps} dvol_g / zeta^2 - (2/eps) H^1(crossing curve) over the eps ladder."""
    from .umbilic import detect_surface

    if not surface.metadata.get("bb_type"):
        raise EnergyError("the renormalised hyperbolic area needs a Babich-Bobenko surface (metadata bb_type)")
    if report is None:
        report = detect_surface(surface, 64)
    if not report.curves:
        raise EnergyError("no crossing curve detected")
    fam = gb.epsilon_family(surface, report, eps_min, eps_max, steps, grid_n)
    res = res or gb.Resolution()
    height = surface.metadata.get("plane_height", 0.0)
    H1 = sum(crossing_length_euclid(surface, c) for c in report.curves)
    Lg = sum(c.length_g for c in report.curves)
    dens = _hyperbolic_density(height)
    rows = []
    for e in fam.eps_values:
        hyp = gb._integrate(gb.quadrature_rules(surface, fam, e, res), surface.ambient, dens, None)
        rows.append((e, hyp, hyp - 2.0 * H1 / e))
    A = np.array([r[2] for r in rows])
    eps = np.array([r[0] for r in rows])
    diffs = np.abs(np.diff(A))
    # Richardson on the O(eps) model, for each consecutive pair
    rich = (eps[:-1] * A[1:] - eps[1:] * A[:-1]) / (eps[:-1] - eps[1:])
    limit = float(rich[-1])
    tail = rich[-3:]
    return {
        "table": [{"eps": float(e), "hyperbolic_area": float(hv), "A": float(a)} for e, hv, a in rows],
        "H1_crossing": H1,
        "length_g_crossing": Lg,
        "successive_differences": diffs.tolist(),
        "limit": limit,
        "richardson": rich.tolist(),
        "raw_spread": float(A[-3:].max() - A[-3:].min()),
        "cauchy_spread": float(tail.max() - tail.min()),
        "differences_shrink": bool(np.all(diffs[1:] <= diffs[:-1] * (1 + 1e-9))),
    }


def check_space_form_identity(surface, which: int, report=None, res=None, E: float | None = None) -> dict:
    meta = surface.metadata
    if which == 1:
        if not meta.get("conformally_minimal") == "R3":
            raise EnergyError("identity (1) needs a conformal image of a minimal surface in R3")
        from .umbilic import detect_surface

        if report is None:
            report = detect_surface(surface, 64)
        n_sum = sum(p.n for p in report.points)
        if E is None:
            E = willmore_energies(surface, res)[0]
        return _check("(1) E = 4 pi (chi + sum n_i)", E, 4 * math.pi * (surface.euler_characteristic + n_sum),
                      sum_n=n_sum)
    if which == 2:
        rep_name = meta.get("minimal_s3_representative")
        if not rep_name:
            raise EnergyError("identity (2) needs metadata minimal_s3_representative")
        from .surfaces import builtin

        rep = surface if (surface.builtin_id == rep_name and not surface.params) else builtin(rep_name)
        Vc = area(rep, res)
        if E is None:
            E = willmore_energies(surface, res)[0]
        return _check("(2) E = 2 V_c - 4 pi chi", E, 2 * Vc - 4 * math.pi * surface.euler_characteristic,
                      conformal_volume=Vc)
    if which == 3:
        t = renormalized_area_table(surface, report, res=res)
        out = {"name": "(3) renormalised hyperbolic area A(eps) converges", "lhs": t["limit"],
               "rhs": None, "gap": t["cauchy_spread"], "table": t}
        if surface.closed:
            if E is None:
                E = willmore_energies(surface, res)[0]
            rhs = -2 * math.pi * surface.euler_characteristic - E / 2
            out.update({"rhs": rhs, "gap": abs(t["limit"] - rhs)})
        else:
            out["note"] = "open annulus: the closed-surface constant is not reachable; gap is the Cauchy spread"
        return out
    raise ValueError("which must be 1, 2 or 3")


@dataclass
class EnergyReport:
    surface: str
    E: float
    W: float | None
    chi: int
    identity_checks: list = field(default_factory=list)
    conformal_volume: float | None = None
    renormalized_area: dict | None = None
    partial: bool = False
    EW_gap: float | None = None
    harmonicity_residual: float | None = None
    flags: list = field(default_factory=list)

    def as_json(self):
        return {
            "surface": self.surface,
            "E": self.E,
            "W": self.W,
            "chi": self.chi,
            "partial": self.partial,
            "EW_gap": self.EW_gap,
            "harmonicity_residual": self.harmonicity_residual,
            "flags": list(self.flags),
            "identity_checks": self.identity_checks,
            "conformal_volume": self.conformal_volume,
            "renormalized_area": self.renormalized_area,
        }

    def dumps(self):
        return json.dumps(self.as_json(), indent=2, sort_keys=True, default=float)

    def summary(self) -> str:
        lines = [f"surface {self.surface}  chi={self.chi}" + ("  (partial: open surface)" if self.partial else ""),
                 f"  E   = {self.E:.10g}"]
        if self.flags:
            lines.append("  flags: " + ", ".join(self.flags))
        if self.W is not None and np.isfinite(self.W):
            lines.append(f"  W   = {self.W:.10g}")
            lines.append(f"  |E - 2W + 4 pi chi| = {self.EW_gap:.3e}")
        if self.conformal_volume is not None:
            lines.append(f"  V_c = {self.conformal_volume:.10g}")
        for c in self.identity_checks:
            rhs = "-" if c["rhs"] is None else f"{c['rhs']:.10g}"
            lines.append(f"  {c['name']}: lhs={c['lhs']:.10g} rhs={rhs} gap={c['gap']:.3e}")
        return "\n".join(lines)


def applicable_identities(surface) -> list:
    meta = surface.metadata
    out = []
    if meta.get("conformally_minimal") == "R3":
        out.append(1)
    if meta.get("minimal_s3_representative"):
        out.append(2)
    if meta.get("bb_type") and len(surface.charts) == 1:
        out.append(3)
    return out


def energy_report(surface, report=None, res=None) -> EnergyReport:
    E, W = willmore_energies(surface, res)
    chi = surface.euler_characteristic
    rep = EnergyReport(surface.name, E, W if surface.closed else None, chi, partial=not surface.closed)
    if surface.closed:
        rep.EW_gap = abs(E - 2 * W + 4 * math.pi * chi)
    if not surface.metadata.get("totally_umbilic"):
        rep.harmonicity_residual = harmonicity_residual(surface)
        if not rep.harmonicity_residual < WILLMORE_FLOOR:
            rep.flags.append("not_willmore")
    for k in applicable_identities(surface):
        c = check_space_form_identity(surface, k, report, res, E=E)
        if k == 2:
            rep.conformal_volume = c["conformal_volume"]
        if k == 3:
            rep.renormalized_area = c.pop("table")
        rep.identity_checks.append(c)
    return rep
