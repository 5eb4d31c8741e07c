"""The six acceptance checks, shared by the test suite and ``cgmlab selftest``.

Each check returns a Check; tolerances are module constants so that the
reported lines state exactly what was compared.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import cgm, energies
from . import gaussbonnet as gb
from . import surfaces as S
from . import umbilic as um

# criterion 1
CLIFFORD_E_RTOL = 1e-3
CLIFFORD_KY_ATOL = 1e-5
CLIFFORD_GRID = 256
CLIFFORD_FIT_ATOL = 1e-2
CLIFFORD_SECONDS = 30.0
# criterion 2
CATENOID_RTOL = 1e-2
CATENOID_KY_ATOL = 1e-4
CATENOID_END_RADIUS = 0.05
# criterion 3
BB_LENGTH_RTOL = 1e-2
BB_SLOPE = -2.0
BB_SLOPE_ATOL = 0.05
BB_D_RANGE = (0.025, 0.1)
# criterion 4
RESIDUAL_RATIO = 3.5
RESIDUAL_FLOOR = 1e-9
RESIDUAL_GRID = 128
NON_WILLMORE_FLOOR = 1e-3
# criterion 6
FIT_ATOL = 1e-9
FIT_TRIALS = 200

RESIDUALS = ("harmonicity", "gauss_eq", "ricci_eq", "gauss_codazzi", "q_holomorphy")


@dataclass
class Check:
    number: int
    title: str
    passed: bool
    detail: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        parts = ", ".join(f"{k}={_fmt(v)}" for k, v in self.detail.items())
        s = f"criterion {self.number} [{tag}] {self.title}: {parts} ({self.seconds:.1f} s)"
        if self.failures:
            s += "\n    failed: " + "; ".join(self.failures)
        return s


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


class _Recorder:
    def __init__(self):
        self.failures = []

    def require(self, ok, what):
        if not ok:
            self.failures.append(what)
        return ok


# ---------------------------------------------------------------------------


def criterion_1() -> Check:
    t0 = time.perf_counter()
    r = _Recorder()
    sp = S.clifford()
    E, _ = energies.willmore_energies(sp)
    E_rel = abs(E - 4 * math.pi**2) / (4 * math.pi**2)
    r.require(E_rel < CLIFFORD_E_RTOL, f"E relative error {E_rel:.3e}")
    _, _, U, V = sp.chart.grid(CLIFFORD_GRID)
    KY, KYp = cgm.gauss_curvatures(sp.chart, sp.ambient, U, V)
    ky, kyp = float(np.max(np.abs(KY))), float(np.max(np.abs(KYp)))
    r.require(ky < CLIFFORD_KY_ATOL and kyp < CLIFFORD_KY_ATOL, f"max |K_Y| {ky:.3e}, max |K_Y-perp| {kyp:.3e}")
    report = um.detect_surface(sp, 64)
    r.require(not report.points and not report.curves, "umbilics detected on the Clifford torus")
    _, fit = gb.gauss_bonnet_sweep(sp, report)
    r.require(abs(fit["c1"]) < CLIFFORD_FIT_ATOL and abs(fit["c0"]) < CLIFFORD_FIT_ATOL,
              f"c1={fit['c1']:.3e}, c0={fit['c0']:.3e}")
    dt = time.perf_counter() - t0
    r.require(dt < CLIFFORD_SECONDS, f"runtime {dt:.1f} s")
    detail = {"E_rel_err": E_rel, "max_KY": ky, "max_KYperp": kyp, "c1": fit["c1"], "c0": fit["c0"]}
    return Check(1, "Clifford torus", not r.failures, detail, r.failures, dt)


def _catenoid_ky(sp, n=64):
    worst = 0.0
    main = sp.chart_named("cylinder")
    reg = main.region
    u = np.linspace(reg[1], reg[2], n, endpoint=False)
    v = np.linspace(reg[3], reg[4], n)
    U, V = np.meshgrid(u, v, indexing="ij")
    KY, _ = cgm.gauss_curvatures(main, sp.ambient, U, V)
    worst = max(worst, float(np.max(np.abs(KY - 1.0))))
    rr = np.linspace(CATENOID_END_RADIUS, 0.5, n // 2)
    th = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
    R, TH = np.meshgrid(rr, th, indexing="ij")
    for name in ("end_plus", "end_minus"):
        KY, _ = cgm.gauss_curvatures(sp.chart_named(name), sp.ambient, R * np.cos(TH), R * np.sin(TH))
        worst = max(worst, float(np.max(np.abs(KY - 1.0))))
    return worst


def criterion_2() -> Check:
    t0 = time.perf_counter()
    r = _Recorder()
    sp = S.inverted_catenoid()
    E, W = energies.willmore_energies(sp)
    target = 8 * math.pi
    e_rel, w_rel = abs(E - target) / target, abs(W - target) / target
    r.require(e_rel < CATENOID_RTOL and w_rel < CATENOID_RTOL, f"E={E:.8g}, W={W:.8g}")
    ky = _catenoid_ky(sp)
    r.require(ky < CATENOID_KY_ATOL, f"max |K_Y - 1| = {ky:.3e}")
    report = um.detect_surface(sp, 64)
    kinds = sorted(p.kind for p in report.points)
    n_sum = report.total_multiplicity
    r.require(len(report.points) == 2 and kinds == ["II", "II"] and not report.unresolved,
              f"candidates {kinds}, unresolved {len(report.unresolved)}")
    r.require(n_sum == 0, f"total multiplicity {n_sum}")
    _, fit = gb.gauss_bonnet_sweep(sp, report)
    c0_rel = abs(fit["c0"] - 4 * math.pi) / (4 * math.pi)
    r.require(c0_rel < CATENOID_RTOL, f"c0={fit['c0']:.6g}")
    detail = {"E_rel_err": e_rel, "W_rel_err": w_rel, "max_KY_minus_1": ky, "candidates": len(report.points),
              "kinds": "/".join(kinds), "sum_n": n_sum, "c0": fit["c0"], "c0_rel_err": c0_rel}
    return Check(2, "inverted catenoid", not r.failures, detail, r.failures, time.perf_counter() - t0)


def bb_slope(sp, report, fam, n: int = 24, u: float = 0.7):
    """Log-log slope of (|A-ring|^2 / 2) K_Y against the g-distance to the curve, both sides."""
    from .fundamental import geometry_at

    ch = sp.chart
    df = fam.distance_field[ch.name]
    w0 = sp.metadata["crossing_w"]
    lam0 = float(geometry_at(ch, sp.ambient, np.array([u]), np.array([w0])).lam[0])
    lo, hi = BB_D_RANGE
    offs = np.exp(-lam0) * np.geomspace(lo, hi, n)
    W = np.concatenate([w0 - offs, w0 + offs])
    Uq = np.full_like(W, u)
    d = df(Uq, W)
    g = geometry_at(ch, sp.ambient, Uq, W)
    KY, _ = cgm.gauss_curvatures(ch, sp.ambient, Uq, W, h=5e-4)
    y = 0.5 * g.fd.Aring_norm2 * KY
    keep = (d >= lo * (1 - 1e-9)) & (d <= hi * (1 + 1e-9)) & (y > 0)
    slope = float(np.polyfit(np.log(d[keep]), np.log(y[keep]), 1)[0])
    return slope, int(keep.sum())


def criterion_3() -> Check:
    t0 = time.perf_counter()
    r = _Recorder()
    sp = S.bb_annulus()
    report = um.detect_surface(sp, 64)
    traced = len(report.curves) == 1 and report.curves[0].closed
    r.require(traced, f"{len(report.curves)} curves traced")
    detail = {"curves": len(report.curves)}
    if traced:
        c = report.curves[0]
        bb = um.geodesic_bb_test(sp.chart, c, sp.ambient)
        r.require(bb.passed, f"geodesic_bb_test k_g={bb.k_g_max:.3e}, planar={bb.planar}, "
                             f"orthogonal={bb.orthogonal}, H_hyp={bb.H_hyp_residual:.3e}")
        fam = gb.epsilon_family(sp, report)
        res = gb.Resolution()
        flux = [(e, gb.boundary_rho_flux(sp, fam, e, res)) for e in fam.eps_values]
        fit = gb.fit_expansion(flux)
        len_rel = abs(fit.c1 / 2 - c.length_g) / c.length_g
        r.require(len_rel < BB_LENGTH_RTOL, f"flux c1/2={fit.c1 / 2:.8g} vs L_g={c.length_g:.8g}")
        slope, npts = bb_slope(sp, report, fam)
        r.require(abs(slope - BB_SLOPE) <= BB_SLOPE_ATOL, f"slope {slope:.4f}")
        detail.update({"k_g_max": bb.k_g_max, "H_hyp": bb.H_hyp_residual, "length_g": c.length_g,
                       "flux_c1_half": fit.c1 / 2, "length_rel_err": len_rel, "slope": slope, "slope_points": npts})
    return Check(3, "BB annulus", not r.failures, detail, r.failures, time.perf_counter() - t0)


def residual_cases():
    """(label, chart, ambient, region) for the Willmore built-ins with non-trivial phi."""
    cat = S.inverted_catenoid()
    bb = S.bb_annulus()
    cl = S.clifford()
    c3 = S.clifford_r3()
    return [
        ("clifford", cl.chart, "S3", None),
        ("clifford_r3", c3.chart, "R3", None),
        ("inverted_catenoid", cat.chart_named("cylinder"), "R3", (0.0, 2 * math.pi, -4.0, 4.0)),
        ("bb_annulus", bb.chart, "R3", None),
    ]


def residual_ratios(n: int = RESIDUAL_GRID):
    out = {}
    for label, ch, amb, reg in residual_cases():
        a, b = cgm.refinement_ratios(ch, amb, n, region=reg)
        out[label] = (a, b)
    return out


def ratio_ok(a: float, b: float) -> bool:
    if max(a, b) < RESIDUAL_FLOOR:
        return True
    return b > 0 and a / b >= RESIDUAL_RATIO


def criterion_4() -> Check:
    t0 = time.perf_counter()
    r = _Recorder()
    detail = {}
    for label, (a, b) in residual_ratios().items():
        worst = math.inf
        for k in RESIDUALS:
            ok = ratio_ok(a[k], b[k])
            r.require(ok, f"{label} {k}: {a[k]:.3e} -> {b[k]:.3e}")
            if max(a[k], b[k]) >= RESIDUAL_FLOOR:
                worst = min(worst, a[k] / b[k] if b[k] > 0 else math.inf)
        detail[f"{label}_min_ratio"] = "floor" if worst == math.inf else worst
    torus = S.torus_rev(2.0, 1.0).chart
    harm = []
    for n in (64, 128):
        a, b = cgm.refinement_ratios(torus, "R3", n)
        harm += [a["harmonicity"], b["harmonicity"]]
    r.require(min(harm) > NON_WILLMORE_FLOOR, f"torus_rev(2,1) harmonicity min {min(harm):.3e}")
    detail["torus21_harmonicity_min"] = min(harm)
    return Check(4, "structure-equation residuals", not r.failures, detail, r.failures, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# classifier corpus
# ---------------------------------------------------------------------------

AMBIGUOUS = "III-or-II (ambiguous)"


def _random_G(rng, size=0.1):
    deg = int(rng.integers(2, 4))
    terms = [(j, k) for j in range(deg + 1) for k in range(deg + 1) if 2 <= j + k <= deg]
    c = rng.normal(size=len(terms)) + 1j * rng.normal(size=len(terms))
    c *= size / np.abs(c).sum()
    return lambda z: sum(ci * z**j * np.conj(z) ** k for ci, (j, k) in zip(c, terms))


def normal_form_corpus(seed: int = 0, reps: int = 5):
    """[(m, a, b, phi(u, v), expected kind, expected n)] over the full parameter grid.

    G is a random polynomial in z, zbar of degree 2..3 with coefficient sum 0.1.
    """
    rng = np.random.default_rng(seed)
    out = []
    for m in range(4):
        for a in (0.0, 0.5):
            for b in (0.0, 0.5, 1.0, 2.0):
                for _ in range(reps):
                    G = _random_G(rng)

                    def phi(u, v, m=m, a=a, b=b, G=G):
                        z = u + 1j * v
                        return z**m * (a + (b * z - np.conj(z)) / 2j + G(z))

                    if a != 0:
                        kind, n = "I", m
                    elif abs(b - 1.0) < um.TAU_B:
                        kind, n = AMBIGUOUS, m + 1
                    else:
                        kind, n = "II", m + 1
                    out.append((m, a, b, phi, kind, n))
    return out


def classify_corpus(seed: int = 0, h: float = 1e-3):
    radii = [4 * h, 8 * h, 16 * h]
    rows = []
    for m, a, b, phi, kind, n in normal_form_corpus(seed):
        p = um.classify_umbilic(um.synthetic_field(phi), (0.0, 0.0), radii, require_zero=False, seed=seed)
        rows.append((m, a, b, kind, n, p))
    return rows


def criterion_5() -> Check:
    t0 = time.perf_counter()
    r = _Recorder()
    rows = classify_corpus()
    wrong = 0
    ambiguous = 0
    for m, a, b, kind, n, p in rows:
        ok = p.kind == kind and p.n == n and p.m == m
        if kind == AMBIGUOUS:
            ambiguous += 1
        if not ok:
            wrong += 1
            r.require(False, f"m={m} a={a} b={b}: got {p.kind}/{p.m}/{p.n}, expected {kind}/{m}/{n}")
    detail = {"cases": len(rows), "correct": len(rows) - wrong, "reported_ambiguous": ambiguous}
    return Check(5, "classifier corpus", not r.failures, detail, r.failures, time.perf_counter() - t0)


def criterion_6(seed: int = 0, trials: int = FIT_TRIALS) -> Check:
    t0 = time.perf_counter()
    r = _Recorder()
    rng = np.random.default_rng(seed)
    eps = gb.eps_ladder()
    worst = 0.0
    for _ in range(trials):
        c1, c0, cl, ce = rng.uniform(-10, 10, 4)
        y = c1 / eps + c0 + cl * eps * np.log(eps) + ce * eps
        fit = gb.fit_expansion(list(zip(eps, y)))
        err = max(abs(fit.c1 - c1), abs(fit.c0 - c0), abs(fit.c_log - cl), abs(fit.c_eps - ce))
        worst = max(worst, err)
    r.require(worst < FIT_ATOL, f"worst coefficient error {worst:.3e}")
    return Check(6, "fit_expansion exactness", not r.failures, {"trials": trials, "max_abs_err": worst},
                 r.failures, time.perf_counter() - t0)


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6}


def run_all(which=None, echo=None) -> list:
    out = []
    for k in which or sorted(CRITERIA):
        chk = CRITERIA[k]()
        if echo is not None:
            echo(chk.line())
        out.append(chk)
    return out
