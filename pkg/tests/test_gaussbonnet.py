import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cgmlab import gaussbonnet as gb
from cgmlab import surfaces as S
from cgmlab import umbilic as U


def _line(v0, name="plane", n=401):
    u = np.linspace(-1.0, 1.0, n)
    return U.UmbilicCurve(name, np.stack([u, np.full_like(u, v0)], axis=1), False, 2.0)


def test_flat_chart_distance_is_abs_v():
    ch = S.builtin("plane").chart
    df = gb.chart_distance_field(ch, "R3", [_line(0.0)], step_g=0.01, coarse_n=128)
    U_, V_ = np.meshgrid(df.u, df.v, indexing="ij")
    inner = np.abs(U_) < 0.9
    h = max(df.steps)
    assert np.max(np.abs(df.d - np.abs(V_))[inner]) < 2 * h
    assert any("open curve" in f for f in df.flags)


def test_two_curves_give_the_min_field():
    ch = S.builtin("plane").chart
    a = gb.chart_distance_field(ch, "R3", [_line(-0.3)], step_g=0.01, coarse_n=128)
    b = gb.chart_distance_field(ch, "R3", [_line(0.4)], step_g=0.01, coarse_n=128)
    ab = gb.chart_distance_field(ch, "R3", [_line(-0.3), _line(0.4)], step_g=0.01, coarse_n=128)
    assert np.max(np.abs(ab.d - np.minimum(a.d, b.d))) < 2 * max(ab.steps)


def test_bb_distance_matches_profile_arclength():
    # oracle: g-arclength of the meridian from the crossing (v = 0), Gauss-Legendre on e^lambda
    from cgmlab.fundamental import geometry_at

    sp = S.builtin("bb_annulus")
    rep = U.detect_surface(sp, 128)
    df = gb.distance_field(sp, rep, 256, step_g=0.01, fermi_reach=None)[sp.chart.name]
    x, w = np.polynomial.legendre.leggauss(40)
    tol = 2 * max(df.steps) * df.s_max
    for u in (0.5, 2.0):
        for b in (-0.3, -0.1, 0.1, 0.2, 0.4):
            t = 0.5 * b * (1 + x)
            s = np.exp(geometry_at(sp.chart, "R3", np.full_like(t, u), t).lam)
            L = 0.5 * abs(b) * float(np.dot(w, s))
            assert abs(df(u, b) - L) < tol
    # the Fermi refinement is much closer than the grid bound
    fine = gb.distance_field(sp, rep, 256, step_g=0.01)[sp.chart.name]
    t = 0.5 * 0.1 * (1 + x)
    L = 0.05 * float(np.dot(w, np.exp(geometry_at(sp.chart, "R3", np.full_like(t, 1.0), t).lam)))
    assert abs(fine(1.0, 0.1) - L) < 1e-6


def test_eps_ladder_and_errors():
    e = gb.eps_ladder()
    assert len(e) == 10 and e[0] == pytest.approx(0.2) and e[-1] == pytest.approx(0.02)
    assert np.all(np.diff(e) < 0)
    with pytest.raises(ValueError):
        gb.eps_ladder(0.2, 0.1)


def test_family_masks_are_nested():
    sp = S.builtin("bb_annulus")
    fam = gb.epsilon_family(sp, U.detect_surface(sp, 128))
    u, v = np.meshgrid(np.linspace(0, 6, 40), np.linspace(-0.6, 0.6, 80), indexing="ij")
    prev = None
    for e in sorted(fam.eps_values):
        m = fam.inside(sp.chart.name, u, v, e)
        if prev is not None:
            assert np.all(m[prev])
        prev = m
    with pytest.raises(KeyError):
        fam.mask(0.123)


def test_torus_integral_is_zero():
    sp = S.builtin("torus_rev")
    fam = gb.epsilon_family(sp, U.detect_surface(sp, 64), steps=6, eps_min=0.02, eps_max=0.2)
    assert abs(gb.integrate_KY_outside(sp, fam, fam.eps_values[0])) < 1e-3


def test_clifford_integral_and_sweep():
    sp = S.builtin("clifford")
    rep = U.detect_surface(sp, 64)
    rows, fit = gb.gauss_bonnet_sweep(sp, rep)
    for e, integral, flux, area in rows:
        assert abs(integral) < 1e-9 and abs(flux) < 1e-9 and abs(area) < 1e-9
    assert fit["verdict"] == "PASS"


def test_clifford_contour_flux_vanishes():
    sp = S.builtin("clifford")
    for cu, cv, r in ((1.0, 1.0, 0.3), (3.0, 0.5, 0.2)):
        assert abs(gb.contour_flux(sp.chart, sp.ambient, cu, cv, r)) < 1e-9


def test_contour_leaving_chart_is_an_error():
    sp = S.builtin("bb_annulus")
    with pytest.raises(gb.ContourError):
        gb.contour_flux(sp.chart, sp.ambient, 1.0, 0.5, 0.3)


def _point_family(p, eps):
    return gb.EpsilonFamily([eps], [{"eps": eps}], {}, [p], [], None, [1.0])


def test_synthetic_branch_flux():
    f = U.synthetic_field(lambda u, v: (u + 1j * v) ** 2)
    p = U.classify_umbilic(f, (0.0, 0.0), (0.02, 0.04, 0.08), require_zero=False)
    assert p.kind == "I" and p.n == 2
    for eps in (0.3, 0.1, 0.01):
        flux = gb.boundary_rho_flux(f, _point_family(p, eps), eps)
        assert flux == pytest.approx(2 * math.pi * p.n, abs=1e-6)


def test_totally_umbilic_rejected():
    sp = S.builtin("sphere")
    rep = U.UmbilicReport([], [], [], 64)
    with pytest.raises(gb.GaussBonnetError):
        gb.gauss_bonnet_sweep(sp, rep)


@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(-5, 5), st.floats(-5, 5),
       st.floats(0.005, 0.05), st.integers(6, 14))
def test_fit_recovers_model_members(c1, c0, cl, ce, eps_min, n):
    e = np.geomspace(eps_min * 10, eps_min, n)
    y = c1 / e + c0 + cl * e * np.log(e) + ce * e
    fit = gb.fit_expansion(zip(e, y))
    scale = 1 + abs(c1) / eps_min
    assert abs(fit.c1 - c1) < 1e-9 * scale
    assert abs(fit.c0 - c0) < 1e-9 * scale
    assert fit.rms_residual < 1e-9 * scale


def test_fit_example_and_errors():
    e = np.geomspace(0.2, 0.02, 10)
    fit = gb.fit_expansion(zip(e, 2 * 3.1 / e + 5))
    assert fit.c1 == pytest.approx(6.2, abs=1e-10) and fit.c0 == pytest.approx(5, abs=1e-10)
    assert abs(fit.c_log) < 1e-8
    with pytest.raises(gb.FitConditioningError):
        gb.fit_expansion(zip(e[:5], e[:5]))
    with pytest.raises(gb.FitConditioningError):
        narrow = np.geomspace(0.2, 0.05, 8)
        gb.fit_expansion(zip(narrow, narrow))
    with pytest.raises(ValueError):
        gb.fit_expansion([(1.0, 2.0, 3.0)])


def test_sweep_files(tmp_path):
    rows = [(0.2, 1.0, 2.0, 3.0), (0.1, 1.5, 2.5, 3.5)]
    gb.write_sweep_csv(tmp_path / "s.csv", rows)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == ",".join(gb.SWEEP_COLUMNS) and lines[1] == "0.2,1,2,3"
    gb.write_fit_json(tmp_path / "f.json", {"b": 1, "a": 2})
    assert (tmp_path / "f.json").read_text().index('"a"') < (tmp_path / "f.json").read_text().index('"b"')


@pytest.fixture(scope="module")
def bb_sweep():
    sp = S.builtin("bb_annulus")
    rep = U.detect_surface(sp, 128)
    rows, fit = gb.gauss_bonnet_sweep(sp, rep)
    return sp, rep, rows, fit


@pytest.mark.slow
def test_bb_sweep_singular_term(bb_sweep):
    sp, rep, rows, fit = bb_sweep
    L = rep.curves[0].length_g
    assert fit["c1"] / 2 == pytest.approx(L, rel=1e-2)
    assert fit["flux_fit"]["c1"] / 2 == pytest.approx(L, rel=1e-2)
    assert fit["verdict"] == "PASS"
    # K_Y > 0 near the curve: the outside integral grows as the tube shrinks
    ints = [r[1] for r in rows]
    assert all(b >= a for a, b in zip(ints, ints[1:]))
    # integral = chi term + flux up to O(eps)
    gaps = np.abs(fit["appendix_b_gap"])
    assert gaps.max() < 5e-3


@pytest.mark.slow
def test_catenoid_renormalized_energy():
    sp = S.builtin("inverted_catenoid")
    out = gb.renormalized_energy(sp)
    assert out["E_direct"] == pytest.approx(8 * math.pi, rel=1e-2)
    assert out["E_renormalized"] == pytest.approx(8 * math.pi, rel=1e-2)


def test_clifford_renormalized_energy():
    out = gb.renormalized_energy(S.builtin("clifford"))
    assert out["E_direct"] == pytest.approx(4 * math.pi**2, rel=1e-3)
    assert out["E_renormalized"] == pytest.approx(4 * math.pi**2, rel=1e-3)


def test_sphere_renormalized_energy_rejected():
    out = gb.renormalized_energy(S.builtin("sphere"))
    assert abs(out["E_direct"]) < 1e-9 and out["E_renormalized"] is None and "umbilic" in out["error"]
