import json
import math

import numpy as np
import pytest

from cgmlab import surfaces as S
from cgmlab.fundamental import fundamental, geometry_at


def test_sphere_is_totally_umbilic():
    sp = S.builtin("sphere", r=1.0)
    assert sp.euler_characteristic == 2 and sp.metadata["totally_umbilic"]
    _, _, U, V = sp.chart.grid(16)
    g = geometry_at(sp.chart, "R3", U, V)
    assert np.max(np.abs(g.phi)) < 1e-12
    assert np.allclose(g.H, 1.0, atol=1e-12)


def test_clifford_r3_is_minimal_in_s3():
    sp = S.s3_lift(S.builtin("torus_rev", R=math.sqrt(2.0), r=1.0))
    assert sp.euler_characteristic == 0
    _, _, U, V = sp.chart.grid(24)
    fd = fundamental(sp.chart.jet(U, V), "S3")
    assert np.max(np.abs(fd.H)) < 1e-8


def test_catenoid_metadata_and_transitions(rng):
    sp = S.builtin("inverted_catenoid")
    assert sp.euler_characteristic == 2 and sp.is_willmore
    assert len(sp.metadata["end_preimages"]) == 2
    main = sp.chart_named("cylinder")
    u = rng.uniform(0, 2 * math.pi, 8)
    v = rng.uniform(0.8, 2.0, 8)
    for name, sgn in (("end_plus", 1), ("end_minus", -1)):
        a, b = sp.transitions[("cylinder", name)](u, sgn * v)
        X_main = main.jet(u, sgn * v)[0]
        X_cap = sp.chart_named(name).jet(a, b)[0]
        assert np.allclose(X_main, X_cap, atol=1e-12)


def test_catenoid_charts_are_isothermal(rng):
    sp = S.builtin("inverted_catenoid")
    for ch in sp.charts:
        u = rng.uniform(-0.4, 0.4, 20) if ch.name != "cylinder" else rng.uniform(0, 6, 20)
        v = rng.uniform(-0.4, 0.4, 20)
        assert np.all(fundamental(ch.jet(u, v), "R3").isothermal)


@pytest.mark.parametrize("bad", [("torus_rev", {"R": 1.0, "r": 2.0}), ("sphere", {"r": -1.0}),
                                 ("bb_annulus", {"neck": 0.0}), ("nope", {})])
def test_invalid_parameters(bad):
    with pytest.raises(S.SurfaceError):
        S.builtin(bad[0], **bad[1])


def test_unknown_parameter_name():
    with pytest.raises(S.SurfaceError):
        S.builtin("sphere", radius=2.0)


@pytest.fixture(scope="module")
def bb():
    return S.builtin("bb_annulus")


def test_bb_profile_solves_hyperbolic_minimal_equation(bb):
    prof = bb.metadata["profile"]
    lo, hi = bb.chart.region[3:5]
    w = np.linspace(lo, hi, 400)
    w = w[np.abs(w - bb.metadata["crossing_w"]) > 1e-3]
    g = geometry_at(bb.chart, "R3", np.zeros_like(w), w)
    zeta = g.X[:, 2]
    res = np.abs(zeta * g.H + g.n[:, 2])
    assert res.max() < 1e-8
    assert bb.euler_characteristic == 0 and not bb.closed
    assert prof.richardson_error < 1e-8


def test_bb_crossing_is_umbilic_and_orthogonal(bb):
    w0 = bb.metadata["crossing_w"]
    u = np.linspace(0, 2 * math.pi, 16, endpoint=False)
    g = geometry_at(bb.chart, "R3", u, np.full_like(u, w0))
    assert np.max(np.abs(g.phi)) < 1e-8
    assert np.max(np.abs(g.n[:, 2])) < 1e-12
    assert np.max(np.abs(g.X[:, 2])) < 1e-12


def test_bb_reflection_maps_shape_to_minus_shape():
    # (rho, zeta)(s) -> (rho, -zeta)(-s) sends the profile with s^2 coefficient c to the one with -c
    a = S.integrate_profile(1.0, 0.3, zeta_stop=0.6)
    b = S.integrate_profile(1.0, -0.3, zeta_stop=0.6)
    s = np.linspace(-0.5, 0.5, 101)
    assert np.max(np.abs(np.interp(s, a.s, a.rho) - np.interp(-s, b.s, b.rho))) < 1e-8
    assert np.max(np.abs(np.interp(s, a.s, a.zeta) + np.interp(-s, b.s, b.zeta))) < 1e-8


def test_bb_shape_zero_is_the_symmetric_round_profile():
    p = S.integrate_profile(1.0, 0.0, zeta_stop=0.6)
    s = np.linspace(-0.5, 0.5, 101)
    assert np.max(np.abs(np.interp(s, p.s, p.rho) - np.interp(-s, p.s, p.rho))) < 1e-8
    assert np.max(np.abs(np.hypot(np.interp(s, p.s, p.rho), np.interp(s, p.s, p.zeta)) - 1.0)) < 1e-8


def test_profile_errors():
    with pytest.raises(S.SurfaceError):
        S.integrate_profile(1.0, 0.3, zeta_stop=0.5, step=1e-9)
    with pytest.raises(S.SurfaceError):
        S.integrate_profile(1.0, 0.3, zeta_stop=50.0)


def test_json_round_trip(tmp_path):
    spec = S.builtin("bb_annulus", neck=2.0, half_height=0.4)
    path = tmp_path / "s.json"
    path.write_text(json.dumps(S.to_dict(spec)))
    again = S.load_surface(path)
    assert again.params == spec.params
    u = np.array([0.3]), np.array([spec.metadata["crossing_w"] + 0.01])
    assert np.allclose(again.chart.jet(*u), spec.chart.jet(*u))


def test_expression_surface_file(tmp_path):
    data = {"name": "saddle", "ambient": "R3",
            "domain": {"u0": -1, "u1": 1, "v0": -1, "v1": 1, "periodic_u": False, "periodic_v": False},
            "components": ["u", "v", "u^2 - v^2"], "euler_characteristic": 1}
    path = tmp_path / "s.json"
    path.write_text(json.dumps(data))
    sp = S.load_surface(path)
    assert sp.name == "saddle" and sp.chart.exprs[2] == "u^2 - v^2"
    assert S.to_dict(sp)["components"] == data["components"]
    data["components"] = ["u", "v"]
    path.write_text(json.dumps(data))
    with pytest.raises(S.SurfaceError):
        S.load_surface(path)
