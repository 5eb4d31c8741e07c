import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cgmlab import jets as J
from cgmlab.surfaces import builtin

LABELS = J.ORDER_LABELS


def jet_at(src, u, v):
    return J.evaluate(J.parse_expression(src), np.array(u), np.array(v))


def test_parse_examples():
    assert str(J.parse_expression("u+v")) == "Add(Var u, Var v)"
    assert str(J.parse_expression("sin(u)*cosh(v)")) == "Mul(Sin(Var u), Cosh(Var v))"
    assert str(J.parse_expression("-u^2")) == "Neg(Pow(Var u, 2))"


@pytest.mark.parametrize("src,offset", [("u+", 2), ("foo(u)", 0), ("(u", 2), ("u $ v", 2), ("sin(u,v)", 7),
                                        ("u^v", 2)])
def test_parse_errors_carry_offset(src, offset):
    with pytest.raises(J.ExpressionError) as exc:
        J.parse_expression(src)
    assert exc.value.offset == offset
    assert f"offset {offset}" in str(exc.value)


def test_offset_is_in_bytes():
    # "é" is two bytes in UTF-8
    with pytest.raises(J.ExpressionError) as exc:
        J.parse_expression("u + é")
    assert exc.value.offset == 4


def test_uv_jet():
    j = jet_at("u*v", 2.0, 3.0)
    want = {"value": 6, "u": 3, "v": 2, "uv": 1}
    for lab in LABELS:
        assert j[lab] == want.get(lab, 0.0)


def test_sin_jet():
    j = jet_at("sin(u)", 0.0, 0.0)
    assert j["value"] == 0 and j["u"] == 1 and j["uu"] == 0 and j["uuu"] == -1


def _fd(f, u, v, h):
    """Central differences of all orders up to 3, as an independent oracle."""
    F = lambda a, b: f(u + a * h, v + b * h)
    return {
        "value": F(0, 0),
        "u": (F(1, 0) - F(-1, 0)) / (2 * h),
        "v": (F(0, 1) - F(0, -1)) / (2 * h),
        "uu": (F(1, 0) - 2 * F(0, 0) + F(-1, 0)) / h**2,
        "vv": (F(0, 1) - 2 * F(0, 0) + F(0, -1)) / h**2,
        "uv": (F(1, 1) - F(1, -1) - F(-1, 1) + F(-1, -1)) / (4 * h * h),
        "uuu": (F(2, 0) - 2 * F(1, 0) + 2 * F(-1, 0) - F(-2, 0)) / (2 * h**3),
        "vvv": (F(0, 2) - 2 * F(0, 1) + 2 * F(0, -1) - F(0, -2)) / (2 * h**3),
        "uuv": (F(1, 1) - 2 * F(0, 1) + F(-1, 1) - F(1, -1) + 2 * F(0, -1) - F(-1, -1)) / (2 * h**3),
        "uvv": (F(1, 1) - 2 * F(1, 0) + F(1, -1) - F(-1, 1) + 2 * F(-1, 0) - F(-1, -1)) / (2 * h**3),
    }


def test_torus_x_component_matches_finite_differences():
    ch = builtin("torus_rev", R=2.0, r=1.0).chart
    J3 = ch.jet(np.array(0.0), np.array(0.0))
    assert math.isclose(J3[0, 0], 3.0, rel_tol=1e-12)
    fd = _fd(lambda a, b: ch.jet(np.array(a), np.array(b))[0, 0], 0.0, 0.0, 1e-4)
    for k in ("u", "v", "uu", "uv", "vv"):
        assert abs(J3[LABELS.index(k), 0] - fd[k]) <= 1e-6 * max(1.0, abs(J3[0, 0]))


@pytest.mark.parametrize("name", ["sphere", "torus_rev", "clifford", "inverted_catenoid", "bb_annulus"])
def test_builtin_jets_refine_at_second_order(name, rng):
    sp = builtin(name)
    ch = sp.chart
    u0, u1, v0, v1 = ch.domain
    u = rng.uniform(u0 + 0.2 * (u1 - u0), u1 - 0.2 * (u1 - u0), 3)
    v = rng.uniform(v0 + 0.3 * (v1 - v0), v1 - 0.3 * (v1 - v0), 3)
    J3 = ch.jet(u, v)
    errs = []
    for h in (1e-2, 5e-3):
        fd = _fd(lambda a, b: ch.jet(a, b)[0], u, v, h)
        errs.append(max(np.max(np.abs(J3[LABELS.index(k)] - fd[k])) for k in ("u", "v", "uu", "uv", "vv", "uuu",
                                                                               "uuv", "uvv", "vvv")))
    assert errs[1] < errs[0] / 3.0 or errs[1] < 1e-8


def test_complex_derivative_examples():
    cd = J.complex_derivatives(jet_at("u", 0.3, 0.2))
    assert cd["z"] == 0.5
    cd = J.complex_derivatives(jet_at("u^2 + v^2", 0.3, 0.2))
    assert np.isclose(cd["zzb"], 1.0)
    cd = J.complex_derivatives(jet_at("u^2 - v^2", 0.3, 0.2))
    assert np.isclose(cd["zz"], 1.0) and abs(cd["zzb"]) < 1e-15


@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_holomorphic_expression_has_no_zbar_derivatives(u, v):
    # f = Re(z^3 + 2 z), g = Im(z^3 + 2 z); d_zbar (f + i g) = 0 to every order
    f = J.complex_derivatives(jet_at("u^3 - 3*u*v^2 + 2*u", u, v))
    g = J.complex_derivatives(jet_at("3*u^2*v - v^3 + 2*v", u, v))
    for k in ("zb", "zzb", "zbzb", "zzzb", "zzbzb", "zbzbzb"):
        assert abs(f[k] + 1j * g[k]) < 1e-12


@given(st.floats(-2, 2), st.floats(0.1, 2))
def test_jet_mixed_partials_symmetric(u, v):
    # symmetric by construction: d_uv of (f g) computed two ways
    j = jet_at("sin(u)*exp(v) + log(v)*u^2 + atan2(v, 2 + u^2)", u, v)
    f = lambda a, b: np.sin(a) * np.exp(b) + np.log(b) * a * a + np.arctan2(b, 2 + a * a)
    fd = _fd(f, u, v, 1e-4)
    assert abs(j["uv"] - fd["uv"]) < 1e-5 * (1 + abs(fd["uv"]))


def test_domain_violation_reports_node():
    with pytest.raises(J.JetDomainError) as exc:
        jet_at("u + log(v)", 1.0, -1.0)
    assert exc.value.offset == 4
