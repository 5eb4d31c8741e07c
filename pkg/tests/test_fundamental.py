import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cgmlab import surfaces as S
from cgmlab.fundamental import (ImmersionError, NotIsothermalError, OffSphereError, fundamental_r3,
                                fundamental_s3, gauss_codazzi_residual, geometry_at, local_geometry,
                                mean_curvature_gradient)
from cgmlab.jets import eval_jet3

ALL = ["sphere", "plane", "torus_rev", "clifford", "clifford_r3", "great_sphere", "inverted_catenoid", "bb_annulus"]


def test_unit_sphere():
    sp = S.builtin("sphere")
    fd = fundamental_r3(sp.chart.jet(np.array([0.3, -1.0]), np.array([1.0, 2.0])))
    assert np.allclose(fd.H, 1.0) and np.max(np.abs(fd.Aring)) < 1e-12 and np.max(np.abs(fd.phi)) < 1e-12


def test_torus_outer_equator():
    # oracle: principal curvatures 1/r and cos v/(R + r cos v) at the outer equator
    fd = fundamental_r3(S.builtin("torus_rev", R=2.0, r=1.0).chart.jet(np.array(0.0), np.array(0.0)))
    k = np.sort(np.abs(fd.principal_curvatures))
    assert np.allclose(k, [1 / 3, 1.0], atol=1e-12)
    assert math.isclose(abs(fd.H), 2 / 3, rel_tol=1e-12)


def test_plane():
    fd = fundamental_r3(S.builtin("plane").chart.jet(np.array(0.2), np.array(0.1)))
    assert np.allclose(fd.g, np.eye(2)) and fd.H == 0 and np.all(fd.A == 0)


def test_clifford_s3():
    _, _, U, V = S.builtin("clifford").chart.grid(8)
    fd = fundamental_s3(S.builtin("clifford").chart.jet(U, V))
    assert np.max(np.abs(fd.H)) < 1e-13
    assert np.allclose(np.abs(fd.principal_curvatures), 1.0)
    assert np.allclose(fd.Aring_norm2, 2.0)


def test_great_sphere():
    ch = S.builtin("great_sphere").chart
    fd = fundamental_s3(ch.jet(np.array([0.1, 1.0]), np.array([0.5, 2.0])))
    assert np.max(np.abs(fd.Aring)) < 1e-13 and np.max(np.abs(fd.H)) < 1e-13


def test_willmore_density_is_conformally_invariant():
    r3 = S.builtin("torus_rev", R=math.sqrt(2.0), r=1.0)
    s3 = S.s3_lift(r3)
    _, _, U, V = r3.chart.grid(24)
    a = fundamental_r3(r3.chart.jet(U, V)).willmore_density
    b = fundamental_s3(s3.chart.jet(U, V)).willmore_density
    assert np.max(np.abs(a - b)) < 1e-8


def test_errors():
    with pytest.raises(ImmersionError):
        fundamental_r3(eval_jet3(["u", "u", "0"], np.array(0.1), np.array(0.2)))
    with pytest.raises(OffSphereError):
        fundamental_s3(eval_jet3(["u", "v", "1", "1"], np.array(0.1), np.array(0.2)))
    with pytest.raises(NotIsothermalError):
        local_geometry(eval_jet3(["u", "2*v", "0"], np.array(0.1), np.array(0.2)), "R3")


@pytest.mark.parametrize("name", ALL)
def test_traceless_and_phi_reconstruction(name, rng):
    sp = S.builtin(name)
    ch = sp.chart
    u0, u1, v0, v1 = ch.domain
    u = rng.uniform(u0 + 0.1 * (u1 - u0), u1 - 0.1 * (u1 - u0), 32)
    v = rng.uniform(v0 + 0.1 * (v1 - v0), v1 - 0.1 * (v1 - v0), 32)
    g = geometry_at(ch, sp.ambient, u, v)
    fd = g.fd
    assert np.max(np.abs(fd.trace_Aring)) < 1e-10 * (1 + np.max(np.abs(fd.A)))
    assert np.allclose(fd.Aring, np.swapaxes(fd.Aring, -1, -2))
    # phi from the jet route equals A-ring_11 - i A-ring_12, and |A-ring|^2 = 2 |phi|^2 e^{-4 lambda}
    assert np.allclose(g.phi, fd.Aring[..., 0, 0] - 1j * fd.Aring[..., 0, 1], atol=1e-9)
    assert np.allclose(fd.Aring_norm2, 2 * np.abs(g.phi) ** 2 / g.e2l**2, rtol=1e-9, atol=1e-12)
    if sp.ambient == "S3":
        assert np.max(np.abs(np.einsum("...i,...i->...", fd.normal, fd.position))) < 1e-12


def test_clifford_mean_curvature_gradient_vanishes():
    ch = S.builtin("clifford").chart
    u = np.linspace(0.5, 5, 7)
    assert np.max(np.abs(mean_curvature_gradient(ch, "S3", u, u))) < 1e-13
    assert np.max(np.abs(mean_curvature_gradient(ch, "S3", u, u, method="stencil"))) < 1e-10


@pytest.mark.parametrize("name", ["inverted_catenoid", "torus_rev"])
def test_gauss_codazzi(name, rng):
    ch = S.builtin(name).chart
    u = rng.uniform(0.5, 5.5, 16)
    v = rng.uniform(-1.0, 1.0, 16) if name == "inverted_catenoid" else rng.uniform(0.5, 3.0, 16)
    assert np.max(gauss_codazzi_residual(ch, "R3", u, v, 1e-3)) < 1e-6
    jet_gc = np.abs(geometry_at(ch, "R3", u, v).gauss_codazzi)
    assert np.max(jet_gc) < 1e-9


def test_jet_and_stencil_gradient_agree(rng):
    ch = S.builtin("torus_rev").chart
    u, v = rng.uniform(0.5, 5.5, 8), rng.uniform(0.5, 3.0, 8)
    a = mean_curvature_gradient(ch, "R3", u, v)
    b = mean_curvature_gradient(ch, "R3", u, v, method="stencil", h=1e-3)
    assert np.max(np.abs(a - b)) < 1e-9


@given(st.floats(0.1, 6.0), st.floats(0.1, 3.5), st.floats(1.2, 4.0))
def test_torus_principal_curvatures_property(u, v, R):
    sp = S.builtin("torus_rev", R=R, r=1.0)
    fd = fundamental_r3(sp.chart.jet(np.array(u), np.array(v)))
    # oracle: in the isothermal chart the meridian angle t solves tan(t/2) = sqrt((R+1)/(R-1)) tan(c v/2)
    c = math.sqrt(R * R - 1)
    t = 2 * math.atan(math.sqrt((R + 1) / (R - 1)) * math.tan(c * v / 2))
    want = sorted([abs(1.0), abs(math.cos(t) / (R + math.cos(t)))])
    assert np.allclose(np.sort(np.abs(fd.principal_curvatures)), want, atol=1e-9)
