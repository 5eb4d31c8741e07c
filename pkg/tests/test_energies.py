import json
import math

import numpy as np
import pytest

from cgmlab import energies as EN
from cgmlab import surfaces as S
from cgmlab.umbilic import detect_surface


def test_sphere():
    E, W = EN.willmore_energies(S.builtin("sphere"))
    assert abs(E) < 1e-9
    assert W == pytest.approx(4 * math.pi, rel=1e-6)


def test_clifford_both_charts():
    E3, W3 = EN.willmore_energies(S.builtin("clifford_r3"))
    E4, W4 = EN.willmore_energies(S.builtin("clifford"))
    # closed-form oracle: |A-ring|^2 = 2 and area 2 pi^2 in S^3
    assert E4 == pytest.approx(4 * math.pi**2, rel=1e-6)
    assert W3 == pytest.approx(2 * math.pi**2, rel=1e-6)
    assert E3 == pytest.approx(E4, rel=1e-3)
    assert W4 == pytest.approx(2 * math.pi**2, rel=1e-6)


def test_torus_of_revolution_closed_form():
    # closed form for the circular torus: W = pi^2 R^2 / (r sqrt(R^2 - r^2))
    R, r = 2.0, 1.0
    E, W = EN.willmore_energies(S.builtin("torus_rev", R=R, r=r))
    assert W == pytest.approx(math.pi**2 * R**2 / (r * math.sqrt(R**2 - r**2)), rel=1e-6)
    assert E == pytest.approx(2 * W, rel=1e-6)


@pytest.mark.parametrize("name", ["sphere", "torus_rev", "clifford", "clifford_r3", "great_sphere",
                                  "inverted_catenoid"])
def test_E_2W_relation(name):
    sp = S.builtin(name)
    E, W = EN.willmore_energies(sp)
    assert abs(E - 2 * W + 4 * math.pi * sp.euler_characteristic) < 1e-3 * (1 + E)


def test_open_surface_is_partial():
    rep = EN.energy_report(S.builtin("bb_annulus"))
    assert rep.partial and rep.W is None and rep.E > 0
    (c,) = rep.identity_checks
    assert c["gap"] < 5e-3 and c["rhs"] is None
    t = rep.renormalized_area
    assert t["differences_shrink"]
    assert t["cauchy_spread"] < 5e-3
    assert t["H1_crossing"] == pytest.approx(2 * math.pi, rel=1e-6)


def test_catenoid_identity_1():
    sp = S.builtin("inverted_catenoid")
    c = EN.check_space_form_identity(sp, 1)
    assert c["sum_n"] == 0
    assert c["rhs"] == pytest.approx(8 * math.pi)
    assert c["gap"] < 1e-2 * 4 * math.pi
    E, W = EN.willmore_energies(sp)
    assert W == pytest.approx(8 * math.pi, rel=1e-2)


def test_clifford_identity_2():
    c = EN.check_space_form_identity(S.builtin("clifford_r3"), 2)
    assert c["conformal_volume"] == pytest.approx(2 * math.pi**2, rel=1e-9)
    assert c["gap"] < 1e-3 * c["rhs"]


def test_identity_metadata_errors():
    sp = S.builtin("torus_rev")
    for k in (1, 2, 3):
        with pytest.raises(EN.EnergyError):
            EN.check_space_form_identity(sp, k)
    with pytest.raises(ValueError):
        EN.check_space_form_identity(sp, 4)
    assert EN.applicable_identities(sp) == []


def test_bb_integrand_identity():
    sp = S.builtin("bb_annulus")
    u, v = np.meshgrid(np.linspace(0.1, 6.0, 7), np.array([-0.5, -0.3, -0.15, 0.15, 0.3, 0.5]), indexing="ij")
    assert np.max(EN.bb_integrand_identity(sp, u.ravel(), v.ravel())) < 1e-6


def test_not_willmore_is_flagged():
    rep = EN.energy_report(S.builtin("torus_rev"))
    assert "not_willmore" in rep.flags and rep.harmonicity_residual > EN.WILLMORE_FLOOR
    assert EN.energy_report(S.builtin("clifford_r3")).flags == []


def test_report_json_is_deterministic():
    a = EN.energy_report(S.builtin("clifford_r3")).dumps()
    b = EN.energy_report(S.builtin("clifford_r3")).dumps()
    assert a == b
    d = json.loads(a)
    assert {"E", "W", "chi", "identity_checks", "conformal_volume", "renormalized_area"} <= set(d)
    assert "V_c" in EN.energy_report(S.builtin("clifford_r3")).summary()


def test_convergence_check():
    E, W = EN.willmore_energies(S.builtin("clifford_r3"), check=True)
    assert E == pytest.approx(4 * math.pi**2, rel=1e-6)
