"""One test per acceptance criterion; each prints a single PASS/FAIL line.

Run with ``pytest -v tests/test_acceptance.py`` (the lines are written to the
terminal directly, so -s is not needed).
"""
import pytest

from cgmlab import acceptance as A


def test_tolerances_are_pinned():
    assert A.CLIFFORD_E_RTOL == 1e-3 and A.CLIFFORD_KY_ATOL == 1e-5 and A.CLIFFORD_GRID == 256
    assert A.CLIFFORD_FIT_ATOL == 1e-2 and A.CLIFFORD_SECONDS == 30.0
    assert A.CATENOID_RTOL == 1e-2 and A.CATENOID_KY_ATOL == 1e-4
    assert A.BB_LENGTH_RTOL == 1e-2 and A.BB_SLOPE == -2.0 and A.BB_SLOPE_ATOL == 0.05
    assert A.BB_D_RANGE == (0.025, 0.1)
    assert A.RESIDUAL_RATIO == 3.5 and A.RESIDUAL_GRID == 128 and A.NON_WILLMORE_FLOOR == 1e-3
    assert A.FIT_ATOL == 1e-9


@pytest.mark.parametrize("number", sorted(A.CRITERIA))
def test_criterion(number, capsys):
    chk = A.CRITERIA[number]()
    with capsys.disabled():
        print("\n" + chk.line())
    assert chk.passed, chk.line()
