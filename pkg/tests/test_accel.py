import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np

BENCH = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"

_CHILD = """
import json, numpy as np
from cgmlab import _accel, kernels
from cgmlab.surfaces import integrate_profile
x = np.linspace(-1, 1, 48)
U, V = np.meshgrid(x, x, indexing="ij")
h = x[1] - x[0]
r = np.hypot(U, V)
known = np.abs(r - 0.5) < 1.5 * h
d = kernels.fast_march(np.where(known, np.abs(r - 0.5), 0.0), known, 1 + 0.25 * U**2, h, h, False, False, True)
p = integrate_profile(1.0, 0.3, zeta_stop=0.5, step=1e-3)
print(json.dumps({"backend": _accel.backend(), "d": d.tolist(), "rho": p.rho.tolist()}))
"""


def _run(disabled):
    env = dict(os.environ, CGMLAB_DISABLE_NUMBA="1" if disabled else "0")
    out = subprocess.run([sys.executable, "-c", _CHILD], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def test_fallback_matches_compiled():
    slow = _run(True)
    fast = _run(False)
    assert slow["backend"] == "python"
    assert np.max(np.abs(np.array(slow["d"]) - np.array(fast["d"]))) < 1e-12
    assert np.max(np.abs(np.array(slow["rho"]) - np.array(fast["rho"]))) < 1e-12


def test_benchmark_runs():
    out = subprocess.run([sys.executable, str(BENCH), "--n", "40", "--repeat", "1"], capture_output=True,
                         text=True, check=True)
    assert "fast_march" in out.stdout and "rk4_profile" in out.stdout
