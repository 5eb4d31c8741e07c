"""Compiled (numba) against pure-Python kernels.

    python3 benchmarks/bench_kernels.py [--n 160] [--repeat 3]

Each mode runs in its own interpreter because CGMLAB_DISABLE_NUMBA is read at
import time.  The child prints JSON; the parent tabulates timings and the
largest difference between the two modes' outputs.
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _fast_march_case(n):
    x = np.linspace(-1.0, 1.0, n)
    U, V = np.meshgrid(x, x, indexing="ij")
    h = x[1] - x[0]
    r = np.hypot(U, V)
    known = np.abs(r - 0.5) < 1.5 * h
    d0 = np.where(known, np.abs(r - 0.5), 0.0)
    s = 1.0 + 0.25 * U**2
    return d0, known, s, h


def child(n, repeat):
    from cgmlab import _accel, kernels
    from cgmlab.surfaces import integrate_profile

    out = {"numba": _accel.HAVE_NUMBA}
    d0, known, s, h = _fast_march_case(n)
    kernels.fast_march(d0, known, s, h, h, False, False, True)  # warm-up / compile
    t = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        d = kernels.fast_march(d0, known, s, h, h, False, False, True)
        t.append(time.perf_counter() - t0)
    out["fast_march"] = {"seconds": min(t), "checksum": float(np.sum(d)), "sample": d[::17, ::17].tolist()}
    integrate_profile(1.0, 0.3, zeta_stop=0.1, step=1e-3)
    t = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        prof = integrate_profile(1.0, 0.3, zeta_stop=0.675, step=1e-4)
        t.append(time.perf_counter() - t0)
    out["rk4_profile"] = {"seconds": min(t), "checksum": float(np.sum(prof.zeta)), "sample": prof.rho[::500].tolist()}
    print(json.dumps(out))


def run(mode_disabled, n, repeat):
    env = dict(os.environ, CGMLAB_DISABLE_NUMBA="1" if mode_disabled else "0")
    cmd = [sys.executable, __file__, "--child", "--n", str(n), "--repeat", str(repeat)]
    res = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=160, help="fast-marching grid size")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    a = ap.parse_args()
    if a.child:
        child(a.n, a.repeat)
        return
    fast = run(False, a.n, a.repeat)
    slow = run(True, a.n, a.repeat)
    if not fast["numba"]:
        print("numba unavailable: both runs are pure Python")
    print(f"{'kernel':14s} {'numba [s]':>11s} {'python [s]':>11s} {'speed-up':>9s} {'max diff':>10s}")
    for k in ("fast_march", "rk4_profile"):
        a_, b_ = fast[k], slow[k]
        diff = float(np.max(np.abs(np.asarray(a_["sample"]) - np.asarray(b_["sample"]))))
        print(f"{k:14s} {a_['seconds']:11.4f} {b_['seconds']:11.4f} {b_['seconds'] / a_['seconds']:9.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()
