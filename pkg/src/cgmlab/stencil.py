"""Fourth-order central differences in the chart variables."""
from __future__ import annotations

from typing import Callable

import numpy as np

_W = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
_OFF = np.array([-2.0, -1.0, 1.0, 2.0])


class StencilError(ValueError):
    """The stencil does not fit inside the chart."""


def check_fits(chart, u, v, h: float, reach: int = 2) -> None:
    """Raise if a stencil of ``reach`` steps leaves a non-periodic chart direction."""
    r = reach * h
    if not chart.periodic_u:
        if np.any(np.asarray(u) - r < chart.u0) or np.any(np.asarray(u) + r > chart.u1):
            raise StencilError("point too close to the chart boundary for the stencil (u)")
    if not chart.periodic_v:
        if np.any(np.asarray(v) - r < chart.v0) or np.any(np.asarray(v) + r > chart.v1):
            raise StencilError("point too close to the chart boundary for the stencil (v)")


def d_u(f: Callable, u, v, h: float):
    return sum(w * f(u + o * h, v) for w, o in zip(_W, _OFF)) / h


def d_v(f: Callable, u, v, h: float):
    return sum(w * f(u, v + o * h) for w, o in zip(_W, _OFF)) / h


def d_z(f: Callable, u, v, h: float):
    return 0.5 * (d_u(f, u, v, h) - 1j * d_v(f, u, v, h))


def d_zb(f: Callable, u, v, h: float):
    return 0.5 * (d_u(f, u, v, h) + 1j * d_v(f, u, v, h))


def grid_d(F: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Periodic fourth-order derivative of a sampled field along ``axis``."""
    out = np.zeros_like(F)
    for w, o in zip(_W, _OFF):
        out = out + w * np.roll(F, -int(o), axis=axis)
    return out / h


def grid_dz(F, hu, hv, axes=(0, 1)):
    return 0.5 * (grid_d(F, axes[0], hu) - 1j * grid_d(F, axes[1], hv))


def grid_dzb(F, hu, hv, axes=(0, 1)):
    return 0.5 * (grid_d(F, axes[0], hu) + 1j * grid_d(F, axes[1], hv))
