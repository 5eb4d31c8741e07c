"""Lorentz space R^{4,1} and the de Sitter quadric S^{3,1}.

Vectors are plain arrays whose *last* axis has length 5; the metric
eta = diag(1, 1, 1, 1, -1) is applied through the sign of the fifth slot.
Complex inputs are contracted bilinearly (no conjugation).
"""
from __future__ import annotations

import numpy as np

SIGNATURE = np.array([1.0, 1.0, 1.0, 1.0, -1.0])


def eta_dot(a, b):
    """eta(a, b) = a1 b1 + ... + a4 b4 - a5 b5, broadcast over leading axes."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[-1] != 5 or b.shape[-1] != 5:
        raise ValueError("eta_dot expects vectors of length 5 on the last axis")
    s = a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2] + a[..., 3] * b[..., 3]
    s = s - a[..., 4] * b[..., 4]
    if s.ndim == 0:
        return s.item()
    return s


def eta_norm2(a):
    return eta_dot(a, a)


def on_desitter(a, tol: float = 1e-12) -> bool:
    """True iff |eta(a, a) - 1| <= tol."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    a = np.asarray(a, dtype=float)
    if a.shape != (5,) or not np.all(np.isfinite(a)):
        raise ValueError("on_desitter expects a finite 5-vector")
    return bool(abs(eta_dot(a, a) - 1.0) <= tol)


def eta_matrix() -> np.ndarray:
    """The Gram matrix of eta; only used in reports and small eigenproblems."""
    return np.diag(SIGNATURE)


def basis(i: int) -> np.ndarray:
    e = np.zeros(5)
    e[i] = 1.0
    return e
