"""Closed-form reference solutions used as ground truth.

All solutions are built by the method of characteristics for constant
coefficients: each characteristic component advects rigidly at its wave
speed.  They are valid as long as the initial profile has not reached an
inflow boundary (trivial inflow data), which the callers guarantee by
choosing compactly supported profiles and short enough horizons.
"""

from __future__ import annotations

import numpy as np

from .linalg import EigenDecomp, as_sym, eig_sym, normal_matrix


def gaussian(x0: float, sigma: float):
    """Profile g(s) = exp(-((s - x0) / sigma)^2)."""

    def g(s):
        return np.exp(-(((np.asarray(s, dtype=float) - x0) / sigma) ** 2))

    return g


def exact_scalar(x, t: float, alpha: float, profile, inflow_edge: float | None = None):
    """Translate the initial profile: w(x, t) = g(x - alpha t), 0 upstream."""
    x = np.asarray(x, dtype=float)
    shifted = x - alpha * t
    vals = np.asarray(profile(shifted), dtype=float)
    if inflow_edge is not None:
        vals = np.where(shifted < inflow_edge, 0.0, vals)
    return vals


def exact_system_1d(x, t: float, a_or_decomp, profile, weights):
    """State field of w_t + A w_x = 0 with w(x, 0) = weights * g(x).

    Each characteristic mode advects at its eigenvalue:
    w(x, t) = sum_j p_j (p_j . weights) g(x - lam_j t).
    """
    dec = a_or_decomp if isinstance(a_or_decomp, EigenDecomp) else eig_sym(as_sym(a_or_decomp))
    x = np.asarray(x, dtype=float)
    weights = np.asarray(weights, dtype=float)
    out = np.zeros(x.shape + (dec.n,))
    for j in range(dec.n):
        amp = float(dec.P[:, j] @ weights)
        out += np.multiply.outer(np.asarray(profile(x - dec.lam[j] * t), dtype=float), amp * dec.P[:, j])
    return out


def exact_plane_wave_2d(x, y, t: float, a1, a2, khat, profile, weights):
    """Plane-wave field for w_t + A1 w_x + A2 w_y = 0.

    For data varying only along the unit direction khat, the modes of
    A(khat) = k1 A1 + k2 A2 advect at their eigenvalues:
    w = sum_j p_j (p_j . weights) g(khat . (x, y) - lam_j t).
    """
    an = normal_matrix((a1, a2), khat)
    dec = eig_sym(an)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xi = khat[0] * x + khat[1] * y
    weights = np.asarray(weights, dtype=float)
    out = np.zeros(xi.shape + (dec.n,))
    for j in range(dec.n):
        amp = float(dec.P[:, j] @ weights)
        out += np.multiply.outer(np.asarray(profile(xi - dec.lam[j] * t), dtype=float), amp * dec.P[:, j])
    return out
