"""Dense symmetric-matrix algebra for small hyperbolic systems.

Everything here operates on the constant coefficient matrices of a linear
hyperbolic system (dimension 1 to 8).  The eigendecomposition A = P diag(lam) P^T
with orthogonal P is computed by cyclic Jacobi rotations, which keeps P
orthogonal to machine precision and makes the output reproducible across
platforms (fixed sweep order, fixed sort, fixed sign convention).

The characteristic splitting A = A+ + A- with A+- = (A +- |A|)/2 separates
right-going from left-going information and is the basic ingredient of every
boundary and interface term in the solvers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_DIM = 8
SYM_RTOL = 1e-14
ZERO_EIG_RTOL = 1e-13


class SymmetryError(ValueError):
    """Raised when a matrix fails the symmetry check at construction."""


class JacobiConvergenceError(RuntimeError):
    """Raised when the Jacobi sweep limit is hit (numerical pathology)."""


def as_sym(a, rtol: float = SYM_RTOL) -> np.ndarray:
    """Validate and symmetrize a small square matrix.

    Accepts anything array-like, checks entries[i][j] == entries[j][i] to
    within ``rtol`` relative to the matrix scale, and returns the exactly
    symmetric float array (A + A^T)/2.
    """
    m = np.array(a, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise SymmetryError(f"expected a square matrix, got shape {m.shape}")
    n = m.shape[0]
    if not 1 <= n <= MAX_DIM:
        raise SymmetryError(f"matrix dimension {n} outside supported range 1..{MAX_DIM}")
    scale = max(1.0, float(np.abs(m).max()))
    if np.abs(m - m.T).max() > rtol * scale:
        raise SymmetryError("matrix is not symmetric within tolerance")
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class EigenDecomp:
    """Orthogonal eigendecomposition A = P diag(lam) P^T.

    Eigenvalues are sorted descending; each eigenvector's first component of
    magnitude above 1e-12 of the column norm is positive.
    """

    lam: np.ndarray
    P: np.ndarray

    @property
    def n(self) -> int:
        return self.lam.shape[0]

    def zero_mask(self) -> np.ndarray:
        """Eigenvalues treated as exactly zero for splitting purposes."""
        scale = float(np.abs(self.lam).max())
        if scale == 0.0:
            return np.ones_like(self.lam, dtype=bool)
        return np.abs(self.lam) <= ZERO_EIG_RTOL * scale

    def plus_mask(self) -> np.ndarray:
        return (self.lam > 0) & ~self.zero_mask()

    def minus_mask(self) -> np.ndarray:
        return (self.lam < 0) & ~self.zero_mask()

    def has_zero_eigenvalues(self) -> bool:
        return bool(self.zero_mask().any())


def _jacobi(a: np.ndarray, max_sweeps: int = 60):
    """Cyclic Jacobi iteration on a symmetric matrix, returns (diag, rotations)."""
    m = a.copy()
    n = m.shape[0]
    p = np.eye(n)
    if n == 1:
        return np.array([m[0, 0]]), p
    scale = max(1.0, float(np.abs(m).max()))
    tol = 1e-16 * scale
    for _ in range(max_sweeps):
        off = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                off = max(off, abs(m[i, j]))
        if off <= tol:
            return np.diag(m).copy(), p
        for i in range(n - 1):
            for j in range(i + 1, n):
                if abs(m[i, j]) <= tol:
                    continue
                # classic two-sided rotation annihilating m[i, j]
                theta = 0.5 * (m[j, j] - m[i, i]) / m[i, j]
                t = np.sign(theta) / (abs(theta) + np.hypot(1.0, theta))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                rot = np.eye(n)
                rot[i, i] = c
                rot[j, j] = c
                rot[i, j] = s
                rot[j, i] = -s
                m = rot.T @ m @ rot
                m[i, j] = m[j, i] = 0.0
                p = p @ rot
    raise JacobiConvergenceError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")


def eig_sym(a) -> EigenDecomp:
    """Eigendecomposition of a symmetric matrix with deterministic output."""
    m = as_sym(a)
    lam, p = _jacobi(m)
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    p = p[:, order]
    # sign convention: first component with |.| > 1e-12 positive
    for k in range(p.shape[1]):
        col = p[:, k]
        nz = np.nonzero(np.abs(col) > 1e-12 * np.linalg.norm(col))[0]
        if nz.size and col[nz[0]] < 0:
            p[:, k] = -col
    return EigenDecomp(lam=lam, P=p)


@dataclass(frozen=True)
class FluxSplit:
    """A = aplus + aminus with aplus >= 0, -aminus >= 0 and aabs = aplus - aminus."""

    aplus: np.ndarray
    aminus: np.ndarray
    aabs: np.ndarray
    decomp: EigenDecomp

    @property
    def aminus_abs(self) -> np.ndarray:
        return -self.aminus


def flux_split(a) -> FluxSplit:
    """Characteristic flux splitting; near-zero eigenvalues go to neither part."""
    dec = eig_sym(a)
    lam_plus = np.where(dec.plus_mask(), dec.lam, 0.0)
    lam_minus = np.where(dec.minus_mask(), dec.lam, 0.0)
    aplus = dec.P @ np.diag(lam_plus) @ dec.P.T
    aminus = dec.P @ np.diag(lam_minus) @ dec.P.T
    aplus = 0.5 * (aplus + aplus.T)
    aminus = 0.5 * (aminus + aminus.T)
    return FluxSplit(aplus=aplus, aminus=aminus, aabs=aplus - aminus, decomp=dec)


def is_psd(m, tol: float = 1e-12) -> bool:
    """True iff the smallest eigenvalue is >= -tol * max(1, ||M||)."""
    sym = as_sym(m)
    dec = eig_sym(sym)
    scale = max(1.0, float(np.abs(sym).max()))
    return bool(dec.lam.min() >= -tol * scale)


def min_eig_witness(m):
    """Smallest eigenvalue and its eigenvector (the PSD failure witness)."""
    dec = eig_sym(as_sym(m))
    k = int(np.argmin(dec.lam))
    return float(dec.lam[k]), dec.P[:, k].copy()


def normal_matrix(a_pair, nhat) -> np.ndarray:
    """Coefficient matrix in the direction nhat: n1*A1 + n2*A2 for a unit nhat."""
    a1 = as_sym(a_pair[0])
    a2 = as_sym(a_pair[1])
    n = np.asarray(nhat, dtype=float)
    if n.shape != (2,):
        raise ValueError("nhat must be a 2-vector")
    if abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise ValueError("nhat must be a unit vector to within 1e-12")
    return n[0] * a1 + n[1] * a2


def char_transform(q, decomp: EigenDecomp) -> np.ndarray:
    """Characteristic variables w = P^T q (rows of q are state vectors)."""
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != decomp.n:
        raise ValueError("state dimension does not match decomposition")
    return q @ decomp.P


def char_inverse(w, decomp: EigenDecomp) -> np.ndarray:
    """Invert the characteristic transform: q = P w."""
    return np.asarray(w, dtype=float) @ decomp.P.T


def char_split(w, decomp: EigenDecomp):
    """Split characteristic variables into right-going and left-going parts.

    Returns (w_plus, w_minus), each full-width with the other family zeroed.
    Zero-speed components belong to neither part.
    """
    w = np.asarray(w, dtype=float)
    return w * decomp.plus_mask(), w * decomp.minus_mask()


@dataclass(frozen=True)
class HyperbolicSystem:
    """Symmetric coefficient matrix with cached decomposition and splitting."""

    a: np.ndarray
    decomp: EigenDecomp
    aplus: np.ndarray
    aminus_abs: np.ndarray
    aabs: np.ndarray

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def rho(self) -> float:
        """Spectral radius."""
        return float(np.abs(self.decomp.lam).max())

    @property
    def has_zero_eigenvalues(self) -> bool:
        return self.decomp.has_zero_eigenvalues()


def hyperbolic_system(a) -> HyperbolicSystem:
    split = flux_split(a)
    return HyperbolicSystem(
        a=as_sym(a),
        decomp=split.decomp,
        aplus=split.aplus,
        aminus_abs=split.aminus_abs,
        aabs=split.aabs,
    )
