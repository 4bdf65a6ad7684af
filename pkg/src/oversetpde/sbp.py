"""Summation-by-parts difference operators on uniform 1D grids.

Diagonal-norm first-derivative operators D = H^-1 Q with

    Q + Q^T = B = diag(-1, 0, ..., 0, +1),

so that u^T H (D v) + (D u)^T H v = u_N v_N - u_0 v_0 exactly.  Two classical
families are provided: interior order 2 with first-order boundary closure and
interior order 4 with second-order closure (H/h = 17/48, 59/48, 43/48, 49/48
at the boundary).  Periodic central-difference operators of the same interior
orders are provided for the y-direction of channel problems; their Q is
exactly antisymmetric so periodic directions contribute no boundary terms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SUPPORTED_ORDERS = (2, 4)

# minimum node counts so the two boundary closures do not overlap
_MIN_NODES = {2: 4, 4: 8}


def _q_and_h(n_nodes: int, order: int):
    """Assemble Q and the norm weights H/h for an SBP block of n_nodes."""
    n = n_nodes
    q = np.zeros((n, n))
    h = np.ones(n)
    if order == 2:
        h[0] = h[-1] = 0.5
        for i in range(n - 1):
            q[i, i + 1] = 0.5
            q[i + 1, i] = -0.5
        q[0, 0] = -0.5
        q[-1, -1] = 0.5
        q[0, 1] = 0.5
        q[1, 0] = -0.5
    elif order == 4:
        h[:4] = [17.0 / 48.0, 59.0 / 48.0, 43.0 / 48.0, 49.0 / 48.0]
        h[-4:] = h[:4][::-1]
        interior = np.array([1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0])
        for i in range(4, n - 4):
            q[i, i - 2 : i + 3] = interior
        block = np.array(
            [
                [-1.0 / 2.0, 59.0 / 96.0, -1.0 / 12.0, -1.0 / 32.0, 0.0, 0.0],
                [-59.0 / 96.0, 0.0, 59.0 / 96.0, 0.0, 0.0, 0.0],
                [1.0 / 12.0, -59.0 / 96.0, 0.0, 59.0 / 96.0, -1.0 / 12.0, 0.0],
                [1.0 / 32.0, 0.0, -59.0 / 96.0, 0.0, 2.0 / 3.0, -1.0 / 12.0],
            ]
        )
        q[:4, :6] = block
        # right closure by the mirror symmetry Q -> -J Q J
        q[-4:, -6:] = -block[::-1, ::-1]
    else:
        raise ValueError(f"unsupported SBP order {order}; choose from {SUPPORTED_ORDERS}")
    return q, h


@dataclass(frozen=True)
class Block:
    """One uniform SBP grid block on [left, right].

    Attributes
    ----------
    x : node coordinates, shape (N,)
    h : grid spacing
    H : diagonal quadrature weights, shape (N,)
    D : first-derivative operator, shape (N, N)
    order : interior accuracy order (2 or 4)
    """

    x: np.ndarray
    h: float
    H: np.ndarray
    D: np.ndarray
    order: int

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def left(self) -> float:
        return float(self.x[0])

    @property
    def right(self) -> float:
        return float(self.x[-1])

    def norm_sq(self, q: np.ndarray) -> float:
        """Discrete L2 norm squared, summing over state components if any."""
        q2 = q * q
        while q2.ndim > 1:
            q2 = q2.sum(axis=-1)
        return float(self.H @ q2)

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        prod = a * b
        while prod.ndim > 1:
            prod = prod.sum(axis=-1)
        return float(self.H @ prod)

    def integral(self, q: np.ndarray) -> np.ndarray:
        """Componentwise quadrature 1^T H q."""
        return np.tensordot(self.H, q, axes=(0, 0))


def build_grid_1d(interval, n_nodes: int, order: int) -> Block:
    """Build one SBP block with ``n_nodes`` nodes on the closed interval."""
    left, right = float(interval[0]), float(interval[1])
    if right <= left:
        raise ValueError(f"empty interval ({left}, {right})")
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported SBP order {order}; choose from {SUPPORTED_ORDERS}")
    if n_nodes < _MIN_NODES[order]:
        raise ValueError(
            f"order {order} needs at least {_MIN_NODES[order]} nodes, got {n_nodes}"
        )
    h = (right - left) / (n_nodes - 1)
    q, hw = _q_and_h(n_nodes, order)
    H = hw * h
    D = q / H[:, None]
    x = left + h * np.arange(n_nodes)
    x[-1] = right
    return Block(x=x, h=h, H=H, D=D, order=order)


@dataclass(frozen=True)
class PeriodicLine:
    """Uniform periodic grid with central-difference operator (for y)."""

    x: np.ndarray
    h: float
    H: np.ndarray
    D: np.ndarray
    order: int
    length: float

    @property
    def n(self) -> int:
        return self.x.shape[0]


def build_periodic_line(length: float, n_nodes: int, order: int) -> PeriodicLine:
    """Periodic grid on [0, length) with n_nodes points (no duplicated endpoint)."""
    if length <= 0:
        raise ValueError("periodic length must be positive")
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported order {order}")
    if n_nodes < (3 if order == 2 else 5):
        raise ValueError(f"too few periodic nodes ({n_nodes}) for order {order}")
    h = length / n_nodes
    n = n_nodes
    d = np.zeros((n, n))
    if order == 2:
        for j in range(n):
            d[j, (j + 1) % n] = 0.5 / h
            d[j, (j - 1) % n] = -0.5 / h
    else:
        c = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / (12.0 * h)
        for j in range(n):
            for k, off in enumerate((-2, -1, 0, 1, 2)):
                d[j, (j + off) % n] += c[k]
    x = h * np.arange(n)
    return PeriodicLine(x=x, h=h, H=np.full(n, h), D=d, order=order, length=length)
