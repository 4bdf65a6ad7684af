"""Overset interval and channel geometries with aligned interface nodes.

An overset pair consists of two component grids: the left grid covers
[a, c] and owns the left physical boundary, the right grid covers [b, d]
and owns the right physical boundary, with a < b < c < d and genuine
overlap [b, c].  Interfaces are required to coincide with grid nodes of
both grids so that all cross-grid transfers are exact copies and the
semi-discrete energy and conservation identities close to machine
precision.

Each component grid is realized as two SBP blocks that meet at its
interior interface coordinate (b for the left grid, c for the right
grid), with the meeting node duplicated.  This makes the overlap region
an SBP block of its own on both grids, so norms over the overlap and
their time derivatives obey exact summation-by-parts identities, and
norm additivity ||q||^2_grid = ||q||^2_outer + ||q||^2_overlap holds by
construction for both interior orders.

The 2D geometry is a y-periodic channel: the same two-grid structure in
x, extruded over a shared periodic y grid.  The left grid's physical
boundary line x = a' is interior to the channel [a, d] used by the
single-domain reference problem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sbp import Block, PeriodicLine, build_grid_1d, build_periodic_line


class AlignmentError(ValueError):
    """Raised when grid spacings do not place interfaces on nodes."""


def _node_count(left: float, right: float, h: float, what: str) -> int:
    """Number of spacings of size h on [left, right]; rejects misalignment."""
    span = right - left
    ratio = span / h
    n = round(ratio)
    if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, abs(ratio)):
        raise AlignmentError(
            f"spacing {h} does not divide the interval {what} = [{left}, {right}]"
        )
    return n


@dataclass(frozen=True)
class TwoBlockGrid:
    """A component grid made of two SBP blocks sharing one coordinate.

    ``blocks[0]`` covers [left, mid], ``blocks[1]`` covers [mid, right];
    the node at ``mid`` exists in both blocks.  ``overlap_side`` records
    which block is the overlap region of the overset pair ('left' or
    'right').
    """

    blocks: tuple[Block, Block]
    mid: float
    overlap_side: str

    @property
    def h(self) -> float:
        return self.blocks[0].h

    @property
    def order(self) -> int:
        return self.blocks[0].order

    @property
    def left(self) -> float:
        return self.blocks[0].left

    @property
    def right(self) -> float:
        return self.blocks[1].right

    @property
    def overlap_block(self) -> Block:
        return self.blocks[0] if self.overlap_side == "left" else self.blocks[1]

    @property
    def outer_block(self) -> Block:
        return self.blocks[1] if self.overlap_side == "left" else self.blocks[0]

    def norm_sq(self, fields) -> float:
        return sum(blk.norm_sq(q) for blk, q in zip(self.blocks, fields))

    def overlap_norm_sq(self, fields) -> float:
        idx = 0 if self.overlap_side == "left" else 1
        return self.blocks[idx].norm_sq(fields[idx])


def _two_block(left: float, mid: float, right: float, h: float, order: int, overlap_side: str):
    n0 = _node_count(left, mid, h, f"[{left}, {mid}]")
    n1 = _node_count(mid, right, h, f"[{mid}, {right}]")
    b0 = build_grid_1d((left, mid), n0 + 1, order)
    b1 = build_grid_1d((mid, right), n1 + 1, order)
    return TwoBlockGrid(blocks=(b0, b1), mid=mid, overlap_side=overlap_side)


@dataclass(frozen=True)
class OversetGeometry1D:
    """Overset interval pair: left grid on [a, c], right grid on [b, d].

    The overlap region is [b, c].  ``grid_u`` splits at b (outer block
    [a, b], overlap block [b, c]); ``grid_v`` splits at c (overlap block
    [b, c], outer block [c, d]).
    """

    a: float
    b: float
    c: float
    d: float
    grid_u: TwoBlockGrid
    grid_v: TwoBlockGrid

    @property
    def order(self) -> int:
        return self.grid_u.order

    def reference_grid(self, h: float | None = None) -> Block:
        """Single-domain grid on [a, d] sharing nodes with both grids."""
        href = self.grid_u.h if h is None else h
        n = _node_count(self.a, self.d, href, "[a, d]")
        ref = build_grid_1d((self.a, self.d), n + 1, self.order)
        for x_int in (self.b, self.c):
            _node_count(self.a, x_int, href, "reference alignment")
        return ref


def build_overset_1d(a: float, b: float, c: float, d: float, h_u: float, h_v: float, order: int) -> OversetGeometry1D:
    if not (a < b < c < d):
        raise ValueError(f"interface coordinates must satisfy a < b < c < d, got {(a, b, c, d)}")
    grid_u = _two_block(a, b, c, h_u, order, overlap_side="right")
    grid_v = _two_block(b, c, d, h_v, order, overlap_side="left")
    return OversetGeometry1D(a=a, b=b, c=c, d=d, grid_u=grid_u, grid_v=grid_v)


# ---------------------------------------------------------------------------
# 2D channel geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OversetGeometry2D:
    """Y-periodic overset channel.

    The overset strip grid (u) covers [a_prime, c] x [0, Ly] with its
    physical boundary line at x = a_prime; the base grid (v) covers
    [b, d] x [0, Ly] with its physical boundary at x = d.  Interface
    lines sit at x = b and x = c, the overlap strip is [b, c] x [0, Ly],
    and both grids share the periodic y nodes.  The full channel
    [a, d] x [0, Ly] (a <= a_prime) hosts the single-domain reference.

    ``overlap_points`` is the set of interior overlap penalty locations,
    stored as index pairs into the overlap blocks of both grids:
    rows of (iu, iv, j) with x_u[iu] == x_v[iv] == x_m and shared y node j.
    """

    a: float
    a_prime: float
    b: float
    c: float
    d: float
    grid_u: TwoBlockGrid
    grid_v: TwoBlockGrid
    yline: PeriodicLine
    overlap_points: np.ndarray

    @property
    def order(self) -> int:
        return self.grid_u.order

    @property
    def ly(self) -> float:
        return self.yline.length

    @property
    def n_overlap_points(self) -> int:
        return int(self.overlap_points.shape[0])

    def reference_grid(self, h: float | None = None) -> Block:
        href = self.grid_u.h if h is None else h
        n = _node_count(self.a, self.d, href, "[a, d]")
        ref = build_grid_1d((self.a, self.d), n + 1, self.order)
        for x_int in (self.a_prime, self.b, self.c):
            _node_count(self.a, x_int, href, "reference alignment")
        return ref


def _overlap_lattice(mode: str, b: float, c: float, h_u: float, h_v: float):
    """Uniform K x K lattice of overlap points, snapped to shared x nodes."""
    mode = mode.strip().lower()
    if mode in ("none", ""):
        return []
    if not mode.startswith("uniform"):
        raise ValueError(f"unknown overlap point spec {mode!r}")
    spec = mode.removeprefix("uniform").strip()
    kx, _, ky = spec.partition("x")
    kx, ky = int(kx), int(ky)
    if kx < 1 or ky < 1:
        raise ValueError("overlap lattice needs at least 1x1 points")
    nu = round((c - b) / h_u)
    nv = round((c - b) / h_v)
    xs = []
    for k in range(1, kx + 1):
        target = b + (c - b) * k / (kx + 1)
        iu = round((target - b) / h_u)
        iu = min(max(iu, 1), nu - 1)
        x = b + iu * h_u
        iv = (x - b) / h_v
        if abs(iv - round(iv)) > 1e-9:
            raise AlignmentError(
                f"overlap point x = {x} is not a shared node of both grids"
            )
        iv = min(max(round(iv), 1), nv - 1)
        xs.append((iu, iv))
    return xs, ky


def build_overset_2d(
    a_prime: float,
    a: float,
    b: float,
    c: float,
    d: float,
    ly: float,
    hx_u: float,
    hx_v: float,
    hy: float,
    order: int,
    overlap_point_spec: str = "none",
) -> OversetGeometry2D:
    if not (a <= a_prime < b < c < d):
        raise ValueError(
            f"need a <= a' < b < c < d, got a={a}, a'={a_prime}, b={b}, c={c}, d={d}"
        )
    grid_u = _two_block(a_prime, b, c, hx_u, order, overlap_side="right")
    grid_v = _two_block(b, c, d, hx_v, order, overlap_side="left")
    ny = _node_count(0.0, ly, hy, "[0, Ly]")
    yline = build_periodic_line(ly, ny, order)

    lattice = _overlap_lattice(overlap_point_spec, b, c, hx_u, hx_v)
    points = []
    if lattice:
        xs, ky = lattice
        for iu, iv in xs:
            for k in range(1, ky + 1):
                target = ly * k / (ky + 1)
                j = round(target / hy) % ny
                points.append((iu, iv, j))
    pts = np.array(points, dtype=int).reshape(-1, 3)
    return OversetGeometry2D(
        a=a,
        a_prime=a_prime,
        b=b,
        c=c,
        d=d,
        grid_u=grid_u,
        grid_v=grid_v,
        yline=yline,
        overlap_points=pts,
    )


# ---------------------------------------------------------------------------
# cross-grid transfer
# ---------------------------------------------------------------------------


def transfer(source_x: np.ndarray, source_values: np.ndarray, targets, width: int = 5) -> np.ndarray:
    """Evaluate grid data at target locations.

    Targets that coincide with source nodes (to 1e-12 of the spacing) are
    exact copies; anything else is barycentric Lagrange interpolation on a
    window of ``width`` nearest nodes.  Targets outside the source interval
    are rejected.
    """
    x = np.asarray(source_x, dtype=float)
    vals = np.asarray(source_values, dtype=float)
    t = np.atleast_1d(np.asarray(targets, dtype=float))
    h = x[1] - x[0]
    lo, hi = x[0], x[-1]
    out = np.empty((t.shape[0],) + vals.shape[1:], dtype=float)
    for m, xt in enumerate(t):
        if xt < lo - 1e-12 * h or xt > hi + 1e-12 * h:
            raise ValueError(f"target {xt} outside source grid [{lo}, {hi}]")
        pos = (xt - lo) / h
        nearest = round(pos)
        if abs(pos - nearest) <= 1e-12 * max(1.0, abs(pos)):
            out[m] = vals[int(nearest)]
            continue
        k0 = int(np.floor(pos)) - (width - 1) // 2
        k0 = min(max(k0, 0), x.shape[0] - width)
        xi = x[k0 : k0 + width]
        # barycentric weights for a small window
        w = np.array(
            [np.prod([1.0 / (xi[j] - xi[i]) for i in range(width) if i != j]) for j in range(width)]
        )
        diff = xt - xi
        terms = w / diff
        out[m] = np.tensordot(terms, vals[k0 : k0 + width], axes=(0, 0)) / terms.sum()
    if np.isscalar(targets) or np.asarray(targets).ndim == 0:
        return out[0]
    return out
