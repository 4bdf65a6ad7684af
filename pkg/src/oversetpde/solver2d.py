"""Semi-discrete solvers for the y-periodic overset channel.

Same structure as the 1D solvers extruded over a shared periodic y grid:
tensor-product interior operator -(A1 Dx + A2 Dy), line SATs along the
x-interfaces applied per y node with the x-quadrature lifting, and
characteristic SATs on the two physical boundary lines.  The periodic y
operator is exactly skew-adjoint, so the y direction contributes nothing
to the energy or conservation ledgers.

Interior overlap penalties act at shared nodes of the two overlap blocks,
lifted by the full area weight 1/(Hx Hy) and averaged over the M points.
Their coupling matrices are not reweighted: the overlap points sit inside
the energy-weighted blocks exactly as the overlap integrals do in the
composite energy, and under the balance condition
(1 - eta) Su_m = eta Sv_m their conservation contributions cancel exactly.
"""

from __future__ import annotations

import numpy as np

from .coupling import InterfaceCoupling, OverlapCoupling
from .geometry import OversetGeometry2D
from .linalg import HyperbolicSystem, hyperbolic_system
from .sbp import Block, PeriodicLine
from .solver1d import FieldLayout, _SatStrength, _INTERIOR_EIG, _RK4_REAL_AXIS, _rho


class Problem2D:
    """One semi-discrete channel problem.

    Modes: ``penalty`` (boundary-only coupling when no overlap points are
    configured, boundary-plus-overlap otherwise) and ``single``.
    """

    def __init__(
        self,
        mode: str,
        system_pair,
        geometry,
        couplings: tuple[InterfaceCoupling, InterfaceCoupling] | None = None,
        overlap: OverlapCoupling | None = None,
        eta: float = 0.5,
        yline: PeriodicLine | None = None,
        allow_uncertified: bool = False,
    ):
        a1, a2 = system_pair
        self.system = hyperbolic_system(a1)
        self.system_y = hyperbolic_system(a2)
        self.mode = mode
        self.geometry = geometry
        self.eta = float(eta)
        self.couplings = couplings
        self.overlap = overlap

        if mode == "single":
            if not isinstance(geometry, Block):
                raise TypeError("single-domain mode expects one x Block")
            if yline is None:
                raise ValueError("single-domain mode needs the periodic y line")
            self.blocks = [geometry]
            self.yline = yline
        elif mode == "penalty":
            if not isinstance(geometry, OversetGeometry2D):
                raise TypeError("penalty mode expects an OversetGeometry2D")
            gu, gv = geometry.grid_u, geometry.grid_v
            self.blocks = [gu.blocks[0], gu.blocks[1], gv.blocks[0], gv.blocks[1]]
            self.yline = geometry.yline
            if not 0.0 < self.eta < 1.0:
                raise ValueError(f"eta must lie in (0, 1), got {eta}")
            if couplings is None:
                raise ValueError("penalty mode needs interface couplings at the two lines")
            cb, cc = couplings
            self._check_weight(cb, self.eta, "the left interface")
            self._check_weight(cc, 1.0 - self.eta, "the right interface")
            for name, cpl in (("left interface", cb), ("right interface", cc)):
                if not cpl.certified and not allow_uncertified:
                    raise ValueError(f"coupling at {name} is not certified ({cpl.verdict.reason})")
            if geometry.n_overlap_points > 0:
                if overlap is None:
                    raise ValueError("geometry has overlap points but no overlap coupling")
                if abs(overlap.eta - self.eta) > 1e-12:
                    raise ValueError("overlap coupling eta disagrees with the problem eta")
                if not overlap.certified and not allow_uncertified:
                    raise ValueError(
                        f"overlap coupling is not certified ({overlap.verdict.reason})"
                    )
        else:
            raise ValueError(f"unknown mode {mode!r}")

        ny = self.yline.n
        self.layout = FieldLayout([(blk.n, ny, self.system.n) for blk in self.blocks])
        self._sats: list[_SatStrength] = []
        self._register_sats()

    def _check_weight(self, cpl: InterfaceCoupling, weight: float, name: str) -> None:
        target = weight * self.system.a
        scale = max(1.0, np.abs(target).max())
        if np.abs(cpl.beta * cpl.a_n - target).max() > 1e-10 * scale:
            raise ValueError(
                f"coupling at {name}: beta * A_n does not reduce to the 1D convention "
                f"(expected product {weight:g} * A1)"
            )

    def _register_sats(self) -> None:
        rho = self.system.rho
        add = self._sats.append
        if self.mode == "single":
            blk = self.blocks[0]
            add(_SatStrength(blk, 0, rho))
            add(_SatStrength(blk, -1, rho))
            return
        u0, u1, v0, v1 = self.blocks
        add(_SatStrength(u0, 0, rho))
        add(_SatStrength(v1, -1, rho))
        add(_SatStrength(u0, -1, rho))
        add(_SatStrength(u1, 0, rho))
        add(_SatStrength(v0, -1, rho))
        add(_SatStrength(v1, 0, rho))
        cb, cc = self.couplings
        eta = self.eta
        add(_SatStrength(u0, -1, _rho(cb.sigma_u)))
        add(_SatStrength(v0, 0, _rho(cb.sigma_v) / eta))
        add(_SatStrength(u1, -1, _rho(cc.sigma_u) / (1.0 - eta)))
        add(_SatStrength(v1, 0, _rho(cc.sigma_v)))

    def dt_stable(self, cfl: float = 0.5) -> float:
        c_int = _INTERIOR_EIG[self.blocks[0].order]
        rho_x = max(self.system.rho, 1e-30)
        rho_y = self.system_y.rho
        rate_y = c_int * rho_y / self.yline.h
        lam = max(
            c_int * rho_x / blk.h
            + rate_y
            + sum(s.rate for s in self._sats if s.block is blk)
            for blk in self.blocks
        )
        if self.mode == "penalty" and self.overlap is not None:
            geom = self.geometry
            m = max(geom.n_overlap_points, 1)
            if geom.n_overlap_points:
                hxy = min(b.h for b in self.blocks) * self.yline.h
                lam += (_rho(self.overlap.sigma_u) + _rho(self.overlap.sigma_v)) / (m * hxy)
        dt_cap = cfl * min(
            min(blk.h for blk in self.blocks) / rho_x if rho_x > 0 else np.inf,
            self.yline.h / rho_y if rho_y > 0 else np.inf,
        )
        return min(dt_cap, cfl * _RK4_REAL_AXIS / lam)

    # -- state helpers -------------------------------------------------------

    def initial_state(self, profile) -> np.ndarray:
        """Sample profile(x, y) -> (Nx, Ny, n) on every block."""
        ys = self.yline.x
        arrays = []
        for blk in self.blocks:
            xg, yg = np.meshgrid(blk.x, ys, indexing="ij")
            arrays.append(np.asarray(profile(xg, yg), dtype=float))
        return self.layout.pack(arrays)

    def fields(self, y: np.ndarray):
        return self.layout.views(y)

    def post_step(self, y: np.ndarray) -> None:
        return None

    # -- right-hand side -----------------------------------------------------

    def _interior(self, blk: Block, q: np.ndarray) -> np.ndarray:
        dx = np.tensordot(blk.D, q, axes=(1, 0))
        dy = np.einsum("jk,ikn->ijn", self.yline.D, q)
        return -dx @ self.system.a.T - dy @ self.system_y.a.T

    @staticmethod
    def _edge_sat(qdot, blk, end, mat, diff):
        qdot[end] -= diff @ mat.T / blk.H[end]

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        if self.mode == "single":
            return self._rhs_single(y)
        return self._rhs_penalty(y)

    def _rhs_single(self, y: np.ndarray) -> np.ndarray:
        (blk,) = self.blocks
        (q,) = self.layout.views(y)
        out = np.empty_like(y)
        (qdot,) = self.layout.views(out)
        qdot[...] = self._interior(blk, q)
        self._edge_sat(qdot, blk, 0, self.system.aplus, q[0])
        self._edge_sat(qdot, blk, -1, self.system.aminus_abs, q[-1])
        return out

    def _rhs_penalty(self, y: np.ndarray) -> np.ndarray:
        u0, u1, v0, v1 = self.layout.views(y)
        b_u0, b_u1, b_v0, b_v1 = self.blocks
        out = np.empty_like(y)
        d_u0, d_u1, d_v0, d_v1 = self.layout.views(out)
        ap, am = self.system.aplus, self.system.aminus_abs
        eta = self.eta
        cb, cc = self.couplings

        d_u0[...] = self._interior(b_u0, u0)
        d_u1[...] = self._interior(b_u1, u1)
        d_v0[...] = self._interior(b_v0, v0)
        d_v1[...] = self._interior(b_v1, v1)

        self._edge_sat(d_u0, b_u0, 0, ap, u0[0])
        self._edge_sat(d_v1, b_v1, -1, am, v1[-1])
        self._edge_sat(d_u0, b_u0, -1, (1.0 - eta) * am, u0[-1] - u1[0])
        self._edge_sat(d_u1, b_u1, 0, ap, u1[0] - u0[-1])
        self._edge_sat(d_v0, b_v0, -1, am, v0[-1] - v1[0])
        self._edge_sat(d_v1, b_v1, 0, eta * ap, v1[0] - v0[-1])
        self._edge_sat(d_u0, b_u0, -1, cb.sigma_u, u0[-1] - v0[0])
        self._edge_sat(d_v0, b_v0, 0, cb.sigma_v / eta, v0[0] - u0[-1])
        self._edge_sat(d_u1, b_u1, -1, cc.sigma_u / (1.0 - eta), u1[-1] - v1[0])
        self._edge_sat(d_v1, b_v1, 0, cc.sigma_v, v1[0] - u1[-1])

        points = self.geometry.overlap_points
        if self.overlap is not None and len(points) > 0:
            m = len(points)
            su, sv = self.overlap.sigma_u, self.overlap.sigma_v
            hy = self.yline.H
            for iu, iv, j in points:
                diff = u1[iu, j] - v0[iv, j]
                d_u1[iu, j] -= (su @ diff) / (m * b_u1.H[iu] * hy[j])
                d_v0[iv, j] += (sv @ diff) / (m * b_v0.H[iv] * hy[j])
        return out
