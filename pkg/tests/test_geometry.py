"""SBP operator identities, overset grid construction, and transfers.

Quadrature consistency is checked against exact integrals; the SBP
property is verified as an exact matrix identity, and the discrete
integration-by-parts invariant as a property test over random vectors.
"""

import numpy as np
import pytest

from oversetpde.geometry import (
    AlignmentError,
    build_overset_1d,
    build_overset_2d,
    transfer,
)
from oversetpde.sbp import build_grid_1d, build_periodic_line


def sbp_boundary_matrix(block):
    q = block.H[:, None] * block.D
    return q + q.T


class TestBuildGrid1D:
    @pytest.mark.parametrize("order", [2, 4])
    def test_sbp_property_exact(self, order):
        blk = build_grid_1d((0.0, 1.0), 16, order)
        b = sbp_boundary_matrix(blk)
        expected = np.zeros((16, 16))
        expected[0, 0] = -1.0
        expected[-1, -1] = 1.0
        assert np.abs(b - expected).max() <= 1e-13

    def test_derivative_exact_on_linears(self):
        blk = build_grid_1d((0.0, 1.0), 11, 2)
        assert blk.h == pytest.approx(0.1)
        assert np.abs(blk.D @ blk.x - 1.0).max() <= 1e-13
        assert np.abs(blk.D @ np.ones(11)).max() <= 1e-13

    def test_order4_interior_exactness(self):
        blk = build_grid_1d((0.0, 2.0), 21, 4)
        for k in range(1, 5):
            err = blk.D @ blk.x**k - k * blk.x ** (k - 1)
            assert np.abs(err[4:-4]).max() <= 1e-12 * max(1.0, np.abs(blk.x**k).max())

    @pytest.mark.parametrize("order", [2, 4])
    def test_quadrature_consistency(self, order):
        blk = build_grid_1d((-1.0, 2.5), 29, order)
        assert abs(blk.H.sum() - 3.5) <= 1e-13

    def test_too_few_nodes_rejected(self):
        with pytest.raises(ValueError):
            build_grid_1d((0.0, 1.0), 3, 2)
        with pytest.raises(ValueError):
            build_grid_1d((0.0, 1.0), 7, 4)

    @pytest.mark.parametrize("order", [2, 4])
    def test_integration_by_parts_random(self, order, rng):
        blk = build_grid_1d((0.0, 1.0), 21, order)
        for _ in range(30):
            phi = rng.normal(size=21)
            q = rng.normal(size=21)
            lhs = phi @ (blk.H * (blk.D @ q)) + (blk.D @ phi) @ (blk.H * q)
            rhs = phi[-1] * q[-1] - phi[0] * q[0]
            assert abs(lhs - rhs) <= 1e-12 * np.linalg.norm(phi) * np.linalg.norm(q)


class TestPeriodicLine:
    @pytest.mark.parametrize("order", [2, 4])
    def test_skew_symmetry_exact(self, order):
        line = build_periodic_line(2.0, 20, order)
        q = line.H[:, None] * line.D
        assert np.abs(q + q.T).max() <= 1e-14

    @pytest.mark.parametrize("order,rate", [(2, 2.0), (4, 4.0)])
    def test_accuracy_on_trig(self, order, rate):
        errs = []
        for n in (20, 40):
            line = build_periodic_line(1.0, n, order)
            f = np.sin(2 * np.pi * line.x)
            df = 2 * np.pi * np.cos(2 * np.pi * line.x)
            errs.append(np.abs(line.D @ f - df).max())
        assert np.log2(errs[0] / errs[1]) > rate - 0.3


class TestOversetGeometry1D:
    def test_standard_build(self):
        geom = build_overset_1d(0.0, 1.0, 2.0, 3.0, 0.1, 0.1, 2)
        assert geom.grid_u.blocks[0].n == 11
        assert geom.grid_u.blocks[1].n == 11
        assert geom.grid_u.mid == 1.0
        assert geom.grid_v.mid == 2.0
        assert geom.grid_u.overlap_block.left == 1.0
        assert geom.grid_v.overlap_block.right == 2.0

    def test_mixed_spacings_accepted(self):
        geom = build_overset_1d(0.0, 1.0, 2.0, 3.0, 0.1, 0.05, 2)
        assert geom.grid_v.blocks[0].n == 21

    def test_misaligned_spacing_rejected(self):
        with pytest.raises(AlignmentError) as err:
            build_overset_1d(0.0, 1.0, 2.0, 3.0, 0.3, 0.1, 2)
        assert "0.3" in str(err.value)

    def test_bad_ordering_rejected(self):
        with pytest.raises(ValueError):
            build_overset_1d(0.0, 2.0, 1.0, 3.0, 0.1, 0.1, 2)

    @pytest.mark.parametrize("order", [2, 4])
    def test_norm_additivity_exact(self, order, rng):
        geom = build_overset_1d(0.0, 1.0, 2.0, 3.0, 0.05, 0.05, order)
        for grid in (geom.grid_u, geom.grid_v):
            fields = [rng.normal(size=(blk.n, 2)) for blk in grid.blocks]
            total = grid.norm_sq(fields)
            parts = grid.outer_block.norm_sq(
                fields[1 if grid.overlap_side == "left" else 0]
            ) + grid.overlap_norm_sq(fields)
            assert abs(total - parts) <= 1e-12 * max(1.0, total)

    def test_reference_grid_alignment(self):
        geom = build_overset_1d(0.0, 1.0, 2.0, 3.0, 0.1, 0.1, 2)
        ref = geom.reference_grid()
        assert ref.n == 31
        assert ref.left == 0.0 and ref.right == 3.0


class TestOversetGeometry2D:
    def test_shared_interface_nodes(self):
        geom = build_overset_2d(0.5, 0.0, 1.0, 2.0, 3.0, 1.0, 0.05, 0.05, 0.1, 2)
        assert geom.grid_u.blocks[1].left == 1.0
        assert geom.grid_v.blocks[0].left == 1.0
        assert geom.yline.n == 10
        assert geom.n_overlap_points == 0

    def test_overlap_lattice_points_shared(self):
        geom = build_overset_2d(
            0.5, 0.0, 1.0, 2.0, 3.0, 1.0, 0.05, 0.025, 0.1, 2, overlap_point_spec="uniform 3x3"
        )
        assert geom.n_overlap_points == 9
        bu = geom.grid_u.overlap_block
        bv = geom.grid_v.overlap_block
        for iu, iv, j in geom.overlap_points:
            assert abs(bu.x[iu] - bv.x[iv]) <= 1e-12
            assert 0 < iu < bu.n - 1 and 0 < iv < bv.n - 1

    def test_none_points(self):
        geom = build_overset_2d(0.5, 0.0, 1.0, 2.0, 3.0, 1.0, 0.05, 0.05, 0.1, 2, "none")
        assert geom.n_overlap_points == 0

    def test_bad_a_prime_rejected(self):
        with pytest.raises(ValueError):
            build_overset_2d(1.0, 0.0, 1.0, 2.0, 3.0, 1.0, 0.05, 0.05, 0.1, 2)

    def test_misaligned_y_rejected(self):
        with pytest.raises(AlignmentError):
            build_overset_2d(0.5, 0.0, 1.0, 2.0, 3.0, 1.0, 0.05, 0.05, 0.3, 2)

    @pytest.mark.parametrize("order", [2, 4])
    def test_divergence_theorem_per_block(self, order, rng):
        # tensor-product SBP: 1' (Hx x Hy) (Dx qx + Dy qy) = x-boundary line sums
        geom = build_overset_2d(0.3, 0.0, 1.0, 2.0, 3.0, 1.0, 0.05, 0.05, 0.1, order)
        yline = geom.yline
        for blk in (*geom.grid_u.blocks, *geom.grid_v.blocks):
            qx = rng.normal(size=(blk.n, yline.n))
            qy = rng.normal(size=(blk.n, yline.n))
            div = blk.D @ qx + qy @ yline.D.T
            total = blk.H @ (div @ yline.H)
            boundary = (qx[-1] - qx[0]) @ yline.H
            assert abs(total - boundary) <= 1e-11 * max(1.0, np.abs(qx).max())


class TestTransfer:
    def test_exact_copy_on_nodes(self, rng):
        x = np.linspace(0.0, 1.0, 11)
        vals = rng.normal(size=(11, 2))
        out = transfer(x, vals, [0.3, 0.7])
        np.testing.assert_array_equal(out[0], vals[3])
        np.testing.assert_array_equal(out[1], vals[7])

    def test_cubic_midpoint_exact_width5(self):
        x = np.linspace(0.0, 1.0, 21)
        vals = x**3 - 2 * x**2 + 0.5
        out = transfer(x, vals, 0.525, width=5)
        assert abs(out - (0.525**3 - 2 * 0.525**2 + 0.5)) <= 1e-13

    def test_interpolation_convergence(self):
        errs = []
        for n in (21, 41):
            x = np.linspace(0.0, 1.0, n)
            vals = np.sin(2 * np.pi * x)
            target = x[:-1] + 0.5 * (x[1] - x[0])
            out = transfer(x, vals, target, width=5)
            errs.append(np.abs(out - np.sin(2 * np.pi * target)).max())
        assert np.log2(errs[0] / errs[1]) > 3.5

    def test_outside_rejected(self):
        x = np.linspace(0.0, 1.0, 11)
        with pytest.raises(ValueError):
            transfer(x, x, 1.2)
