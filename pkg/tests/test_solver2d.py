"""Channel solvers: dimensional reduction, exact ledgers, overlap penalties."""

import numpy as np
import pytest

from oversetpde.coupling import make_overlap_coupling, make_upwind_coupling
from oversetpde.diagnostics import (
    composite_energy,
    conservation_residual,
    energy_ledger,
    energy_rate,
    equivalence_error,
    overlap_penalty_sum,
)
from oversetpde.exact import exact_plane_wave_2d, gaussian
from oversetpde.geometry import build_overset_2d
from oversetpde.linalg import normal_matrix
from oversetpde.sbp import build_grid_1d, build_periodic_line
from oversetpde.solver1d import make_problem_1d, run_pair, run_simulation
from oversetpde.solver2d import Problem2D

from conftest import random_symmetric

A1 = np.array([[1.0, 2.0], [2.0, 1.0]])
A2 = np.array([[1.0, 0.0], [0.0, -1.0]])


def channel_couplings(a1, a2, eta):
    cb = make_upwind_coupling(normal_matrix((a1, a2), (-1.0, 0.0)), -eta)
    cc = make_upwind_coupling(normal_matrix((a1, a2), (1.0, 0.0)), 1.0 - eta)
    return cb, cc


def channel_problem(eta=0.5, hx=0.05, hy=0.1, order=2, points="none", sigma_m=0.3):
    geom = build_overset_2d(0.5, 0.0, 1.0, 2.0, 3.0, 1.0, hx, hx, hy, order, points)
    cb, cc = channel_couplings(A1, A2, eta)
    overlap = None
    if geom.n_overlap_points:
        overlap = make_overlap_coupling(eta, sigma_m * np.eye(2))
    return Problem2D("penalty", (A1, A2), geom, (cb, cc), overlap=overlap, eta=eta)


class TestConstruction:
    def test_requires_certified(self):
        geom = build_overset_2d(0.5, 0.0, 1.0, 2.0, 3.0, 1.0, 0.05, 0.05, 0.1, 2)
        cb, cc = channel_couplings(A1, A2, 0.5)
        bad = make_upwind_coupling(normal_matrix((A1, A2), (-1.0, 0.0)), +0.5)
        with pytest.raises(ValueError):
            Problem2D("penalty", (A1, A2), geom, (bad, cc), eta=0.5)

    def test_one_d_beta_sign_fails_certification(self):
        # regression pinning the sign convention: at the left interface line
        # the outward normal is -x, so beta = -eta; the 1D sign +eta fails
        # for normal matrices with eigenvalues of both signs
        an_b = normal_matrix((A1, A2), (-1.0, 0.0))
        good = make_upwind_coupling(an_b, -0.5)
        assert good.certified
        from oversetpde.coupling import check_interface_coupling

        wrong = check_interface_coupling(an_b, +0.5, good.sigma_u, good.sigma_v)
        assert not wrong.passed

    def test_overlap_points_need_coupling(self):
        geom = build_overset_2d(0.5, 0.0, 1.0, 2.0, 3.0, 1.0, 0.05, 0.05, 0.1, 2, "uniform 2x2")
        cb, cc = channel_couplings(A1, A2, 0.5)
        with pytest.raises(ValueError, match="overlap"):
            Problem2D("penalty", (A1, A2), geom, (cb, cc), eta=0.5)


class TestDimensionalReduction:
    def test_y_independent_matches_1d_rows_exactly(self):
        from oversetpde.geometry import build_overset_1d

        eta = 0.5
        geom2 = build_overset_2d(0.0, 0.0, 1.0, 2.0, 3.0, 1.0, 0.05, 0.05, 0.25, 2)
        cb2, cc2 = channel_couplings(A1, A2, eta)
        prob2 = Problem2D("penalty", (A1, A2), geom2, (cb2, cc2), eta=eta)
        geom1 = build_overset_1d(0.0, 1.0, 2.0, 3.0, 0.05, 0.05, 2)
        cb = make_upwind_coupling(A1, eta)
        cc = make_upwind_coupling(A1, 1.0 - eta)
        prob1 = make_problem_1d("penalty", A1, geom1, (cb, cc), eta=eta)
        # A2 != 0 but y-independent data: the y operator contributes nothing
        g = gaussian(1.2, 0.2)
        w = np.array([1.0, -0.3])
        y2 = prob2.initial_state(lambda x, y: np.einsum("ij,n->ijn", g(x) * np.ones_like(y), w))
        y1 = prob1.initial_state(lambda x: np.multiply.outer(g(x), w))
        dt = min(prob1.dt_stable(0.4), prob2.dt_stable(0.4))
        yT2, _ = run_simulation(prob2, y2, 0.8, dt=dt)
        yT1, _ = run_simulation(prob1, y1, 0.8, dt=dt)
        for f2, f1 in zip(prob2.fields(yT2), prob1.fields(yT1)):
            assert np.abs(f2 - f1[:, None, :]).max() <= 1e-12

    def test_u_grid_left_boundary_differs_from_channel_edge(self):
        prob = channel_problem()
        assert prob.blocks[0].left == 0.5  # a_prime, interior to [a, d]


class TestExactLedgers:
    @pytest.mark.parametrize("eta", [0.25, 0.5])
    @pytest.mark.parametrize("points", ["none", "uniform 3x3"])
    def test_ledger_and_conservation_on_random_states(self, rng, eta, points):
        prob = channel_problem(eta=eta, points=points)
        for _ in range(3):
            y = rng.normal(size=prob.layout.size)
            led = energy_ledger(prob, y)
            scale = sum(abs(led[k] or 0.0) for k in ("dEdt", "P_b", "P_c", "D_a", "D_d", "D_glue")) + 1.0
            assert abs(led["closure"]) <= 1e-13 * scale
            residual, flux_in, flux_out = conservation_residual(prob, y)
            fscale = max(1.0, np.abs(flux_in).max(), np.abs(flux_out).max())
            assert np.abs(residual).max() <= 1e-12 * fscale

    def test_overlap_penalty_is_pure_extra_dissipation(self, rng):
        # same state: the overlap-point terms change dE/dt by exactly -mean(P_m)
        base = channel_problem(points="none")
        with_pts = channel_problem(points="uniform 3x3", sigma_m=0.4)
        y = rng.normal(size=base.layout.size)
        rate0 = energy_rate(base, y, base.rhs(0.0, y))
        rate1 = energy_rate(with_pts, y, with_pts.rhs(0.0, y))
        p_overlap = overlap_penalty_sum(with_pts, y)
        assert p_overlap >= -1e-12
        assert abs((rate1 - rate0) + p_overlap) <= 1e-12 * max(1.0, abs(rate0))

    def test_identical_fields_have_zero_overlap_penalty(self):
        prob = channel_problem(points="uniform 3x3")
        g = gaussian(1.5, 0.3)
        y = prob.initial_state(lambda x, yy: np.einsum("ij,n->ijn", g(x) * np.ones_like(yy), [1.0, 0.2]))
        assert abs(overlap_penalty_sum(prob, y)) <= 1e-15


class TestEnergyAndConservationRuns:
    def test_noncommuting_pair_decays(self):
        assert np.abs(A1 @ A2 - A2 @ A1).max() > 0
        prob = channel_problem(hx=0.05, hy=0.1, order=4)
        g = gaussian(1.5, 0.25)

        def ic(x, y):
            return np.einsum("ij,n->ijn", g(x) * (1 + 0.3 * np.cos(2 * np.pi * y)), [1.0, 0.4])

        y0 = prob.initial_state(ic)
        e0 = composite_energy(prob, y0)
        worst = [-np.inf]
        worst_res = [0.0]

        def recorder(step, t, y):
            res, fin, fout = conservation_residual(prob, y)
            worst_res[0] = max(worst_res[0], np.abs(res).max())

        def monitor(t, y):
            worst[0] = max(worst[0], energy_rate(prob, y))

        yT, _ = run_simulation(prob, y0, 0.5, cfl=0.4, recorder=recorder, stage_monitor=monitor)
        assert worst[0] <= 1e-10 * e0
        assert worst_res[0] <= 1e-10 * max(1.0, e0)
        assert composite_energy(prob, yT) <= e0 * (1.0 + 1e-10)


class TestSingleDomain2D:
    def test_plane_wave_along_x_matches_oracle(self, rng):
        a1 = random_symmetric(rng, 2)
        a2 = random_symmetric(rng, 2)
        block = build_grid_1d((0.0, 3.0), 151, 4)
        yline = build_periodic_line(1.0, 10, 4)
        prob = Problem2D("single", (a1, a2), block, yline=yline)
        g = gaussian(1.5, 0.2)
        w = rng.normal(size=2)
        khat = (1.0, 0.0)

        def ic(x, y):
            return exact_plane_wave_2d(x, y, 0.0, a1, a2, khat, g, w)

        y0 = prob.initial_state(ic)
        t_final = 0.25 / max(np.abs(np.linalg.eigvalsh(a1)).max(), 1.0)
        yT, t = run_simulation(prob, y0, t_final, cfl=0.4)
        (field,) = prob.fields(yT)
        xg, yg = np.meshgrid(block.x, yline.x, indexing="ij")
        exact = exact_plane_wave_2d(xg, yg, t, a1, a2, khat, g, w)
        err2 = ((field - exact) ** 2).sum(-1)
        err = np.sqrt(block.H @ (err2 @ yline.H))
        assert err <= 5e-4

    def test_y_independent_reduces_to_1d(self, rng):
        a1 = random_symmetric(rng, 2)
        a2 = random_symmetric(rng, 2)
        block = build_grid_1d((0.0, 3.0), 61, 2)
        yline = build_periodic_line(1.0, 8, 2)
        prob2 = Problem2D("single", (a1, a2), block, yline=yline)
        prob1 = make_problem_1d("single", a1, block)
        g = gaussian(1.5, 0.3)
        w = rng.normal(size=2)
        y2 = prob2.initial_state(lambda x, y: np.multiply.outer(g(x) * np.ones_like(y), w))
        y1 = prob1.initial_state(lambda x: np.multiply.outer(g(x), w))
        dt = min(prob1.dt_stable(0.4), prob2.dt_stable(0.4))
        yT2, _ = run_simulation(prob2, y2, 0.5, dt=dt)
        yT1, _ = run_simulation(prob1, y1, 0.5, dt=dt)
        (f2,) = prob2.fields(yT2)
        (f1,) = prob1.fields(yT1)
        assert np.abs(f2 - f1[:, None, :]).max() <= 1e-12


class TestEquivalence2D:
    def test_overset_matches_reference_run(self):
        eta = 0.5
        prob = channel_problem(eta=eta, hx=0.025, hy=0.1)
        block = build_grid_1d((0.0, 3.0), 121, 2)
        yline = build_periodic_line(1.0, 10, 2)
        ref = Problem2D("single", (A1, A2), block, yline=yline)
        g = gaussian(1.5, 0.2)

        def ic(x, y):
            return np.einsum("ij,n->ijn", g(x) * (1 + 0.2 * np.cos(2 * np.pi * y)), [1.0, -0.4])

        y0 = prob.initial_state(ic)
        r0 = ref.initial_state(ic)
        dt = min(prob.dt_stable(0.4), ref.dt_stable(0.4))
        ys, _ = run_pair([prob, ref], [y0, r0], 0.3, dt)
        err_u, err_v = equivalence_error(prob, ys[0], ref, ys[1])
        assert err_u <= 2e-3 and err_v <= 2e-3
