"""Composite energy, parasitic terms, equivalence errors, record series."""

import numpy as np
import pytest

from oversetpde.coupling import make_upwind_coupling
from oversetpde.diagnostics import (
    DiagnosticsSeries,
    collect,
    composite_energy,
    energy_breakdown,
    energy_rate,
    equivalence_error,
    parasitic_terms,
    weighted_total,
)
from oversetpde.exact import gaussian
from oversetpde.geometry import build_overset_1d
from oversetpde.linalg import char_transform, hyperbolic_system
from oversetpde.solver1d import Problem1D, make_problem_1d

from conftest import random_symmetric

A22 = np.array([[1.0, 2.0], [2.0, 1.0]])


def make_char_problem(order=2, h=0.1, a=A22):
    geom = build_overset_1d(0.0, 1.0, 2.0, 3.0, h, h, order)
    return make_problem_1d("system-char", a, geom)


class TestCompositeEnergy:
    @pytest.mark.parametrize("eta", [0.25, 0.5, 0.9])
    def test_constant_state_counts_domain_once(self, eta):
        # |u| = |v| = c on (0,1,2,3): E = c^2 * |[0,3]| for any eta
        prob = make_char_problem()
        c = 1.7
        y = prob.initial_state(lambda x: np.full((x.size, 2), c / np.sqrt(2.0)))
        assert composite_energy(prob, y, eta) == pytest.approx(3.0 * c**2, rel=1e-13)

    def test_zero_state(self):
        prob = make_char_problem()
        assert composite_energy(prob, np.zeros(prob.layout.size)) == 0.0

    def test_lower_bounds_on_each_grid(self, rng):
        prob = make_char_problem()
        for _ in range(20):
            y = rng.normal(size=prob.layout.size)
            for eta in (0.3, 0.5, 0.8):
                eb = energy_breakdown(prob, y, eta)
                assert eb["E"] >= (1.0 - eta) * eb["normU"] ** 2 - 1e-12
                assert eb["E"] >= eta * eb["normV"] ** 2 - 1e-12
                assert eb["E"] >= -1e-12

    def test_rejects_bad_eta(self, rng):
        prob = make_char_problem()
        with pytest.raises(ValueError):
            composite_energy(prob, np.zeros(prob.layout.size), eta=1.5)


class TestEnergyRate:
    def test_zero_state_zero_rate(self):
        prob = make_char_problem()
        assert energy_rate(prob, np.zeros(prob.layout.size)) == 0.0

    def test_matches_finite_difference_of_energy(self, rng):
        # sanity: the exact rate approximates (E(y + s*ydot) - E(y - s*ydot)) / 2s
        prob = make_char_problem()
        y = rng.normal(size=prob.layout.size)
        ydot = prob.rhs(0.0, y)
        s = 1e-6
        fd = (composite_energy(prob, y + s * ydot) - composite_energy(prob, y - s * ydot)) / (2 * s)
        assert energy_rate(prob, y, ydot) == pytest.approx(fd, rel=1e-6)


class TestParasiticTerms:
    def test_zero_when_solutions_agree_at_interfaces(self):
        prob = make_char_problem()
        g = gaussian(1.5, 0.3)
        y = prob.initial_state(lambda x: np.multiply.outer(g(x), [1.0, 0.5]))
        term_c, term_b = parasitic_terms(prob, y)
        assert abs(term_c) <= 1e-13 and abs(term_b) <= 1e-13

    def test_two_route_evaluation_agrees(self, rng):
        # perturb v at the right interface along an eigenvector of A+ and
        # compare the quadratic-form route with the characteristic route
        a = random_symmetric(rng, 3)
        prob = make_char_problem(a=a)
        sysm = prob.system
        y = prob.initial_state(lambda x: np.zeros((x.size, 3)))
        u0, u1, v0, v1 = prob.fields(y)
        u1[-1] = rng.normal(size=3)
        v1[0] = u1[-1] + 0.3 * sysm.decomp.P[:, 0]
        term_c, term_b = parasitic_terms(prob, y)
        wu = char_transform(u1[-1], sysm.decomp)
        wv = char_transform(v1[0], sysm.decomp)
        lam_plus = np.where(sysm.decomp.plus_mask(), sysm.decomp.lam, 0.0)
        expected_c = float(wv @ (lam_plus * wv) - wu @ (lam_plus * wu))
        assert term_c == pytest.approx(expected_c, abs=1e-12 * max(1.0, abs(expected_c)))

    def test_scalar_specialization(self):
        alpha = 1.3
        prob = make_problem_1d(
            "scalar-char", [[alpha]], build_overset_1d(0.0, 1.0, 2.0, 3.0, 0.1, 0.1, 2)
        )
        y = prob.initial_state(lambda x: np.ones((x.size, 1)))
        u0, u1, v0, v1 = prob.fields(y)
        u1[-1, 0] = 0.4
        v1[0, 0] = 0.9
        term_c, term_b = parasitic_terms(prob, y)
        assert term_b == 0.0
        assert term_c == pytest.approx(alpha * (0.9**2 - 0.4**2), rel=1e-13)


class TestEquivalenceError:
    def test_zero_when_reference_matches(self, rng):
        prob = make_char_problem()
        ref = Problem1D("single", prob.system, prob.geometry.reference_grid())
        g = gaussian(1.2, 0.3)
        profile = lambda x: np.multiply.outer(g(x), [1.0, -0.7])
        y = prob.initial_state(profile)
        r = ref.initial_state(profile)
        err_u, err_v = equivalence_error(prob, y, ref, r)
        assert err_u <= 1e-14 and err_v <= 1e-14

    def test_grid_mismatch_rejected(self, rng):
        prob = make_char_problem(h=0.1)
        geom = build_overset_1d(0.0, 1.0, 2.0, 3.0, 0.1, 0.1, 2)
        from oversetpde.sbp import build_grid_1d

        ref = Problem1D("single", prob.system, build_grid_1d((0.0, 3.0), 32, 2))
        with pytest.raises(ValueError):
            equivalence_error(prob, np.zeros(prob.layout.size), ref, np.zeros(32 * 2))


class TestWeightedTotal:
    def test_constant_state_counts_domain_once(self):
        prob = make_char_problem()
        y = prob.initial_state(lambda x: np.tile([2.0, -1.0], (x.size, 1)))
        total = weighted_total(prob, y)
        np.testing.assert_allclose(total, [6.0, -3.0], rtol=1e-13)


class TestDiagnosticsSeries:
    def test_requires_increasing_time(self):
        series = DiagnosticsSeries(2)
        series.append({"t": 0.0})
        with pytest.raises(ValueError):
            series.append({"t": 0.0})

    def test_collect_and_csv_schema(self, tmp_path):
        prob = make_char_problem()
        g = gaussian(1.5, 0.3)
        y = prob.initial_state(lambda x: np.multiply.outer(g(x), [1.0, 0.5]))
        series = DiagnosticsSeries(2)
        series.append(collect(prob, 0.0, y))
        path = tmp_path / "diag.csv"
        series.to_csv(path)
        header = path.read_text().splitlines()[0].split(",")
        assert header == [
            "t", "E", "dEdt", "normU", "normV", "normU_O", "normV_O",
            "P_b", "P_c", "P_overlap", "consResidual",
            "fluxIn_1", "fluxIn_2", "fluxOut_1", "fluxOut_2", "errU", "errV",
        ]

    def test_csv_deterministic(self, tmp_path, rng):
        prob = make_char_problem()
        y = rng.normal(size=prob.layout.size)
        paths = []
        for k in range(2):
            series = DiagnosticsSeries(2)
            series.append(collect(prob, 0.0, y))
            series.append(collect(prob, 0.5, y))
            p = tmp_path / f"d{k}.csv"
            series.to_csv(p)
            paths.append(p.read_bytes())
        assert paths[0] == paths[1]

    def test_penalty_collect_has_ledger_fields(self, rng):
        geom = build_overset_1d(0.0, 1.0, 2.0, 3.0, 0.1, 0.1, 2)
        cb = make_upwind_coupling(A22, 0.5)
        cc = make_upwind_coupling(A22, 0.5)
        prob = make_problem_1d("penalty", A22, geom, (cb, cc), eta=0.5)
        y = rng.normal(size=prob.layout.size)
        rec = collect(prob, 0.0, y)
        scale = abs(rec["dEdt"]) + 1.0
        assert abs(rec["ledger_closure"]) <= 1e-12 * scale
        assert rec["P_b"] is not None and rec["P_c"] is not None
        assert rec["D_glue"] >= -1e-13 * scale
