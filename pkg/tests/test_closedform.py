import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mimolab import closedform as cf, deteq
from mimolab.channel import sample_los
from mimolab.errors import ConfigError
from mimolab.scenario import ScenarioConfig, sample_large_scale


def matched(N=128, kappa=2.0, alpha=0.1, L=4, K=10, phi_design=None, seed=0):
    """Closed-form parameters and the explicit orthogonal-LoS instance they describe."""
    cfg = ScenarioConfig(L=L, K=K, N=N, kappa=kappa, alpha=alpha, phi_design=phi_design)
    table = sample_large_scale(cfg)
    los = sample_los(table, np.random.default_rng(seed), orthogonal=True)
    return cf.SimplifiedParams.from_config(cfg), table, los


class TestCubic:
    def test_coefficient_signs_and_unique_positive_root(self):
        p, _, _ = matched()
        coef = cf.cubic_coefficients(p)
        assert coef[0] > 0 and coef[1] > 0 and coef[3] < 0
        roots = np.roots(coef)
        pos = [r.real for r in roots if abs(r.imag) < 1e-12 and r.real > 0]
        assert len(pos) == 1
        assert cf.solve_cubic_delta(p) == pytest.approx(pos[0], rel=1e-12)

    def test_cardano_three_real_roots(self):
        # (x - 1)(x - 2)(x + 3) = x^3 - 7x + 6
        assert sorted(cf._cardano_real_roots(1.0, 0.0, -7.0, 6.0)) == pytest.approx([-3, 1, 2])
        assert cf._cardano_real_roots(2.0, 0.0, 0.0, -16.0) == pytest.approx([2.0])

    @pytest.mark.parametrize("kappa", [0.0, 0.5, 4.0, 10.0])
    def test_matches_general_fixed_point(self, kappa):
        p, table, los = matched(kappa=kappa)
        st_ = deteq.solve_cell(table, los, 0)
        assert cf.solve_cubic_delta(p) == pytest.approx(st_.delta_tilde, rel=1e-10)

    @settings(max_examples=60, deadline=None)
    @given(L=st.integers(1, 7), K=st.integers(1, 20), ratio=st.floats(1.0, 50.0),
           alpha=st.floats(0.01, 1.0), kappa=st.floats(0.0, 20.0), rho_tr=st.floats(0.1, 100.0))
    def test_root_property(self, L, K, ratio, alpha, kappa, rho_tr):
        p = cf.SimplifiedParams(L=L, K=K, N=max(K, int(K * ratio)), alpha=alpha, kappa=kappa,
                                rho_tr=rho_tr, rho=10.0, phi_design=1e-3)
        x = cf.solve_cubic_delta(p)
        coef = cf.cubic_coefficients(p)
        assert x > 0
        assert abs(np.polyval(coef, x)) <= 1e-12 * np.polyval(np.abs(coef), x)


class TestSmmseClosedForm:
    @pytest.mark.parametrize("kappa", [0.0, 1.0, 4.0])
    def test_intermediates_match_general_pipeline(self, kappa):
        p, table, los = matched(kappa=kappa, N=200)
        q = cf.cor6_quantities(p)
        s = deteq.solve_cell(table, los, 0)
        assert q.delta == pytest.approx(s.delta, rel=1e-10)
        assert q.vartheta == pytest.approx(s.fp.trT2, rel=1e-10)
        assert q.vartheta_tilde == pytest.approx(s.theta_tilde, rel=1e-10)
        assert q.F == pytest.approx(s.F, rel=1e-9, abs=1e-15)
        assert q.Delta == pytest.approx(s.Delta, rel=1e-10)
        assert q.psi_bar == pytest.approx(s.psi_bar, rel=1e-9)
        assert q.t == pytest.approx(s.Tt_diag[0], rel=1e-10)

    def test_two_noncoherent_forms_agree(self):
        for kappa in (0.0, 0.3, 2.0, 8.0):
            for alpha in (0.05, 0.5):
                p, _, _ = matched(kappa=kappa, alpha=alpha)
                assert cf.s_over_psi(p, expanded=True) == pytest.approx(
                    cf.s_over_psi(p, expanded=False), rel=1e-11)

    @pytest.mark.parametrize("scheme", ["SMMSE", "RZF"])
    def test_sinr_equals_general_pipeline(self, scheme):
        for N in (64, 256):
            p, table, los = matched(N=N, kappa=3.0)
            a = cf.sinr_mmse_rzf_simplified(p)
            b = deteq.deteq_report(scheme, table, los).sinr
            np.testing.assert_allclose(b, a, rtol=1e-9)

    def test_decomposition_sums_to_inverse_sinr(self):
        p, _, _ = matched()
        sinr, terms = cf.sinr_mmse_rzf_simplified(p, decompose=True)
        total = terms["noise"] + terms["noncoherent"] + terms["pilot_contamination"]
        assert total == pytest.approx(1 / sinr, rel=1e-13)


class TestMrClosedForm:
    def test_rayleigh_hand_formula(self):
        L, K, N, a, rtr, rho = 4, 10, 100, 0.1, 4.0, 10.0
        phi = 1.0 / (1 / rtr + 1 + a * (L - 1))
        Lbar = 1 + a * (L - 1)
        expected = 1.0 / (1 / (N * rho * phi) + K * Lbar / (N * phi) + a ** 2 * (L - 1))
        p = cf.SimplifiedParams(L=L, K=K, N=N, alpha=a, kappa=0.0, rho_tr=rtr, rho=rho)
        assert cf.sinr_mr_simplified(p) == pytest.approx(expected, rel=1e-13)

    def test_decomposition_sums_to_inverse_sinr(self):
        p, _, _ = matched(kappa=2.0)
        sinr, terms = cf.sinr_mr_simplified(p, decompose=True)
        assert sum(terms.values()) == pytest.approx(1 / sinr, rel=1e-13)

    def test_gap_to_general_pipeline_is_order_one_over_N(self):
        gaps = []
        for N in (64, 128, 256, 512):
            p, table, los = matched(N=N, kappa=1.0)
            gaps.append(np.max(np.abs(1 / cf.sinr_mr_simplified(p) - 1 / deteq.sinr_mrc(table, los).sinr)))
        assert all(g0 / g1 > 1.8 for g0, g1 in zip(gaps, gaps[1:]))


class TestAsymptote:
    def test_rayleigh_value(self):
        p, _, _ = matched(kappa=0.0)
        g, r = cf.gamma_infinity(p)
        assert g == pytest.approx(1 / (0.01 * 3))
        assert r == pytest.approx(math.log2(1 + 100 / 3))

    def test_single_cell_unbounded(self):
        p, _, _ = matched(L=1)
        assert cf.gamma_infinity(p) == (math.inf, math.inf)

    def test_rates_approach_asymptote(self):
        for kappa in (0.0, 4.0):
            p, _, _ = matched(kappa=kappa)
            _, r_inf = cf.gamma_infinity(p)
            rates = [cf.rate_closedform(s, p.replace(N=n)) for s in ("MR", "SMMSE") for n in (10 ** 6, 10 ** 8)]
            assert all(r < r_inf for r in rates)
            assert rates[1] == pytest.approx(r_inf, rel=1e-3)
            assert rates[3] == pytest.approx(r_inf, rel=1e-3)


class TestDimensioning:
    def test_minimality(self):
        p = cf.SimplifiedParams(L=4, K=10, N=10, alpha=0.3, kappa=1.0, rho_tr=10 ** 0.6, rho=10.0)
        n = cf.antennas_needed(2.0, "MRC", p)
        assert cf.rate_closedform("MRC", p.replace(N=n)) >= 2.0
        assert cf.rate_closedform("MRC", p.replace(N=n - 1)) < 2.0

    def test_monotone_in_kappa(self):
        needed = []
        for kappa in (0.0, 0.5, 1.0, 2.0, 4.0, 10.0):
            p = cf.SimplifiedParams(L=4, K=10, N=10, alpha=0.3, kappa=kappa, rho_tr=10 ** 0.6, rho=10.0)
            needed.append(cf.antennas_needed(2.0, "MRC", p))
        assert all(a >= b for a, b in zip(needed, needed[1:]))

    def test_infeasible_reports_limit(self):
        p = cf.SimplifiedParams(L=4, K=10, N=10, alpha=0.3, kappa=0.0, rho_tr=4.0, rho=10.0)
        with pytest.raises(ConfigError, match="R_inf"):
            cf.antennas_needed(5.0, "MRC", p)

    def test_already_met_at_K(self):
        p = cf.SimplifiedParams(L=1, K=2, N=2, alpha=0.1, kappa=0.0, rho_tr=100.0, rho=100.0)
        assert cf.antennas_needed(0.1, "MRC", p) == 2

    def test_unknown_scheme(self):
        p, _, _ = matched()
        with pytest.raises(ConfigError):
            cf.rate_closedform("ZF", p)
