import numpy as np
import pytest

from mimolab import deteq, montecarlo as mc
from mimolab.channel import build_los, complex_normal, sample_los
from mimolab.errors import ConfigError, ConvergenceError, MisuseError, RegimeError
from mimolab.scenario import ScenarioConfig, build_table, sample_large_scale

from conftest import random_instance


class TestFixedPoint:
    def test_golden_ratio_scalar_case(self):
        # N = K = 1, no LoS, lam = phi = 1:  delta = (1 + delta) / (2 + delta)
        fp = deteq.solve_fixed_point(1.0, [1.0], gram=np.zeros((1, 1)), N=1)
        assert fp.delta == pytest.approx((np.sqrt(5) - 1) / 2, rel=1e-11)
        assert fp.delta_tilde == pytest.approx(1 / (1 + fp.delta), rel=1e-11)

    def test_traces_match_explicit_T(self, rng):
        table, los = random_instance(rng, L=1, K=6, N=20)
        fp = deteq.solve_fixed_point(table.lam[0], table.phi[0, 0], los.hbar[0])
        T = fp.T_matrix(los.hbar[0])
        assert np.trace(T).real / 20 == pytest.approx(fp.delta, rel=1e-11)
        assert np.trace(T @ T).real / 20 == pytest.approx(fp.trT2, rel=1e-11)
        # T~ from its definition, and delta~ = (1/N) tr(Phi T~)
        Phi = np.diag(table.phi[0, 0])
        G = los.gram(0)
        Tt = np.linalg.inv(table.lam[0] * (np.eye(6) + fp.delta * Phi) + G / (1 + fp.delta_tilde))
        np.testing.assert_allclose(fp.T_tilde, Tt, rtol=1e-10, atol=1e-14)
        assert np.trace(Phi @ Tt).real / 20 == pytest.approx(fp.delta_tilde, rel=1e-10)

    def test_residual_below_tolerance(self, rng):
        for _ in range(20):
            table, los = random_instance(rng, L=2, K=5, N=int(rng.integers(5, 80)))
            for st in deteq.solve_all(table, los):
                assert st.fp.residual < 1e-12

    def test_delta_decreasing_in_lambda(self, rng):
        table, los = random_instance(rng, L=1, K=8, N=32)
        deltas = [deteq.solve_fixed_point(lam, table.phi[0, 0], los.hbar[0]).delta
                  for lam in (0.01, 0.1, 1.0, 10.0)]
        assert all(a > b for a, b in zip(deltas, deltas[1:]))

    def test_resolvent_monte_carlo(self, rng):
        # E (1/N) tr Q and E [Q~]_kk against delta and [T~]_kk
        table, los = random_instance(rng, L=1, K=24, N=96, phi_design=0.02)
        H0, phi, lam = los.hbar[0], table.phi[0, 0], table.lam[0]
        fp = deteq.solve_fixed_point(lam, phi, H0)
        tr, qd = [], []
        for _ in range(150):
            H = H0 + np.sqrt(phi) * complex_normal(rng, H0.shape)
            w = np.linalg.eigvalsh(H.conj().T @ H / 96)
            tr.append((np.sum(1 / (w + lam)) + (96 - 24) / lam) / 96)
            qd.append(np.real(np.diag(np.linalg.inv(H.conj().T @ H / 96 + lam * np.eye(24)))))
        assert np.mean(tr) == pytest.approx(fp.delta, rel=0.01)
        np.testing.assert_allclose(np.mean(qd, axis=0), np.real(np.diag(fp.T_tilde)), rtol=0.03)

    def test_errors(self):
        with pytest.raises(RegimeError):
            deteq.solve_fixed_point(0.0, [1.0], gram=np.zeros((1, 1)), N=1)
        with pytest.raises(ConvergenceError) as exc:
            deteq.solve_fixed_point(1e-4, np.ones(4), gram=np.eye(4), N=8, max_iter=2)
        assert exc.value.iterations == 2
        with pytest.raises(MisuseError):
            deteq.solve_fixed_point(1.0, [1.0])


class TestAuxiliaries:
    def test_no_los_gives_zero_F(self, rng):
        table, los = random_instance(rng, kappa=0.0)
        for st in deteq.solve_all(table, los):
            assert st.F == 0.0
            np.testing.assert_allclose(st.M2, 0.0)

    def test_small_load_limits(self, rng):
        table, los = random_instance(rng, L=2, K=4, N=40_000)
        for st in deteq.solve_all(table, los):
            assert st.F < 1e-3
            assert st.Delta == pytest.approx(1.0, abs=1e-3)
            assert st.nu_bar * st.lam ** 2 == pytest.approx(1.0, abs=1e-3)

    def test_delta_positive_on_random_instances(self, rng):
        for _ in range(20):
            table, los = random_instance(rng, K=6, N=int(rng.integers(6, 100)))
            for st in deteq.solve_all(table, los):
                assert 0 < st.Delta <= 1 and st.psi_bar > 0


class TestSchemes:
    def test_report_shapes_and_rates(self, small_instance):
        table, los = small_instance
        for s in ("MRC", "SMMSE", "MRT", "RZF"):
            rep = deteq.deteq_report(s, table, los)
            assert rep.sinr.shape == (3, 4) and np.all(rep.sinr > 0)
            np.testing.assert_allclose(rep.rate, np.log2(1 + rep.sinr))
            assert rep.provenance == "deteq"
        with pytest.raises(MisuseError):
            deteq.deteq_report("ZF", table, los)

    def test_smmse_needs_positive_design(self, rng):
        table, los = random_instance(rng, phi_design=0.0)
        with pytest.raises(ConfigError):
            deteq.sinr_smmse(table, los)
        deteq.sinr_rzf(table, los)        # RZF accepts zero

    def test_printed_self_term_is_order_one_over_N(self):
        gaps = []
        for N in (64, 128, 256, 512):
            cfg = ScenarioConfig(N=N, kappa=1.0)
            t = sample_large_scale(cfg)
            los = sample_los(t, np.random.default_rng(0), orthogonal=True)
            a = deteq.sinr_mrc(t, los).sinr
            b = deteq.sinr_mrc(t, los, exact_self=False).sinr
            gaps.append(np.max(np.abs(1 / a - 1 / b)))
        ratios = np.array(gaps[:-1]) / np.array(gaps[1:])
        assert np.all(ratios > 1.9)

    def test_single_ue_smmse_matches_mrc(self):
        # with one UE the S-MMSE combiner is a scaled MRC combiner
        t = build_table(np.ones((1, 1, 1)), 2.0, 256, 4.0, 10.0, 10.0, 0.01)
        los = sample_los(t, np.random.default_rng(3), orthogonal=True)
        a = deteq.sinr_smmse(t, los).sinr
        b = deteq.sinr_mrc(t, los).sinr
        assert a[0, 0] == pytest.approx(b[0, 0], rel=5e-3)

    def test_large_regularization_approaches_mr(self):
        gaps = []
        for N in (64, 256, 1024):
            table, los = random_instance(np.random.default_rng(1), L=3, K=8, N=N, phi_design=1e6)
            a = deteq.sinr_smmse(table, los).sinr
            b = deteq.sinr_mrc(table, los, exact_self=False).sinr
            gaps.append(np.max(np.abs(a / b - 1)))
        assert gaps[0] > gaps[1] > gaps[2]

    def test_rzf_beats_mrt_with_strong_los(self):
        cfg = ScenarioConfig(N=128, kappa=4.0)
        t = sample_large_scale(cfg)
        los = sample_los(t, np.random.default_rng(0), orthogonal=False)
        assert deteq.sinr_rzf(t, los).mean_rate > deteq.sinr_mrt(t, los).mean_rate

    def test_mismatched_los(self, small_instance):
        table, los = small_instance
        with pytest.raises(MisuseError):
            deteq.sinr_mrc(table.with_N(16), los)


class TestLimits:
    @pytest.mark.parametrize("scheme", ["MRC", "SMMSE", "MRT", "RZF"])
    def test_full_deteq_approaches_limit(self, scheme, rng):
        # the residual 1/N terms scale with the limit SINR itself, so check the
        # gap shrinks by ~2x per doubling and is small in rate at large N
        gaps = []
        for N in (2 ** 12, 2 ** 13, 2 ** 14):
            t = sample_large_scale(ScenarioConfig(N=N, kappa=1.0))
            los = sample_los(t, np.random.default_rng(0), orthogonal=False)
            full = deteq.deteq_report(scheme, t, los)
            lim = deteq.sinr_limit(scheme, t, los)
            gaps.append(np.max(np.abs(1 / full.sinr - 1 / lim.sinr)))
        assert gaps[0] / gaps[1] > 1.8 and gaps[1] / gaps[2] > 1.8
        np.testing.assert_allclose(full.rate, lim.rate, rtol=0.02)

    def test_favorable_equals_general_on_orthogonal_los(self, rng):
        table, los = random_instance(rng, L=2, K=4, N=64, orthogonal=True)
        for s in ("MRC", "SMMSE", "MRT", "RZF"):
            a = deteq.sinr_limit(s, table, los).sinr
            b = deteq.sinr_limit(s, table, los, regime="kn_zero_favorable").sinr
            np.testing.assert_allclose(a, b, rtol=1e-9)

    def test_favorable_rejects_correlated_los(self, rng):
        table, los = random_instance(rng, L=2, K=4, N=64, orthogonal=False)
        with pytest.raises(MisuseError):
            deteq.sinr_limit("MRC", table, los, regime="kn_zero_favorable")
        with pytest.raises(MisuseError):
            deteq.sinr_limit("MRC", table, los, regime="n_only")
