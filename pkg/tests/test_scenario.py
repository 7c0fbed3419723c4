import json
import math

import numpy as np
import pytest

from mimolab.errors import ConfigError
from mimolab.scenario import (ScenarioConfig, build_table, build_wraparound_geometry, db2lin,
                              lin2db, load_config, median_snr_db, pathloss_db,
                              sample_large_scale, save_config, wrap_distance)


class TestConversions:
    def test_db_roundtrip(self):
        assert db2lin(10.0) == pytest.approx(10.0)
        assert db2lin(6.0) == pytest.approx(3.981071705534972)
        x = np.array([0.01, 1.0, 250.0])
        np.testing.assert_allclose(db2lin(lin2db(x)), x, rtol=1e-14)

    def test_pathloss_values(self):
        # -148 - 37 log10(0.035)  and  -148 - 37 log10(1)
        assert pathloss_db(0.035) == pytest.approx(-94.130518, abs=1e-5)
        assert pathloss_db(1.0) == pytest.approx(-148.0)
        with pytest.raises(ConfigError):
            pathloss_db(0.0)

    def test_median_snr_calibration(self):
        cfg = ScenarioConfig.geometric()
        assert median_snr_db(cfg, 0.035) == pytest.approx(20.6, abs=0.1)
        corner = cfg.cell_side_km / math.sqrt(2.0)
        # reported corner value is about -5.8 dB; the model gives -5.45 dB
        assert median_snr_db(cfg, corner) == pytest.approx(-5.8, abs=0.5)


class TestConfig:
    def test_defaults_linear(self):
        cfg = ScenarioConfig()
        assert cfg.rho_tr == pytest.approx(10 ** 0.6)
        assert cfg.rho_ul == pytest.approx(10.0)
        assert cfg.phi_design_value == pytest.approx(1 / (cfg.N * 10.0))

    def test_geometric_uses_tx_power(self):
        cfg = ScenarioConfig.geometric()
        assert cfg.rho_dl == pytest.approx(10 ** 2.07)

    @pytest.mark.parametrize("bad", [dict(L=0), dict(K=-1), dict(N=2.5), dict(alpha=0.0),
                                     dict(alpha=1.5), dict(kappa=-0.1), dict(mode="torus"),
                                     dict(phi_design=-1.0), dict(kappa=float("inf"))])
    def test_rejects_invalid(self, bad):
        with pytest.raises(ConfigError):
            ScenarioConfig(**bad)

    def test_geometric_needs_square_cells(self):
        with pytest.raises(ConfigError):
            ScenarioConfig.geometric(L=3)
        with pytest.raises(ConfigError):
            ScenarioConfig.geometric(min_distance_km=0.2)

    def test_json_roundtrip(self, tmp_path):
        cfg = ScenarioConfig(L=9, K=3, kappa=2.5, phi_design=0.01)
        path = tmp_path / "c.json"
        save_config(cfg, path)
        assert load_config(path) == cfg

    def test_unknown_key_and_bad_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"L": 4, "cells": 3}))
        with pytest.raises(ConfigError, match="unknown"):
            load_config(p)
        p.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(p)


class TestBuildTable:
    def test_hand_computed_two_cells(self):
        # L=2, K=1, kappa=1 on UE of cell 0, rho_tr=4, intercell gain 0.1
        beta = np.array([[[1.0], [0.1]], [[0.1], [1.0]]])
        kappa = np.array([[1.0], [0.0]])
        t = build_table(beta, kappa, N=10, rho_tr=4.0, rho_ul=1.0, rho_dl=1.0, phi_design=0.0)
        # cell 0: d_00 = 0.5, d_01 = 0.1 ; denominator 0.25 + 0.6
        assert t.d[0, 0, 0] == pytest.approx(0.5)
        assert t.c[0, 0, 0] == pytest.approx(0.5 / 0.85)
        assert t.c[0, 1, 0] == pytest.approx(0.1 / 0.85)
        assert t.phi[0, 0, 0] == pytest.approx(0.25 / 0.85)
        assert t.phi[0, 1, 0] == pytest.approx(0.05 / 0.85)
        # xi_0 = 0.1 + (0.5 - 0.25/0.85)
        assert t.xi[0] == pytest.approx(0.1 + 0.5 - 0.25 / 0.85)
        assert t.lam[0] == pytest.approx(t.xi[0] / 10)
        # cell 1: d_11 = 1, denominator 0.25 + 1.1
        assert t.phi[1, 1, 0] == pytest.approx(1 / 1.35)

    def test_estimate_variance_bounded_by_gain(self, rng):
        beta = rng.uniform(0.01, 2.0, size=(4, 4, 5))
        t = build_table(beta, rng.uniform(0, 3, (4, 5)), 64, 3.0, 1.0, 1.0, 0.0)
        assert np.all(t.phi <= t.d + 1e-15)
        assert np.all((t.c > 0) & (t.c < 1))

    def test_lambda_positive(self):
        beta = np.ones((1, 1, 2))
        with pytest.raises(ConfigError):
            # noiseless pilots in a single cell: xi = 0, and no phi_design
            build_table(beta, 0.0, 8, math.inf, 1.0, 1.0, 0.0)
        with pytest.raises(ConfigError):
            build_table(beta, 0.0, 8, 1.0, 1.0, 1.0, -0.5)

    def test_with_N_rescales_lambda_only(self, small_instance):
        table, _ = small_instance
        t2 = table.with_N(2 * table.N)
        np.testing.assert_allclose(t2.phi, table.phi)
        np.testing.assert_allclose(t2.lam - t2.phi_design, (table.lam - table.phi_design) / 2)

    def test_simplified_structure(self):
        cfg = ScenarioConfig(L=4, K=10, alpha=0.1, kappa=4)
        t = sample_large_scale(cfg)
        assert t.beta.shape == (4, 4, 10)
        np.testing.assert_allclose(t.own(t.d), 0.2)
        assert t.d[0, 1, 0] == pytest.approx(0.1)


class TestGeometry:
    def test_torus_bounds_and_min_distance(self, rng):
        cfg = ScenarioConfig.geometric(L=9, K=20)
        geo = build_wraparound_geometry(cfg, rng)
        width = 3 * cfg.cell_side_km
        assert geo.width == pytest.approx(width)
        assert np.all(geo.distances <= width / math.sqrt(2) + 1e-12)
        idx = np.arange(9)
        own = geo.distances[idx, idx, :]
        assert np.all(own >= cfg.min_distance_km)
        # every UE lies in its own square cell
        off = np.abs(geo.ue_pos - geo.bs_pos[:, None, :])
        assert np.all(off <= cfg.cell_side_km / 2 + 1e-12)

    def test_wrap_distance_images(self):
        assert wrap_distance([0.05, 0.05], [0.45, 0.45], 0.5) == pytest.approx(math.hypot(0.1, 0.1))
        assert wrap_distance([0.1, 0.2], [0.1, 0.2], 0.5) == 0.0

    def test_fixed_positions(self):
        cfg = ScenarioConfig.geometric(L=4, K=1)
        ue = np.array([[[0.125, 0.2]], [[0.375, 0.125]], [[0.125, 0.375]], [[0.375, 0.375]]])
        geo = build_wraparound_geometry(cfg, ue_positions=ue)
        assert geo.distance(0, 0, 0) == pytest.approx(0.075)
        # UE of cell 1 seen from BS 0: 0.25 km apart on the torus
        assert geo.distance(0, 1, 0) == pytest.approx(0.25)

    def test_shadowing_statistics(self):
        cfg = ScenarioConfig.geometric(L=4, K=10, shadow_std_db=10.0)
        ue = np.tile(np.array([0.125, 0.2]), (4, 10, 1))
        geo = build_wraparound_geometry(cfg, ue_positions=ue)
        draws = []
        for s in range(200):
            t = sample_large_scale(cfg, geo, np.random.default_rng(s))
            draws.append(lin2db(t.beta[0, 0]) + cfg.noise_dbm - pathloss_db(geo.distances[0, 0]))
        draws = np.concatenate(draws)
        assert abs(draws.mean()) < 0.2 * 10 / math.sqrt(len(draws)) * 10
        assert np.std(draws) == pytest.approx(10.0, rel=0.05)

    def test_geometry_needs_geometric_mode(self):
        with pytest.raises(ConfigError):
            build_wraparound_geometry(ScenarioConfig())
