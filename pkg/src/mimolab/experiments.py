"""Experiment drivers behind the CLI: figure sweeps, dimensioning, comparisons."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import closedform as cf
from . import deteq
from .channel import LoSSet, build_los, sample_los
from .errors import ConfigError, MimolabError
from .montecarlo import ergodic_rate_sweep
from .report import SCHEMES
from .scenario import (LargeScaleTable, ScenarioConfig, build_table, build_wraparound_geometry,
                       sample_large_scale)

__all__ = [
    "ExperimentSpec",
    "NetworkDrop",
    "draw_drop",
    "instance",
    "fig1_simplified_sweep",
    "dimensioning",
    "multicell_sweep",
    "compare_deteq_mc",
    "single_point",
]

KINDS = ("fig1_simplified_sweep", "fig23_dimensioning", "fig45_multicell_sweep",
         "compare_deteq_mc", "single_point")


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    scenario: ScenarioConfig
    sweep_values: tuple = ()
    schemes: tuple = ("MRC", "SMMSE")
    output: Optional[str] = None
    format: str = "csv"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if not self.schemes:
            raise ConfigError("schemes must be non-empty")
        v = np.asarray(self.sweep_values, dtype=float)
        if v.size > 1 and np.any(np.diff(v) <= 0):
            raise ConfigError("sweep values must be strictly increasing")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}")


@dataclass(frozen=True)
class NetworkDrop:
    """Large-scale gains and LoS angles of one network drop, independent of N and kappa."""

    beta: np.ndarray        # (L, L, K)
    angles: np.ndarray      # (L, K)

    def realize(self, config: ScenarioConfig, N: int, kappa: float):
        cfg = config.replace(N=N, kappa=kappa)
        table = build_table(self.beta, kappa, N, cfg.rho_tr, cfg.rho_ul, cfg.rho_dl,
                            cfg.phi_design_value)
        return table, build_los(table, self.angles)


def draw_drop(config: ScenarioConfig, rng) -> NetworkDrop:
    """Geometry, shadowing and uniform LoS angles for the geometric model."""
    geo = build_wraparound_geometry(config, rng)
    table = sample_large_scale(config, geo, rng)
    angles = rng.uniform(0.0, 2.0 * np.pi, size=(config.L, config.K))
    return NetworkDrop(beta=table.beta, angles=angles)


def instance(config: ScenarioConfig, rng):
    """One (table, los) pair for the configured mode.

    Simplified mode uses orthogonal beams; geometric mode a random drop.
    """
    if config.mode == "simplified":
        table = sample_large_scale(config)
        return table, sample_los(table, rng, orthogonal=True)
    return draw_drop(config, rng).realize(config, config.N, config.kappa)


def _closedform_rate(scheme, config):
    direction = SCHEMES[scheme]
    return cf.rate_closedform(scheme, cf.SimplifiedParams.from_config(config, direction))


def fig1_simplified_sweep(config: ScenarioConfig, kappas, Ns, schemes=("MRC", "SMMSE"),
                          samples: int = 10_000, seed=0):
    """Average rate per UE versus N in the simplified model.

    Rows: N, kappa, scheme, rate_closedform, rate_deteq, rate_mc, stderr, r_inf.
    ``samples=0`` skips Monte Carlo.
    """
    if config.mode != "simplified":
        raise ConfigError("fig1 sweep needs simplified mode")
    ss = np.random.SeedSequence(seed)
    los_seed, mc_seed = ss.spawn(2)
    rng = np.random.default_rng(los_seed)
    rows, points, keys = [], [], []
    for kappa in kappas:
        for N in Ns:
            cfg = config.replace(N=int(N), kappa=float(kappa))
            table = sample_large_scale(cfg)
            los = sample_los(table, rng, orthogonal=True)
            states = deteq.solve_all(table, los)
            _, r_inf = cf.gamma_infinity(cf.SimplifiedParams.from_config(cfg))
            for s in schemes:
                rows.append({"N": int(N), "kappa": float(kappa), "scheme": s,
                             "rate_closedform": _closedform_rate(s, cfg),
                             "rate_deteq": deteq.deteq_report(s, table, los, states).mean_rate,
                             "rate_mc": float("nan"), "stderr": float("nan"), "r_inf": r_inf})
            points.append((table, los))
            keys.append(len(rows) - len(schemes))
    if samples > 0:
        results = ergodic_rate_sweep(points, list(schemes), samples, mc_seed)
        for start, res in zip(keys, results):
            for off, s in enumerate(schemes):
                rep = res[s]
                rows[start + off]["rate_mc"] = rep.mean_rate
                rows[start + off]["stderr"] = _mean_stderr(rep)
    return rows


def _mean_stderr(rep):
    """Standard error of the cell/UE-averaged rate (UE estimates treated as independent)."""
    se = np.asarray(rep.stderr, dtype=float)
    return float(np.sqrt(np.nansum(se ** 2)) / se.size)


def dimensioning(config: ScenarioConfig, target_rate: float, kappas, alpha=None, scheme="MRC"):
    """Antennas needed per kappa; infeasible targets give ``N_needed = None``."""
    rows = []
    for kappa in kappas:
        cfg = config.replace(kappa=float(kappa), **({} if alpha is None else {"alpha": float(alpha)}))
        p = cf.SimplifiedParams.from_config(cfg, SCHEMES.get(scheme, "UL"))
        _, r_inf = cf.gamma_infinity(p)
        try:
            n = cf.antennas_needed(target_rate, scheme, p)
        except ConfigError:
            n = None
        rows.append({"kappa": float(kappa), "alpha": cfg.alpha, "target_rate": target_rate,
                     "scheme": scheme, "N_needed": n, "r_inf": r_inf})
    return rows


def multicell_sweep(config: ScenarioConfig, kappas, Ns, schemes=("MRT", "RZF"), drops: int = 10,
                    samples: int = 0, seed=0):
    """Geometric multicell sweep averaged over UE drops.

    Rows: N, kappa, scheme, rate_deteq, rate_mc, stderr (MC columns NaN when
    ``samples=0``).  The same drops are reused for every N and kappa.
    """
    if config.mode != "geometric":
        raise ConfigError("multicell sweep needs geometric mode")
    ss = np.random.SeedSequence(seed)
    drop_seeds = ss.spawn(drops)
    mc_seed = ss.spawn(1)[0]
    net = [draw_drop(config, np.random.default_rng(s)) for s in drop_seeds]
    rows = []
    for kappa in kappas:
        for N in Ns:
            acc = {s: [] for s in schemes}
            pts = []
            for dr in net:
                table, los = dr.realize(config, int(N), float(kappa))
                states = deteq.solve_all(table, los)
                for s in schemes:
                    acc[s].append(deteq.deteq_report(s, table, los, states).mean_rate)
                pts.append((table, los))
            mc = {s: (float("nan"), float("nan")) for s in schemes}
            if samples > 0:
                seed_pt = mc_seed.spawn(1)[0]
                res = ergodic_rate_sweep(pts, list(schemes), samples, seed_pt)
                for s in schemes:
                    rates = [r[s].mean_rate for r in res]
                    ses = [_mean_stderr(r[s]) for r in res]
                    mc[s] = (float(np.mean(rates)), float(np.sqrt(np.sum(np.square(ses)))) / len(ses))
            for s in schemes:
                rows.append({"N": int(N), "kappa": float(kappa), "scheme": s,
                             "rate_deteq": float(np.mean(acc[s])), "rate_mc": mc[s][0],
                             "stderr": mc[s][1]})
    return rows


def compare_deteq_mc(config: ScenarioConfig, samples: int = 10_000, seed=0,
                     schemes=("MRC", "SMMSE", "MRT", "RZF")):
    """Per-scheme average rate from deterministic equivalents and Monte Carlo."""
    ss = np.random.SeedSequence(seed)
    inst_seed, mc_seed = ss.spawn(2)
    table, los = instance(config, np.random.default_rng(inst_seed))
    states = deteq.solve_all(table, los)
    res = ergodic_rate_sweep([(table, los)], list(schemes), samples, mc_seed)[0]
    rows = []
    for s in schemes:
        d = deteq.deteq_report(s, table, los, states).mean_rate
        m = res[s].mean_rate
        rows.append({"scheme": s, "direction": SCHEMES[s], "rate_deteq": d, "rate_mc": m,
                     "stderr": _mean_stderr(res[s]), "rel_err": abs(d - m) / m})
    return rows


def single_point(config: ScenarioConfig, seed=0, schemes=("MRC", "SMMSE", "MRT", "RZF")):
    """Deterministic-equivalent reports (per UE) for one network instance."""
    table, los = instance(config, np.random.default_rng(np.random.SeedSequence(seed)))
    states = deteq.solve_all(table, los)
    return [deteq.deteq_report(s, table, los, states) for s in schemes]
