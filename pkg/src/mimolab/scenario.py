"""Network instances: configuration, wrap-around geometry and large-scale tables.

Index convention used across the package: ``[j, l, k]`` addresses the link
between BS ``j`` and UE ``k`` of cell ``l``.  For ``l == j`` the link is the
intracell (Rician) one.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError

__all__ = [
    "ScenarioConfig",
    "LargeScaleTable",
    "Geometry",
    "db2lin",
    "lin2db",
    "pathloss_db",
    "build_wraparound_geometry",
    "build_table",
    "sample_large_scale",
    "median_snr_db",
    "load_config",
    "save_config",
]

MODES = ("geometric", "simplified")


def db2lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def lin2db(x):
    return 10.0 * np.log10(x)


@dataclass(frozen=True)
class ScenarioConfig:
    """Full description of one network instance.

    SNRs and powers are stored in dB (as in the JSON file); the ``rho_*``
    properties return linear values.  ``kappa`` is a linear power ratio.

    In ``geometric`` mode the large-scale gains are divided by the noise
    power (in mW), so the ``rho`` values are transmit powers in mW and default
    to ``tx_power_dbm``.  In ``simplified`` mode the intracell gain is 1, the
    intercell gain is ``alpha`` and the ``rho`` values are plain SNRs.
    """

    L: int = 4
    K: int = 10
    N: int = 64
    mode: str = "simplified"
    rho_tr_db: Optional[float] = 6.0
    rho_ul_db: Optional[float] = 10.0
    rho_dl_db: Optional[float] = 10.0
    # None selects the noise-matched choice 1/(N * rho_ul).
    phi_design: Optional[float] = None
    kappa: float = 0.0
    # simplified model
    alpha: float = 0.1
    # geometric model
    cell_side_km: float = 0.25
    pathloss_exponent: float = 3.7
    ref_gain_db: float = -148.0
    shadow_std_db: float = 10.0
    min_distance_km: float = 0.035
    noise_dbm: float = -94.0
    tx_power_dbm: float = 20.7
    rng_seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ("L", "K", "N"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.kappa < 0 or not math.isfinite(self.kappa):
            raise ConfigError(f"kappa must be finite and >= 0, got {self.kappa}")
        if self.mode == "simplified":
            if not 0.0 < self.alpha <= 1.0:
                raise ConfigError(f"alpha must lie in (0, 1], got {self.alpha}")
            for name in ("rho_tr_db", "rho_ul_db", "rho_dl_db"):
                if getattr(self, name) is None:
                    raise ConfigError(f"{name} is required in simplified mode")
        else:
            m = math.isqrt(self.L)
            if m * m != self.L:
                raise ConfigError(f"geometric mode needs a square number of cells, got L={self.L}")
            half_diag = self.cell_side_km / math.sqrt(2.0)
            if self.min_distance_km <= 0 or self.min_distance_km >= half_diag:
                raise ConfigError(
                    f"min_distance_km={self.min_distance_km} infeasible for cell side "
                    f"{self.cell_side_km} km"
                )
            if self.shadow_std_db < 0:
                raise ConfigError("shadow_std_db must be >= 0")
        if self.phi_design is not None and self.phi_design < 0:
            raise ConfigError(f"phi_design must be >= 0, got {self.phi_design}")

    def _rho(self, value_db):
        if value_db is None:
            return float(db2lin(self.tx_power_dbm))
        return float(db2lin(value_db))

    @property
    def rho_tr(self) -> float:
        return self._rho(self.rho_tr_db)

    @property
    def rho_ul(self) -> float:
        return self._rho(self.rho_ul_db)

    @property
    def rho_dl(self) -> float:
        return self._rho(self.rho_dl_db)

    @property
    def phi_design_value(self) -> float:
        if self.phi_design is None:
            return 1.0 / (self.N * self.rho_ul)
        return float(self.phi_design)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def geometric(cls, **overrides) -> "ScenarioConfig":
        """Geometric-mode defaults: every link uses ``tx_power_dbm``."""
        base = dict(mode="geometric", rho_tr_db=None, rho_ul_db=None, rho_dl_db=None)
        return cls(**{**base, **overrides})

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def load_config(path) -> ScenarioConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top-level JSON value must be an object")
    return ScenarioConfig.from_dict(data)


def save_config(config: ScenarioConfig, path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class LargeScaleTable:
    """Large-scale quantities of a network instance.

    Arrays are indexed ``[j, l, k]`` (3-D) or ``[j, k]`` / ``[j]``.
    """

    beta: np.ndarray
    kappa: np.ndarray
    d: np.ndarray
    c: np.ndarray
    phi: np.ndarray
    xi: np.ndarray
    lam: np.ndarray
    phi_design: np.ndarray
    N: int
    rho_tr: float
    rho_ul: float
    rho_dl: float

    @property
    def L(self) -> int:
        return self.beta.shape[0]

    @property
    def K(self) -> int:
        return self.beta.shape[2]

    def own(self, arr: np.ndarray) -> np.ndarray:
        """Intracell slice ``arr[j, j, :]`` as an (L, K) array."""
        idx = np.arange(self.L)
        return arr[idx, idx, :]

    def with_N(self, N: int) -> "LargeScaleTable":
        return build_table(self.beta, self.kappa, N, self.rho_tr, self.rho_ul,
                           self.rho_dl, self.phi_design)


def build_table(beta, kappa, N, rho_tr, rho_ul, rho_dl, phi_design) -> LargeScaleTable:
    """Derive d, c, phi, xi and lambda from gains and Rician factors."""
    beta = np.asarray(beta, dtype=float)
    L, L2, K = beta.shape
    if L != L2:
        raise ConfigError("beta must have shape (L, L, K)")
    kappa = np.broadcast_to(np.asarray(kappa, dtype=float), (L, K)).copy()
    idx = np.arange(L)
    if np.any(beta < 0) or not np.all(np.isfinite(beta)) or np.any(beta[idx, idx, :] <= 0):
        raise ConfigError("large-scale gains must be finite, nonnegative, and positive intracell")
    if rho_tr <= 0 or rho_ul <= 0 or rho_dl <= 0:
        raise ConfigError("all SNRs must be positive")
    phi_design = np.broadcast_to(np.asarray(phi_design, dtype=float), (L,)).copy()
    if np.any(phi_design < 0):
        raise ConfigError("phi_design must be >= 0")

    d = beta.copy()
    d[idx, idx, :] = beta[idx, idx, :] / (1.0 + kappa)
    denom = 1.0 / rho_tr + d.sum(axis=1)            # (L, K): 1/rho_tr + sum_n d_jnk
    c = d / denom[:, None, :]
    d_own = d[idx, idx, :]
    phi = d_own[:, None, :] * c                     # d_jjk d_jlk / denom
    phi_own = phi[idx, idx, :]
    cross = d.sum(axis=(1, 2)) - d_own.sum(axis=1)
    xi = cross + (d_own - phi_own).sum(axis=1)
    lam = xi / N + phi_design
    if np.any(lam <= 0):
        raise ConfigError("regularization lambda must be positive; raise phi_design")
    return LargeScaleTable(beta=beta, kappa=kappa, d=d, c=c, phi=phi, xi=xi, lam=lam,
                           phi_design=phi_design, N=int(N), rho_tr=float(rho_tr),
                           rho_ul=float(rho_ul), rho_dl=float(rho_dl))


def pathloss_db(distance_km, pathloss_exponent=3.7, ref_gain_db=-148.0):
    """Median channel gain in dB at ``distance_km`` (no shadowing)."""
    distance_km = np.asarray(distance_km, dtype=float)
    if np.any(distance_km <= 0):
        raise ConfigError("distance must be positive")
    out = ref_gain_db - 10.0 * pathloss_exponent * np.log10(distance_km)
    return float(out) if out.ndim == 0 else out


def median_snr_db(config: ScenarioConfig, distance_km) -> float:
    """Median SNR of a UE at ``distance_km`` from its BS (transmit power over noise)."""
    return (pathloss_db(distance_km, config.pathloss_exponent, config.ref_gain_db)
            + config.tx_power_dbm - config.noise_dbm)


@dataclass(frozen=True)
class Geometry:
    """BS and UE positions (km) on an ``m x m`` torus of square cells."""

    bs_pos: np.ndarray          # (L, 2)
    ue_pos: np.ndarray          # (L, K, 2)
    width: float                # torus side length, km
    distances: np.ndarray = field(repr=False)  # (L, L, K) wrap-around distances

    def distance(self, j, l, k) -> float:
        return float(self.distances[j, l, k])


def wrap_distance(a, b, width):
    """Distance between points ``a`` and ``b`` minimised over the 3x3 torus images."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    shifts = np.array([(sx, sy) for sx in (-width, 0.0, width) for sy in (-width, 0.0, width)])
    diff = a[..., None, :] + shifts - b[..., None, :]
    return np.sqrt((diff ** 2).sum(axis=-1)).min(axis=-1)


def _sample_ues_in_cell(center, side, dmin, count, rng):
    out = np.empty((count, 2))
    filled = 0
    while filled < count:
        pts = center + rng.uniform(-side / 2, side / 2, size=(2 * (count - filled) + 4, 2))
        ok = np.hypot(*(pts - center).T) >= dmin
        pts = pts[ok][: count - filled]
        out[filled:filled + len(pts)] = pts
        filled += len(pts)
    return out


def build_wraparound_geometry(config: ScenarioConfig, rng=None, ue_positions=None) -> Geometry:
    """Place BSs at cell centres of a square grid and drop UEs uniformly.

    UEs are kept at least ``min_distance_km`` from their serving BS.  Distances
    between every BS and every UE use the torus (wrap-around) metric.
    """
    if config.mode != "geometric":
        raise ConfigError("wrap-around geometry requires geometric mode")
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    m = math.isqrt(config.L)
    s = config.cell_side_km
    centers = np.array([((i + 0.5) * s, (r + 0.5) * s) for r in range(m) for i in range(m)])
    width = m * s
    if ue_positions is None:
        ue = np.stack([_sample_ues_in_cell(centers[l], s, config.min_distance_km, config.K, rng)
                       for l in range(config.L)])
    else:
        ue = np.asarray(ue_positions, dtype=float).reshape(config.L, config.K, 2)
    dist = wrap_distance(ue[None, :, :, :], centers[:, None, None, :], width)
    return Geometry(bs_pos=centers, ue_pos=ue, width=width, distances=dist)


def sample_large_scale(config: ScenarioConfig, geometry: Optional[Geometry] = None,
                       rng=None) -> LargeScaleTable:
    """Build the large-scale table of a network instance.

    Geometric mode draws independent log-normal shadowing per (j, l, k) link
    on top of the distance pathloss.  Simplified mode is deterministic.
    """
    L, K = config.L, config.K
    if config.mode == "simplified":
        beta = np.full((L, L, K), config.alpha)
        idx = np.arange(L)
        beta[idx, idx, :] = 1.0
    else:
        if rng is None:
            rng = np.random.default_rng(config.rng_seed)
        if geometry is None:
            geometry = build_wraparound_geometry(config, rng)
        gain_db = pathloss_db(geometry.distances, config.pathloss_exponent, config.ref_gain_db)
        gain_db = gain_db + config.shadow_std_db * rng.standard_normal(gain_db.shape)
        beta = db2lin(gain_db - config.noise_dbm)
    return build_table(beta, config.kappa, config.N, config.rho_tr, config.rho_ul,
                       config.rho_dl, config.phi_design_value)
