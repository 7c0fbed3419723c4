"""Pilot-contaminated MMSE channel estimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, LoSSet, complex_normal
from .errors import MisuseError
from .scenario import LargeScaleTable

__all__ = ["EstimateSet", "mmse_estimate", "intercell_estimate", "sample_pilot_observations",
           "estimates_from_observations"]


@dataclass(frozen=True)
class EstimateSet:
    """Own-cell estimates and the pilot observations they came from.

    Both arrays have shape ``(..., L, N, K)``; ``hbar`` is the LoS set used.
    """

    hhat: np.ndarray
    ytr: np.ndarray
    hbar: np.ndarray

    @property
    def error_free_part(self) -> np.ndarray:
        """``hhat - hbar``, the zero-mean part shared by all pilot-sharing UEs."""
        return self.hhat - self.hbar


def mmse_estimate(realization: ChannelRealization, table: LargeScaleTable, los: LoSSet,
                  rng) -> EstimateSet:
    """MMSE estimates of the intracell channels from one pilot phase.

    All cells reuse the same K pilots, so the observation at BS ``j`` for pilot
    ``k`` is ``y = sum_l h_jlk + n / sqrt(rho_tr)``.
    """
    h = realization.h
    L = table.L
    if h.shape[-4:-2] != (L, L) or h.shape[-2:] != los.hbar.shape[1:]:
        raise MisuseError("channel realization does not match table/LoS shapes")
    noise = complex_normal(rng, h.shape[:-4] + (L,) + h.shape[-2:])
    y = h.sum(axis=-3) + noise / np.sqrt(table.rho_tr)
    c_own = table.own(table.c)[:, None, :]                   # (L, 1, K)
    hhat = los.hbar + c_own * (y - los.hbar)
    return EstimateSet(hhat=hhat, ytr=y, hbar=los.hbar)


def intercell_estimate(estimates: EstimateSet, table: LargeScaleTable, j: int, l: int, k: int):
    """Estimate of ``h_jlk`` (l != j) rebuilt from the stored own-cell estimate.

    Equals ``c_jlk (y_jk - hbar_jjk)``; computed as
    ``(c_jlk / c_jjk)(hhat_jjk - hbar_jjk)``.
    """
    if l == j:
        raise MisuseError("intercell_estimate needs l != j; use the own-cell estimate")
    ratio = table.c[j, l, k] / table.c[j, j, k]
    return ratio * (estimates.hhat[..., j, :, k] - estimates.hbar[j, :, k])


def sample_pilot_observations(table: LargeScaleTable, los: LoSSet, rng, size=()) -> np.ndarray:
    """Draw ``y_jk`` directly from its Gaussian marginal.

    ``y_jk ~ CN(hbar_jjk, (sum_l d_jlk + 1/rho_tr) I)``, the same law as
    summing sampled channels and noise.  Used when only the estimates are
    needed (uplink conditional SINR), which avoids drawing all L^2 channels.
    """
    size = (size,) if isinstance(size, (int, np.integer)) else tuple(size)
    var = table.d.sum(axis=1) + 1.0 / table.rho_tr                 # (L, K)
    z = complex_normal(rng, size + los.hbar.shape)
    return los.hbar + np.sqrt(var)[:, None, :] * z


def estimates_from_observations(ytr: np.ndarray, table: LargeScaleTable, los: LoSSet) -> EstimateSet:
    c_own = table.own(table.c)[:, None, :]
    return EstimateSet(hhat=los.hbar + c_own * (ytr - los.hbar), ytr=ytr, hbar=los.hbar)
