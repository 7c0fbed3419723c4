"""LoS steering vectors and small-scale Rician/Rayleigh channel sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, MisuseError
from .scenario import LargeScaleTable

__all__ = [
    "LoSSet",
    "ChannelRealization",
    "ula_steering",
    "orthogonal_beam_angles",
    "uniform_angles",
    "build_los",
    "sample_los",
    "complex_normal",
    "sample_channels",
]


def complex_normal(rng, size):
    """Circularly-symmetric complex Gaussian samples with unit variance."""
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)


def ula_steering(angle, N):
    """Half-wavelength ULA response ``exp(-i*pi*n*sin(angle))``, n = 0..N-1.

    ``angle`` may be an array; the antenna index is placed on a new first axis
    so that ``ula_steering(angles, N)`` with ``angles`` of shape (K,) gives an
    N x K matrix.
    """
    if N < 1:
        raise ConfigError("N must be >= 1")
    angle = np.asarray(angle, dtype=float)
    n = np.arange(N).reshape((N,) + (1,) * angle.ndim)
    return np.exp(-1j * np.pi * n * np.sin(angle))


def orthogonal_beam_angles(N, K, rng):
    """Angles of K distinct orthogonal beams, ``sin(theta_k) = -1 + (2k-1)/N``.

    Beam indices are drawn without replacement from 1..N.
    """
    if K > N:
        raise ConfigError(f"cannot place K={K} orthogonal beams with N={N} antennas")
    k = rng.choice(np.arange(1, N + 1), size=K, replace=False)
    return np.arcsin(-1.0 + (2.0 * k - 1.0) / N)


def uniform_angles(K, rng):
    return rng.uniform(0.0, 2.0 * np.pi, size=K)


@dataclass(frozen=True)
class LoSSet:
    """Deterministic LoS components ``hbar[j]`` (N x K) of every cell."""

    hbar: np.ndarray        # (L, N, K)
    angles: np.ndarray      # (L, K)

    @property
    def N(self) -> int:
        return self.hbar.shape[1]

    def gram(self, j) -> np.ndarray:
        """``(1/N) Hbar_j^H Hbar_j``."""
        H = self.hbar[j]
        return H.conj().T @ H / self.N

    def is_orthogonal(self, rtol=1e-9) -> bool:
        for j in range(self.hbar.shape[0]):
            G = self.gram(j)
            off = G - np.diag(np.diag(G))
            scale = max(np.abs(np.diag(G)).max(), 1e-300)
            if np.abs(off).max() > rtol * scale:
                return False
        return True


def build_los(table: LargeScaleTable, angles) -> LoSSet:
    """Columns ``sqrt(d_jjk kappa_jk) a(theta_jk)`` for given angles (L, K)."""
    angles = np.asarray(angles, dtype=float)
    if angles.shape != (table.L, table.K):
        raise MisuseError(f"angles must have shape {(table.L, table.K)}, got {angles.shape}")
    amp = np.sqrt(table.own(table.d) * table.kappa)            # (L, K)
    a = np.moveaxis(ula_steering(angles, table.N), 0, 1)       # (L, N, K)
    return LoSSet(hbar=a * amp[:, None, :], angles=angles)


def sample_los(table: LargeScaleTable, rng, orthogonal: bool) -> LoSSet:
    """Draw LoS angles per cell: orthogonal beams or uniform on [0, 2*pi]."""
    if orthogonal:
        angles = np.stack([orthogonal_beam_angles(table.N, table.K, rng) for _ in range(table.L)])
    else:
        angles = np.stack([uniform_angles(table.K, rng) for _ in range(table.L)])
    return build_los(table, angles)


@dataclass(frozen=True)
class ChannelRealization:
    """True channels ``h[..., j, l, :, k]`` for one or a batch of coherence blocks."""

    h: np.ndarray           # (..., L, L, N, K)


def sample_channels(table: LargeScaleTable, los: LoSSet, rng, size=()) -> ChannelRealization:
    """Sample independent channel realizations.

    ``h[j, l, :, k] = sqrt(d_jlk) z + hbar_jjk 1{l == j}`` with ``z ~ CN(0, I)``.
    ``size`` prepends batch dimensions.
    """
    L, K, N = table.L, table.K, los.N
    if los.hbar.shape != (L, N, K) or table.N != N:
        raise MisuseError("LoS set does not match the large-scale table")
    size = (size,) if isinstance(size, (int, np.integer)) else tuple(size)
    z = complex_normal(rng, size + (L, L, N, K))
    h = z * np.sqrt(table.d)[:, :, None, :]
    idx = np.arange(L)
    h[..., idx, idx, :, :] += los.hbar
    return ChannelRealization(h=h)
