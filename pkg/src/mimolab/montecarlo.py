"""Monte-Carlo oracle: actual combiners/precoders built from sampled estimates.

Uplink SINRs are evaluated exactly given the estimates (the expectation
over the unknown channel part is Gaussian and done in closed form); downlink
SINRs use sample means of the UatF bound's expectations.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .channel import LoSSet, sample_channels
from .errors import MisuseError
from .estimation import (EstimateSet, estimates_from_observations, mmse_estimate,
                         sample_pilot_observations)
from .report import SCHEMES, SinrReport
from .scenario import LargeScaleTable

__all__ = [
    "CombinerSet",
    "PrecoderSet",
    "build_combiners",
    "build_precoders",
    "ul_sinr_given_estimates",
    "ul_ergodic",
    "dl_sinr_uatf",
    "mc_report",
    "ergodic_rate_sweep",
    "max_workers",
]

# complex entries held in memory per chunk; bounds peak memory to ~100 MB
_CHUNK_ENTRIES = 6_000_000


def max_workers() -> int:
    env = os.environ.get("MIMOLAB_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            return max(1, min(int(env), cap))
        except ValueError:
            pass
    return cap


@dataclass(frozen=True)
class CombinerSet:
    v: np.ndarray           # (..., L, N, K)
    scheme: str


@dataclass(frozen=True)
class PrecoderSet:
    g: np.ndarray           # (..., L, N, K)
    scheme: str
    normalizer: np.ndarray  # (L,) theta_j or psi_j


def _coresolvent(hhat, lam):
    """``(Hhat^H Hhat / N + lam I)^{-1}`` for batched (..., L, N, K) inputs."""
    N, K = hhat.shape[-2:]
    A = np.swapaxes(hhat.conj(), -1, -2) @ hhat / N
    A = A + np.asarray(lam)[:, None, None] * np.eye(K)
    return np.linalg.solve(A, np.broadcast_to(np.eye(K, dtype=A.dtype), A.shape))


def _smmse_directions(hhat, lam):
    """``(1/N) Q hhat_k`` for all k, via ``Q Hhat = Hhat (Hhat^H Hhat/N + lam I)^{-1}``."""
    N = hhat.shape[-2]
    return hhat @ _coresolvent(hhat, lam) / N


def build_combiners(estimates: EstimateSet, table: LargeScaleTable, scheme: str) -> CombinerSet:
    """MRC (``v = hhat``) or S-MMSE (``v = (1/N) Q hhat``) combiners."""
    if scheme == "MRC":
        return CombinerSet(v=estimates.hhat, scheme=scheme)
    if scheme == "SMMSE":
        return CombinerSet(v=_smmse_directions(estimates.hhat, table.lam), scheme=scheme)
    raise MisuseError(f"unknown combining scheme {scheme!r}")


def build_precoders(estimates: EstimateSet, table: LargeScaleTable, scheme: str,
                    normalizer=None) -> PrecoderSet:
    """MRT or RZF precoders.

    ``normalizer`` (per cell) scales the squared norm; if omitted it is the
    reciprocal of the sample mean of ``(1/K) sum_k ||u_jk||^2`` over this batch.
    """
    if scheme == "MRT":
        u = estimates.hhat
    elif scheme == "RZF":
        u = _smmse_directions(estimates.hhat, table.lam)
    else:
        raise MisuseError(f"unknown precoding scheme {scheme!r}")
    if normalizer is None:
        p = (np.abs(u) ** 2).sum(axis=-2).mean(axis=-1)              # (..., L)
        normalizer = 1.0 / p.reshape(-1, table.L).mean(axis=0)
    normalizer = np.asarray(normalizer, dtype=float)
    return PrecoderSet(g=u * np.sqrt(normalizer)[:, None, None], scheme=scheme, normalizer=normalizer)


def ul_sinr_given_estimates(combiners: CombinerSet, estimates: EstimateSet,
                            table: LargeScaleTable, rho_ul: Optional[float] = None) -> np.ndarray:
    """Uplink SINR of every UE conditioned on the estimates, shape (..., L, K).

    Given the pilot observations, ``h_jli`` is Gaussian with mean ``m_jli``
    (``hhat_jji`` if l == j, else ``(c_jli/c_jji)(hhat_jji - hbar_jji)``) and
    covariance ``d_jli (1 - c_jli) I``, so every conditional expectation in
    the SINR denominator is available in closed form.
    """
    v, hhat = combiners.v, estimates.hhat
    if v.shape != hhat.shape:
        raise MisuseError("combiner set does not match estimate set")
    rho = table.rho_ul if rho_ul is None else rho_ul
    L = table.L
    vH = np.swapaxes(v.conj(), -1, -2)                               # (..., L, K, N)
    P = vH @ hhat                                                    # P[k, i] = v_k^H hhat_i
    P0 = vH @ (hhat - estimates.hbar)
    absP2 = np.abs(P) ** 2
    sig = np.real(np.einsum("...kk->...k", absP2))
    own = absP2.sum(axis=-1) - sig
    idx = np.arange(L)
    r2 = (table.c / table.own(table.c)[:, None, :]) ** 2             # (L, L, K) [j, l, i]
    r2[idx, idx, :] = 0.0
    w = r2.sum(axis=1)                                               # (L, K) indexed [j, i]
    cross = (np.abs(P0) ** 2 * w[:, None, :]).sum(axis=-1)
    err = (table.d * (1.0 - table.c)).sum(axis=(1, 2)) + 1.0 / rho    # (L,)
    vnorm2 = (np.abs(v) ** 2).sum(axis=-2)
    return sig / (own + cross + vnorm2 * err[:, None])


def _chunks(total, per_sample):
    size = max(1, min(total, _CHUNK_ENTRIES // max(per_sample, 1)))
    out = []
    while total > 0:
        out.append(min(size, total))
        total -= out[-1]
    return out


def ul_ergodic(scheme: str, table: LargeScaleTable, los: LoSSet, samples: int, rng,
               full_channels: bool = False):
    """Ergodic UL rate ``E log2(1 + SINR)`` per UE with its standard error.

    Returns ``(rate, stderr, mean_sinr)``, each (L, K).  With
    ``full_channels=True`` every realization draws all true channels and runs
    the estimator; otherwise pilot observations are drawn from their marginal.
    """
    L, K, N = table.L, table.K, table.N
    s1 = np.zeros((L, K))
    s2 = np.zeros((L, K))
    sg = np.zeros((L, K))
    per = (L * L if full_channels else L) * N * K
    for b in _chunks(samples, per):
        if full_channels:
            est = mmse_estimate(sample_channels(table, los, rng, b), table, los, rng)
        else:
            est = estimates_from_observations(sample_pilot_observations(table, los, rng, b), table, los)
        sinr = ul_sinr_given_estimates(build_combiners(est, table, scheme), est, table)
        r = np.log2(1.0 + sinr)
        s1 += r.sum(axis=0)
        s2 += (r ** 2).sum(axis=0)
        sg += sinr.sum(axis=0)
    mean = s1 / samples
    var = np.maximum(s2 / samples - mean ** 2, 0.0)
    return mean, np.sqrt(var / max(samples - 1, 1)), sg / samples


def _dl_batch(scheme, table, los, b, rng, normalizer):
    real = sample_channels(table, los, rng, b)                        # h: (b, L, L, N, K)
    est = mmse_estimate(real, table, los, rng)
    pre = build_precoders(est, table, scheme, normalizer)
    # A[..., l, n, k, i] = h_lnk^H g_li
    return np.swapaxes(real.h.conj(), -1, -2) @ pre.g[:, :, None, :, :]


def dl_sinr_uatf(scheme: str, table: LargeScaleTable, los: LoSSet, samples: int, rng,
                 warmup: int = 512, batches: int = 10, genie: bool = False) -> SinrReport:
    """Downlink SINR under the UatF bound from sample means.

    The precoder normalizer is estimated once from ``warmup`` independent
    realizations and then frozen.  Reported terms are divided by N to match
    the deterministic-equivalent scaling; ``coh`` collects squared means of
    the interfering gains and ``noncoh`` their variances.  ``stderr`` is a
    batch-means standard error of the rate.
    """
    if SCHEMES.get(scheme) != "DL":
        raise MisuseError(f"{scheme!r} is not a downlink scheme")
    L, K, N = table.L, table.K, table.N
    rho = table.rho_dl
    # warm-up: normalizer from an independent batch
    p = np.zeros(L)
    done = 0
    for b in _chunks(warmup, L * N * K):
        est = estimates_from_observations(sample_pilot_observations(table, los, rng, b), table, los)
        u = est.hhat if scheme == "MRT" else _smmse_directions(est.hhat, table.lam)
        p += (np.abs(u) ** 2).sum(axis=-2).mean(axis=-1).sum(axis=0)
        done += b
    normalizer = done / p

    batches = max(1, min(batches, samples))
    sizes = [samples // batches + (1 if i < samples % batches else 0) for i in range(batches)]
    S1 = np.zeros((L, L, K, K), dtype=complex)    # sums of A
    S2 = np.zeros((L, L, K, K))                   # sums of |A|^2
    batch_rates = []
    genie_sum = np.zeros((L, K))
    idx = np.arange(L)
    kk = np.arange(K)
    for size in sizes:
        b1 = np.zeros_like(S1)
        b2 = np.zeros_like(S2)
        for b in _chunks(size, L * L * N * K):
            A = _dl_batch(scheme, table, los, b, rng, normalizer)
            b1 += A.sum(axis=0)
            a2 = np.abs(A) ** 2
            b2 += a2.sum(axis=0)
            if genie:
                tot = a2.sum(axis=(1, 4))                               # (b, L=n, K=k): sum over l, i
                sig = a2[:, idx, idx][:, :, kk, kk]
                genie_sum += np.log2(1.0 + sig / (tot - sig + 1.0 / rho)).sum(axis=0)
        S1 += b1
        S2 += b2
        batch_rates.append(_uatf_rate(b1 / size, b2 / size, rho))
    m1, m2 = S1 / samples, S2 / samples
    signal, coh, noncoh = _uatf_terms(m1, m2)
    sinr = signal / (1.0 / rho + coh + noncoh)
    se = np.std(np.stack(batch_rates), axis=0, ddof=1) / math.sqrt(batches) if batches > 1 \
        else np.full((L, K), np.nan)
    sig_se = np.sqrt(np.maximum(np.real(m2[idx, idx][:, kk, kk]) - signal, 0) / samples)
    rel = sig_se / np.sqrt(signal)
    if np.any(rel > 0.01):
        warnings.warn(f"UatF signal term relative standard error up to {rel.max():.2%}; "
                      "increase the sample count", RuntimeWarning, stacklevel=2)
    meta = {"samples": samples, "warmup": warmup, "normalizer": normalizer.tolist()}
    if genie:
        meta["genie_rate"] = (genie_sum / samples).tolist()
    return SinrReport(scheme=scheme, provenance="montecarlo", sinr=sinr, signal=signal / N,
                      noise=np.full((L, K), 1.0 / (rho * N)), noncoh=noncoh / N, coh=coh / N,
                      stderr=se, meta=meta)


def _uatf_terms(m1, m2):
    """Signal, coherent and non-coherent UatF terms from first/second moments.

    ``m1[l, n, k, i] = E{h_lnk^H g_li}``, ``m2`` the mean squared modulus.
    """
    L, _, K, _ = m1.shape
    idx = np.arange(L)
    kk = np.arange(K)
    mean2 = np.abs(m1) ** 2
    var = np.maximum(m2 - mean2, 0.0)
    signal = mean2[idx, idx][:, kk, kk]                  # (L=j, K=k)
    coh = mean2.sum(axis=(0, 3)) - signal                # sum over l, i of |E A_ljki|^2
    noncoh = var.sum(axis=(0, 3))
    return signal, coh, noncoh


def _uatf_rate(m1, m2, rho):
    signal, coh, noncoh = _uatf_terms(m1, m2)
    return np.log2(1.0 + signal / (1.0 / rho + coh + noncoh))


def mc_report(scheme: str, table: LargeScaleTable, los: LoSSet, samples: int, rng, **kw) -> SinrReport:
    """Monte-Carlo SinrReport for any scheme.

    Uplink reports carry the ergodic rate and ``sinr = 2**rate - 1``.
    """
    if scheme not in SCHEMES:
        raise MisuseError(f"unknown scheme {scheme!r}")
    if SCHEMES[scheme] == "DL":
        return dl_sinr_uatf(scheme, table, los, samples, rng, **kw)
    rate, se, mean_sinr = ul_ergodic(scheme, table, los, samples, rng, **kw)
    return SinrReport(scheme=scheme, provenance="montecarlo", sinr=2.0 ** rate - 1.0, rate=rate,
                      stderr=se, meta={"samples": samples, "mean_sinr": mean_sinr.tolist()})


def _sweep_point(args):
    scheme, table, los, samples, seed = args
    return mc_report(scheme, table, los, samples, np.random.default_rng(seed))


def ergodic_rate_sweep(points: Sequence, schemes: Sequence[str], samples: int, seed,
                       workers: Optional[int] = None):
    """Monte-Carlo reports for every (table, los) point and scheme.

    ``points`` is a sequence of ``(table, los)`` pairs.  Each (point, scheme)
    job gets its own child of ``SeedSequence(seed)``, so results do not
    depend on the worker count.  Returns a list (per point) of dicts
    ``scheme -> SinrReport``.
    """
    jobs = []
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(len(points) * len(schemes))
    for pi, (table, los) in enumerate(points):
        for si, scheme in enumerate(schemes):
            jobs.append((scheme, table, los, samples, children[pi * len(schemes) + si]))
    workers = max_workers() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    out = []
    for pi in range(len(points)):
        out.append({s: results[pi * len(schemes) + si] for si, s in enumerate(schemes)})
    return out
