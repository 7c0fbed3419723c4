"""Deterministic equivalents of the UL/DL SINRs for MRT, MRC, S-MMSE and RZF.

The fixed point couples an N x N matrix ``T`` and a K x K matrix ``T~``.
Only traces of ``T`` are ever needed, and those follow from the K
eigenvalues of ``D^{1/2} G D^{1/2}`` with ``G = Hbar^H Hbar / N`` and
``D = (I + delta Phi)^{-1}``, so no N x N matrix is formed.  This keeps
N = 2**14 and N/K = 10**4 cheap.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .channel import LoSSet
from .errors import ConfigError, ConvergenceError, MisuseError, RegimeError
from .report import SinrReport, rate_from_sinr
from .scenario import LargeScaleTable

__all__ = [
    "FixedPoint",
    "DetEqState",
    "solve_fixed_point",
    "auxiliaries",
    "solve_cell",
    "solve_all",
    "sinr_mrt",
    "sinr_mrc",
    "sinr_smmse",
    "sinr_rzf",
    "sinr_limit",
    "deteq_report",
    "rate_from_sinr",
]


@dataclass(frozen=True)
class FixedPoint:
    """Converged solution of the coupled (delta, delta~) system of one cell."""

    lam: float
    phi: np.ndarray             # (K,) diagonal of Phi
    gram: np.ndarray            # (K, K) Hbar^H Hbar / N
    N: int
    delta: float
    delta_tilde: float
    T_tilde: np.ndarray         # (K, K)
    trT2: float                 # (1/N) tr T^2
    iterations: int
    residual: float

    def T_matrix(self, hbar) -> np.ndarray:
        """Explicit N x N matrix ``T`` (only sensible for small N)."""
        hbar = np.asarray(hbar)
        if hbar.shape != (self.N, len(self.phi)):
            raise MisuseError("hbar shape does not match the fixed point")
        D = 1.0 / (1.0 + self.delta * self.phi)
        A = self.lam * (1.0 + self.delta_tilde) * np.eye(self.N) + (hbar * D) @ hbar.conj().T / self.N
        return _hpd_inverse(A)


def _hpd_inverse(A):
    c = sla.cho_factor(A, lower=True)
    return sla.cho_solve(c, np.eye(A.shape[0], dtype=A.dtype))


def _traces_T(lam, phi, gram, N, delta, delta_tilde):
    """Return ``(1/N) tr T`` and ``(1/N) tr T^2`` from a K x K eigenproblem."""
    K = len(phi)
    a = lam * (1.0 + delta_tilde)
    if K == 0:
        return 1.0 / a, 1.0 / a ** 2
    dh = 1.0 / np.sqrt(1.0 + delta * phi)
    mu = np.clip(np.linalg.eigvalsh(dh[:, None] * gram * dh[None, :]), 0.0, None)
    tr1 = ((N - K) / a + np.sum(1.0 / (a + mu))) / N
    tr2 = ((N - K) / a ** 2 + np.sum(1.0 / (a + mu) ** 2)) / N
    return tr1, tr2


def _T_tilde(lam, phi, gram, delta, delta_tilde):
    A = lam * np.diag(1.0 + delta * phi) + gram / (1.0 + delta_tilde)
    return _hpd_inverse(A)


def solve_fixed_point(lam, phi, hbar=None, *, gram=None, N=None, tol=1e-12,
                      max_iter=20000, damping=0.5) -> FixedPoint:
    """Solve the coupled fixed point for one cell.

    Parameters
    ----------
    lam : float
        Regularization ``lambda_j > 0``.
    phi : array_like, shape (K,)
        Diagonal of ``Phi_jj`` (estimate variances).
    hbar : array_like, shape (N, K), optional
        LoS matrix.  Alternatively pass ``gram`` (``Hbar^H Hbar / N``) and ``N``.
    tol : float
        Relative tolerance on both ``delta`` and ``delta~``.

    Notes
    -----
    Damped Picard iteration starting from ``delta = 1/lam, delta~ = 0``; the
    damping factor is lifted to 1 once the residual falls below 1e-3.
    """
    if not np.isfinite(lam) or lam <= 0:
        raise RegimeError(f"lambda must be positive, got {lam}")
    phi = np.asarray(phi, dtype=float).reshape(-1)
    K = len(phi)
    if np.any(phi < 0):
        raise MisuseError("phi values must be nonnegative")
    if gram is None:
        if hbar is None:
            raise MisuseError("pass hbar or (gram, N)")
        hbar = np.asarray(hbar)
        N = hbar.shape[0]
        gram = hbar.conj().T @ hbar / N
    else:
        gram = np.asarray(gram)
        if N is None:
            raise MisuseError("N is required together with gram")
    if gram.shape != (K, K):
        raise MisuseError("gram must be K x K")
    gram = 0.5 * (gram + gram.conj().T)

    delta, dt = 1.0 / lam, 0.0
    eta = damping
    resid = np.inf
    for it in range(1, max_iter + 1):
        new_delta, _ = _traces_T(lam, phi, gram, N, delta, dt)
        new_dt = float(np.real(np.sum(phi * np.diag(_T_tilde(lam, phi, gram, delta, dt))))) / N if K else 0.0
        resid = max(abs(new_delta - delta) / abs(new_delta),
                    abs(new_dt - dt) / max(abs(new_dt), 1e-300) if new_dt else 0.0)
        if resid < tol:
            delta, dt = new_delta, new_dt
            break
        if resid < 1e-3:
            eta = 1.0
        delta = (1 - eta) * delta + eta * new_delta
        dt = (1 - eta) * dt + eta * new_dt
    else:
        raise ConvergenceError(f"fixed point did not converge in {max_iter} iterations "
                               f"(residual {resid:.3e})", residual=resid, iterations=max_iter)
    _, trT2 = _traces_T(lam, phi, gram, N, delta, dt)
    Tt = _T_tilde(lam, phi, gram, delta, dt) if K else np.zeros((0, 0))
    return FixedPoint(lam=float(lam), phi=phi, gram=gram, N=int(N), delta=float(delta),
                      delta_tilde=float(dt), T_tilde=Tt, trT2=float(trT2),
                      iterations=it, residual=float(resid))


@dataclass(frozen=True)
class DetEqState:
    """Fixed point of cell ``j`` together with its auxiliary quantities.

    ``mu`` and ``gamma_coef`` are (L, K) arrays indexed ``[l, i]``.
    """

    j: int
    fp: FixedPoint
    F: float
    Delta: float
    theta_tilde: float
    nu_bar: float
    M1: np.ndarray              # diag(T~ Phi T~)
    M2: np.ndarray              # diag(T~ G T~)
    Tt2_diag: np.ndarray        # diag(T~^2)
    varsigma_bar: np.ndarray
    xi_aux: np.ndarray
    zeta_aux: np.ndarray
    theta_bar: float
    psi_bar: float
    mu: np.ndarray
    gamma_coef: np.ndarray

    # convenience pass-throughs
    @property
    def lam(self):
        return self.fp.lam

    @property
    def delta(self):
        return self.fp.delta

    @property
    def delta_tilde(self):
        return self.fp.delta_tilde

    @property
    def T_tilde(self):
        return self.fp.T_tilde

    @property
    def Tt_diag(self):
        return np.real(np.diag(self.fp.T_tilde))


def auxiliaries(fp: FixedPoint, table: LargeScaleTable, j: int) -> DetEqState:
    """Derived quantities of a converged fixed point.

    ``Delta`` uses ``(1/N) tr(Phi T~ Phi T~)`` as its second factor.  The
    cross-cell ``mu`` entry is
    ``d_jli - lam phi_jli^2 delta (2 [T~]_ii - delta lam [T~ Phi T~]_ii)``.
    """
    lam, phi, G, N = fp.lam, fp.phi, fp.gram, fp.N
    Tt, delta, dt = fp.T_tilde, fp.delta, fp.delta_tilde
    absT2 = np.abs(Tt) ** 2
    M1 = absT2 @ phi
    M2 = np.real(np.einsum("ki,il,lk->k", Tt, G, Tt))
    Tt2 = absT2.sum(axis=1)
    Tkk = np.real(np.diag(Tt))
    F = float(np.sum(phi * M2)) / N / (1.0 + dt) ** 2
    theta_tilde = float(np.sum(phi * M1)) / N
    Delta = (1.0 - F) ** 2 - lam ** 2 * fp.trT2 * theta_tilde
    if not Delta > 0:
        raise RegimeError(f"Delta={Delta:.3e} <= 0 in cell {j}: outside the asymptotic regime")
    nu_bar = fp.trT2 / Delta
    a = (1.0 - F) / Delta
    M2s = M2 / (1.0 + dt) ** 2
    varsigma = a * M2s + nu_bar * lam ** 2 * (M1 - phi * Tkk ** 2)
    xi_aux = nu_bar * lam ** 2 * M1 + a * M2s
    zeta_aux = a * lam ** 2 * M1 + lam ** 2 * theta_tilde / Delta * M2s

    gdiag = np.real(np.diag(G))
    theta_bar = 1.0 / np.mean(phi + gdiag)
    psi_inv = np.mean(xi_aux)
    if not psi_inv > 0:
        raise RegimeError(f"psi_bar not positive in cell {j}")
    psi_bar = 1.0 / psi_inv

    d_j, phi_j = table.d[j], table.phi[j]              # (L, K) indexed [l, i]
    mu = d_j - lam * phi_j ** 2 * delta * (2.0 * Tkk - delta * lam * M1)
    mu[j] = d_j[j] - phi + lam ** 2 * M1
    gamma = phi_j ** 2 * delta ** 2 * M2s
    gamma[j] = M2s
    return DetEqState(j=j, fp=fp, F=F, Delta=float(Delta), theta_tilde=theta_tilde,
                      nu_bar=float(nu_bar), M1=M1, M2=M2, Tt2_diag=Tt2,
                      varsigma_bar=varsigma, xi_aux=xi_aux, zeta_aux=zeta_aux,
                      theta_bar=float(theta_bar), psi_bar=float(psi_bar), mu=mu, gamma_coef=gamma)


def solve_cell(table: LargeScaleTable, los: LoSSet, j: int, **kw) -> DetEqState:
    _check(table, los)
    fp = solve_fixed_point(table.lam[j], table.phi[j, j], gram=los.gram(j), N=table.N, **kw)
    return auxiliaries(fp, table, j)


def solve_all(table: LargeScaleTable, los: LoSSet, **kw) -> list:
    """Fixed points and auxiliaries of every cell."""
    return [solve_cell(table, los, j, **kw) for j in range(table.L)]


def _check(table, los):
    if los.hbar.shape != (table.L, table.N, table.K):
        raise MisuseError(f"LoS set shape {los.hbar.shape} does not match table "
                          f"{(table.L, table.N, table.K)}")


def _los_terms(los: LoSSet, L):
    grams = np.stack([los.gram(j) for j in range(L)])           # (L, K, K)
    gdiag = np.real(np.einsum("jkk->jk", grams))
    cross = (np.abs(grams) ** 2).sum(axis=2) - gdiag ** 2       # sum_{i != k} |G_ik|^2
    return grams, gdiag, np.maximum(cross, 0.0)


def _own(table):
    return table.own(table.phi), table.own(table.d)


def sinr_mrt(table: LargeScaleTable, los: LoSSet, states=None, exact_self: bool = True) -> SinrReport:
    """Downlink MRT under the UatF bound.

    With ``exact_self`` the variance of the desired gain includes its
    ``phi_jjk |hbar_jjk|^2 / N^2`` part, which the plain asymptotic sum over
    ``i != k`` leaves out.  Both forms share the same limit.
    """
    _check(table, los)
    L, N = table.L, table.N
    _, gdiag, cross = _los_terms(los, L)
    phi_own, _ = _own(table)
    theta = 1.0 / np.mean(phi_own + gdiag, axis=1)                # (L,)
    signal = theta[:, None] * (phi_own + gdiag) ** 2
    noise = np.full_like(signal, 1.0 / (N * table.rho_dl))
    # d[l, j, k] is the gain from BS l to UE k of cell j
    load = theta * (phi_own + gdiag).sum(axis=1)                 # (L,) indexed l
    non1 = np.einsum("l,ljk->jk", load, table.d) / N
    own_phi = phi_own.sum(axis=1, keepdims=True) - (0.0 if exact_self else phi_own)
    non2 = theta[:, None] * gdiag * own_phi / N
    phi_cross = table.phi.copy()                                 # phi[l, j, k]
    idx = np.arange(L)
    phi_cross[idx, idx, :] = 0.0
    coh = theta[:, None] * cross + np.einsum("l,ljk->jk", theta, phi_cross ** 2)
    return SinrReport.from_terms("MRT", "deteq", signal, noise, non1 + non2, coh)


def sinr_mrc(table: LargeScaleTable, los: LoSSet, states=None, exact_self: bool = True) -> SinrReport:
    """Uplink MRC.

    The noise term is ``(phi_jjk + |hbar_jjk|^2/N) / (N rho_ul)`` per UE.
    The plain asymptotic non-coherent sum runs over every (l, i) with weight
    ``d_jli``, which for (j, k) itself counts the known estimate as
    interference; ``exact_self`` keeps only its error part ``d_jjk - phi_jjk``.
    Both forms share the same limit.
    """
    _check(table, los)
    L, N = table.L, table.N
    _, gdiag, cross = _los_terms(los, L)
    phi_own, _ = _own(table)
    s = phi_own + gdiag
    signal = s ** 2
    noise = s / (N * table.rho_ul)
    non1 = table.d.sum(axis=(1, 2))[:, None] * s / N
    non2 = phi_own * (gdiag.sum(axis=1, keepdims=True) - gdiag) / N
    if exact_self:
        non1 = non1 - phi_own * s / N
    idx = np.arange(L)
    phi_cross = table.phi.copy()
    phi_cross[idx, idx, :] = 0.0
    coh = cross + (phi_cross ** 2).sum(axis=1)
    return SinrReport.from_terms("MRC", "deteq", signal, noise, non1 + non2, coh)


def _states(table, los, states):
    if states is None:
        states = solve_all(table, los)
    if len(states) != table.L:
        raise MisuseError("need one DetEqState per cell")
    return states


def _cross_weights(table, j):
    w = table.phi[j] ** 2                                        # (L, K) [l, i]
    return w.sum(axis=0) - w[j]


def sinr_smmse(table: LargeScaleTable, los: LoSSet, states=None) -> SinrReport:
    """Uplink single-cell MMSE combining."""
    _check(table, los)
    if np.any(table.phi_design <= 0):
        raise ConfigError("S-MMSE needs a strictly positive phi_design")
    states = _states(table, los, states)
    L, K, N = table.L, table.K, table.N
    out = {n: np.empty((L, K)) for n in ("signal", "noise", "noncoh", "coh")}
    for j, st in enumerate(states):
        lam, Tkk, phi = st.lam, st.Tt_diag, st.fp.phi
        out["signal"][j] = (1.0 - lam * Tkk) ** 2
        out["noise"][j] = (phi * st.nu_bar * lam ** 2 * Tkk ** 2 + st.varsigma_bar) / (N * table.rho_ul)
        out["noncoh"][j] = st.mu.sum() / N * st.xi_aux + st.gamma_coef.sum() / N * st.zeta_aux
        w = _cross_weights(table, j)
        out["coh"][j] = (lam ** 2 * (st.Tt2_diag - Tkk ** 2)
                         + lam ** 2 * st.delta ** 2 * (np.abs(st.T_tilde) ** 2 @ w))
    return SinrReport.from_terms("SMMSE", "deteq", **out)


def sinr_rzf(table: LargeScaleTable, los: LoSSet, states=None) -> SinrReport:
    """Downlink RZF precoding under the UatF bound."""
    _check(table, los)
    states = _states(table, los, states)
    L, K, N = table.L, table.K, table.N
    psi = np.array([s.psi_bar for s in states])
    xi_mean = np.array([s.xi_aux.sum() / N for s in states])       # (1/N) sum_i xi_li
    zeta_mean = np.array([s.zeta_aux.sum() / N for s in states])
    out = {n: np.empty((L, K)) for n in ("signal", "noise", "noncoh", "coh")}
    for j, st in enumerate(states):
        lam, Tkk = st.lam, st.Tt_diag
        out["signal"][j] = psi[j] * (1.0 - lam * Tkk) ** 2
        out["noise"][j] = 1.0 / (N * table.rho_dl)
        mu_l = np.stack([states[l].mu[j] for l in range(L)])       # mu_ljk, (L, K)
        gam_l = np.stack([states[l].gamma_coef[j] for l in range(L)])
        out["noncoh"][j] = (psi * xi_mean) @ mu_l + (psi * zeta_mean) @ gam_l
        coh = psi[j] * lam ** 2 * (st.Tt2_diag - Tkk ** 2)
        for l in range(L):
            if l == j:
                continue
            sl = states[l]
            coh = coh + psi[l] * (table.phi[l, j] * sl.delta) ** 2 * sl.lam ** 2 * sl.Tt2_diag
        out["coh"][j] = coh
    return SinrReport.from_terms("RZF", "deteq", **out)


_DETEQ = {"MRT": sinr_mrt, "MRC": sinr_mrc, "SMMSE": sinr_smmse, "RZF": sinr_rzf}


def deteq_report(scheme: str, table: LargeScaleTable, los: LoSSet, states=None) -> SinrReport:
    try:
        fn = _DETEQ[scheme]
    except KeyError:
        raise MisuseError(f"unknown scheme {scheme!r}") from None
    if scheme in ("SMMSE", "RZF"):
        states = _states(table, los, states)
    return fn(table, los, states)


def _limit_Tt(table, los, j):
    phi = table.phi[j, j]
    return _hpd_inverse(table.lam[j] * np.eye(table.K) + np.diag(phi) + los.gram(j))


def sinr_limit(scheme: str, table: LargeScaleTable, los: LoSSet, regime: str = "kn_zero") -> SinrReport:
    """Large-N limits with K/N -> 0.

    ``kn_zero`` keeps the LoS inner products; ``kn_zero_favorable`` assumes
    mutually orthogonal LoS columns (T~ diagonal) and rejects inputs that are
    not.
    """
    _check(table, los)
    if regime not in ("kn_zero", "kn_zero_favorable"):
        raise MisuseError(f"unknown regime {regime!r}")
    if scheme not in _DETEQ:
        raise MisuseError(f"unknown scheme {scheme!r}")
    L, K = table.L, table.K
    _, gdiag, cross = _los_terms(los, L)
    phi_own, _ = _own(table)
    idx = np.arange(L)
    phi_cross = table.phi.copy()
    phi_cross[idx, idx, :] = 0.0
    zeros = np.zeros((L, K))
    s = phi_own + gdiag
    lam = table.lam[:, None]
    if regime == "kn_zero_favorable":
        if not los.is_orthogonal():
            raise MisuseError("favorable regime requires mutually orthogonal LoS columns")
        cross = zeros
        if scheme in ("MRC", "SMMSE"):
            coh = (phi_cross ** 2).sum(axis=1)
            return SinrReport.from_terms(scheme, "limit", s ** 2, zeros, zeros, coh)
        if scheme == "MRT":
            theta = 1.0 / np.mean(s, axis=1)
            coh = np.einsum("l,ljk->jk", theta, phi_cross ** 2)
            return SinrReport.from_terms(scheme, "limit", theta[:, None] * s ** 2, zeros, zeros, coh)
        t = 1.0 / (lam + s)                                   # diagonal T~
        psi = 1.0 / np.mean(s * t ** 2, axis=1)
        coh = np.einsum("l,ljk,lk->jk", psi, phi_cross ** 2, t ** 2)
        return SinrReport.from_terms(scheme, "limit", psi[:, None] * (s * t) ** 2, zeros, zeros, coh)

    if scheme == "MRC":
        coh = cross + (phi_cross ** 2).sum(axis=1)
        return SinrReport.from_terms(scheme, "limit", s ** 2, zeros, zeros, coh)
    if scheme == "MRT":
        theta = 1.0 / np.mean(s, axis=1)
        coh = cross + np.einsum("l,ljk->jk", theta, phi_cross ** 2) / theta[:, None]
        return SinrReport.from_terms(scheme, "limit", s ** 2, zeros, zeros, coh)
    Tts = [_limit_Tt(table, los, j) for j in range(L)]
    Tkk = np.stack([np.real(np.diag(T)) for T in Tts])
    Tt2 = np.stack([(np.abs(T) ** 2).sum(axis=1) for T in Tts])
    signal = (1.0 - lam * Tkk) ** 2
    if scheme == "SMMSE":
        coh = np.stack([lam[j] ** 2 * (Tt2[j] - Tkk[j] ** 2)
                        + np.abs(Tts[j]) ** 2 @ _cross_weights(table, j) for j in range(L)])
        return SinrReport.from_terms(scheme, "limit", signal, zeros, zeros, coh)
    psi = np.array([1.0 / (np.real(np.trace(np.diag(table.phi[j, j]) @ Tts[j] @ Tts[j]))
                           + np.real(np.trace(Tts[j] @ los.gram(j) @ Tts[j]))) * K for j in range(L)])
    coh = psi[:, None] * lam ** 2 * (Tt2 - Tkk ** 2) + np.einsum("l,ljk,lk->jk", psi, phi_cross ** 2, Tt2)
    return SinrReport.from_terms(scheme, "limit", psi[:, None] * signal, zeros, zeros, coh)
