"""Closed-form SINRs for the simplified orthogonal-LoS model and antenna dimensioning.

Model: intracell gain 1 with common Rician factor ``kappa``, intercell gain
``alpha`` (Rayleigh), and mutually orthogonal LoS columns with
``Hbar^H Hbar / N = kappa/(1+kappa) I``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, RegimeError

__all__ = [
    "SimplifiedParams",
    "Cor6Quantities",
    "sinr_mr_simplified",
    "cubic_coefficients",
    "solve_cubic_delta",
    "cor6_quantities",
    "s_over_psi",
    "sinr_mmse_rzf_simplified",
    "gamma_infinity",
    "rate_closedform",
    "antennas_needed",
]


@dataclass(frozen=True)
class SimplifiedParams:
    """Parameters of the simplified model (all SNRs linear).

    ``rho`` is the data SNR of whichever link direction is evaluated.
    ``phi_design`` is added to the regularization ``lam`` (0 by default).
    """

    L: int
    K: int
    N: int
    alpha: float
    kappa: float
    rho_tr: float
    rho: float
    phi_design: float = 0.0

    def __post_init__(self):
        if self.L < 1 or self.K < 1 or self.N < 1:
            raise ConfigError("L, K and N must be positive")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.kappa < 0 or self.rho_tr <= 0 or self.rho <= 0 or self.phi_design < 0:
            raise ConfigError("kappa >= 0, positive SNRs and phi_design >= 0 required")

    def replace(self, **kw) -> "SimplifiedParams":
        return dataclasses.replace(self, **kw)

    @classmethod
    def from_config(cls, config, direction="UL", N=None) -> "SimplifiedParams":
        rho = config.rho_ul if direction == "UL" else config.rho_dl
        N = config.N if N is None else N
        return cls(L=config.L, K=config.K, N=N, alpha=config.alpha,
                   kappa=config.kappa, rho_tr=config.rho_tr, rho=rho,
                   phi_design=config.replace(N=N).phi_design_value)

    @property
    def c(self):
        return self.K / self.N

    @property
    def g(self):
        """LoS power ``kappa/(1+kappa)`` on the Gram diagonal."""
        return self.kappa / (1.0 + self.kappa)

    @property
    def Lbar(self):
        return self.alpha * (self.L - 1) + 1.0 / (1.0 + self.kappa)

    @property
    def nu(self):
        return self.rho_tr / (1.0 + self.rho_tr * self.Lbar)

    @property
    def phi(self):
        return self.nu / (1.0 + self.kappa) ** 2

    @property
    def phi_cross(self):
        return self.alpha * self.nu / (1.0 + self.kappa)

    @property
    def lam(self):
        return self.c * (self.alpha * (self.L - 1) + 1.0 / (1.0 + self.kappa) - self.phi) + self.phi_design

    @property
    def tau(self):
        return 1.0 / (1.0 + self.kappa) + self.kappa / self.nu

    @property
    def A(self):
        k, t = self.kappa, self.tau
        return (self.c * self.Lbar + 1.0 / (self.N * self.rho)) * (1 + k) / t + self.c * k / (t ** 2 * (1 + k))

    @property
    def B(self):
        k, t = self.kappa, self.tau
        return self.Lbar * (1 + k) / t + k / (t ** 2 * (1 + k))

    @property
    def pilot_contamination(self):
        return self.alpha / self.tau ** 2 * (self.Lbar - 1.0 / (1.0 + self.kappa))


def sinr_mr_simplified(p: SimplifiedParams, decompose: bool = False):
    """SINR shared by MRC and MRT.

    With ``decompose=True`` also returns the four denominator terms
    ``{noise, imperfect_csi, interference, pilot_contamination}``.
    """
    k, t, nu = p.kappa, p.tau, p.nu
    denom = ((1 + k) / (nu * p.N * p.rho * t)
             + p.K / (p.N * nu) * (p.Lbar * (1 + k) / t + k / (t ** 2 * (1 + k)))
             + p.pilot_contamination)
    sinr = 1.0 / denom
    if not decompose:
        return sinr
    terms = {
        "noise": p.Lbar * (1 + k) / (t * p.N * p.rho),
        "imperfect_csi": p.A / p.rho_tr,
        "interference": p.c * p.Lbar * p.B,
        "pilot_contamination": p.pilot_contamination,
    }
    return sinr, terms


def cubic_coefficients(p: SimplifiedParams):
    """Coefficients (highest degree first) of the cubic whose positive root is delta~."""
    lam, phi, c, g = p.lam, p.phi, p.c, p.g
    return np.array([lam, 2 * lam + phi * (1 - c), lam + phi * (1 - 2 * c) + g, -phi * c])


def _cardano_real_roots(a, b, c, d):
    """Real roots of ``a x^3 + b x^2 + c x + d`` by the trigonometric/Cardano formulas."""
    b, c, d = b / a, c / a, d / a
    q = (3 * c - b * b) / 9.0
    r = (9 * b * c - 27 * d - 2 * b ** 3) / 54.0
    disc = q ** 3 + r ** 2
    shift = -b / 3.0
    if disc > 0:
        s = math.sqrt(disc)
        return [shift + math.copysign(abs(r + s) ** (1 / 3), r + s) + math.copysign(abs(r - s) ** (1 / 3), r - s)]
    if q == 0:
        return [shift]
    rho = math.sqrt(-q ** 3)
    ang = math.acos(max(-1.0, min(1.0, r / rho)))
    m = 2 * math.sqrt(-q)
    return [shift + m * math.cos((ang + 2 * math.pi * n) / 3.0) for n in range(3)]


def solve_cubic_delta(p: SimplifiedParams) -> float:
    """Unique positive root of the cubic, polished by Newton steps.

    The cubic is negative at 0 and has a single sign change in its
    coefficients, so exactly one positive root exists.
    """
    if p.lam <= 0:
        raise RegimeError(f"lambda must be positive, got {p.lam}")
    coef = cubic_coefficients(p)
    roots = [x for x in _cardano_real_roots(*coef) if x > 0]
    if not roots:
        raise RegimeError("cubic has no positive root")
    x = max(roots)
    dcoef = np.polyder(coef)
    for _ in range(5):
        f = np.polyval(coef, x)
        fp = np.polyval(dcoef, x)
        if fp == 0:
            break
        step = f / fp
        x -= step
        if abs(step) <= 1e-16 * abs(x):
            break
    if not x > 0:
        raise RegimeError("cubic root polishing left the positive half-line")
    return float(x)


@dataclass(frozen=True)
class Cor6Quantities:
    """Intermediate quantities of the simplified S-MMSE/RZF closed form."""

    delta_tilde: float
    delta: float
    t: float                # diagonal entry of T~
    vartheta: float         # (1/N) tr T^2
    vartheta_tilde: float   # (1/N) tr (Phi T~ Phi T~)
    F: float
    Delta: float
    psi_bar: float
    S: float                # 1 - lam t
    X: float
    tau_low: float


def cor6_quantities(p: SimplifiedParams) -> Cor6Quantities:
    dt = solve_cubic_delta(p)
    lam, phi, c, g, k, nu = p.lam, p.phi, p.c, p.g, p.kappa, p.nu
    t = dt / (c * phi)
    delta = dt / phi + (1 - c) / lam
    a = lam * (1 + dt)
    vartheta = (1 - c) / a ** 2 + c / (a + g / (1 + delta * phi)) ** 2
    vt = dt ** 2 / c
    F = g * dt ** 2 / (c * phi * (1 + dt) ** 2)
    Delta = (1 - F) ** 2 - lam ** 2 * vartheta * vt
    if not Delta > 0:
        raise RegimeError(f"Delta={Delta:.3e} <= 0")
    excess = (1 - F) / Delta - 1.0
    if not excess > 0:
        raise RegimeError("psi_bar is not positive")
    psi = c * phi / excess
    S = 1 - lam * t
    X = 1.0 / (excess * (1 + k) / (c * S ** 2))
    tau_low = 1 / (1 + k) + (k / nu) / (lam * delta * (1 + dt))
    return Cor6Quantities(delta_tilde=dt, delta=delta, t=t, vartheta=vartheta, vartheta_tilde=vt,
                          F=F, Delta=Delta, psi_bar=psi, S=S, X=X, tau_low=tau_low)


def s_over_psi(p: SimplifiedParams, q: Cor6Quantities = None, expanded: bool = True) -> float:
    """Non-coherent interference divided by the RZF normalizer.

    ``expanded=True`` evaluates the fully expanded form in (nu, kappa);
    ``expanded=False`` the compact form in (d, phi, F).  Both are equal.
    """
    q = cor6_quantities(p) if q is None else q
    lam, L, a, k, nu = p.lam, p.L, p.alpha, p.kappa, p.nu
    dt, ds, D, r = q.delta_tilde, q.delta, q.Delta, 1.0 / p.c
    inv = 1.0 / D - 1.0
    if expanded:
        k1 = 1 + k
        w = k * k1 / nu * r * dt ** 2 / (1 + dt) ** 2
        cross = a * k1 ** 2 / nu - 2 * lam * a ** 2 * k1 ** 2 * ds * dt * r
        return ((k1 - nu) / nu + lam ** 2 * r ** 2 * dt ** 2 / nu ** 2 * k1 ** 4) * inv \
            - (k1 - nu) / nu ** 2 * k * k1 / D * r * dt ** 2 / (1 + dt) ** 2 \
            + (L - 1) * (cross + a ** 2 * k1 ** 2 * ds ** 2 * lam ** 2 * r ** 2 * dt ** 2) * inv \
            - (L - 1) / D * w * cross
    d, phi, F, vt = 1.0 / (1 + k), p.phi, q.F, q.vartheta_tilde
    cross = a / phi - 2 * lam * a ** 2 * (1 + k) ** 2 * ds * r * dt
    return (d / phi - 1 + lam ** 2 * r / phi ** 2 * vt) * inv - F * (d - phi) / (phi * D) \
        - F * (L - 1) / D * cross \
        + (L - 1) * (cross + a ** 2 * (1 + k) ** 2 * ds ** 2 * lam ** 2 * r * vt) * inv


def sinr_mmse_rzf_simplified(p: SimplifiedParams, decompose: bool = False):
    """SINR shared by S-MMSE and RZF in the simplified model."""
    q = cor6_quantities(p)
    k = p.kappa
    noise = (1 + k) / (p.nu * p.N * p.rho * q.X)
    s_prime = s_over_psi(p, q) / q.S ** 2
    pilot = p.alpha / q.tau_low ** 2 * (p.Lbar - 1 / (1 + k))
    sinr = 1.0 / (noise + s_prime + pilot)
    if not decompose:
        return sinr
    return sinr, {"noise": noise, "noncoherent": s_prime, "pilot_contamination": pilot,
                  "quantities": q}


def gamma_infinity(p: SimplifiedParams):
    """Limit SINR and rate as N grows with K/N -> 0; infinite when L == 1."""
    if p.L == 1:
        return math.inf, math.inf
    g = p.tau ** 2 / (p.alpha ** 2 * (p.L - 1))
    return g, math.log2(1 + g)


_FAMILY = {"MR": sinr_mr_simplified, "MRC": sinr_mr_simplified, "MRT": sinr_mr_simplified,
           "MMSE": sinr_mmse_rzf_simplified, "SMMSE": sinr_mmse_rzf_simplified,
           "RZF": sinr_mmse_rzf_simplified}


def rate_closedform(scheme: str, p: SimplifiedParams) -> float:
    try:
        fn = _FAMILY[scheme.upper()]
    except KeyError:
        raise ConfigError(f"unknown scheme {scheme!r}") from None
    return math.log2(1 + fn(p))


def antennas_needed(target_rate: float, scheme: str, p: SimplifiedParams, n_max: int = 2 ** 40) -> int:
    """Smallest N >= K whose closed-form rate reaches ``target_rate``.

    Raises
    ------
    ConfigError
        If ``target_rate >= R_inf`` (no finite N suffices); the message
        reports ``R_inf``.
    """
    _, r_inf = gamma_infinity(p)
    if target_rate >= r_inf:
        raise ConfigError(f"target rate {target_rate} is infeasible: R_inf = {r_inf:.6f}")

    def ok(n):
        return rate_closedform(scheme, p.replace(N=int(n))) >= target_rate

    lo = p.K
    if ok(lo):
        return lo
    hi = 2 * lo
    while not ok(hi):
        lo = hi
        hi *= 2
        if hi > n_max:
            raise ConfigError(f"target rate {target_rate} not reached below N={n_max}; "
                              f"R_inf = {r_inf:.6f}")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi
