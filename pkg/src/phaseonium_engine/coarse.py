"""Coarse-grained (injection-averaged) model of the cavity field.

The field obeys a birth-death rate equation whose coefficients follow from
integrating out each injected atom:

    dn/dt = R [K_a rho_aa (n + 1) - (R_g0 + R_gc) n] - kappa n,   R = r g^2

General (non-degenerate, arbitrary phases) coefficients are computed by
:func:`coefficients`; :func:`degenerate_closed_forms` gives the simplified
expressions for degenerate lower levels and is kept as a cross-check.

Note on ``K_ij`` at zero detuning: the general expression reduces to
``4 cos(phi) / (gamma * gamma_bar)`` with ``gamma_bar = gamma + gamma_phi``.
The shortcut ``4 cos(phi) / gamma**2`` is not
consistent with the corresponding ``R_gc``; the ``gamma * gamma_bar`` form is
what this module implements.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .phaseonium import AtomSpec, CoherenceSpec, thermal_populations


class GainExceedsLossError(ValueError):
    """The field has no steady state (above threshold)."""


@dataclass(frozen=True)
class EngineParams:
    """Rates and temperatures in units of the cavity frequency."""

    g: float
    r: float
    kappa: float
    gamma: float
    gamma_phi: float = 0.0
    T_h: float = 4.0
    T_c: float | None = None
    compression: float = 1e-3

    def __post_init__(self):
        for name in ("g", "r", "gamma"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.kappa < 0 or self.gamma_phi < 0:
            raise ValueError("kappa and gamma_phi must be non-negative")
        if self.T_c is None:
            object.__setattr__(self, "T_c", self.T_h)
        if not (self.T_h > 0 and self.T_c > 0):
            raise ValueError("temperatures must be positive")
        if not self.compression > 0:
            raise ValueError("compression must be positive")
        if self.compression > 0.1:
            warnings.warn("compression > 0.1 is outside the small-compression bookkeeping", stacklevel=3)

    @property
    def mu(self) -> float:
        return self.r * self.g ** 2 / self.gamma ** 2

    @property
    def gamma_bar(self) -> float:
        return self.gamma + self.gamma_phi

    @property
    def x(self) -> float:
        return self.gamma_phi / self.gamma

    @property
    def R(self) -> float:
        return self.r * self.g ** 2


@dataclass(frozen=True)
class CoarseCoefficients:
    K_a: float
    K_b: np.ndarray
    K_phi: dict = field(default_factory=dict)
    R_g0: float = 0.0
    R_gc: float = 0.0
    rho_aa: float = 0.0


@dataclass(frozen=True)
class SteadyStateResult:
    n_phi: float
    n_bar: float
    n_kappa: float
    T_phi: float
    eta: float
    eta_phi: float
    W: float


# decoherence-factor variants
CONSTANT_EXP = "const"
LINEAR_EXP = "linear"
QUADRATIC_EXP = "quadratic"
MICROSCOPIC = "microscopic"
XI_MODELS = (CONSTANT_EXP, LINEAR_EXP, QUADRATIC_EXP, MICROSCOPIC)


@dataclass(frozen=True)
class DecoherenceModel:
    variant: str = CONSTANT_EXP
    x: float = 0.0

    def __post_init__(self):
        if self.variant not in XI_MODELS:
            raise ValueError(f"unknown decoherence model {self.variant!r}; choose from {XI_MODELS}")
        if self.x < 0:
            raise ValueError("x = gamma_phi / gamma must be non-negative")


def decoherence_factor(model: DecoherenceModel, N: int) -> float:
    if N < 1:
        raise ValueError("N must be >= 1")
    x = model.x
    if model.variant == CONSTANT_EXP:
        return float(np.exp(-x))
    if model.variant == LINEAR_EXP:
        return float(np.exp(-N * x))
    if model.variant == QUADRATIC_EXP:
        return float(np.exp(-N * N * x))
    return 1.0 / (1.0 + x)


def pair_coefficient(delta_i, delta_j, w_ij, phi, gamma, gamma_bar) -> float:
    """``K_ij`` for one coherent pair (detunings, level splitting, phase)."""
    c, s = np.cos(phi), np.sin(phi)
    den_w = w_ij ** 2 + gamma_bar ** 2
    t1 = (2 * c * (delta_i * w_ij + gamma * gamma_bar) + 2 * s * (w_ij - delta_i * gamma_bar)) / (
        (delta_i ** 2 + gamma ** 2) * den_w)
    t2 = (2 * c * (gamma * gamma_bar - delta_j * w_ij) + 2 * s * (w_ij + delta_j * gamma_bar)) / (
        (delta_j ** 2 + gamma ** 2) * den_w)
    return float(t1 + t2)


def coefficients(atom: AtomSpec, params: EngineParams, coh: CoherenceSpec,
                 omega: float = 1.0) -> CoarseCoefficients:
    e_a = atom.e_excited
    e_b = np.array(atom.e_lower)
    delta = (e_a - e_b) - omega
    gam, gbar = params.gamma, params.gamma_bar
    K_b = 2.0 / (delta ** 2 + gam ** 2)
    pe, pg = thermal_populations(atom, params.T_h)
    K_phi = {}
    R_gc = 0.0
    for i, j, mag, ph in coh.pairs(atom.n_lower):
        w_ij = e_b[j] - e_b[i]
        k = pair_coefficient(delta[i], delta[j], w_ij, ph, gam, gbar)
        K_phi[(i, j)] = k
        R_gc += k * mag
    return CoarseCoefficients(
        K_a=float(K_b.sum()), K_b=K_b, K_phi=K_phi,
        R_g0=float(np.dot(K_b, pg)), R_gc=float(R_gc), rho_aa=pe,
    )


def degenerate_closed_forms(N: int, params: EngineParams, lam: float, phi: float):
    """``(K_a, R_g0, R_gc)`` for degenerate lower levels and locked coherences."""
    pe, pg = thermal_populations(AtomSpec(N), params.T_h)
    g, gb = params.gamma, params.gamma_bar
    K_a = 2 * N / g ** 2
    R_g0 = 2 * N * pg[0] / g ** 2
    R_gc = 2 * N * (N - 1) * np.cos(phi) * lam / (g * gb)
    return K_a, R_g0, R_gc


def effective_temperature(n_phi: float, omega: float = 1.0) -> float:
    """Temperature of the thermal state with mean photon number ``n_phi``.

    Returns 0.0 for the vacuum.
    """
    if n_phi < 0:
        raise ValueError("photon number must be non-negative")
    if n_phi == 0:
        return 0.0
    return float(omega / np.log1p(1.0 / n_phi))


def effective_temperature_truncated(n_phi: float, n_max: int, omega: float = 1.0) -> float:
    """Invert the mean of a thermal state renormalised on ``n_max`` Fock levels."""
    from .qcore import truncated_thermal_mean

    if n_phi <= 0:
        return 0.0
    if n_phi >= (n_max - 1) / 2:
        raise ValueError("mean photon number too large for this cutoff")
    f = lambda T: truncated_thermal_mean(T, n_max, omega) - n_phi
    hi = effective_temperature(n_phi, omega)
    while f(hi) < 0:
        hi *= 2
    return float(brentq(f, 1e-3 * hi, hi, xtol=1e-15, rtol=1e-14))


def _gain_ratio(coeffs: CoarseCoefficients) -> float:
    return coeffs.R_g0 / (coeffs.K_a * coeffs.rho_aa)


def steady_n_phi(coeffs: CoarseCoefficients, params: EngineParams) -> SteadyStateResult:
    A = coeffs.K_a * coeffs.rho_aa
    ratio = coeffs.R_g0 / A
    if not ratio > 1:
        raise GainExceedsLossError(f"R_g0/(K_a rho_aa) = {ratio:.6g} <= 1: no sub-threshold steady state")
    n_bar = 1.0 / (ratio - 1.0)
    n_kappa = n_bar / (1.0 + n_bar * params.kappa / (params.R * A))
    den = 1.0 + n_kappa * coeffs.R_gc / A
    if not den > 0:
        raise GainExceedsLossError("coherent gain exceeds loss: steady photon number diverges")
    n_phi = n_kappa / den
    T_phi = effective_temperature(n_phi)
    eta = 1.0 - params.T_c / T_phi
    eta_phi = (1.0 - params.T_c / params.T_h) - (params.T_c / params.T_h) * n_bar * coeffs.R_gc / A
    W = params.T_h * params.compression * eta
    return SteadyStateResult(n_phi, n_bar, n_kappa, T_phi, eta, eta_phi, W)


def high_T_effective_temperature(coeffs: CoarseCoefficients, params: EngineParams) -> float:
    """``T_h / (1 + n_bar R_gc / (K_a rho_aa))`` (lossless, high temperature)."""
    A = coeffs.K_a * coeffs.rho_aa
    n_bar = 1.0 / (coeffs.R_g0 / A - 1.0)
    return params.T_h / (1.0 + n_bar * coeffs.R_gc / A)


def detailed_balance_residual(coeffs: CoarseCoefficients, params: EngineParams, T_phi: float) -> float:
    """``log(up/down rate ratio) + 1/T_phi``; zero when ``T_phi`` balances the rates."""
    A = coeffs.K_a * coeffs.rho_aa
    down = coeffs.R_g0 + coeffs.R_gc + params.kappa / params.R
    return float(np.log(A / down) + 1.0 / T_phi)


# ---------------------------------------------------------------------------
# degenerate large-N rate equation


@dataclass(frozen=True)
class DegenerateRateEquation:
    """``dn/dt = 2 mu N [(P_e - P_g + N xi lam) n + P_e] - kappa n``."""

    params: EngineParams
    N: int
    xi: float
    lam: float
    n0: float = 0.0

    @property
    def populations(self):
        pe, pg = thermal_populations(AtomSpec(self.N), self.params.T_h)
        return pe, float(pg[0])

    @property
    def slope(self) -> float:
        pe, pg = self.populations
        return 2 * self.params.mu * self.N * (pe - pg + self.N * self.xi * self.lam) - self.params.kappa

    @property
    def source(self) -> float:
        pe, _ = self.populations
        return 2 * self.params.mu * self.N * pe

    def rate(self, n):
        return self.slope * n + self.source

    @property
    def fixed_point(self) -> float:
        if not self.slope < 0:
            raise GainExceedsLossError("degenerate rate equation has no stable fixed point")
        return -self.source / self.slope

    @property
    def t_th(self) -> float:
        pe, pg = self.populations
        return 1.0 / (2 * self.params.mu * self.N * (pg - pe))

    @property
    def n_bar(self) -> float:
        pe, pg = self.populations
        return pe / (pg - pe)

    def closed_form(self, t):
        """Relaxation ``n_bar - (n_bar - n0) exp(-t/t_th)`` (lossless, no coherence)."""
        t = np.asarray(t, dtype=float)
        return self.n_bar - (self.n_bar - self.n0) * np.exp(-t / self.t_th)

    def integrate(self, t_eval):
        t_eval = np.asarray(t_eval, dtype=float)
        sol = solve_ivp(lambda t, y: self.rate(y), (0.0, float(t_eval[-1])), [self.n0],
                        t_eval=t_eval, method="DOP853", rtol=1e-12, atol=1e-14)
        if not sol.success:
            raise RuntimeError(sol.message)
        return sol.y[0]


def degenerate_rate_eq(params: EngineParams, N: int, xi: float, lam: float, n0: float = 0.0):
    if N < 2:
        raise ValueError("degenerate rate equation needs N >= 2")
    return DegenerateRateEquation(params, N, xi, lam, n0)


def coherence_count(N: int) -> float:
    """Effective number of coherent pairs: ``N**2`` for N >= 10, else ``N(N-1)/2``."""
    return float(N * N) if N >= 10 else N * (N - 1) / 2.0


def high_T_work_eta(params: EngineParams, N: int, xi: float, lam: float):
    """High-temperature ``(W, eta)`` at ``T_c = T_h``.

    ``eta = n_bar (C(N) xi lam - kappa / 2 mu)`` with ``C`` from
    :func:`coherence_count`; ``W = T_h * compression * eta``.
    """
    if params.T_h < 2:
        warnings.warn("high-temperature closed form used below T_h = 2", stacklevel=2)
    pe, pg = thermal_populations(AtomSpec(N), params.T_h)
    n_bar = pe / (pg[0] - pe)
    eta = n_bar * (coherence_count(N) * xi * lam - params.kappa / (2 * params.mu))
    W = params.T_h * params.compression * eta
    return W, eta
