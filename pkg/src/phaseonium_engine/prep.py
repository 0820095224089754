"""Preparation cost of the coherent atomic fuel.

The thermal atom is rotated towards a slightly coherent target by a unitary
that diagonalises the target.  That unitary is factored into quantum
Householder reflections ``M(nu; phi) = I + (e^{i phi} - 1)|nu><nu|``; each
reflection is driven by one pulse per lower level, which sets the pulse count
and hence the energy bill compared against the harvested work.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import constants

from .qcore import DensityMatrix, InvalidStateError


class NotUnitaryError(ValueError):
    pass


class EngineNotOperatingError(ValueError):
    """Raised when the harvested work is not positive."""


# ---------------------------------------------------------------------------
# states


def target_coherent_dm(rho_th: DensityMatrix, lam: float, lower=None) -> DensityMatrix:
    """Add real coherence ``lam`` between every pair of lower levels.

    ``lower`` lists the lower-level indices; by default every level except
    the first (the excited one).
    """
    m = np.array(rho_th.matrix)
    if np.abs(m - np.diag(np.diag(m))).max() > 0:
        raise ValueError("thermal state must be diagonal")
    idx = list(range(1, rho_th.dim)) if lower is None else list(lower)
    for a in idx:
        for b in idx:
            if a != b:
                m[a, b] = lam
    try:
        return DensityMatrix(m, rho_th.dims)
    except InvalidStateError as exc:
        raise InvalidStateError(f"lambda={lam} breaks positivity: {exc}") from exc


def _phase_fix(v: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    k = int(np.argmax(np.abs(v) > tol))
    return v * np.exp(-1j * np.angle(v[k]))


def diagonalizing_unitary(rho_c, reference=None) -> np.ndarray:
    """Unitary whose columns are eigenvectors of ``rho_c``.

    Columns are ordered so that their eigenvalues follow the rank order of
    the diagonal of ``reference`` (typically the thermal state being rotated),
    or descending when no reference is given.  Each column's first
    non-negligible entry is made real and positive.  With this ordering
    ``U reference U^+`` approximates ``rho_c``.
    """
    m = np.asarray(rho_c, dtype=complex)
    if np.abs(m - m.conj().T).max() > 1e-10:
        raise ValueError("matrix is not Hermitian")
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    desc = np.argsort(-w, kind="stable")
    if reference is None:
        order = desc
    else:
        ref = np.real(np.diag(np.asarray(reference)))
        # k-th largest eigenvalue goes to the slot holding the k-th largest reference weight
        slots = np.argsort(-ref, kind="stable")
        order = np.empty_like(desc)
        order[slots] = desc
    U = v[:, order]
    return np.column_stack([_phase_fix(U[:, k]) for k in range(U.shape[1])])


def uhlmann_fidelity(rho, sigma) -> float:
    """``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2``."""
    a = np.asarray(rho, dtype=complex)
    b = np.asarray(sigma, dtype=complex)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch {a.shape} vs {b.shape}")
    w, v = np.linalg.eigh(0.5 * (a + a.conj().T))
    sa = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    inner = sa @ b @ sa
    ev = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    f = float(np.sum(np.sqrt(np.clip(ev, 0, None))) ** 2)
    return min(max(f, 0.0), 1.0)


# ---------------------------------------------------------------------------
# Householder reflections


@dataclass(frozen=True)
class QHRStep:
    nu: np.ndarray
    phi: float = np.pi

    def __post_init__(self):
        nu = np.asarray(self.nu, dtype=complex)
        n = np.linalg.norm(nu)
        if not (n < 1e-14 or abs(n - 1) < 1e-10):
            raise ValueError(f"reflection vector must be normalised or zero (|nu| = {n:.3g})")
        object.__setattr__(self, "nu", nu)

    @property
    def is_identity(self) -> bool:
        return bool(np.linalg.norm(self.nu) < 1e-14)


def qhr_matrix(step: QHRStep) -> np.ndarray:
    nu = step.nu
    return np.eye(nu.size, dtype=complex) + (np.exp(1j * step.phi) - 1) * np.outer(nu, nu.conj())


@dataclass(frozen=True)
class DecompositionResult:
    steps: tuple[QHRStep, ...]
    phase_gate: np.ndarray
    reconstruction_error: float
    pulse_count: int
    mode: str

    def reconstruct(self) -> np.ndarray:
        out = np.eye(self.phase_gate.size, dtype=complex)
        for s in self.steps:
            out = out @ qhr_matrix(s)
        return out @ np.diag(self.phase_gate)


def _check_unitary(U: np.ndarray, tol: float = 1e-10) -> None:
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise NotUnitaryError("matrix must be square")
    err = np.abs(U.conj().T @ U - np.eye(U.shape[0])).max()
    if err > tol:
        raise NotUnitaryError(f"U^+U deviates from identity by {err:.2e}")


def qhr_decompose(U, mode: str = "standard", tol: float = 1e-12) -> DecompositionResult:
    """Factor ``U`` into reflections.

    ``mode="standard"``: ``d-1`` reflections with ``phi = pi`` followed by a
    diagonal phase gate, ``U = M_1 ... M_{d-1} Phi``.
    ``mode="generalized"``: ``d`` reflections with phases
    ``phi_i = 2 arg(1 - u_ii) + pi`` and a trivial phase gate.

    A column that already equals its basis vector (up to a phase in standard
    mode) yields an explicit zero-vector step.
    """
    V = np.array(U, dtype=complex)
    _check_unitary(V)
    d = V.shape[0]
    steps = []
    if mode == "standard":
        for i in range(d - 1):
            v = V[:, i]
            off = np.linalg.norm(np.delete(v, i))
            if off < tol:
                steps.append(QHRStep(np.zeros(d)))
                continue
            uii = v[i]
            alpha = np.pi - np.angle(uii) if abs(uii) > tol else 0.0
            w = np.exp(1j * alpha) * v  # w_ii = -|u_ii|, real
            e = np.zeros(d)
            e[i] = 1.0
            nu = e - w
            nu /= np.linalg.norm(nu)
            s = QHRStep(nu, np.pi)
            steps.append(s)
            V = qhr_matrix(s) @ V
        gate = np.diag(V).copy()
    elif mode == "generalized":
        for i in range(d):
            v = V[:, i]
            e = np.zeros(d)
            e[i] = 1.0
            diff = v - e
            if np.linalg.norm(diff) < tol:
                steps.append(QHRStep(np.zeros(d)))
                continue
            uii = v[i]
            phi = float(np.mod(2 * np.angle(1 - uii) + np.pi, 2 * np.pi))
            pref = np.sqrt(2 * np.sin(phi / 2) / abs(1 - uii)) / (np.exp(-1j * phi) - 1)
            nu = pref * diff
            nu /= np.linalg.norm(nu)  # removes rounding only
            s = QHRStep(nu, phi)
            steps.append(s)
            V = qhr_matrix(s).conj().T @ V
        gate = np.ones(d, dtype=complex)
    else:
        raise ValueError("mode must be 'standard' or 'generalized'")
    res = DecompositionResult(tuple(steps), gate, 0.0, 0, mode)
    err = float(np.linalg.norm(res.reconstruct() - np.asarray(U), ord=2))
    n_active = sum(not s.is_identity for s in steps)
    return DecompositionResult(tuple(steps), gate, err, n_active * d, mode)


# ---------------------------------------------------------------------------
# energetics


@dataclass(frozen=True)
class PulseEnergy:
    """Single-pulse figures.  SI values for ``d``, ``E_p``, ``I_p``, ``r_b``;
    energies in units of ``hbar * omega``."""

    d: float
    E_p: float
    I_p: float
    r_b: float
    U_p: float
    U_p_chain: float
    area: float


def pulse_energy(omega: float, gamma: float, tau_p: float, zeta: float,
                 area: float = 2 * np.pi) -> PulseEnergy:
    """Energy of one square pulse of duration ``tau_p`` (SI inputs).

    ``U_p`` is the closed form ``(pi^2/6) / (tau_p gamma zeta^2)``.
    ``U_p_chain`` follows dipole -> amplitude -> intensity -> beam energy for
    pulse ``area``; it equals ``area^2 / (6 tau_p gamma zeta^2)``, so it
    coincides with the closed form at ``area = pi``.
    """
    for name, v in (("omega", omega), ("gamma", gamma), ("tau_p", tau_p), ("zeta", zeta), ("area", area)):
        if not v > 0:
            raise ValueError(f"{name} must be positive")
    hbar, c, eps0 = constants.hbar, constants.c, constants.epsilon_0
    d = np.sqrt(3 * np.pi * eps0 * hbar * c ** 3 * gamma / omega ** 3)
    E_p = area * hbar / (tau_p * d)
    I_p = c * eps0 * E_p ** 2 / 2
    r_b = c / (omega * zeta)
    U_chain = np.pi * r_b ** 2 * I_p * tau_p / (hbar * omega)
    U_p = (np.pi ** 2 / 6) / (tau_p * gamma * zeta ** 2)
    return PulseEnergy(float(d), float(E_p), float(I_p), float(r_b), float(U_p), float(U_chain), area)


def pulse_energy_scaled(inv_tau_gamma: float, zeta: float) -> float:
    """Closed-form ``U_p / (hbar omega)`` from ``1/(tau_p gamma)`` and ``zeta``."""
    if not (inv_tau_gamma > 0 and zeta > 0):
        raise ValueError("inputs must be positive")
    return float((np.pi ** 2 / 6) * inv_tau_gamma / zeta ** 2)


def atoms_to_steady(r: float, dt_s: float) -> float:
    """``m = r * dt_s``, at least one atom."""
    return max(1.0, r * dt_s)


def second_law_margin(N: int, m: float, U_p: float, W: float) -> float:
    """``U_ss / W`` with ``U_ss = m N^2 U_p``."""
    if not W > 0:
        raise EngineNotOperatingError(f"W = {W:.3g} <= 0: engine is not operating")
    if not (m > 0 and U_p > 0 and N >= 1):
        raise ValueError("need m > 0, U_p > 0 and N >= 1")
    return float(m * N ** 2 * U_p / W)


@dataclass(frozen=True)
class PulseCost:
    d: float
    E_p: float
    U_p: float
    U_c: float
    U_ss: float
    W: float
    margin: float


def preparation_cost(N: int, m: float, W: float, pulse: PulseEnergy) -> PulseCost:
    margin = second_law_margin(N, m, pulse.U_p, W)
    U_c = N ** 2 * pulse.U_p
    return PulseCost(pulse.d, pulse.E_p, pulse.U_p, U_c, m * U_c, W, margin)
