"""Microscopic injection simulator.

Each injection has two stages:

* atom stage (duration ``tau``): a fresh phaseonium atom interacts with the
  field under the resonant fan-shaped coupling, with atomic decay into the
  sink ``|r>`` and pure dephasing of the lower levels; no cavity loss;
* field stage (duration ``tau0``): the empty cavity decays at rate ``kappa``.

The atom stage is integrated in the frame rotating at the cavity frequency:
for resonant degenerate atoms the free part commutes with the coupling and
drops out of all field populations.  The coupling conserves the excitation
number, so a field that starts diagonal in the Fock basis stays diagonal, and
one atom moves the photon number by at most one.  :func:`run_sequence` uses
this to build the exact one-injection transfer matrix on the photon-number
distribution; :func:`atom_stage` evolves the full atom-field state and serves
as the reference for that reduction.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from . import qcore
from .coarse import EngineParams, effective_temperature_truncated
from .cycle import evaluate_cycle
from .phaseonium import AtomSpec, CoherenceSpec, build_nlap
from .qcore import DensityMatrix, FieldSpec


class ObservablesUnavailableError(RuntimeError):
    """Raised when a trace has no detected steady state."""


@dataclass(frozen=True)
class InjectionSchedule:
    tau: float
    tau0: float

    def __post_init__(self):
        if not self.tau > 0 or self.tau0 < 0:
            raise ValueError("need tau > 0 and tau0 >= 0")

    @classmethod
    def from_nex(cls, N_ex: float, kappa: float, tau: float) -> "InjectionSchedule":
        """Schedule with ``N_ex`` atoms per photon lifetime ``1/kappa``."""
        period = 1.0 / (N_ex * kappa)
        if period < tau:
            raise ValueError(f"N_ex={N_ex} leaves no empty-cavity time (1/r < tau)")
        return cls(tau, period - tau)

    @property
    def period(self) -> float:
        return self.tau + self.tau0

    @property
    def r(self) -> float:
        return 1.0 / self.period

    @property
    def N_em(self) -> float:
        return self.tau0 / self.tau

    def N_ex(self, kappa: float) -> float:
        return 1.0 / (kappa * self.period)


@dataclass(frozen=True)
class SimConfig:
    atom: AtomSpec
    coh: CoherenceSpec
    field: FieldSpec
    params: EngineParams
    schedule: InjectionSchedule
    T_field: float = 1.0
    max_injections: int = 5000
    steady_tol: float = 1e-4
    window: int = 50
    steps_per_stage: int = 2000
    # prefactor on gamma_phi for each lower-level projector dissipator
    dephasing_prefactor: float = 0.5

    def __post_init__(self):
        if not self.atom.with_auxiliary:
            object.__setattr__(self, "atom", replace(self.atom, with_auxiliary=True))
        if not self.max_injections >= self.window >= 2:
            raise ValueError("need max_injections >= window >= 2")
        if not np.isclose(self.params.r, self.schedule.r, rtol=1e-12):
            object.__setattr__(self, "params", replace(self.params, r=self.schedule.r))

    @property
    def dt(self) -> float:
        return self.schedule.tau / self.steps_per_stage


@dataclass
class SimTrace:
    times: np.ndarray
    n_bar: np.ndarray
    stage: np.ndarray  # 0 = after atom stage, 1 = after field stage
    injection: np.ndarray
    steady: tuple | None = None  # (n_ss, T_eff, injection index)
    converged: bool = False
    populations: np.ndarray | None = None
    audit: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# operators


def build_interaction_hamiltonian(atom: AtomSpec, field_spec: FieldSpec, g: float,
                                  frame: str = "lab", offset: int = 0) -> np.ndarray:
    """Atom-field Hamiltonian on ``atom (x) field``.

    ``frame="lab"`` gives ``w_a|a><a| + sum w_b|b><b| + W a^+a + g sum(|a><b_i| a + h.c.)``;
    ``frame="rotating"`` removes ``W (|a><a| + a^+a)``, which commutes with
    the coupling.  ``offset`` shifts the Fock window (used internally).
    """
    if frame not in ("lab", "rotating"):
        raise ValueError("frame must be 'lab' or 'rotating'")
    da, nf, W = atom.dim, field_spec.n_max, field_spec.omega
    a = qcore.annihilation(nf, offset)
    If = qcore.identity(nf)
    Ia = qcore.identity(da)
    e_a = atom.e_excited - (W if frame == "rotating" else 0.0)
    H_atom = np.zeros((da, da), dtype=complex)
    H_atom[0, 0] = e_a
    for k, i in enumerate(atom.lower_indices):
        H_atom[i, i] = atom.e_lower[k]
    H = qcore.tensor_product(H_atom, If)
    if frame == "lab":
        H = H + qcore.tensor_product(Ia, W * qcore.number_operator(nf, offset))
    R_plus = np.zeros((da, da), dtype=complex)
    R_plus[0, list(atom.lower_indices)] = 1.0
    coupling = qcore.tensor_product(R_plus, a)
    return H + g * (coupling + coupling.conj().T)


def atom_dissipators(atom: AtomSpec, n_field: int, gamma: float, gamma_phi: float,
                     dephasing_prefactor: float = 0.5):
    """Decay ``|r><alpha|`` of every physical level at ``gamma`` and lower-level
    dephasing ``|b><b|`` at ``dephasing_prefactor * gamma_phi``."""
    r = atom.aux_index
    if r is None:
        raise ValueError("atom needs the auxiliary sink level")
    If = qcore.identity(n_field)
    out = []
    for alpha in range(atom.n_physical):
        out.append((gamma, qcore.tensor_product(qcore.basis_projector(atom.dim, r, alpha), If)))
    for b in atom.lower_indices:
        out.append((dephasing_prefactor * gamma_phi, qcore.tensor_product(qcore.basis_projector(atom.dim, b), If)))
    return out


# ---------------------------------------------------------------------------
# stages on full density matrices


def _fock_phase(n_max: int, omega: float, t: float) -> np.ndarray:
    n = np.arange(n_max)
    ph = np.exp(-1j * omega * t * n)
    return np.outer(ph, ph.conj())


def atom_stage(rho_field: DensityMatrix, cfg: SimConfig, frame: str = "rotating",
               return_joint: bool = False):
    """Inject one fresh atom, evolve for ``tau`` and trace the atom out.

    The integration runs in ``frame``; the returned field is in the lab frame
    (the free-field phase is applied analytically when integrating in the
    rotating frame).
    """
    atom, fs, p = cfg.atom, cfg.field, cfg.params
    if rho_field.dim != fs.n_max:
        raise ValueError("field state does not match the field cutoff")
    rho_atom = build_nlap(atom, p.T_h, cfg.coh)
    joint = qcore.product_state(rho_atom, rho_field)
    H = build_interaction_hamiltonian(atom, fs, p.g, frame=frame)
    diss = atom_dissipators(atom, fs.n_max, p.gamma, p.gamma_phi, cfg.dephasing_prefactor)
    out = qcore.evolve_lindblad(joint, H, diss, cfg.schedule.tau, cfg.dt)
    red = qcore.partial_trace(out, 1).matrix
    if frame == "rotating":
        red = red * _fock_phase(fs.n_max, fs.omega, cfg.schedule.tau)
        red = 0.5 * (red + red.conj().T)
    field_out = DensityMatrix(red, (fs.n_max,))
    return (field_out, out) if return_joint else field_out


@lru_cache(maxsize=64)
def _log_binom(n_max: int) -> np.ndarray:
    n = np.arange(n_max)
    return gammaln(n[:, None] + 1) - gammaln(n[None, :] + 1) - gammaln(np.maximum(n[:, None] - n[None, :], 0) + 1)


def loss_channel_matrix(n_max: int, survival: float) -> np.ndarray:
    """Photon-number transfer matrix ``T[m, n] = C(n, m) s^m (1-s)^(n-m)``."""
    if not 0 <= survival <= 1:
        raise ValueError("survival probability must lie in [0, 1]")
    lb = _log_binom(n_max).T  # [m, n] -> log C(n, m)
    m = np.arange(n_max)[:, None]
    n = np.arange(n_max)[None, :]
    k = n - m
    with np.errstate(divide="ignore", invalid="ignore"):
        ls, lf = np.log(survival), np.log1p(-survival)
        logT = lb + np.where(m > 0, m * ls, 0.0) + np.where(k > 0, k * lf, 0.0)
        return np.where(k >= 0, np.exp(logT), 0.0)


def field_stage(rho_field: DensityMatrix, cfg: SimConfig) -> DensityMatrix:
    """Empty-cavity evolution for ``tau0``: free rotation plus photon loss.

    Uses the exact solution of the loss master equation (Kraus form).
    """
    t = cfg.schedule.tau0
    if t == 0:
        return rho_field
    nf = rho_field.dim
    s = float(np.exp(-cfg.params.kappa * t))
    rho = np.asarray(rho_field.matrix)
    out = np.zeros_like(rho)
    lb = _log_binom(nf)
    n = np.arange(nf)
    for k in range(nf):
        # K_k |n> = sqrt(C(n,k) s^(n-k) (1-s)^k) |n-k>
        src = n[k:]
        with np.errstate(divide="ignore"):
            logamp = 0.5 * (lb[src, k] + (src - k) * np.log(s) + (k * np.log1p(-s) if k else 0.0))
        amp = np.exp(logamp)
        Kk = np.zeros((nf, nf))
        Kk[src - k, src] = amp
        out += Kk @ rho @ Kk.T
    out = out * _fock_phase(nf, cfg.field.omega, t)
    out = 0.5 * (out + out.conj().T)
    return DensityMatrix(out, rho_field.dims)


# ---------------------------------------------------------------------------
# population transfer matrices


def _audit_states(states, audit: dict) -> None:
    for m in states:
        audit["trace_drift"] = max(audit.get("trace_drift", 0.0), abs(np.trace(m).real - 1.0))
        audit["hermiticity"] = max(audit.get("hermiticity", 0.0), qcore.hermiticity_error(m))
        audit["min_eigenvalue"] = min(audit.get("min_eigenvalue", 0.0), qcore.min_eigenvalue(m))


def _atom_window_column(cfg: SimConfig, n: int, audit: dict | None = None):
    """Field populations after one atom stage started from Fock state ``|n>``."""
    nf = cfg.field.n_max
    lo, hi = max(n - 1, 0), min(n + 1, nf - 1)
    w = hi - lo + 1
    wspec = FieldSpec(n_max=w, omega=cfg.field.omega, tail_tol=1.0)
    atom, p = cfg.atom, cfg.params
    rho_atom = build_nlap(atom, p.T_h, cfg.coh)
    f0 = np.zeros((w, w), dtype=complex)
    f0[n - lo, n - lo] = 1.0
    joint = qcore.product_state(rho_atom, DensityMatrix(f0, (w,)))
    H = build_interaction_hamiltonian(atom, wspec, p.g, frame="rotating", offset=lo)
    diss = atom_dissipators(atom, w, p.gamma, p.gamma_phi, cfg.dephasing_prefactor)
    _, states = qcore.lindblad_trajectory(joint, H, diss, cfg.schedule.tau, cfg.dt, n_samples=4)
    if audit is not None:
        _audit_states(states, audit)
    m = states[-1]
    red = np.einsum("ajak->jk", m.reshape(atom.dim, w, atom.dim, w))
    return np.arange(lo, hi + 1), np.real(np.diag(red))


def atom_transfer_matrix(cfg: SimConfig, audit: dict | None = None) -> np.ndarray:
    """``M[m, n]`` = probability that one atom stage maps ``|n>`` to ``|m>``."""
    nf = cfg.field.n_max
    M = np.zeros((nf, nf))
    for n in range(nf):
        idx, pops = _atom_window_column(cfg, n, audit)
        M[idx, n] = pops
    return M


def field_transfer_matrix(cfg: SimConfig) -> np.ndarray:
    return loss_channel_matrix(cfg.field.n_max, float(np.exp(-cfg.params.kappa * cfg.schedule.tau0)))


def stationary_populations(cfg: SimConfig, M_atom=None, M_field=None):
    """Exact fixed point of the one-injection map, sampled after the field stage
    and after the atom stage: ``(p_after_field, p_after_atom)``."""
    Ma = atom_transfer_matrix(cfg) if M_atom is None else M_atom
    Mf = field_transfer_matrix(cfg) if M_field is None else M_field
    T = Mf @ Ma
    w, v = np.linalg.eig(T)
    k = int(np.argmin(np.abs(w - 1)))
    p = np.abs(np.real(v[:, k]))
    p /= p.sum()
    return p, Ma @ p


# ---------------------------------------------------------------------------
# injection sequence


def run_sequence(cfg: SimConfig, *, stop_at_steady: bool = True) -> SimTrace:
    """Alternate atom and field stages, recording the mean photon number after each.

    With ``tau0 = 0`` the field stage is the identity and only the
    post-atom samples are recorded.
    """
    nf = cfg.field.n_max
    audit: dict = {}
    Ma = atom_transfer_matrix(cfg, audit)
    Mf = field_transfer_matrix(cfg)
    p = qcore.thermal_field_state(cfg.field, cfg.T_field).populations()
    nvec = np.arange(nf)
    period, tau = cfg.schedule.period, cfg.schedule.tau
    both = cfg.schedule.tau0 > 0
    per = 2 if both else 1
    K = cfg.max_injections
    times, nbar, stage, inj = [], [], [], []
    cycle_mean = []
    steady = None
    w = cfg.window
    for k in range(1, K + 1):
        p = Ma @ p
        times.append((k - 1) * period + tau)
        nbar.append(nvec @ p)
        stage.append(0)
        inj.append(k)
        if both:
            p = Mf @ p
            times.append(k * period)
            nbar.append(nvec @ p)
            stage.append(1)
            inj.append(k)
        cycle_mean.append(np.mean(nbar[-per:]))
        audit["population_min"] = min(audit.get("population_min", 0.0), float(p.min()))
        audit["population_sum_drift"] = max(audit.get("population_sum_drift", 0.0), abs(p.sum() - 1.0))
        if k >= 2 * w:
            recent = float(np.mean(cycle_mean[k - w:k]))
            prev = float(np.mean(cycle_mean[k - 2 * w:k - w]))
            if abs(recent - prev) <= cfg.steady_tol * abs(recent):
                steady = (recent, effective_temperature_truncated(recent, nf), k)
                if stop_at_steady:
                    break
            elif not stop_at_steady:
                steady = None
    trace = SimTrace(np.array(times), np.array(nbar), np.array(stage), np.array(inj),
                     steady=steady, converged=steady is not None, populations=p, audit=audit)
    if steady is None:
        warnings.warn(f"no steady state within {K} injections", RuntimeWarning, stacklevel=2)
    return trace


def observables(trace: SimTrace, cfg: SimConfig):
    """``(T_eff, W, eta)`` of the steady state with the cold bath at ``T_h``."""
    if trace.steady is None:
        raise ObservablesUnavailableError("trace has no steady state")
    n_ss, T_eff, _ = trace.steady
    T_c = cfg.params.T_h
    res = evaluate_cycle(T_eff, T_c, qcore.bose_einstein(T_eff), qcore.bose_einstein(T_c))
    return T_eff, res.W_net, res.eta


def make_config(N: int, params: EngineParams, schedule: InjectionSchedule, lam: float,
                phi: float = np.pi, n_max: int = 15, **kw) -> SimConfig:
    atom = AtomSpec(N, with_auxiliary=True)
    return SimConfig(atom=atom, coh=CoherenceSpec(lam=lam, phi=phi),
                     field=FieldSpec(n_max=n_max, tail_tol=kw.pop("tail_tol", 1e-6)),
                     params=replace(params, r=schedule.r), schedule=schedule, **kw)
