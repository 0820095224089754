"""N+1 level phaseonium: a thermal atom with small locked coherences among its
N lower levels.

Basis order of the atomic space: ``|a>`` (index 0), ``|b_1> .. |b_N>``
(indices 1..N) and, optionally, the unpopulated decay sink ``|r>`` last.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .qcore import DensityMatrix, InvalidStateError


class CoherenceError(ValueError):
    """Raised when requested coherences violate positivity."""


@dataclass(frozen=True)
class AtomSpec:
    n_lower: int
    e_excited: float = 1.0
    e_lower: tuple[float, ...] | None = None
    with_auxiliary: bool = False

    def __post_init__(self):
        if self.n_lower < 1:
            raise ValueError("need at least one lower level")
        if self.e_lower is None:
            object.__setattr__(self, "e_lower", (0.0,) * self.n_lower)
        else:
            object.__setattr__(self, "e_lower", tuple(float(e) for e in self.e_lower))
        if len(self.e_lower) != self.n_lower:
            raise ValueError("e_lower must list one energy per lower level")

    @property
    def degenerate(self) -> bool:
        return len(set(self.e_lower)) == 1

    @property
    def n_physical(self) -> int:
        return self.n_lower + 1

    @property
    def dim(self) -> int:
        return self.n_lower + 1 + int(self.with_auxiliary)

    @property
    def energies(self) -> np.ndarray:
        """Energies of the physical levels in basis order (sink excluded)."""
        return np.array((self.e_excited,) + self.e_lower)

    @property
    def lower_indices(self) -> range:
        return range(1, self.n_lower + 1)

    @property
    def aux_index(self) -> int | None:
        return self.n_lower + 1 if self.with_auxiliary else None


@dataclass(frozen=True)
class CoherenceSpec:
    """Uniform phase-locked coherences plus optional per-pair overrides.

    ``per_pair`` maps a pair of lower-level indices ``(i, j)``, 0-based with
    ``i < j``, to ``(magnitude, phase)``.
    """

    lam: float = 1e-6
    phi: float = np.pi
    per_pair: Mapping[tuple[int, int], tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("coherence magnitude must be non-negative")
        for (i, j), (mag, _) in self.per_pair.items():
            if not i < j:
                raise ValueError(f"pair {(i, j)} must satisfy i < j")
            if mag < 0:
                raise ValueError(f"pair {(i, j)} has negative magnitude")

    def pairs(self, n_lower: int):
        """Yield ``(i, j, magnitude, phase)`` for all ``N(N-1)/2`` pairs."""
        for i in range(n_lower):
            for j in range(i + 1, n_lower):
                mag, ph = self.per_pair.get((i, j), (self.lam, self.phi))
                yield i, j, float(mag), float(ph)


def thermal_populations(atom: AtomSpec, T_h: float):
    """Boltzmann weights ``(P_e, [P_g_i])`` of the physical levels at ``T_h``."""
    if not T_h > 0:
        raise ValueError("temperature must be positive")
    E = atom.energies
    if np.isinf(T_h):
        w = np.ones_like(E)
    else:
        logw = -(E - E.min()) / T_h
        w = np.exp(logw)
    p = w / w.sum()
    return float(p[0]), p[1:].copy()


def coherence_bound(atom: AtomSpec, T_h: float) -> float:
    """Smallest pairwise bound ``sqrt(P_i P_j)`` over lower-level pairs."""
    _, pg = thermal_populations(atom, T_h)
    if atom.n_lower < 2:
        return 0.0
    outer = np.sqrt(np.outer(pg, pg))
    iu = np.triu_indices(atom.n_lower, 1)
    return float(outer[iu].min())


def quasi_equilibrium_ratio(atom: AtomSpec, T_h: float, coh: CoherenceSpec) -> float:
    """``lambda * N / min(P_g)``; small values keep the atom near equilibrium."""
    _, pg = thermal_populations(atom, T_h)
    return coh.lam * atom.n_lower / float(pg.min())


def build_nlap(atom: AtomSpec, T_h: float, coh: CoherenceSpec) -> DensityMatrix:
    pe, pg = thermal_populations(atom, T_h)
    d = atom.dim
    rho = np.zeros((d, d), dtype=complex)
    rho[0, 0] = pe
    lo = 1
    rho[lo:lo + atom.n_lower, lo:lo + atom.n_lower] = np.diag(pg)
    for i, j, mag, ph in coh.pairs(atom.n_lower):
        bound = np.sqrt(pg[i] * pg[j])
        if mag > bound * (1 + 1e-12):
            raise CoherenceError(
                f"|rho_b{i + 1}b{j + 1}| = {mag:.6g} exceeds sqrt(P_i P_j) = {bound:.6g}"
            )
        rho[lo + i, lo + j] = mag * np.exp(1j * ph)
        rho[lo + j, lo + i] = mag * np.exp(-1j * ph)
    try:
        return DensityMatrix(rho, (d,))
    except InvalidStateError as exc:
        raise CoherenceError(f"coherences are pairwise admissible but jointly non-positive: {exc}") from exc
