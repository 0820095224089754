"""Carnot-cycle bookkeeping for the photon gas.

Corners 1..4 start the isothermal expansion, adiabatic expansion, isothermal
compression and adiabatic compression.  The adiabats keep the photon number
fixed, so ``S_1 = S_4`` and ``S_2 = S_3``; the expansion runs at ``T_phi`` and
the compression at ``T_c``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CycleCorner:
    n_bar: float
    T: float
    omega: float = 1.0

    def __post_init__(self):
        if self.n_bar < 0 or not self.T > 0:
            raise ValueError("corner needs n_bar >= 0 and T > 0")


@dataclass(frozen=True)
class CycleResult:
    S: tuple[float, float, float, float]
    Q_in: float
    Q_out: float
    W_net: float
    eta: float
    refrigerator: bool = False


def entropy(corner: CycleCorner) -> float:
    n = corner.n_bar
    return float(np.log1p(n) + corner.omega * n / corner.T)


def evaluate_cycle(T_phi: float, T_c: float, n2: float, n1: float) -> CycleResult:
    """Close the cycle from the hot-side photon number ``n2`` and the
    cold-side one ``n1`` (both thermal at the reference frequency)."""
    S1 = entropy(CycleCorner(n1, T_c))
    S2 = entropy(CycleCorner(n2, T_phi))
    S = (S1, S2, S2, S1)
    dS = S2 - S1
    Q_in = T_phi * dS
    Q_out = T_c * (S[2] - S[3])
    W = Q_in - Q_out
    eta = 1.0 - T_c / T_phi
    return CycleResult(S, Q_in, Q_out, W, eta, refrigerator=dS < 0)
