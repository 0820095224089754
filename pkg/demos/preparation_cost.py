"""
What it costs to make the coherent fuel
=======================================

A thermal three-level atom is rotated into a weakly coherent state with
Householder reflections; the pulse energy is compared with the work the
engine returns.  Run with

    python demos/preparation_cost.py
"""
import numpy as np

from phaseonium_engine import harness, prep
from phaseonium_engine.phaseonium import AtomSpec, CoherenceSpec, build_nlap

np.set_printoptions(precision=4, suppress=True)

rho_th = build_nlap(AtomSpec(2), 2.0, CoherenceSpec(lam=0.0))
rho_c = prep.target_coherent_dm(rho_th, 1e-6)
print("thermal atom at T_h = 2:\n", rho_th.matrix.real)
print("target off-diagonal:", rho_c.matrix[1, 2].real)

U = prep.diagonalizing_unitary(rho_c, reference=rho_th)
print("\ndiagonalising unitary:\n", U.real)
approx = U @ rho_th.matrix @ U.conj().T
print("fidelity of U rho_th U^+ with the target:", prep.uhlmann_fidelity(rho_c, approx))

res = prep.qhr_decompose(U)
for i, s in enumerate(res.steps, 1):
    print(f"reflection {i}: nu = {np.round(s.nu.real, 3)}, phi = {s.phi:.4f}"
          + (" (identity)" if s.is_identity else ""))
print("phase gate:", np.round(res.phase_gate, 3), " reconstruction error:", res.reconstruction_error)
print("pulses:", res.pulse_count)

U_p = prep.pulse_energy_scaled(2.0, 0.5)
print(f"\nsingle pulse at 1/(tau_p gamma) = 2, beam divergence 0.5: U_p = {U_p:.3f} hbar Omega")
for N in (5, 10, 20):
    c = harness.prep_cost(harness.PRESETS["optical"], N)
    print(f"optical N = {N:>2}: W = {c.W:.3e}, U_ss = {c.U_ss:.3e}, U_ss/W = {c.margin:.2e}")
