"""
Repeated injection of phaseonium atoms into a Rydberg cavity
============================================================

Microscopic simulation: one atom at a time interacts with the cavity for
tau = 10 us, then the cavity decays alone for tau0.  Run with

    python demos/injection_thermalization.py
"""
import warnings
from dataclasses import replace

import numpy as np

from phaseonium_engine import coarse, harness, microsim, qcore
from phaseonium_engine.phaseonium import AtomSpec

W0 = harness.RYDBERG_OMEGA
sc = harness.PRESETS["rydberg_nex4000"]
p = sc.params
print(f"Rydberg cavity: g = {p.g * W0:.0f} Hz, gamma = {p.gamma * W0:.1f} Hz, Q = {harness.RYDBERG_Q:.0e}")

# More atoms per photon lifetime -> less time for the empty cavity to leak.
print("\nN = 2, lambda = 1e-3: dependence on atoms per photon lifetime")
for N_ex in (50, 100, 150, 1500, 4500):
    sch = microsim.InjectionSchedule.from_nex(N_ex, p.kappa, sc.micro.tau)
    cfg = microsim.make_config(2, p, sch, lam=1e-3)
    tr = microsim.run_sequence(cfg)
    swing = np.abs(np.diff(tr.n_bar[-20:])).max()
    print(f"  N_ex = {N_ex:>5}: tau0 = {sch.tau0 / W0 * 1e6:8.1f} us, steady n = {tr.steady[0]:.4f} "
          f"after {tr.steady[2]} atoms, zigzag {swing:.1e}")

# Losses against coherence at N_ex = 4000.
print("\nN_ex = 4000")
n_thermal = qcore.bose_einstein(p.T_h)
for N in (2, 3, 4):
    cfg = harness.micro_config(sc, N)
    tr = microsim.run_sequence(cfg)
    exact, _ = microsim.stationary_populations(cfg)
    lossless = replace(p, kappa=0.0)
    n_phi = coarse.steady_n_phi(coarse.coefficients(AtomSpec(N), lossless, sc.coh), lossless).n_phi
    print(f"  N = {N}: windowed steady n = {tr.steady[0]:.4f}, exact fixed point {exact @ np.arange(exact.size):.4f}, "
          f"lossless analytic n_phi = {n_phi:.4f}, thermal n = {n_thermal:.4f}")

# Without losses or coherence the cavity simply thermalises to the atoms.
cfg = replace(harness.micro_config(sc, 2), coh=replace(sc.coh, lam=0.0),
              params=replace(p, kappa=0.0))
tr = microsim.run_sequence(cfg)
T_eff, W, eta = microsim.observables(tr, cfg)
print(f"\nlambda = 0, kappa = 0: T_eff = {T_eff:.4f} (atoms at T_h = {p.T_h})")

# Steady state at N_ex = 12000 against the coarse-grained model.
print("\nmicro vs analytic at N_ex = 12000")
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    rep = harness.compare(harness.PRESETS["rydberg"])
print("\n".join("  " + ln for ln in rep.lines()))
