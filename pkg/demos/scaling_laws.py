"""
Work and efficiency against the number of coherent lower levels
===============================================================

Coarse-grained sweeps for the three resonator platforms.  Run with

    python demos/scaling_laws.py
"""
import warnings

import numpy as np

from phaseonium_engine import coarse, harness
from phaseonium_engine.coarse import CONSTANT_EXP, QUADRATIC_EXP

# Circuit QED resonator, constant dephasing factor.  Lower x = weaker dephasing.
sc = harness.PRESETS["circuit_qed"]
rows = harness.run_sweep(sc, models=[CONSTANT_EXP])

print("circuit QED, xi = exp(-x), lambda = 1e-6, T_h = 4")
xs = sorted(sc.x_values[CONSTANT_EXP])
print(f"{'N':>3}" + "".join(f"   eta(x={x:<5})" for x in xs))
for N in (2, 4, 5, 6, 10, 20, 30, 40):
    etas = [next(r.eta for r in rows if r.N == N and r.x == x) for x in xs]
    print(f"{N:>3}" + "".join(f"{e:>15.3e}" for e in etas))

# Efficiency grows like N^2 once the loss offset n kappa / 2 mu is added back.
best = [r for r in rows if r.x == 0.001 and r.N >= 10]
fit = harness.fit_scaling_exponent(best, sc.params)
print(f"\nlog-log slope of eta + n kappa/2mu over N = 10..40: {fit.exponent:.4f}")

# Below five levels the coherent gain cannot beat the cavity loss.
p = harness.PRESETS["optical"].params
print(f"\noptical resonator: kappa / (2 mu lambda) = {p.kappa / (2 * p.mu * 1e-6):.2f}")
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    for N in range(2, 8):
        W, eta = coarse.high_T_work_eta(p, N, 1.0, 1e-6)
        print(f"  N = {N}: eta = {eta:+.3e}  {'engine' if eta > 0 else 'no work'}")

# When dephasing grows with N, an optimal number of levels appears.
print("\nxi = exp(-N^2 x): number of levels with the largest work")
for name in ("circuit_qed", "microwave", "optical"):
    sc = harness.PRESETS[name]
    rows = harness.run_sweep(sc, models=[QUADRATIC_EXP])
    peaks = {}
    for x in sc.x_values[QUADRATIC_EXP]:
        g = sorted((r for r in rows if r.x == x), key=lambda r: r.N)
        peaks[x] = g[int(np.argmax([r.W for r in g]))].N
    print(f"  {name:<12}" + ", ".join(f"x={x}: N*={n}" for x, n in sorted(peaks.items())))
