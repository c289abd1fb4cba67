"""
Exponential first passage without quasi-stationarity
====================================================

A two-state transient class that leaks into the target at the same rate
from both states. Every initial law then gives an exponential passage
time, yet only one law is quasi-stationary.
"""
import numpy as np

from fptexp import (Generator, build_killed, check_exponentiality, decay_rate, is_qsd,
                    mu_ladder, quasi_stationary, survival_curve, yaglom_correction)

# state 0 is the target; 1 and 2 each jump there at rate 0.5
gen = Generator.from_triples(
    ["0", "1", "2"], ["0"],
    [("1", "0", 0.5), ("1", "2", 1.0), ("2", "0", 0.5), ("2", "1", 2.0)])
kg = build_killed(gen)
print("killing rates:", kg.eta)

# %%
# Survival from the uniform law against exp(-alpha t).
mu = np.array([0.5, 0.5])
rep = check_exponentiality(kg, mu)
print(f"alpha = {rep.alpha}, verdict = {rep.verdict}, max |dev| = {rep.max_abs_dev:.2e}")

t = np.array([0.5, 1.0, 2.0, 4.0])
for ti, s in zip(t, survival_curve(kg, mu, t)):
    print(f"  t = {ti:4.1f}   P(T > t) = {s:.15f}   exp(-t/2) = {np.exp(-0.5 * ti):.15f}")

# %%
# The same law is not quasi-stationary.
chk = is_qsd(kg, mu)
print(f"uniform law: is_qsd = {chk.is_qsd}, residual = {chk.residual}")

pr = quasi_stationary(kg)
print(f"Perron law {pr.vector[:-1]} with rate {pr.alpha:.15f} ({pr.iterations} iterations)")
print("decay rate:", decay_rate(kg))

# %%
# Ladder of derived laws: each valid level stays exponential with the same rate.
lad = mu_ladder(kg, [0.7, 0.3], 5)
for k, level in enumerate(lad.levels, 1):
    print(f"  level {k}: {level[:-1]}")
print(f"stopped: {lad.terminated_reason}; rejected candidate {lad.rejected[:-1]}")

# %%
# The conditioned law converges to the quasi-stationary one.
pi = yaglom_correction(kg, mu)
print("quasi-limit from the uniform law:", pi[:-1])
