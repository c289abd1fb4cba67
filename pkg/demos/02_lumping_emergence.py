"""
Lumping a treatment-switch model
================================

Five states: the target ``m`` (emergence of a mutant) and two blocks of
two states each. Inside a block the states differ, but every state of a
block reaches each other block at the same total rate, so the block
process is Markov on its own.
"""
import numpy as np

from fptexp import (Generator, build_killed, check_exponentiality, emergence_closed_form,
                    lift_lumped_law, solve_lumped_qsd, survival_curve, validate_partition)

rates = [
    ("a1", "m", 1.0), ("a1", "b1", 0.3), ("a1", "b2", 0.2), ("a1", "a2", 0.7),
    ("a2", "m", 1.0), ("a2", "b2", 0.5), ("a2", "a1", 1.3),
    ("b1", "m", 2.0), ("b1", "a1", 0.25), ("b1", "a2", 0.25), ("b1", "b2", 0.4),
    ("b2", "m", 2.0), ("b2", "a2", 0.5), ("b2", "b1", 0.9),
]
gen = Generator.from_triples(["m", "a1", "a2", "b1", "b2"], ["m"], rates)
blocks = [["m"], ["a1", "a2"], ["b1", "b2"]]

lg = validate_partition(gen, blocks)
print("lumped generator:\n", lg.qbar)

# %%
# Quasi-stationary block masses: numerically and in closed form.
mu_bar, alpha = solve_lumped_qsd(lg)
mu2, alpha_cf = emergence_closed_form(1.0, 2.0, 0.5, 0.5)
print(f"solver:      mu_bar = {mu_bar[1:]}, alpha = {alpha!r}")
print(f"closed form: mu2 = {mu2!r}, alpha = {alpha_cf!r}")
print(f"exact:       mu2 = {np.sqrt(2) / 2!r}, alpha = {2 - np.sqrt(2) / 2!r}")

# %%
# Any law with these block masses gives an exponential passage time.
kg = build_killed(gen)
grid = np.linspace(0.1, 5.0, 6)
for within in ({1: [0.5, 0.5], 2: [0.5, 0.5]}, {1: [0.95, 0.05], 2: [0.0, 1.0]}):
    mu = lift_lumped_law(gen, blocks, mu_bar, within)
    rep = check_exponentiality(kg, mu)
    print(f"within {within}: {rep.verdict}, alpha = {rep.alpha:.12f}")
    print("   survival:", np.round(survival_curve(kg, mu, grid), 12))

# %%
# A law with other block masses is not exponential.
rep = check_exponentiality(kg, lift_lumped_law(gen, blocks, [0.0, 0.2, 0.8]))
print(f"block masses (0.2, 0.8): {rep.verdict}, max |dev| = {rep.max_abs_dev:.3e}")
