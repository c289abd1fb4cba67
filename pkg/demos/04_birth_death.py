"""
Extinction time of a subcritical birth-death process
====================================================

For each rate alpha there is exactly one initial law on {1, 2, ...} that
makes the extinction time Exp(alpha). It is quasi-stationary only when
alpha does not exceed the decay parameter rho = nu - lambda.
"""
import numpy as np

from fptexp import (BirthDeathSpec, bd_extinction_prob, bd_mu_alpha_coeffs, bd_mu_alpha_gf,
                    bd_q_inverse, bd_truncated_generator, build_killed, check_exponentiality,
                    is_qsd)

spec = BirthDeathSpec(1.0, 2.0)
print("rho =", spec.rho)
for t in (0.0, np.log(2), 5.0):
    print(f"  P(extinct by {t:.3f}) = {bd_extinction_prob(spec, t):.15f}")
print("inverse at 2/3:", bd_q_inverse(spec, 2 / 3), "  ln 2 =", np.log(2))

# %%
# The law for alpha = rho is geometric.
c, cls = bd_mu_alpha_coeffs(spec, 1.0, 10)
print(cls, c)
print("generating function at 0.5:", bd_mu_alpha_gf(spec, 1.0, 0.5))

# %%
# Faster rates: still a probability law, but not quasi-stationary.
for alpha in (0.5, 1.0, 1.5):
    c, cls = bd_mu_alpha_coeffs(spec, alpha, 6)
    print(f"alpha = {alpha}: {cls:17s} first coefficients {np.round(c, 5)}")

# %%
# Check on a truncated chain with 200 levels.
level = 200
c, _ = bd_mu_alpha_coeffs(spec, 1.0, level)
kg = build_killed(bd_truncated_generator(spec, level))
mu = c / c.sum()
print("is_qsd:", is_qsd(kg, mu, 1e-6))
print("exponential:", check_exponentiality(kg, mu, tol=1e-9).verdict)
