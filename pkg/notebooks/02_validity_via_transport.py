# %% [markdown]
# # Checking validity by optimal transport
#
# For fixed marginals, the largest expectation of ``F`` over all
# dependence structures is a multi-marginal transport LP.  A value above 1
# proves ``F`` is not a valid merger; the dual functions certify the bound.

# %%
import numpy as np

from emerge import DiscreteDistribution, grid_sample, weighted_merge, worst_case_expectation
from emerge.oracle import SmallInstance, enumerate_couplings_value
from emerge.transport import binary_adversary, normalize_dual, rescale

# %%
F = grid_sample(max, 2, [[0, 1, 2], [0, 1, 2]])
mu = DiscreteDistribution([0, 2], [0.5, 0.5])
cert = worst_case_expectation(F, (mu, mu))
print(cert.primal_value, cert.dual_value, cert.verdict())
print(cert.coupling.points(), cert.coupling.mass)  # antithetic coupling

# %%
# brute force over every vertex of the transportation polytope agrees
print(enumerate_couplings_value(SmallInstance(F, (mu, mu))).value)

# %% [markdown]
# The dual is a pair of univariate functions whose sum dominates ``F``.

# %%
for k, phi in enumerate(cert.dual.phi):
    print(k, phi)

# after dividing by max F, shifting and truncating, the dual lives in [0, 1]
Fs, phis, B = rescale(F, cert.dual)
print(B, [p.round(3) for p in normalize_dual(phis).phi])

# %% [markdown]
# Weighted averages have a dependence-free expectation.

# %%
lam = [0.5, 0.3, 0.2]
G = grid_sample(lambda e: weighted_merge(lam, e), 3, [[0, 1, 2, 3], [0, 0.5, 1, 2, 3]])
nu = DiscreteDistribution([0, 0.5, 1], [0.25, 0.5, 0.25])
print(worst_case_expectation(G, (mu, nu)).primal_value)  # 0.5*1 + 0.3*0.5 + 0.2

# %%
# the two-point adversary: jump to e together with probability 1/max(e)
prod = grid_sample(lambda e: e[0] * e[1], 2, [[0, 1, 2], [0, 1, 2]])
adv = binary_adversary(prod, [2, 2])
print(adv.expectation, adv.violates)
