# %% [markdown]
# # Merging e-values with weighted averages
#
# An e-value is the realised value of a nonnegative statistic whose mean
# under the null is at most 1.  Weighted averages of e-values, padded with
# the constant 1, are again e-values whatever the dependence.

# %%
import numpy as np

from emerge import grid_sample, structural_upper_check, test_to_evalue, weighted_merge

# %%
lam = [0.5, 0.3, 0.2]  # two inputs plus weight on the constant 1
print(weighted_merge(lam, [2, 1]))  # 0.5*2 + 0.3*1 + 0.2 = 1.5

# %%
# a test that rejects at level alpha, turned into an e-value
print(test_to_evalue(1.0, 0.05))  # 20

# %% [markdown]
# Any valid merger must stay below ``max(1, max(e))``.  The product of two
# e-values breaks that cap; the weighted average never does.

# %%
prod = grid_sample(lambda e: e[0] * e[1], 2, [[0, 1, 2], [0, 1, 2]])
print(prod.values)
print(structural_upper_check(prod))

avg = grid_sample(lambda e: weighted_merge(lam, e), 4, 5, K=2)
print(structural_upper_check(avg).passed)

# %%
rng = np.random.default_rng(0)
e = rng.exponential(size=(5, 2))
print(np.c_[e, [weighted_merge(lam, row) for row in e]])
