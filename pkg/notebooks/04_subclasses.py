# %% [markdown]
# # Mergers for restricted classes of inputs
#
# Knowing more about the inputs (their marginals, second moments, that
# they are identical, or exchangeable) licenses rules that are not weighted
# averages.  Their validity is checked here by seeded Monte Carlo with
# three-standard-error bands.

# %%
import numpy as np

from emerge.montecarlo import identical_two_point, iid_exponential, permutation
from emerge.subclasses import (
    Calibrator,
    MarginalModel,
    calibrated_merge,
    check_validity,
    compare_rules,
    exchangeable_merge,
    exchangeable_tail_check,
    full_support_admissibility_check,
    identical_merge,
    product_points,
    uniform_weights,
    weighted_average,
)

# %%
cal = Calibrator.from_function(lambda p: 0.5 / np.sqrt(p))
g = MarginalModel.exponential()
print(cal.integral, calibrated_merge([1.0, 0.0], [cal], [g], [2.0]), np.exp(1) / 2)

# %%
rep = check_validity(lambda X: identical_merge(0.0, X), identical_two_point(3, 4.0), 10**6, seed=1)
print(rep.to_dict())

# %%
sampler = permutation([5, 0, 0, 0, 0])
for beta in (1.5, 2, 5):
    tail = exchangeable_tail_check(beta, sampler, 10**6, seed=42)
    print(beta, tail.estimate.mean, tail.estimate.se, 1 / beta)

# %%
lam = uniform_weights(3)
cmp = compare_rules(lambda X: exchangeable_merge(2.0, X), lambda X: weighted_average(lam, X), product_points([0, 1, 2, 3], 3))
print(cmp.to_dict())

# %% [markdown]
# On inputs with full support a weighted average has expectation exactly 1,
# so raising it anywhere pushes the expectation above 1.

# %%
w = [0.4, 0.4, 0.2]
better = lambda X: weighted_average(w, X) + 0.05 * (X[:, 0] > 1)
rep = full_support_admissibility_check(lambda X: weighted_average(w, X), iid_exponential(2), better, 10**6, seed=7)
print(rep.verdict, rep.estimate)
