# %% [markdown]
# # Every valid merger sits below a weighted average
#
# ``dominate`` takes a merger sampled on a grid and returns weights with
# ``F <= (1 + eps) M_lam`` at every grid node.  Internally it finds the
# cheapest separable bound ``sum_k phi_k >= F``, measures each ``phi_k`` by
# its largest mean over e-variable laws, and replaces it by an affine
# majorant.

# %%
import numpy as np

from emerge import dominate, grid_sample, linear_majorant, make_axis, sup_mean_constrained, weighted_merge
from emerge.scenario import schedule

# %%
axis = np.array([0.0, 1.0, 2.0])
print(sup_mean_constrained(axis**2, axis))  # value 2 from P(0) = P(2) = 1/2
print(linear_majorant((1 + axis) / 2, axis, 1.0))  # slope 1/2

# %%
lam_a, lam_b = np.array([0.6, 0.1, 0.3]), np.array([0.1, 0.5, 0.4])
F = grid_sample(lambda e: min(lam_a[:-1] @ e + lam_a[-1], lam_b[:-1] @ e + lam_b[-1]), 4, 5, K=2)
rep = dominate(F, 1e-3)
print(rep.weights.entries, rep.max_violation)

# %% [markdown]
# A weighted average dominates itself, up to the ``1 + eps`` factor.

# %%
lam = [0.5, 0.2, 0.3]
rep = dominate(grid_sample(lambda e: weighted_merge(lam, e), 4, 5, K=2), 1e-3)
print(rep.weights.entries)

# %%
sc = {"kind": "dominate", "function": {"id": "weighted", "lambda": lam}, "grid": {"K": 2, "theta": 4, "points": 5}}
report, _ = schedule(sc, [1e-1, 1e-2, 1e-3], [2, 4, 8])
for cell in report["cells"]:
    print(cell["epsilon"], cell["theta"], np.round(cell["lambda"], 4), round(cell["linf_to_reference"], 5))

# %%
# invalid mergers are refused with a witness
try:
    dominate(grid_sample(max, 2, [make_axis(2, 3)] * 2), 1e-3)
except Exception as exc:
    print(type(exc).__name__, exc)
