# %% [markdown]
# # Recovering a density field from scattered samples
#
# Simulate data from a known field, fit the weights by MAP, then sample the
# posterior with pCN started at the MAP point.

# %%
import numpy as np

from slgp import (Dataset, DomainSpec, KernelSpec, MCMCConfig, build_basis, build_grid,
                  map_estimate, pcn_sample, predict_density)
from slgp.density import sample_slice, slogt_values
from slgp.metrics import hellinger

domain = DomainSpec.unit(1, 1)
grid = build_grid(domain, 101)
kernel = KernelSpec.matern(2.5, 1.0, [0.3, 0.3])
basis = build_basis(kernel, domain, p=50, seed=3)

rng = np.random.default_rng(0)
truth = rng.standard_normal(basis.n_features)
x = rng.random((1000, 1))
t = [sample_slice(d, grid, 1, rng)[0] for d in slogt_values(basis, truth, x, grid)]
data = Dataset(x, t, domain)

# %% MAP
fit = map_estimate(basis, data, grid)
print("converged:", fit.converged, " max|grad|:", f"{fit.grad_norm:.1e}")

xs = np.linspace(0.05, 0.95, 5)[:, None]
f_true = slogt_values(basis, truth, xs, grid)
print("Hellinger to truth (MAP):    ", np.round(hellinger(slogt_values(basis, fit.eps, xs, grid), f_true, grid), 3))
print("Hellinger to truth (uniform):", np.round(hellinger(np.ones_like(f_true), f_true, grid), 3))

# %% pCN posterior draws and a predictive summary at x = 0.5
chain = pcn_sample(basis, data, grid, MCMCConfig(beta=0.1, n_iter=4000, burn_in=1000, thin=20), init=fit.eps)
print("acceptance rate:", chain.acceptance_rate)
pred = predict_density(basis, chain, [0.5], grid)
print("posterior quantiles at x=0.5:", np.round(pred.quantile_mean, 3), "+/-", np.round(pred.quantile_std, 3))
