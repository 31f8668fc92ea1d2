# %% [markdown]
# # Mean-power continuity of random density fields
#
# E[D(Y_x, Y_x+h)] shrinks with the lag h at a rate set by the kernel's
# smoothness. Compare the Gaussian and exponential kernels (small run).

# %%
from slgp import KernelSpec, RateExperiment, build_grid, DomainSpec
from slgp.rates import simulate_mean_power

grid = build_grid(DomainSpec.unit(1, 1), 201)
for name, kernel in [("gaussian", KernelSpec.squared_exponential(1.0, [1.0, 1.0])),
                     ("exponential", KernelSpec.matern(0.5, 1.0, [1.0, 1.0]))]:
    for metric in ("hellinger", "kl", "tv"):
        res = simulate_mean_power(RateExperiment(kernel, metric, gamma=1.0, n_reps=200, p=256), grid)
        print(f"{name:12s} {metric:9s} slope={res.slope:.2f}  bound exponent={res.theoretical:.1f}")
