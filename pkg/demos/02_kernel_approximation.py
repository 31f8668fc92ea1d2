# %% [markdown]
# # How many Fourier features?
#
# The random-feature kernel is a Monte Carlo estimate of the exact one, so
# its worst-case error shrinks roughly like 1 / sqrt(p).

# %%
import numpy as np

from slgp import DomainSpec, KernelSpec, build_basis
from slgp.kernels import eval_kernel
from slgp.rff import approx_kernel

domain = DomainSpec.unit(2, 1)
kernel = KernelSpec.matern(2.5, 1.0, [0.5, 0.5, 0.5])
rng = np.random.default_rng(0)
y, y2 = rng.random((200, 3)), rng.random((200, 3))
exact = eval_kernel(kernel, y, y2)

# %%
for p in (32, 128, 512, 2048):
    b = build_basis(kernel, domain, p, seed=1)
    err = np.abs(approx_kernel(b, y, y2) - exact).max()
    print(f"p={p:5d}  max error={err:.4f}  sqrt(p)*error={np.sqrt(p) * err:.2f}")
