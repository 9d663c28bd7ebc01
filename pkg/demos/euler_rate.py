"""One regularized Euler step against a fine RK4 reference.

The error of a single step of size eps should shrink like eps^(3/2).
Run: python3 demos/euler_rate.py
"""

import math

import numpy as np

from smcf.flows import EulerSchemeConfig, FlowConfig, euler_step, integrate, willmore_regularize
from smcf.generators import graph_random
from smcf.grid import Grid

grid = Grid((16, 16), (2 * math.pi, 2 * math.pi))
im, fr = graph_random(grid, seed=3, amplitude=0.1, kmax=1)

eps_list = [2.0**-k for k in range(6, 11)]
errors = []
for eps in eps_list:
    reg, rfr = willmore_regularize(im, fr, EulerSchemeConfig(eps))
    step = euler_step(reg, rfr, eps)
    n = max(8, math.ceil(eps / 2e-4))
    ref, _ = integrate(im, fr, FlowConfig(dt=eps / n, t_end=eps))
    err = grid.l2_norm(step.values - ref.values)
    errors.append(err)
    print(f"eps = 2^{int(round(math.log2(eps))):d}  error = {err:.3e}")

slope = np.polyfit(np.log(eps_list), np.log(errors), 1)[0]
print(f"fitted order {slope:.3f}")
