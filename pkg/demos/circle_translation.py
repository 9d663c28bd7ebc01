"""A round circle in R^3 slides along its axis at speed 1/r without changing shape.

Run: python3 demos/circle_translation.py
"""

import math

import numpy as np

from smcf.flows import FlowConfig, integrate
from smcf.generators import circle
from smcf.grid import Grid

grid = Grid((128,), (2 * math.pi,))
for r in (0.5, 1.0, 2.0):
    im, fr = circle(grid, r)
    times, heights = [], []
    cfg = FlowConfig(dt=1e-3 * r * r, t_end=0.2 * r * r, substeps=2)
    out, _ = integrate(im, fr, cfg, observer=lambda s, f, n: (times.append(s.time), heights.append(s.values[..., 2].mean())))
    speed = np.polyfit(times, heights, 1)[0]
    radius = np.hypot(out.values[..., 0], out.values[..., 1])
    print(f"r = {r:4.2f}  speed = {speed:.12f}  1/r = {1 / r:.12f}  radius spread = {np.ptp(radius):.1e}")
