"""The low-passed family behind the X^s norm, member by member, for a bump graph.

Run: python3 demos/norm_family.py
"""

import math

from smcf.generators import graph_bump
from smcf.geometry import complex_shape, compute_geometry
from smcf.grid import Grid
from smcf.norms import build_family, extrinsic_sobolev, frequency_envelope, xs_norm

grid = Grid((32, 32), (2 * math.pi, 2 * math.pi))
im, fr = graph_bump(grid)
fam = build_family(im, fr)
for h, member in zip(fam.h_values[::4], fam.members[::4]):
    print(f"h = {h:5.2f}  ||lambda_h||_L2 = {grid.l2_norm(member.lam):.6f}")

lam = complex_shape(compute_geometry(im), fr).lam
print(f"H^2.5 of lambda     {extrinsic_sobolev(lam, 2.5, grid):.6f}")
print(f"X^2.5 (extrinsic)   {xs_norm(fam, 2.5):.6f}")
print(f"X^2.5 (intrinsic)   {xs_norm(fam, 2.5, 'intrinsic'):.6f}")
env = frequency_envelope(im, fr, 2.5, 1.0)
print(f"envelope l2 = {env.l2():.6f}, slowly varying: {env.slowly_varying()}")
