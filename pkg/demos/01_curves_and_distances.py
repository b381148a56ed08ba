"""
Curves as vectors, distances as integrals
=========================================

A curve sampled on a uniform grid is just a row of numbers.  The L2
distance between two curves is a trapezoid-rule integral, which turns
into a plain Euclidean distance once values are scaled by the square
root of the quadrature weights.
"""

import numpy as np

from bfms import FunctionSet, GridSpec, l2_dist, l2_inner

grid = GridSpec(0.0, 1.0, 201)
t = grid.points

# two curves and their distance
f = np.sin(2 * np.pi * t)
g = np.cos(2 * np.pi * t)
print("<f, g>   =", round(l2_inner(f, g, grid), 6), "(orthogonal on a full period)")
print("||f - g|| =", round(l2_dist(f, g, grid), 6), "(exact value: 1.0)")

# a set of curves carries its grid along; the scaled embedding gives the same distances
curves = FunctionSet(grid, np.stack([f, g, f + 0.1]), ids=["sin", "cos", "sin+0.1"])
X = curves.scaled()
print("embedded distance sin vs sin+0.1:", round(float(np.linalg.norm(X[0] - X[2])), 6))
