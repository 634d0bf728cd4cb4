"""A tour of the discrete operators on a small periodic grid.

Builds random fields, checks the adjoint pairs numerically and shows what
the Fourier-space projector does to gradients and to constants.
"""

import numpy as np

from fracflow import div_minus, extend_A, grad_plus, inner_product, restrict_Astar, shift_back
from fracflow.spectral import SpectralPlan, project_compatible

rng = np.random.default_rng(0)
shape = (6, 5, 4)

# %% adjoint pairs
phi = rng.standard_normal(shape)
v = rng.standard_normal((3,) + shape)
w = rng.standard_normal((6,) + shape)

print("<grad phi, v> + <phi, div v> =", inner_product(grad_plus(phi), v) + inner_product(phi, div_minus(v)))
print("<A v, w> - <v, A* w>         =", inner_product(extend_A(v), w) - inner_product(v, restrict_Astar(w)))
print("|A* A v - v|_max             =", np.abs(restrict_Astar(extend_A(v)) - v).max())

# the shift moves each component along its own axis
probe = np.zeros((3,) + shape)
probe[:, 0, 0, 0] = 1.0
moved = np.argwhere(shift_back(probe))
print("unit impulse at the origin lands at", [tuple(int(i) for i in m) for m in moved])

# %% the projector onto gradients
plan = SpectralPlan(shape)
g = grad_plus(phi)
print("Gamma(grad phi) - grad phi   =", np.abs(plan.gamma_apply(g) - g).max())
const = np.broadcast_to(np.array([1.0, -2.0, 0.5])[:, None, None, None], g.shape).copy()
print("Gamma(constant)              =", np.abs(plan.gamma_apply(const)).max())

# %% compatible normal fields
xi_bar = np.array([1.0, 0.0, 0.0])
p = project_compatible(w, xi_bar, plan)
mean3 = restrict_Astar(p).reshape(3, -1).mean(axis=1)
print("mean of A* P(w)              =", np.round(mean3, 14))
print("P(P(w)) - P(w)               =", np.abs(project_compatible(p, xi_bar, plan) - p).max())
