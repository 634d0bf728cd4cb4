"""Short-fiber composite: crack energy depends on the crack normal.

Capsule-shaped fibers with aspect ratio 20 are oriented preferentially
along x, then y. A crack with normal x has to cut through many fibers,
one with normal z can run between them. Also sweeps a few normals on
the half sphere.
"""

import sys

import numpy as np

from fracflow import SolverConfig, gen_capsules, phases_to_gamma, solve
from fracflow.cli import fibonacci_directions

n = int(sys.argv[1]) if len(sys.argv) > 1 else 32
diameter = n / 21.0
count = int(80 * (n / 64) ** 1)
pm = gen_capsules(n, count, diameter, 20, axis_weights=(8.0, 2.0, 0.25), seed=5)
gamma = phases_to_gamma(pm, {0: 1.0, 1: 50.0})
print(f"{n}^3, {count} fibers, fiber fraction {pm.info['fiber_fraction']:.3f}")

axes = np.abs(np.array(pm.info["axes"]))
print("mean |fiber axis| components:", np.round(axes.mean(axis=0), 3))

cfg = SolverConfig(tol=5e-4)
for name, d in zip("xyz", np.eye(3)):
    r = solve(gamma, d, cfg)
    print(f"normal {name}: gamma_eff {r.gamma_eff:.4f} ({r.iterations} iterations)")

for d in fibonacci_directions(4):
    r = solve(gamma, d, cfg)
    print("normal", np.round(d, 3), f"-> {r.gamma_eff:.4f}")
