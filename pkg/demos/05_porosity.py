"""Effective crack energy of a porous material against porosity.

Pores carry zero crack resistance. Packs above the hard-sphere jamming
limit allow partial overlap. Runs at 32^3 by default (64 as argument for the
full size).
"""

import sys

from fracflow import SolverConfig, gen_sphere_pack, phases_to_gamma, planar_cut_bound, solve

n = int(sys.argv[1]) if len(sys.argv) > 1 else 32
diameter = n / 6.4
print(" target  achieved  gamma_eff  flat cut  iterations")
for porosity, overlap in ((0.05, 0.0), (0.25, 0.0), (0.40, 0.5), (0.50, 0.5)):
    pm = gen_sphere_pack(n, diameter, porosity=porosity, seed=11, max_overlap=overlap)
    gamma = phases_to_gamma(pm, {0: 1.0, 1: 0.0})
    r = solve(gamma, [1, 0, 0], SolverConfig())
    print(f"  {porosity:.2f}    {pm.info['porosity']:.4f}    {r.gamma_eff:.4f}    "
          f"{planar_cut_bound(gamma, 0):.4f}    {r.iterations}")
