"""Multiscale and measure-theoretic tour: uniformization with its retained-mass
floor, two-scale refinement of a nice configuration, a Riesz energy bound, and
heavy plates of a line-like measure.
"""

import numpy as np

from fractalab import (DiscreteMeasure, build_plate_net, frostman_constant,
                       heavy_plates, load_constants, refine_nice_configuration,
                       riesz_energy, uniformize, verify_energy_upper)
from fractalab.generators import derive_rng, frostman_random, grid_config

consts = load_constants()

P = frostman_random(1.3, 2, 6, derive_rng(0, "demo-frostman"))
out, U = uniformize(P, 2)
print(f"uniformize: kept {len(out)}/{len(P)} cubes "
      f"(floor {len(P) / 16:.0f}); branching numbers N = {U.N}; "
      f"exactly uniform = {U.verify()}")

cfg = grid_config(s=1.0, t=2.0, d=2, level=6, seed=11)
res = refine_nice_configuration(cfg, 2.0 ** -3,
                                C_poly=consts["refinement_C_poly"])
st = res.stats
print(f"refinement 2^-6 -> 2^-3: kept cube ratio {st['prop1_cube_ratio']:.2f}, "
      f"M_Delta = {st['M_Delta']}, {len(res.children)} child configurations, "
      f"contract passed = {st['passed']}")

mu = DiscreteMeasure.uniform(frostman_random(1.5, 2, 5,
                                             derive_rng(0, "demo-energy")))
E = riesz_energy(mu, 0.5, 1, mu.delta, mode="exact")
rep = verify_energy_upper(mu, 0.5, 1.5, 1,
                          C_frozen=consts["energy_ratio"]["1,2"])
print(f"Riesz (s=0.5, k=1) energy = {E.value:.3f}; upper bound ratio "
      f"{rep['ratio']:.3f} -> {'OK' if rep['passed'] else 'VIOLATED'}")

line = DiscreteMeasure(5, [[i, 16] for i in range(32)], np.full(32, 1 / 32))
net = build_plate_net(0.25, 1, 2)
heavy, info = heavy_plates(line, 0.25, 0.5, net)
C_nu = frostman_constant(line, 0.5, 0).C
print(f"line measure: Frostman C = {C_nu:.2f}; {info['count']} plates carry "
      f"mass >= 0.5 (the thickened line itself)")
