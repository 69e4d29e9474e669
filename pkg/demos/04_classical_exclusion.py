"""Classical exclusion process with nearest-neighbour attraction.

Particles hop between neighbouring sites with a Metropolis acceptance, enter
at the source corner and leave at the drain corner.  Attraction makes them
bunch into a dense cluster around the source while the two edges next to the
drain stay comparatively empty.

Run:  python3 demos/04_classical_exclusion.py
"""

import numpy as np

from ness2d.ssep import SsepConfig, block_and_edge_means, boltzmann_check, ssep_ness

field_ = ssep_ness(SsepConfig(V=1.0, gamma=2.0, steps=300, trajectories=20_000, seed=3))
print("mean occupation (top row is the drain edge):")
print(np.round(field_.grid()[::-1], 3))
block, edge = block_and_edge_means(field_)
print(f"source block {block:.3f}, drain edges {edge:.3f}")

chk = boltzmann_check(n_samples=200_000, seed=3)
print(f"undriven chains vs Boltzmann weights: chi2={chk.chi2:.1f} on {chk.dof} dof, p={chk.p_value:.3f}")
