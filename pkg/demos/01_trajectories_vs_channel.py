"""Sampled trajectories against the averaged channel on a 2x2 lattice.

Each trajectory applies one Trotter step, then a coin-controlled measurement
and reset at the source and at the drain.  Averaging many of them must give
the densities produced by iterating the Kraus map on the full density matrix,
and shrinking the time step at fixed drive rate approaches the Lindblad limit.

Run:  python3 demos/01_trajectories_vs_channel.py
"""

import math

import numpy as np

from ness2d.channel import apply_cptp_step, integrate_lindblad, jump_operators, rho_densities, run_ensemble
from ness2d.lattice import build_lattice
from ness2d.model import ModelParams, build_hcb_trotter_step, qubit_hamiltonian


def product_rho(lat):
    probs = [0.5] * lat.n_sites
    probs[lat.source], probs[lat.drain] = 1.0, 0.0
    d = np.ones(1)
    for q in reversed(range(lat.n_sites)):
        d = np.kron(d, [1.0 - probs[q], probs[q]])
    return np.diag(d).astype(complex)


lat = build_lattice(2, 2)
params = ModelParams(dt=0.25, gamma=2.0, m=20)
print(f"2x2 hard-core bosons, dt={params.dt}, p={params.p}, {params.m} periods")

ens = run_ensemble(params, lat, 4000, seed=1)
mean = ens.densities.mean(axis=0)
se = ens.densities.std(axis=0, ddof=1) / math.sqrt(ens.n_trajectories)

U = build_hcb_trotter_step(lat, params).to_matrix()
rho = product_rho(lat)
print("period  sampled densities (+- se)                 channel densities")
for t in range(params.m + 1):
    if t % 5 == 0:
        sampled = "  ".join(f"{m:.3f}({s:.3f})" for m, s in zip(mean[t], se[t]))
        exact = "  ".join(f"{x:.3f}" for x in rho_densities(rho, lat.n_sites))
        print(f"{t:6d}  {sampled}  {exact}")
    rho = apply_cptp_step(rho, lat, params.p, unitary=U)

# Lindblad limit: at fixed gamma the map converges to the master equation
# linearly in the time step.
H = qubit_hamiltonian(lat, params).toarray()
ref = rho_densities(integrate_lindblad(product_rho(lat), H, jump_operators(lat, 2.0), 2.0, 0.002), lat.n_sites)
print("\nLindblad comparison at t=2")
for dt in (0.04, 0.02, 0.01):
    p = params.with_(dt=dt)
    U = build_hcb_trotter_step(lat, p).to_matrix()
    rho = product_rho(lat)
    for _ in range(int(round(2.0 / dt))):
        rho = apply_cptp_step(rho, lat, p.p, unitary=U)
    print(f"  dt={dt:<5} max density error {np.abs(rho_densities(rho, lat.n_sites) - ref).max():.2e}")
