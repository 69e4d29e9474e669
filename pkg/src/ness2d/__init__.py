"""Corner-driven lattice gases on small square lattices.

Hard-core bosons and spinless fermions hop on a ``W x H`` lattice with
nearest-neighbour interaction ``V`` and a uniform magnetic flux.  Particles are
injected at the bottom-left corner and removed at the top-right corner by
coin-triggered measure-and-reset operations, and repeated Trotter periods drive
the system into a non-equilibrium steady state.

Submodules
----------
lattice       geometry, bond sectors, Peierls phases
qsim          state vectors, native gates, measurement, Pauli strings, RNG streams
model         parameters, Trotter circuits, Hamiltonians
fermions      Jordan-Wigner and compact (ancilla-assisted) fermion encodings
channel       Kraus and Lindblad oracles, quantum trajectories and ensembles
sector        fixed-particle-number trajectory engine
gaussian      free-fermion correlation-matrix backend and rate sweeps
observables   snapshots, profiles, imbalances, cut currents, current measurement
ssep          classical driven exclusion process
emitter       textual circuit programs and their interpreter
presets       named parameter sets
cli           command-line runner
"""

from .channel import Ensemble, TrajectoryRecord, run_ensemble, run_trajectory
from .lattice import LatticeSpec, build_lattice
from .model import ConfigError, ModelParams
from .qsim import NumericalIntegrityError, RngStream, StateVector

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "Ensemble", "LatticeSpec", "ModelParams", "NumericalIntegrityError", "RngStream",
    "StateVector", "TrajectoryRecord", "build_lattice", "run_ensemble", "run_trajectory", "__version__",
]
