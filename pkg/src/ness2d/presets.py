"""Named parameter sets for the 4x4 runs.

Two families are provided.

* Hardware-run sets (``hcb-v0``, ``hcb-v1.5``, ``fermion-v0``,
  ``fermion-v0-flux``, ``fermion-v1-flux``): the time step, period count and
  default trajectory count chosen for the device experiments.  ``hcb-v0-flux``
  adds the hard-core boson run at half a flux quantum per plaquette.
* Near-continuum sets (suffix ``-lindblad``): small time steps and long runs,
  used to judge when densities and currents have settled.

Sets with ``V > 0`` start from a biased product state whose fill
probabilities are steady-state densities estimated by :func:`bootstrap`,
shipped in ``data/bootstrap_densities.json``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from importlib import resources

import numpy as np

from .model import ConfigError, ModelParams

GAMMA = 2.0
IDEAL_TRAJECTORIES = 10_000
BOOTSTRAP_FILE = "bootstrap_densities.json"


@dataclass(frozen=True)
class Preset:
    name: str
    params: ModelParams
    trajectories: int
    description: str
    biased: bool = False  # init from bootstrap densities


def _p(statistics: str, V: float, phi: float, dt: float, m: int) -> ModelParams:
    return ModelParams(J=1.0, V=V, phi=phi, dt=dt, m=m, gamma=GAMMA, statistics=statistics)


_HALF = math.pi / 2

_TABLE = [
    # name, statistics, V, phi, dt, m, trajectories, near-continuum (dt, m)
    ("fermion-v1-flux", "fermion", 1.0, _HALF, 0.29, 18, 1480, (0.02, 1000)),
    ("fermion-v0-flux", "fermion", 0.0, _HALF, 0.27, 16, 1480, (0.02, 1000)),
    ("hcb-v1.5", "hcb", 1.5, 0.0, 0.31, 14, 1280, (0.05, 600)),
    ("fermion-v0", "fermion", 0.0, 0.0, 0.21, 14, 1480, (0.01, 1000)),
    ("hcb-v0", "hcb", 0.0, 0.0, 0.31, 10, 1280, (0.01, 700)),
]


def _build() -> dict[str, Preset]:
    out: dict[str, Preset] = {}
    for name, stat, V, phi, dt, m, n, (dt_l, m_l) in _TABLE:
        label = f"{'fermions' if stat == 'fermion' else 'hard-core bosons'}, V={V:g}, phi={'pi/2' if phi else '0'}"
        out[name] = Preset(name, _p(stat, V, phi, dt, m), n, label, biased=V > 0)
        out[name + "-lindblad"] = Preset(name + "-lindblad", _p(stat, V, phi, dt_l, m_l), IDEAL_TRAJECTORIES,
                                         label + ", near-continuum time step")
    out["hcb-v0-flux"] = Preset("hcb-v0-flux", _p("hcb", 0.0, _HALF, 0.31, 10), IDEAL_TRAJECTORIES,
                                "hard-core bosons, V=0, phi=pi/2 (flux comparison)")
    return out


PRESETS: dict[str, Preset] = _build()


def preset_names() -> list[str]:
    return sorted(PRESETS)


def load_bootstrap() -> dict:
    """Shipped steady-state density estimates keyed by preset name."""
    try:
        text = resources.files("ness2d").joinpath("data", BOOTSTRAP_FILE).read_text()
    except FileNotFoundError:
        return {}
    return json.loads(text)


def get_preset(name: str, trajectories: int | None = None) -> tuple[ModelParams, int]:
    """Expand a preset into parameters and a trajectory count.

    Raises:
        ConfigError: unknown name, or a biased preset without shipped densities.
    """
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(preset_names())}")
    pre = PRESETS[name]
    params = pre.params
    if pre.biased:
        boot = load_bootstrap()
        if name not in boot:
            raise ConfigError(f"no bootstrap densities for {name!r}; run `ness2d bootstrap {name}`")
        params = replace(params, init="biased", init_densities=tuple(boot[name]["densities"]))
    return params, (pre.trajectories if trajectories is None else trajectories)


def bootstrap(name: str, trajectories: int = 2000, periods: int | None = None, seed: int = 2024,
              progress=None) -> dict:
    """Estimate steady-state densities from a long uniform-start run.

    The preset is run from a random product state for ``periods`` periods
    (default: four times the preset's count) and the site densities averaged
    over the last quarter of the run are returned, clipped to ``[0, 1]``.
    """
    from .channel import run_ensemble
    from .lattice import build_lattice

    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}")
    base = PRESETS[name].params
    m = periods or 4 * base.m
    params = replace(base, m=m, init="random_product", init_densities=None)
    ens = run_ensemble(params, build_lattice(4, 4), trajectories, seed, progress=progress)
    tail = ens.densities[:, -max(1, m // 4):, :].mean(axis=(0, 1))
    dens = np.clip(tail, 0.0, 1.0)
    return {"densities": [round(float(x), 6) for x in dens], "trajectories": trajectories, "periods": m,
            "seed": seed, "params": params.to_dict()}
