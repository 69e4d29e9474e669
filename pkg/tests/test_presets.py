"""Named parameter sets and the bootstrap of biased initial densities."""

import math

import pytest

from ness2d import presets as P
from ness2d.model import ConfigError

TABLE = {
    "hcb-v0": ("hcb", 0.0, 0.0, 0.31, 10, 1280),
    "hcb-v1.5": ("hcb", 1.5, 0.0, 0.31, 14, 1280),
    "fermion-v0": ("fermion", 0.0, 0.0, 0.21, 14, 1480),
    "fermion-v0-flux": ("fermion", 0.0, math.pi / 2, 0.27, 16, 1480),
    "fermion-v1-flux": ("fermion", 1.0, math.pi / 2, 0.29, 18, 1480),
}


@pytest.mark.parametrize("name", sorted(TABLE))
def test_table_presets(name):
    stat, V, phi, dt, m, n = TABLE[name]
    pre = P.PRESETS[name]
    assert (pre.params.statistics, pre.params.V, pre.params.phi, pre.params.dt, pre.params.m) == (
        stat, V, pytest.approx(phi), dt, m)
    assert pre.trajectories == n
    assert pre.params.gamma == 2.0 and pre.params.J == 1.0
    assert pre.biased == (V > 0)


def test_near_continuum_variants_use_ideal_count():
    for name in TABLE:
        pre = P.PRESETS[name + "-lindblad"]
        assert pre.trajectories == P.IDEAL_TRAJECTORIES
        assert pre.params.dt <= 0.05 and pre.params.m * pre.params.dt >= 5


def test_unbiased_preset_expands():
    params, n = P.get_preset("hcb-v0", trajectories=7)
    assert n == 7 and params.init == "random_product"


def test_biased_preset_uses_shipped_densities():
    boot = P.load_bootstrap()
    for name in ("hcb-v1.5", "fermion-v1-flux"):
        if name not in boot:
            pytest.skip(f"no shipped densities for {name}")
        params, _ = P.get_preset(name)
        assert params.init == "biased" and len(params.init_densities) == 16
        assert all(0.0 <= d <= 1.0 for d in params.init_densities)


def test_missing_bootstrap_is_config_error(monkeypatch):
    monkeypatch.setattr(P, "load_bootstrap", lambda: {})
    with pytest.raises(ConfigError):
        P.get_preset("hcb-v1.5")
    with pytest.raises(ConfigError):
        P.get_preset("nope")


def test_bootstrap_shape():
    out = P.bootstrap("hcb-v1.5", trajectories=3, periods=4, seed=1)
    assert len(out["densities"]) == 16 and out["periods"] == 4
    assert out["params"]["init"] == "random_product"
