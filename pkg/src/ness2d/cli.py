"""Command-line runner.

    ness2d run --preset hcb-v0 [--trajectories N] [--seed S] [--out DIR]
    ness2d run --params config.json
    ness2d sweep --preset fermion-v0 --axis gamma --grid 0.5,1,2,4 --backend gaussian
    ness2d emit --preset hcb-v0 --mode hcb --measurement density -o hcb.qprog
    ness2d report RUN_DIR
    ness2d bootstrap hcb-v1.5

Exit status is 0 on success, 2 for configuration errors and 3 when a
numerical invariant (normalisation, trace, stabiliser) is violated.  The
environment variable ``NESS2D_WORKERS`` sets the number of worker processes
for trajectory backends (default 1).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import subprocess
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .lattice import LatticeSpec, build_lattice, taxicab_distance
from .model import ConfigError, ModelParams
from .qsim import NumericalIntegrityError

log = logging.getLogger("ness2d")

BACKENDS = ("trajectory", "cptp-oracle", "lindblad-oracle", "gaussian", "ssep")
AXES = ("p", "dt", "phi", "gamma")
ORACLE_MAX_SITES = 8
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICS = 0, 2, 3


@dataclass
class RunConfig:
    params: ModelParams
    backend: str = "trajectory"
    trajectories: int = 10_000
    seed: int = 0
    out: Path = Path("runs")
    preset: str | None = None
    width: int = 4
    height: int = 4
    encoding: str | None = None
    measurement: str | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown backend {self.backend!r}; choose from {', '.join(BACKENDS)}")
        if self.trajectories < 0:
            raise ConfigError("trajectory count must be non-negative")
        lat_sites = self.width * self.height
        if self.backend in ("cptp-oracle", "lindblad-oracle") and lat_sites > ORACLE_MAX_SITES:
            raise ConfigError(f"density-matrix oracles are limited to {ORACLE_MAX_SITES} sites")
        if self.backend == "gaussian" and (self.params.V != 0 or not self.params.fermionic):
            raise ConfigError("the gaussian backend needs non-interacting fermions (V=0, statistics=fermion)")

    @property
    def lattice(self) -> LatticeSpec:
        return build_lattice(self.width, self.height)

    @property
    def label(self) -> str:
        return self.preset or f"{self.params.statistics}-V{self.params.V:g}-phi{self.params.phi:.3g}"

    def to_dict(self) -> dict:
        return {"params": self.params.to_dict(), "backend": self.backend, "trajectories": self.trajectories,
                "seed": self.seed, "preset": self.preset, "width": self.width, "height": self.height,
                "encoding": self.encoding, "measurement": self.measurement, **self.extra}


def config_from_file(path: str | Path, **overrides) -> RunConfig:
    """Read a JSON run configuration.

    The file is either a bare parameter dictionary or an object with a
    ``params`` entry plus any of ``backend``, ``trajectories``, ``seed``,
    ``width``, ``height``, ``encoding``, ``measurement``.
    """
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    params = data.get("params", data if "backend" not in data else None)
    if params is None:
        raise ConfigError("configuration has no params")
    keys = ("backend", "trajectories", "seed", "width", "height", "encoding", "measurement")
    kw = {k: data[k] for k in keys if k in data and "params" in data}
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(ModelParams.from_dict(params), **kw)


def config_from_preset(name: str, **overrides) -> RunConfig:
    from .presets import get_preset

    params, n = get_preset(name, overrides.pop("trajectories", None))
    kw = {k: v for k, v in overrides.items() if v is not None}
    return RunConfig(params, trajectories=n, preset=name, **kw)


# --- provenance ---------------------------------------------------------------------


def git_describe() -> str:
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=10)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


def new_run_dir(root: Path, label: str, seed: int) -> Path:
    """Fresh directory ``root/label-sSEED-NNN``; existing runs are never reused."""
    root.mkdir(parents=True, exist_ok=True)
    k = 0
    while True:
        d = root / f"{label}-s{seed}-{k:03d}"
        try:
            d.mkdir()
            return d
        except FileExistsError:
            k += 1


def write_manifest(run_dir: Path, cfg: RunConfig, wall: float, extra: dict | None = None) -> None:
    man = {"tool": "ness2d", "version": __version__, "code_revision": git_describe(), "config": cfg.to_dict(),
           "wall_time_s": round(wall, 3), "numpy": np.__version__}
    man.update(extra or {})
    (run_dir / "manifest.json").write_text(json.dumps(man, indent=1, sort_keys=True) + "\n")


# --- backends ------------------------------------------------------------------------


@dataclass
class RunResult:
    """Per-period ensemble means (and standard errors where sampled)."""

    densities: np.ndarray  # (T, N)
    densities_stderr: np.ndarray
    currents: np.ndarray  # (T, n_bonds)
    currents_stderr: np.ndarray
    final_density_samples: np.ndarray | None = None  # (n, N)
    final_current_samples: np.ndarray | None = None
    coins: np.ndarray | None = None
    pre_bits: np.ndarray | None = None
    records: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("NESS2D_WORKERS", "1")))
    except ValueError:
        raise ConfigError("NESS2D_WORKERS must be an integer") from None


def _trajectory_chunk(args):
    cfg_dict, first, count = args
    from .channel import run_ensemble

    cfg = RunConfig(ModelParams.from_dict(cfg_dict["params"]), backend="trajectory",
                    width=cfg_dict["width"], height=cfg_dict["height"], encoding=cfg_dict["encoding"],
                    measurement=cfg_dict["measurement"], trajectories=count, seed=cfg_dict["seed"])
    return run_ensemble(cfg.params, cfg.lattice, count, cfg.seed, encoding=cfg.encoding, observe="every",
                        measurement=cfg.measurement, first_stream=first, keep_records=True)


def _run_trajectories(cfg: RunConfig) -> RunResult:
    n = cfg.trajectories
    workers = _workers()
    size = math.ceil(n / workers)
    chunks = [(cfg.to_dict(), i, min(size, n - i)) for i in range(0, n, size)]
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_trajectory_chunk, chunks))  # ordered by first stream id
    else:
        parts = [_trajectory_chunk(c) for c in chunks]
    ens = parts[0]
    for p in parts[1:]:
        ens = ens.merge(p)
    return _from_samples(ens.densities, ens.currents, ens.coins, ens.pre_bits, ens.records)


def _run_gaussian(cfg: RunConfig) -> RunResult:
    from .gaussian import free_propagator, run_gaussian_trajectory, single_particle_hamiltonian
    from .qsim import RngStream

    lat = cfg.lattice
    prop = free_propagator(single_particle_hamiltonian(lat, cfg.params.J, cfg.params.phi), cfg.params.dt)
    recs = [run_gaussian_trajectory(cfg.params, lat, RngStream(cfg.seed, i), propagator=prop)[0]
            for i in range(cfg.trajectories)]
    return _from_samples(np.array([r.densities for r in recs]), np.array([r.currents for r in recs]),
                         np.array([r.coins for r in recs]), np.array([r.pre_bits for r in recs]), recs)


def _from_samples(dens, curr, coins, pre, records) -> RunResult:
    from .observables import stderr

    return RunResult(dens.mean(axis=0), stderr(dens), curr.mean(axis=0), stderr(curr), dens[:, -1, :],
                     curr[:, -1, :], coins, pre, records)


def _run_cptp(cfg: RunConfig) -> RunResult:
    from .channel import apply_cptp_step, rho_currents, rho_densities
    from .model import build_hcb_trotter_step
    from .fermions import build_fermion_trotter_step

    lat, P = cfg.lattice, cfg.params
    seq = build_fermion_trotter_step(lat, P, "jw") if P.fermionic else build_hcb_trotter_step(lat, P)
    U = seq.to_matrix()
    rho = _initial_rho(cfg)
    dens, curr = [rho_densities(rho, lat.n_sites)], [rho_currents(rho, lat, P)]
    for _ in range(P.m):
        rho = apply_cptp_step(rho, lat, P.p, unitary=U)
        tr = float(np.real(np.trace(rho)))
        if abs(tr - 1.0) > 1e-9:
            raise NumericalIntegrityError(f"density-matrix trace drifted to {tr!r}")
        dens.append(rho_densities(rho, lat.n_sites))
        curr.append(rho_currents(rho, lat, P))
    return _exact(np.array(dens), np.array(curr))


def _run_lindblad(cfg: RunConfig) -> RunResult:
    from .channel import integrate_lindblad, jump_operators, rho_currents, rho_densities
    from .model import qubit_hamiltonian

    lat, P = cfg.lattice, cfg.params
    H = qubit_hamiltonian(lat, P).toarray()
    L = jump_operators(lat, P.gamma)
    h = min(0.005, P.dt / 4)
    per = max(1, int(round(P.dt / h)))
    h = P.dt / per
    rho0 = _initial_rho(cfg)
    _, samples = integrate_lindblad(rho0, H, L, P.m * P.dt, h, record_every=per)
    return _exact(np.array([rho_densities(r, lat.n_sites) for r in samples]),
                  np.array([rho_currents(r, lat, P) for r in samples]))


def _initial_rho(cfg: RunConfig) -> np.ndarray:
    """Ensemble-averaged initial state: a diagonal product of the per-site fill probabilities."""
    from .channel import P_HALF
    from .model import coin_angle, fill_probability

    lat, P = cfg.lattice, cfg.params
    if P.init == "bitstring":
        probs = [float(b) for b in P.init_bits]
    elif P.init == "biased":
        probs = [fill_probability(coin_angle(float(d))) for d in P.init_densities]
    else:
        probs = [1.0 if i == lat.source else 0.0 if i == lat.drain else P_HALF for i in range(lat.n_sites)]
    diag = np.ones(1)
    for q in reversed(range(lat.n_sites)):
        diag = np.kron(diag, [1 - probs[q], probs[q]])
    return np.diag(diag).astype(complex)


def _exact(dens, curr) -> RunResult:
    z = np.zeros_like
    return RunResult(dens, z(dens), curr, z(curr))


def _run_ssep(cfg: RunConfig) -> RunResult:
    from .ssep import SsepConfig, ssep_ness

    lat = cfg.lattice
    sc = SsepConfig(lattice=lat, V=cfg.params.V, gamma=cfg.params.gamma, steps=cfg.params.m,
                    trajectories=cfg.trajectories, seed=cfg.seed)
    f = ssep_ness(sc, record=True)
    n_b = len(lat.bonds)
    T = f.series.shape[0]
    se = np.sqrt(np.clip(f.series * (1 - f.series), 0, None) / max(f.n_trajectories - 1, 1))
    return RunResult(f.series, se, np.full((T, n_b), np.nan), np.full((T, n_b), np.nan))


RUNNERS = {"trajectory": _run_trajectories, "gaussian": _run_gaussian, "cptp-oracle": _run_cptp,
           "lindblad-oracle": _run_lindblad, "ssep": _run_ssep}


def execute(cfg: RunConfig) -> RunResult:
    res = RUNNERS[cfg.backend](cfg)
    res.summary = summarize(cfg, res)
    return res


# --- summaries and files --------------------------------------------------------------


def summarize(cfg: RunConfig, res: RunResult) -> dict:
    from .channel import net_current_from_records
    from .observables import (
        Snapshot, boundary_fraction, cut_averaged_current, cut_currents, density_profile, diagonal_fraction,
        imbalances,
    )

    lat = cfg.lattice
    out: dict = {"mean_filling": float(res.densities[-1].mean())}
    if res.final_density_samples is not None:
        snap = Snapshot(lat, res.final_density_samples, res.final_current_samples)
        imb = imbalances(snap)
        ds, prof, prof_se = density_profile(snap)
        out.update({
            "imbalance": imb.__dict__,
            "profile": {"distance": ds.tolist(), "mean": prof.tolist(), "stderr": prof_se.tolist()},
            "boundary_fraction": boundary_fraction(snap), "diagonal_fraction": diagonal_fraction(snap),
            "cut_currents": {str(k): v for k, v in cut_currents(snap).items()},
            "cut_averaged_current": cut_averaged_current(snap),
        })
        if res.coins is not None and res.coins.shape[1] > 0:
            flows = net_current_from_records(res.coins, res.pre_bits, cfg.params.dt)
            out["inflow_rolling"] = [flows["inflow_rolling"][-1], flows["inflow_rolling_stderr"][-1]]
            out["outflow_rolling"] = [flows["outflow_rolling"][-1], flows["outflow_rolling_stderr"][-1]]
    elif not np.isnan(res.currents).all():
        d = np.array([taxicab_distance(lat, i) for i in range(lat.n_sites)])
        out["profile"] = {"distance": np.unique(d).tolist(),
                          "mean": [float(res.densities[-1][d == k].mean()) for k in np.unique(d)]}
    return out


def write_outputs(run_dir: Path, cfg: RunConfig, res: RunResult) -> None:
    lat = cfg.lattice
    with open(run_dir / "snapshot.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "index", "x", "y", "mean", "stderr"])
        for i in range(lat.n_sites):
            x, y = lat.coords(i)
            w.writerow(["density", i, x, y, repr(float(res.densities[-1, i])),
                        repr(float(res.densities_stderr[-1, i]))])
        for n, b in enumerate(lat.bonds):
            w.writerow(["current", f"{b.j}-{b.k}", "", "", repr(float(res.currents[-1, n])),
                        repr(float(res.currents_stderr[-1, n]))])
    with open(run_dir / "timeseries.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["period", "observable", "mean", "stderr"])
        for t in range(res.densities.shape[0]):
            for i in range(lat.n_sites):
                w.writerow([t, f"n{i}", repr(float(res.densities[t, i])), repr(float(res.densities_stderr[t, i]))])
            for n, b in enumerate(lat.bonds):
                w.writerow([t, f"J{b.j}-{b.k}", repr(float(res.currents[t, n])),
                            repr(float(res.currents_stderr[t, n]))])
    snap = {"densities": res.densities[-1].tolist(), "densities_stderr": res.densities_stderr[-1].tolist(),
            "bonds": [[b.j, b.k] for b in lat.bonds], "currents": res.currents[-1].tolist(),
            "currents_stderr": res.currents_stderr[-1].tolist(), "summary": res.summary}
    (run_dir / "snapshot.json").write_text(json.dumps(snap, indent=1, allow_nan=True) + "\n")
    if res.records:
        with open(run_dir / "trajectories.ndjson", "w") as fh:
            for r in res.records:
                fh.write(r.to_json() + "\n")


def run(cfg: RunConfig) -> Path:
    """Execute one configuration and write a new run directory."""
    t0 = time.time()
    run_dir = new_run_dir(Path(cfg.out), cfg.label, cfg.seed)
    if cfg.trajectories == 0 and cfg.backend in ("trajectory", "gaussian", "ssep"):
        with open(run_dir / "snapshot.csv", "w", newline="") as fh:
            csv.writer(fh).writerow(["kind", "index", "x", "y", "mean", "stderr"])
        write_manifest(run_dir, cfg, time.time() - t0, {"empty": True})
        return run_dir
    res = execute(cfg)
    write_outputs(run_dir, cfg, res)
    write_manifest(run_dir, cfg, time.time() - t0)
    return run_dir


# --- sweeps ---------------------------------------------------------------------------


def sweep_params(params: ModelParams, axis: str, value: float) -> ModelParams:
    if axis not in AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {', '.join(AXES)}")
    if axis == "p":
        return replace(params, gamma=value / params.dt)
    if axis == "dt":
        return replace(params, dt=value)
    return replace(params, **{axis: value})


SWEEP_FIELDS = ["axis", "value", "dt", "p", "gamma", "phi", "mean_filling", "net_current", "net_current_stderr",
                "steps_to_stationarity"]


def sweep(cfg: RunConfig, axis: str, grid: list[float], out_csv: Path) -> list[dict]:
    """One run per grid value, merged into a CSV keyed by the axis value.

    The net current is the cut-averaged current for sampled backends, the
    stationary drive current for the gaussian backend (averaged map) and the
    interior cut average for the density-matrix oracles.
    """
    rows = []
    for v in grid:
        P = sweep_params(cfg.params, axis, float(v))
        row = {"axis": axis, "value": float(v), "dt": P.dt, "p": P.p, "gamma": P.gamma, "phi": P.phi}
        if cfg.backend == "gaussian":
            from .gaussian import ness_current_mean

            cur, steps, conv, C = ness_current_mean(cfg.lattice, P)
            row.update(mean_filling=float(np.real(np.trace(C))) / cfg.lattice.n_sites, net_current=cur,
                       net_current_stderr=0.0, steps_to_stationarity=steps if conv else "")
        else:
            sub = replace(cfg, params=P)
            res = execute(sub)
            s = res.summary
            if "cut_averaged_current" in s:
                cur, se = s["cut_averaged_current"]
            else:
                cur, se = _cut_average_exact(sub.lattice, res.currents[-1]), 0.0
            row.update(mean_filling=s["mean_filling"], net_current=cur, net_current_stderr=se,
                       steps_to_stationarity=_settling_period(res))
        rows.append(row)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    with open(out_csv, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return rows


def _settling_period(res: RunResult):
    """Period at which the mean density settles, blank when it never does."""
    from .observables import stationarity_report

    mean_n = res.densities.mean(axis=1)
    if mean_n.shape[0] <= 3:
        return ""
    entry = stationarity_report({"mean_density": mean_n})[0]
    return entry.settled_at if entry.settled else ""


def _cut_average_exact(lat: LatticeSpec, currents: np.ndarray) -> float:
    from .lattice import cut_bonds
    from .observables import interior_cuts

    if np.isnan(currents).all():
        return float("nan")
    cuts = interior_cuts(lat) or [0]
    return float(np.mean([currents[cut_bonds(lat, d)].sum() for d in cuts]))


# --- report ----------------------------------------------------------------------------


def report(run_dir: Path, window: int = 3, rtol: float = 0.01) -> list:
    """Settling table of the site densities and bond currents stored in a run directory."""
    from .observables import stationarity_report

    path = Path(run_dir) / "timeseries.csv"
    if not path.exists():
        raise ConfigError(f"{run_dir} has no time series")
    series: dict[str, list] = {}
    with open(path) as fh:
        for row in csv.DictReader(fh):
            series.setdefault(row["observable"], []).append(float(row["mean"]))
    series = {k: v for k, v in series.items() if not all(math.isnan(x) for x in v)}
    series["mean_density"] = np.mean([v for k, v in series.items() if k.startswith("n")], axis=0)
    cur = [v for k, v in series.items() if k.startswith("J")]
    if cur:
        series["mean_abs_current"] = np.mean(np.abs(cur), axis=0)
    return stationarity_report(series, window, rtol)


# --- argument parsing -------------------------------------------------------------------


def _number(tok: str) -> float:
    """``1.5``, ``pi``, ``pi/2``, ``3pi/4``, ``0.5*pi`` or ``1/3``."""
    t = tok.strip().lower().replace("*", "")
    num, _, den = t.partition("/")
    scale = 1.0
    if num.endswith("pi"):
        num, scale = num[:-2] or "1", math.pi
    try:
        val = float(num) * scale
        return val / float(den) if den else val
    except ValueError:
        raise ConfigError(f"bad grid value {tok!r}") from None


def _grid(text: str) -> list[float]:
    return [_number(tok) for tok in text.split(",")] if text.strip() else []


def _common(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", help="named parameter set (see `ness2d presets`)")
    src.add_argument("--params", help="JSON configuration file")
    p.add_argument("--backend", choices=BACKENDS)
    p.add_argument("--trajectories", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--encoding", choices=("hcb", "jw", "dk"))
    p.add_argument("--measurement", help="final shot: density or current:<sector>")
    p.add_argument("--out", default="runs", help="root directory for run folders")


def _config(args) -> RunConfig:
    kw = dict(backend=args.backend, trajectories=args.trajectories, seed=args.seed, width=args.width,
              height=args.height, encoding=args.encoding, measurement=args.measurement, out=Path(args.out))
    if args.preset:
        return config_from_preset(args.preset, **kw)
    return config_from_file(args.params, **kw)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ness2d", description="Corner-driven lattice NESS simulator")
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--version", action="version", version=f"ness2d {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one configuration")
    _common(p)

    p = sub.add_parser("sweep", help="scan one parameter")
    _common(p)
    p.add_argument("--axis", required=True, choices=AXES)
    p.add_argument("--grid", required=True, help="comma-separated values, e.g. 0,pi/4,pi/2")
    p.add_argument("--csv", help="output CSV path (default OUT/sweep-AXIS.csv)")

    p = sub.add_parser("emit", help="write the circuit program of a configuration")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset")
    src.add_argument("--params")
    p.add_argument("--mode", choices=("hcb", "fermion", "jw"))
    p.add_argument("--measurement", default="density")
    p.add_argument("--width", type=int, default=4)
    p.add_argument("--height", type=int, default=4)
    p.add_argument("-o", "--output", help="file to write (default: standard output)")

    p = sub.add_parser("report", help="settling table of a run")
    p.add_argument("run_dir")
    p.add_argument("--window", type=int, default=3)
    p.add_argument("--rtol", type=float, default=0.01)

    p = sub.add_parser("bootstrap", help="estimate steady-state densities for a biased preset")
    p.add_argument("preset")
    p.add_argument("--trajectories", type=int, default=2000)
    p.add_argument("--periods", type=int)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--file", help="JSON file to update (default: the packaged data file)")

    sub.add_parser("presets", help="list presets")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalIntegrityError as exc:
        print(f"numerical integrity failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    except ValueError as exc:  # parse errors in inputs, bad parameter values
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _dispatch(args) -> int:
    if args.command == "presets":
        from .presets import PRESETS

        for name in sorted(PRESETS):
            pr = PRESETS[name]
            P = pr.params
            print(f"{name:24s} dt={P.dt:<5g} m={P.m:<5d} n={pr.trajectories:<6d} {pr.description}")
        return EXIT_OK
    if args.command == "run":
        d = run(_config(args))
        print(d)
        return EXIT_OK
    if args.command == "sweep":
        cfg = _config(args)
        out_csv = Path(args.csv) if args.csv else Path(args.out) / f"sweep-{args.axis}.csv"
        sweep(cfg, args.axis, _grid(args.grid), out_csv)
        print(out_csv)
        return EXIT_OK
    if args.command == "emit":
        from .emitter import emit

        cfg = config_from_preset(args.preset) if args.preset else config_from_file(args.params)
        mode = args.mode or ("fermion" if cfg.params.fermionic else "hcb")
        text = emit(cfg.params, build_lattice(args.width, args.height), mode, args.measurement)
        if args.output:
            Path(args.output).write_text(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    if args.command == "report":
        rows = report(Path(args.run_dir), args.window, args.rtol)
        print(f"{'observable':20s} {'settled_at':>10s}  status")
        for r in rows:
            status = "settled" if r.settled else "NOT SETTLED"
            print(f"{r.name:20s} {str(r.settled_at):>10s}  {status}")
        return EXIT_OK
    if args.command == "bootstrap":
        from .presets import BOOTSTRAP_FILE, bootstrap

        path = Path(args.file) if args.file else Path(__file__).resolve().parent / "data" / BOOTSTRAP_FILE
        data = json.loads(path.read_text()) if path.exists() else {}
        data[args.preset] = bootstrap(args.preset, args.trajectories, args.periods, args.seed)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")
        print(path)
        return EXIT_OK
    raise ConfigError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
