"""Command line entry point: ``fdtdqe {run,scan,validate,plot} CONFIG``.

Exit codes: 0 success, 2 configuration error, 3 numerical abort, 4 a
``--check`` comparison against its reference failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import extremum_offset, purcell_from_decay, resonance_scan
from .config import (
    ConfigError, build_scenario, from_dict, load_text, scan_document, scene_1d,
)
from .layers import Scene1D, purcell_1d
from .modes1d import completeness_table
from .output import (
    plot_image, plot_population, plot_scan, snapshot_spa, write_csv, write_image_csv,
    write_snapshot,
)
from .simulation import CoupledRun, NumericalBlowUp
from .spectral import default_step, greens_1d, omega_grid, spectral_route

log = logging.getLogger("fdtdqe")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4
UNIT_CONVENTIONS = {
    "system": "hbar = c = eps0 = mu0 = 1",
    "length": "m",
    "time": "m of light travel",
    "frequency": "rad/m",
    "dipole_moment": "natural units (sqrt of m^dim)",
}


class CheckFailed(RuntimeError):
    pass


def _manifest(cfg, extra):
    return {
        "manifest_version": 1,
        "code_version": __version__,
        "config_hash": cfg.hash(),
        "units": UNIT_CONVENTIONS,
        "calibration": {
            "omega_a": cfg.emitter.omega_a,
            "gamma0": cfg.emitter.gamma0,
            "dipole_moment": cfg.emitter.dipole_moment,
            "dx": cfg.dx,
            "dt": cfg.dt,
            **extra,
        },
        "config": cfg.raw,
    }


def _write_manifest(out: Path, cfg, extra):
    with open(out / "manifest.json", "w") as fh:
        json.dump(_manifest(cfg, extra), fh, indent=2, sort_keys=True, default=str)


# --- routes -------------------------------------------------------------------

def run_time(cfg, out: Path, check=False):
    sc = build_scenario(cfg)
    sim = CoupledRun(sc)
    observers, every = {}, 1
    if cfg.snapshot:
        observers, every = {"spa": lambda r: _spa(r, cfg, out)}, cfg.snapshot.every
    try:
        res = sim.run(observers, every)
    except NumericalBlowUp:
        e, h = sim.total_field()
        write_snapshot(out / "abort_fields.bin", {**{f"E{c}": v for c, v in e.items()},
                                                  **{f"H{c}": v for c, v in h.items()}},
                       sc.grid, sim.step_index)
        raise
    finally:
        sim.close()
    t, c, drive = res.times, res.amplitude, res.drive
    k = np.arange(t.size)[:: cfg.run.output_every]
    write_csv(out / "emitter.csv", {
        "step": k, "t": t[k], "re_c": c[k].real, "im_c": c[k].imag,
        "population": np.abs(c[k]) ** 2, "re_drive": drive[k].real,
        "im_drive": drive[k].imag})
    extra = {"steps": sc.steps, "tfsf_lo": list(sim.surface.lo), "tfsf_hi": list(sim.surface.hi)}
    try:
        fit = purcell_from_decay(t, np.abs(c) ** 2, cfg.emitter.gamma0)
        extra.update(purcell=fit.purcell, lifetime=fit.tau)
    except ValueError:
        pass
    _write_manifest(out, cfg, extra)
    if check and not cfg.has_scatterers:
        err = float(np.max(np.abs(np.abs(c) ** 2 - np.exp(-cfg.emitter.gamma0 * t))))
        log.info("free-space check: max deviation %.3e", err)
        if err > 1e-3:
            raise CheckFailed(f"free-space population deviates by {err:.3e} > 1e-3")
    return t, c


def _spa(sim, cfg, out):
    e, _ = sim.total_field()
    g = sim.scenario.grid
    index = None
    if cfg.snapshot.position is not None and g.dim == 3:
        index = int(round(cfg.snapshot.position / g.dx))
    img = snapshot_spa(e, g, cfg.snapshot.axis, index)
    d = out / "snapshots"
    d.mkdir(exist_ok=True)
    n = sim.step_index
    write_image_csv(d / f"spa_{n:08d}.csv", img)
    write_snapshot(d / f"fields_{n:08d}.bin", {f"E{c}": v for c, v in e.items()}, g, n)
    return n


def run_spectral(cfg, out: Path, check=False):
    scene = scene_1d(cfg)
    em = cfg.emitter
    x_a = em.position[0]
    w = omega_grid(em.omega_a, em.gamma0, cfg.run.spectral_points, cfg.run.spectral_span)
    h = default_step(scene, w.max())

    def provider(omega, vacuum):
        return greens_1d(Scene1D() if vacuum else scene, omega, x_a, h)

    route = spectral_route(provider, em.omega_a, em.gamma0, em.dipole_moment, w)
    write_csv(out / "spectrum.csv", {
        "omega": w, "re_g": route.green.real, "im_g": route.green.imag,
        "kernel": route.kernel.values, "shift": route.shift,
        "re_amp": route.amplitude.values.real, "im_amp": route.amplitude.values.imag})
    duration = cfg.run.duration if cfg.run.duration else cfg.steps * cfg.dt
    t = np.linspace(0, duration, cfg.run.samples)
    c = route.amplitude_t(t)
    write_csv(out / "ct.csv", {"t": t, "re_c": c.real, "im_c": c.imag,
                               "population": np.abs(c) ** 2})
    _write_manifest(out, cfg, {"spectral_calibration": route.calibration,
                               "green_step": h, "omega_samples": int(w.size)})
    if check and not cfg.has_scatterers:
        err = float(np.max(np.abs(np.abs(c) ** 2 - np.exp(-em.gamma0 * t))))
        if err > 1e-2:
            raise CheckFailed(f"spectral free-space population deviates by {err:.3e}")
    return t, c


def run_modes1d(cfg, out: Path, check=False):
    scene = scene_1d(cfg)
    em = cfg.emitter
    lo, hi = cfg.run.band
    w = np.linspace(lo, hi, cfg.run.frequencies) * em.omega_a
    rows = completeness_table(scene, w, em.position[0], cfg.run.points_per_wavelength)
    err = np.array([r.rel_error for r in rows])
    write_csv(out / "completeness.csv", {
        "omega": w, "direct": [r.direct for r in rows], "ba_only": [r.ba_only for r in rows],
        "ma_only": [r.total - r.ba_only for r in rows], "total": [r.total for r in rows],
        "rel_error": err})
    _write_manifest(out, cfg, {"max_rel_error": float(err.max())})
    if check and err.max() >= 1e-2:
        raise CheckFailed(f"mode completeness error {err.max():.3e} >= 1e-2")
    return rows


ROUTES = {"time": run_time, "spectral": run_spectral, "modes1d": run_modes1d}


def run(cfg, out: Path | None = None, check=False):
    out = Path(out or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = ROUTES[cfg.run.route](cfg, out, check)
    log.info("%s route finished in %.1f s -> %s", cfg.run.route, time.perf_counter() - t0, out)
    return result


# --- scans ----------------------------------------------------------------------

class _Builder:
    """Picklable ``value -> Scenario`` for process-parallel scans."""

    def __init__(self, raw, scan):
        self.raw, self.scan = raw, scan

    def config(self, value):
        return from_dict(scan_document(self.raw, self.scan, value))

    def __call__(self, value):
        return build_scenario(self.config(value))


def run_scan(cfg, out: Path | None = None, workers=1, check=False, tolerance=0.07):
    if cfg.scan is None:
        raise ConfigError("the configuration has no 'scan' section")
    out = Path(out or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    build = _Builder(cfg.raw, cfg.scan)
    # validate every point before spending time on any of them
    cfgs = {v: build.config(v) for v in cfg.scan.values}
    rows = resonance_scan(build, cfg.scan.values, cfg.emitter.gamma0, workers)
    cols = {"parameter": [r.parameter for r in rows], "tau": [r.tau for r in rows],
            "gamma": [r.gamma for r in rows], "purcell": [r.purcell for r in rows]}
    if cfg.dim == 1:
        oracle = []
        for r in rows:
            c = cfgs[r.parameter]
            oracle.append(float(purcell_1d(scene_1d(c), c.emitter.omega_a, c.emitter.position[0])))
        cols["purcell_oracle"] = oracle
    write_csv(out / "scan.csv", cols)
    failed = [r for r in rows if r.error]
    with open(out / "scan_errors.txt", "w") as fh:
        for r in failed:
            fh.write(f"{r.parameter!r}: {r.error}\n")
    _write_manifest(out, cfg, {"scan_values": cfg.scan.values})
    if check:
        if failed:
            raise CheckFailed(f"{len(failed)} scan points failed")
        if "purcell_oracle" in cols:
            f = np.array(cols["purcell"])
            o = np.array(cols["purcell_oracle"])
            dev = float(np.max(np.abs(f - o) / np.abs(o)))
            if dev > tolerance:
                raise CheckFailed(f"scan deviates from the transfer-matrix LDOS by {dev:.3f}")
            if extremum_offset(f, o, "max") > 1 or extremum_offset(f, o, "min") > 1:
                raise CheckFailed("scan extrema do not line up with the transfer-matrix LDOS")
    return rows


# --- plotting -------------------------------------------------------------------

def plot_dir(path: Path):
    path = Path(path)
    made = []
    gamma = None
    man = path / "manifest.json"
    if man.exists():
        gamma = json.loads(man.read_text())["calibration"].get("gamma0")
    for name in ("emitter.csv", "ct.csv"):
        if (path / name).exists():
            svg = path / (name[:-4] + ".svg")
            plot_population(path / name, svg, gamma)
            made.append(svg)
    if (path / "scan.csv").exists():
        plot_scan(path / "scan.csv", path / "scan.svg")
        made.append(path / "scan.svg")
    snaps = sorted((path / "snapshots").glob("spa_*.csv")) if (path / "snapshots").exists() else []
    for s in snaps:
        img = np.loadtxt(s, delimiter=",", skiprows=1, ndmin=2)
        plot_image(img, s.with_suffix(".svg"))
        made.append(s.with_suffix(".svg"))
    if not made:
        raise FileNotFoundError(f"nothing to plot in {path}")
    return made


# --- entry point ----------------------------------------------------------------

def _parser():
    p = argparse.ArgumentParser(prog="fdtdqe", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)
    for verb in ("run", "scan", "validate"):
        s = sub.add_parser(verb)
        s.add_argument("config", help="YAML scenario file or a run manifest.json")
        if verb != "validate":
            s.add_argument("-o", "--out", help="output directory (overrides the config)")
            s.add_argument("--check", action="store_true",
                           help="compare against the built-in reference; exit 4 on failure")
        if verb == "scan":
            s.add_argument("-j", "--jobs", type=int, default=1, help="parallel scan points")
            s.add_argument("--tolerance", type=float, default=0.07)
    s = sub.add_parser("plot")
    s.add_argument("run_dir")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verb == "plot":
            for f in plot_dir(Path(args.run_dir)):
                print(f)
            return EXIT_OK
        cfg = from_dict(load_text(Path(args.config).read_text()))
        if args.verb == "validate":
            print(f"{args.config}: valid ({cfg.dim}D, {cfg.run.route} route, "
                  f"{cfg.steps if cfg.run.route == 'time' else '-'} steps)")
            return EXIT_OK
        if args.verb == "run":
            run(cfg, args.out, args.check)
        else:
            run_scan(cfg, args.out, args.jobs, args.check, args.tolerance)
        return EXIT_OK
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalBlowUp as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except ValueError as exc:
        # geometric inconsistencies found while building the lattices
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
