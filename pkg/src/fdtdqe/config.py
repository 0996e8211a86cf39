"""YAML scenario files: parsing, validation and construction of runs.

Lengths are given in ``units`` (``nm`` by default, or ``m``). Frequencies
and rates (material poles, ``gamma0``) are in rad/m, the natural unit with
c = 1. A minimal 1D file::

    grid: {dim: 1, dx: 3, extent: [6000]}
    emitter: {wavelength: 600, position: [3000], lifetime_periods: 10}
    run: {lifetimes: 3}

Everything else has defaults: 10-cell PML on every face, complex mode,
leapfrog bootstrap, a TFSF box chosen around the emitter, time-domain route.
All semantic violations are collected and reported together.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .analysis import dipole_for_rate, gamma0
from .boundaries import FACES, CpmlSpec
from .emitter import EmitterSpec
from .engine import YeeGrid, cfl_dt
from .geometry import make_shape
from .layers import Layer, Scene1D
from .media import MIRROR_METAL, PEC, VACUUM, LorentzDrudeParams
from .simulation import AUX_PML_CELLS, Scenario

UNITS = {"nm": 1e-9, "um": 1e-6, "m": 1.0}
PRESETS = {"mirror_metal": MIRROR_METAL, "pec": PEC, "vacuum": VACUUM}
ROUTES = ("time", "spectral", "modes1d")
LENGTH_KEYS = {"lo", "hi", "start", "end", "center", "radius", "inner_radius",
               "outer_radius"}
MATERIAL_KEYS = {"eps_inf", "omega_p_drude", "gamma_drude", "omega_p_lorentz",
                 "omega_0_lorentz", "gamma_lorentz"}


class ConfigError(ValueError):
    """Syntax error or a list of semantic violations."""

    def __init__(self, errors):
        self.errors = [errors] if isinstance(errors, str) else list(errors)
        super().__init__("\n".join(self.errors))


@dataclass
class EmitterConfig:
    wavelength: float
    direction: tuple
    position: tuple
    dipole_moment: float
    gamma0: float
    mode: str = "complex"
    bootstrap: str = "leapfrog"

    @property
    def omega_a(self):
        return 2 * np.pi / self.wavelength

    def spec(self) -> EmitterSpec:
        d = np.asarray(self.direction, float)
        d = d / np.linalg.norm(d) * self.dipole_moment
        pos = tuple(self.position) + (0.0,) * (3 - len(self.position))
        return EmitterSpec(self.omega_a, tuple(d), pos, self.gamma0, self.mode)


@dataclass
class RunConfig:
    route: str = "time"
    steps: int | None = None
    duration: float | None = None     # natural time (metres of light travel)
    output_every: int = 1
    workers: int | None = None
    samples: int = 1000
    spectral_points: int = 2**14
    spectral_span: float = 200.0
    frequencies: int = 50
    band: tuple = (0.7, 1.3)
    points_per_wavelength: int = 60


@dataclass
class SnapshotConfig:
    every: int
    axis: str = "z"
    position: float | None = None


@dataclass
class ScanConfig:
    paths: list
    values: list
    mode: str = "shift"   # "shift" adds the value to each path, "set" replaces it


@dataclass
class ScenarioConfig:
    """Validated scenario; ``raw`` keeps the parsed document for manifests."""

    name: str
    dim: int
    dx: float
    shape: tuple
    courant: float
    materials: dict
    geometry: list
    boundaries: dict
    emitter: EmitterConfig
    tfsf: tuple | None
    run: RunConfig
    output: Path
    scan: ScanConfig | None = None
    snapshot: SnapshotConfig | None = None
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def dt(self):
        return cfl_dt(self.dx, self.dim, self.courant)

    @property
    def faces(self):
        return [f for f in FACES if self.dim == 3 or f[0] == "x"]

    @property
    def steps(self) -> int:
        if self.run.steps is not None:
            return int(self.run.steps)
        return int(np.ceil(self.run.duration / self.dt))

    @property
    def has_scatterers(self):
        return bool(self.geometry)

    def grid(self) -> YeeGrid:
        return YeeGrid(self.shape, self.dx, self.dt)

    def pml(self) -> dict:
        return {f: s for f, s in self.boundaries.items() if s.thickness > 0}

    def hash(self) -> str:
        return config_hash(self.raw)


def config_hash(raw: dict) -> str:
    text = json.dumps(raw, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()


# --- parsing -----------------------------------------------------------------

def load_text(text: str) -> dict:
    """YAML (or JSON) text to a dict; a run manifest yields its embedded config."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}: " if mark else ""
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"syntax error at {where}{problem}") from None
    if not isinstance(doc, dict):
        raise ConfigError("the configuration must be a mapping at top level")
    if "manifest_version" in doc and "config" in doc:
        doc = doc["config"]
    return doc


def parse_config(text: str) -> ScenarioConfig:
    return from_dict(load_text(text))


def load_config(path) -> ScenarioConfig:
    return parse_config(Path(path).read_text())


class _Collector:
    def __init__(self):
        self.errors = []

    def add(self, msg):
        self.errors.append(msg)

    def number(self, block, key, where, default=None, positive=False, integer=False,
               required=False):
        if key not in block:
            if required:
                self.add(f"{where}.{key} is required")
            return default
        v = block[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.add(f"{where}.{key} must be a number, got {v!r}")
            return default
        if integer and int(v) != v:
            self.add(f"{where}.{key} must be an integer, got {v!r}")
            return default
        if positive and not v > 0:
            self.add(f"{where}.{key} must be positive, got {v!r}")
            return default
        return int(v) if integer else float(v)

    def vector(self, block, key, where, n, required=False):
        if key not in block:
            if required:
                self.add(f"{where}.{key} is required")
            return None
        v = block[key]
        if not isinstance(v, (list, tuple)) or len(v) != n or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
            self.add(f"{where}.{key} must be a list of {n} numbers, got {v!r}")
            return None
        return tuple(float(x) for x in v)

    def mapping(self, doc, key, required=False):
        v = doc.get(key, {} if not required else None)
        if v is None:
            if required:
                self.add(f"section '{key}' is required")
            return {}
        if not isinstance(v, dict):
            self.add(f"section '{key}' must be a mapping")
            return {}
        return v


KNOWN_SECTIONS = {"name", "units", "grid", "materials", "geometry", "boundaries",
                  "emitter", "tfsf", "run", "output", "scan", "snapshot"}


def _aux_cells(boundaries, face):
    """Absorber depth on ``face`` seen by the auxiliary (free-space) lattice."""
    spec = boundaries.get(face)
    return spec.thickness if spec is not None and spec.thickness > 0 else AUX_PML_CELLS


def from_dict(doc: dict) -> ScenarioConfig:
    """Validate a parsed document; raises :class:`ConfigError` listing every problem."""
    raw = copy.deepcopy(doc)
    ck = _Collector()
    for k in doc:
        if k not in KNOWN_SECTIONS:
            ck.add(f"unknown section '{k}'")
    units = doc.get("units", "nm")
    if units not in UNITS:
        ck.add(f"units must be one of {sorted(UNITS)}, got {units!r}")
        units = "nm"
    u = UNITS[units]

    # grid
    g = ck.mapping(doc, "grid", required=True)
    dim = g.get("dim", 3)
    if dim not in (1, 3):
        ck.add(f"grid.dim must be 1 or 3, got {dim!r}")
        dim = 3
    dx = ck.number(g, "dx", "grid", positive=True, required=True)
    courant = ck.number(g, "courant", "grid", default=0.5, positive=True)
    if courant is not None and courant > 1:
        ck.add(f"grid.courant must lie in (0, 1], got {courant}")
    shape = None
    if ("cells" in g) == ("extent" in g):
        ck.add("grid needs exactly one of 'cells' or 'extent'")
    elif "cells" in g:
        cells = g["cells"]
        if (not isinstance(cells, (list, tuple)) or len(cells) != dim
                or not all(isinstance(c, int) and c > 0 for c in cells)):
            ck.add(f"grid.cells must be {dim} positive integers, got {cells!r}")
        else:
            shape = tuple(cells)
    else:
        ext = ck.vector(g, "extent", "grid", dim)
        if ext is not None and dx:
            shape = []
            for a, e in enumerate(ext):
                n = e / dx
                if abs(n - round(n)) > 0.5 or round(n) < 1:
                    ck.add(f"grid.extent[{a}] = {e} is not a multiple of dx = {dx} "
                           "within half a cell")
                shape.append(max(int(round(n)), 1))
            shape = tuple(shape)
    dx_m = dx * u if dx else None

    # materials
    materials = {}
    for name, spec in ck.mapping(doc, "materials").items():
        where = f"materials.{name}"
        if isinstance(spec, str):
            spec = {"preset": spec}
        if not isinstance(spec, dict):
            ck.add(f"{where} must be a mapping or a preset name")
            continue
        if "preset" in spec:
            if spec["preset"] not in PRESETS:
                ck.add(f"{where}.preset must be one of {sorted(PRESETS)}, "
                       f"got {spec['preset']!r}")
                continue
            materials[name] = PRESETS[spec["preset"]]
            continue
        bad = set(spec) - MATERIAL_KEYS
        if bad:
            ck.add(f"{where} has unknown keys {sorted(bad)}")
            continue
        try:
            materials[name] = LorentzDrudeParams(**{k: float(v) for k, v in spec.items()})
        except (TypeError, ValueError) as exc:
            ck.add(f"{where}: {exc}")

    # geometry
    geometry = []
    items = doc.get("geometry", []) or []
    if not isinstance(items, list):
        ck.add("section 'geometry' must be a list")
        items = []
    for i, item in enumerate(items):
        where = f"geometry[{i}]"
        if not isinstance(item, dict) or "shape" not in item or "material" not in item:
            ck.add(f"{where} needs 'shape' and 'material'")
            continue
        mat = item["material"]
        if mat not in materials and mat not in PRESETS:
            ck.add(f"{where} refers to undefined material {mat!r}")
            continue
        kw = {}
        for k, v in item.items():
            if k in ("shape", "material"):
                continue
            if k in LENGTH_KEYS:
                v = [x * u for x in v] if isinstance(v, (list, tuple)) else v * u
            kw[k] = tuple(v) if isinstance(v, list) else v
        try:
            shp = make_shape(item["shape"], **kw)
        except (TypeError, ValueError) as exc:
            ck.add(f"{where}: {exc}")
            continue
        geometry.append((shp, materials.get(mat, PRESETS.get(mat))))

    # boundaries
    faces = [f for f in FACES if dim == 3 or f[0] == "x"]
    bdoc = ck.mapping(doc, "boundaries")
    default = bdoc.get("default", {"pml": 10})
    boundaries = {}
    for k in bdoc:
        if k != "default" and k not in faces:
            ck.add(f"boundaries.{k} is not a face of a {dim}D lattice")
    for f in faces:
        spec = bdoc.get(f, default)
        if spec in ("pec", None):
            spec = {"pml": 0}
        if not isinstance(spec, dict):
            ck.add(f"boundaries.{f} must be 'pec' or a mapping")
            continue
        try:
            cp = CpmlSpec(thickness=int(spec.get("pml", 10)),
                          order=float(spec.get("order", 3.0)),
                          sigma_scale=float(spec.get("sigma_scale", 1.0)),
                          kappa_max=float(spec.get("kappa_max", 1.0)),
                          alpha_max=float(spec.get("alpha_max", 0.0)))
        except (TypeError, ValueError) as exc:
            ck.add(f"boundaries.{f}: {exc}")
            continue
        if shape is not None:
            n = shape["xyz".index(f[0])]
            if 2 * cp.thickness >= n:
                ck.add(f"boundaries.{f}: {cp.thickness}-cell PML does not fit in {n} cells")
        boundaries[f] = cp

    # emitter
    e = ck.mapping(doc, "emitter", required=True)
    lam = ck.number(e, "wavelength", "emitter", positive=True, required=True)
    pos = ck.vector(e, "position", "emitter", dim, required=True)
    direction = ck.vector(e, "dipole", "emitter", 3) or (0.0, 0.0, 1.0)
    if not np.linalg.norm(direction) > 0:
        ck.add("emitter.dipole direction must be non-zero")
        direction = (0.0, 0.0, 1.0)
    if dim == 1 and direction[2] == 0:
        ck.add("emitter.dipole needs a z component in 1D")
    mode = e.get("mode", "complex")
    if mode not in ("complex", "real"):
        ck.add(f"emitter.mode must be 'complex' or 'real', got {mode!r}")
    boot = e.get("bootstrap", "leapfrog")
    if boot not in ("leapfrog", "euler"):
        ck.add(f"emitter.bootstrap must be 'leapfrog' or 'euler', got {boot!r}")
    rate_keys = [k for k in ("dipole_moment", "gamma0", "lifetime_periods") if k in e]
    emitter = None
    if len(rate_keys) != 1:
        ck.add("emitter needs exactly one of dipole_moment, gamma0, lifetime_periods")
    elif lam and pos is not None:
        key = rate_keys[0]
        val = ck.number(e, key, "emitter", positive=True)
        lam_m = lam * u
        w = 2 * np.pi / lam_m
        if val is not None:
            if key == "dipole_moment":
                d, rate = val, gamma0(w, val, dim)
            else:
                rate = val if key == "gamma0" else w / (2 * np.pi * val)
                d = dipole_for_rate(w, rate, dim)
            emitter = EmitterConfig(lam_m, direction, tuple(p * u for p in pos), d, rate,
                                    mode, boot)
    if emitter is not None and shape is not None and dx_m:
        for a in range(dim):
            n = shape[a]
            p = emitter.position[a] / dx_m
            lo_pml = _aux_cells(boundaries, FACES[2 * a])
            hi_pml = _aux_cells(boundaries, FACES[2 * a + 1])
            if not lo_pml + 2 <= p <= n - hi_pml - 2:
                ck.add(f"emitter position {pos} {units} lies outside the usable domain "
                       f"(axis {'xyz'[a]}, PML included)")

    # tfsf box
    tfsf = None
    if doc.get("tfsf") is not None:
        t = ck.mapping(doc, "tfsf")
        lo = ck.vector(t, "lo", "tfsf", dim, required=True)
        hi = ck.vector(t, "hi", "tfsf", dim, required=True)
        if lo and hi and dx_m:
            if any(a >= b for a, b in zip(lo, hi)):
                ck.add(f"tfsf box lo {lo} must lie below hi {hi}")
            tfsf = (tuple(v * u / dx_m for v in lo), tuple(v * u / dx_m for v in hi))
            if emitter is not None:
                p = [emitter.position[a] / dx_m for a in range(dim)]
                if not all(tfsf[0][a] <= p[a] <= tfsf[1][a] for a in range(dim)):
                    ck.add(f"emitter at {pos} {units} lies outside the tfsf box "
                           f"[{list(lo)}, {list(hi)}] {units}")
            if shape is not None:
                for a in range(dim):
                    lo_t = _aux_cells(boundaries, FACES[2 * a])
                    hi_t = _aux_cells(boundaries, FACES[2 * a + 1])
                    if tfsf[0][a] - lo_t < 2 or shape[a] - hi_t - tfsf[1][a] < 2:
                        ck.add(f"tfsf box must stay 2 cells clear of the PML on axis "
                               f"{'xyz'[a]}")

    # run
    r = ck.mapping(doc, "run")
    run = RunConfig()
    run.route = r.get("route", "time")
    if run.route not in ROUTES:
        ck.add(f"run.route must be one of {ROUTES}, got {run.route!r}")
    if run.route in ("spectral", "modes1d") and dim != 1:
        ck.add(f"run.route {run.route!r} needs a 1D scenario")
    durations = [k for k in ("steps", "duration", "lifetimes") if k in r]
    if len(durations) > 1:
        ck.add("run takes at most one of steps, duration, lifetimes")
    elif run.route in ("time", "spectral") and not durations:
        ck.add(f"run needs one of steps, duration, lifetimes for route {run.route!r}")
    run.steps = ck.number(r, "steps", "run", positive=True, integer=True)
    if "duration" in r:
        dur = ck.number(r, "duration", "run", positive=True)
        run.duration = dur * u if dur else None
    if "lifetimes" in r:
        lt = ck.number(r, "lifetimes", "run", positive=True)
        if lt and emitter is not None:
            run.duration = lt / emitter.gamma0
    run.output_every = ck.number(r, "output_every", "run", 1, positive=True, integer=True)
    run.workers = ck.number(r, "workers", "run", None, positive=True, integer=True)
    run.samples = ck.number(r, "samples", "run", 1000, positive=True, integer=True)
    run.spectral_points = ck.number(r, "spectral_points", "run", 2**14, positive=True,
                                    integer=True)
    run.spectral_span = ck.number(r, "spectral_span", "run", 200.0, positive=True)
    run.frequencies = ck.number(r, "frequencies", "run", 50, positive=True, integer=True)
    run.points_per_wavelength = ck.number(r, "points_per_wavelength", "run", 60,
                                          positive=True, integer=True)
    band = ck.vector(r, "band", "run", 2) or (0.7, 1.3)
    if not 0 < band[0] < band[1]:
        ck.add(f"run.band must satisfy 0 < lo < hi, got {band}")
    run.band = band

    # snapshot
    snapshot = None
    if doc.get("snapshot") is not None:
        s = ck.mapping(doc, "snapshot")
        every = ck.number(s, "every", "snapshot", positive=True, integer=True, required=True)
        axis = s.get("axis", "z")
        if axis not in ("x", "y", "z"):
            ck.add(f"snapshot.axis must be x, y or z, got {axis!r}")
        sp = ck.number(s, "position", "snapshot")
        if dim == 3 and sp is not None and shape is not None and dx_m:
            n = shape["xyz".index(axis)]
            if not 0 <= sp * u < n * dx_m:
                ck.add(f"snapshot plane {axis} = {sp} {units} lies outside the domain")
        if every:
            snapshot = SnapshotConfig(every, axis, None if sp is None else sp * u)

    # scan
    scan = None
    if doc.get("scan") is not None:
        s = ck.mapping(doc, "scan")
        mode_s = "set" if "set" in s else "shift"
        paths = s.get(mode_s)
        if isinstance(paths, str):
            paths = [paths]
        if not isinstance(paths, list) or not paths:
            ck.add("scan needs 'shift' or 'set' naming one or more config paths")
            paths = []
        for p in paths:
            try:
                get_path(doc, p)
            except (KeyError, IndexError, TypeError):
                ck.add(f"scan path {p!r} does not exist in the configuration")
        values = s.get("values")
        if values is None and all(k in s for k in ("start", "stop", "num")):
            values = np.linspace(float(s["start"]), float(s["stop"]), int(s["num"])).tolist()
        if not isinstance(values, list) or not values:
            ck.add("scan needs 'values' or start/stop/num")
            values = []
        scan = ScanConfig(paths, [float(v) for v in values], mode_s)

    out = doc.get("output", "runs/" + str(doc.get("name", "scenario")))
    if ck.errors:
        raise ConfigError(ck.errors)
    return ScenarioConfig(str(doc.get("name", "scenario")), dim, dx_m, shape, courant,
                          materials, geometry, boundaries, emitter, tfsf, run, Path(out),
                          scan, snapshot, raw)


# --- dotted paths (for scans) -------------------------------------------------

def _split(path):
    out = []
    for part in path.split("."):
        while "[" in part:
            head, rest = part.split("[", 1)
            if head:
                out.append(head)
            idx, part = rest.split("]", 1)
            out.append(int(idx))
        if part:
            out.append(int(part) if part.isdigit() else part)
    return out


def get_path(doc, path):
    cur = doc
    for k in _split(path):
        cur = cur[k]
    return cur


def set_path(doc, path, value):
    keys = _split(path)
    cur = doc
    for k in keys[:-1]:
        cur = cur[k]
    cur[keys[-1]] = value


def scan_document(raw: dict, scan: ScanConfig, value: float) -> dict:
    doc = copy.deepcopy(raw)
    doc.pop("scan", None)
    for p in scan.paths:
        base = get_path(raw, p)
        set_path(doc, p, value if scan.mode == "set" else base + value)
    return doc


# --- construction ---------------------------------------------------------------

def build_scenario(cfg: ScenarioConfig) -> Scenario:
    grid = cfg.grid()
    scatter = None
    if cfg.tfsf is None and cfg.geometry:
        scatter = _nearest_scatterer_cells(cfg, grid)
    return Scenario(grid=grid, emitter=cfg.emitter.spec(), steps=cfg.steps,
                    materials=list(cfg.geometry), pml=cfg.pml(), tfsf_box=cfg.tfsf,
                    scatterer_distance=scatter, bootstrap=cfg.emitter.bootstrap,
                    workers=cfg.run.workers)


def _nearest_scatterer_cells(cfg, grid):
    """Chebyshev distance (cells) from the emitter to the closest painted E sample."""
    p = np.array(cfg.emitter.position[:grid.ndim]) / grid.dx
    best = np.inf
    for c in grid.e_components:
        x, y, z = grid.positions("e", c)
        mask = np.zeros(grid.shape, bool)
        for shp, _ in cfg.geometry:
            mask |= np.broadcast_to(shp.contains(x, y, z), grid.shape)
        if not mask.any():
            continue
        idx = np.argwhere(mask) + np.array(grid.offsets("e", c))
        best = min(best, float(np.min(np.max(np.abs(idx - p), axis=1))))
    return None if not np.isfinite(best) else best


def scene_1d(cfg: ScenarioConfig) -> Scene1D:
    """Planar scene equivalent to a 1D configuration.

    Slabs reaching into a PML continue to infinity; faces without a PML are
    conducting walls at the lattice ends.
    """
    if cfg.dim != 1:
        raise ValueError("a planar scene needs a 1D configuration")
    n = cfg.shape[0]
    length = n * cfg.dx
    lo_pml = cfg.boundaries["x-"].thickness * cfg.dx
    hi_pml = length - cfg.boundaries["x+"].thickness * cfg.dx
    layers = []
    for shp, mat in cfg.geometry:
        if hasattr(shp, "start"):
            a, b = shp.start, shp.end
        elif hasattr(shp, "lo"):
            a, b = shp.lo[0], shp.hi[0]
        else:
            raise ValueError(f"{type(shp).__name__} has no planar equivalent")
        a = -np.inf if a <= lo_pml else a
        b = np.inf if b >= hi_pml else b
        layers.append(Layer(a, b, mat))
    if cfg.boundaries["x-"].thickness == 0:
        layers.append(Layer(-np.inf, 0.0, PEC))
    if cfg.boundaries["x+"].thickness == 0:
        layers.append(Layer(length, np.inf, PEC))
    # later entries override earlier ones on the lattice; keep that rule here
    return Scene1D(tuple(_flatten(layers)))


def _flatten(layers):
    out = []
    for l in layers:
        kept = []
        for o in out:
            if o.end <= l.start or o.start >= l.end:
                kept.append(o)
                continue
            if o.start < l.start:
                kept.append(Layer(o.start, l.start, o.material))
            if o.end > l.end:
                kept.append(Layer(l.end, o.end, o.material))
        out = kept + [l]
    return out
