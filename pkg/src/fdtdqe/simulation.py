"""Coupled time-domain driver: emitter + auxiliary lattice + main lattice.

One iteration, with everything at step n on entry (H at n - 1/2)::

    1. sample Es^n = -d . E_main(r_a), advance C to n + 1
    2. main H update with surface M built from auxiliary E^n
       (auxiliary H advances alongside)
    3. main D/E update with surface J built from auxiliary H^{n+1/2};
       the auxiliary D/E update receives the emitter current at n + 1/2
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .boundaries import CpmlSpec
from .emitter import Emitter, EmitterSpec, index_position, sample_scatt
from .engine import Lattice, YeeGrid
from .tfsf import TfsfSurface, default_box

log = logging.getLogger(__name__)

BLOWUP_FACTOR = 1e12
# absorber given to the auxiliary lattice behind faces the main lattice closes
AUX_PML_CELLS = 10


class NumericalBlowUp(RuntimeError):
    """Field or amplitude growth beyond any physical bound."""


@dataclass
class Scenario:
    """Everything needed for one coupled run.

    ``materials`` is a list of (shape, material) painted into the main
    lattice only. Faces missing from ``pml`` (or with zero thickness) are
    conducting walls of the main lattice; the auxiliary lattice, which holds
    the free-space field of the emitter, is open on every face. ``tfsf_box`` is (lo, hi) in lattice-index units; when
    omitted a box centred on the emitter is chosen, half-way to the nearest
    scatterer if ``scatterer_distance`` (cells) is given.
    """

    grid: YeeGrid
    emitter: EmitterSpec
    steps: int
    materials: list = field(default_factory=list)
    pml: dict = field(default_factory=dict)
    tfsf_box: tuple | None = None
    scatterer_distance: float | None = None
    bootstrap: str = "leapfrog"
    workers: int | None = None

    def faces(self):
        return [f for f in ("x-", "x+", "y-", "y+", "z-", "z+")
                if self.grid.dim == 3 or f[0] == "x"]

    def aux_pml(self):
        return aux_pml(self.grid, self.pml)


@dataclass
class RunResult:
    times: np.ndarray
    amplitude: np.ndarray
    drive: np.ndarray
    max_abs_c: float
    observed: dict = field(default_factory=dict)

    @property
    def population(self):
        return np.abs(self.amplitude) ** 2


class CoupledRun:
    """Stateful coupled simulation; use :meth:`run` or step manually."""

    def __init__(self, scenario: Scenario):
        sc = scenario
        self.scenario = sc
        g = sc.grid
        dtype = float if sc.emitter.mode == "real" else complex
        self.main = Lattice(g, sc.materials, pml=sc.pml, dtype=dtype, workers=sc.workers)
        self.aux = Lattice(g, (), pml=sc.aux_pml(), dtype=dtype, workers=sc.workers)
        self.emitter = Emitter(sc.emitter, g, sc.bootstrap)
        pos = index_position(g, sc.emitter)
        if sc.tfsf_box is None:
            pml_cells = max((s.thickness for s in sc.aux_pml().values()), default=0)
            lo, hi = default_box(g, pos, sc.scatterer_distance, pml_cells)
        else:
            lo, hi = sc.tfsf_box
        self.surface = TfsfSurface(g, lo, hi)
        self.surface.check_standoff(sc.aux_pml())
        self.surface.check_empty(self.main)
        if not self.surface.contains_point(pos):
            raise ValueError("the emitter must lie inside the TFSF box")
        self.step_index = 0
        self._scale = None

    def step(self):
        em, main, aux, surf = self.emitter, self.main, self.aux, self.surface
        em.advance(main.state.e)
        m_eq = surf.magnetic_currents(aux.state.e)
        aux.step_h()
        main.step_h(m_eq)
        j_eq = surf.electric_currents(aux.state.h)
        aux.step_e(em.current())
        main.step_e(j_eq)
        self.step_index += 1

    def _check(self):
        n = self.step_index
        c = self.emitter.state.c_now
        if not np.isfinite(c) or abs(c) > 1e6:
            raise NumericalBlowUp(f"emitter amplitude diverged at step {n}")
        if n % 50 and n != 10:
            return
        scale = max(self.aux.state.max_abs(), self.main.state.max_abs())
        if not np.isfinite(scale):
            raise NumericalBlowUp(f"non-finite field at step {n}")
        if self._scale is None:
            if n >= 10 and scale > 0:
                self._scale = scale
            return
        if scale > BLOWUP_FACTOR * self._scale:
            raise NumericalBlowUp(
                f"field grew by more than {BLOWUP_FACTOR:g} at step {n}")

    def total_field(self):
        """Full (spontaneous-emission) field: main outside Omega, main + aux inside."""
        e, h = {}, {}
        for kind, dst, mf, af in (("e", e, self.main.state.e, self.aux.state.e),
                                  ("h", h, self.main.state.h, self.aux.state.h)):
            for c in mf:
                inside = self.surface.inside(kind, c)
                dst[c] = np.where(inside, mf[c] + af[c], mf[c])
        return e, h

    def run(self, observers=None, every: int = 1) -> RunResult:
        """Advance to ``scenario.steps``.

        ``observers`` maps a name to ``f(run) -> value``; values are gathered
        every ``every`` steps (and once before the first step).
        """
        observers = observers or {}
        observed = {k: [] for k in observers}
        observed_steps = []
        while self.step_index < self.scenario.steps:
            if self.step_index % every == 0:
                observed_steps.append(self.step_index)
                for k, f in observers.items():
                    observed[k].append(f(self))
            self.step()
            self._check()
        # final record so the series ends at t = steps * dt
        st = self.emitter.state
        e_s = sample_scatt(self.main.state.e, self.emitter.samples)
        st.record(st.step * self.scenario.grid.dt, st.c_now, e_s)
        t, c, d = self.emitter.history()
        if observers:
            observed = {k: np.array(v) for k, v in observed.items()}
            observed["steps"] = np.array(observed_steps)
        return RunResult(t, c, d, self.emitter.max_abs, observed)

    def close(self):
        self.main.close()
        self.aux.close()


def run_scenario(scenario: Scenario, observers=None, every=1) -> RunResult:
    sim = CoupledRun(scenario)
    try:
        return sim.run(observers, every)
    finally:
        sim.close()


def field_excitation(run: CoupledRun) -> float:
    """Un-normalised field excitation: sum of |E|^2 + |H|^2 of the full field."""
    e, h = run.total_field()
    w = sum(float(np.sum(np.abs(v) ** 2)) for v in e.values())
    w += sum(float(np.sum(np.abs(v) ** 2)) for v in h.values())
    return w * run.scenario.grid.cell_volume


def aux_pml(grid: YeeGrid, pml: dict) -> dict:
    """Main-lattice absorbers, with a default CPML wherever the main lattice is closed."""
    out = {}
    for f in ("x-", "x+", "y-", "y+", "z-", "z+"):
        if grid.dim == 1 and f[0] != "x":
            continue
        spec = pml.get(f)
        out[f] = spec if spec is not None and spec.thickness > 0 else CpmlSpec(AUX_PML_CELLS)
    return out


def default_pml(grid: YeeGrid, thickness=10, faces=None):
    faces = faces or [f for f in ("x-", "x+", "y-", "y+", "z-", "z+")
                      if grid.dim == 3 or f[0] == "x"]
    return {f: CpmlSpec(thickness=thickness) for f in faces}
