"""Two-level emitter: excited-state amplitude dynamics and its dipole current.

The amplitude obeys::

    dC/dt = -(i w_a + G0/2) C - i Es,     Es = -d . E_scatt(r_a)

where the vacuum decay rate ``G0`` is put in analytically and ``Es`` is the
environment's scattered field sampled from the main lattice. It is advanced
with the central-difference (leapfrog) rule::

    C[n+1] = C[n-1] - 2 dt ((i w_a + G0/2) C[n] + i Es[n])

The emitter radiates into the auxiliary lattice through the current
``J = d dC/dt`` (complex fields) or ``J = 2 w_a Im(C) d`` (real fields),
deposited as a current density on the snapped E samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import SparseSource, YeeGrid

MODES = ("complex", "real")


@dataclass(frozen=True)
class EmitterSpec:
    """Emitter parameters in natural units.

    Parameters
    ----------
    omega_a : float
        Transition frequency (rad/m).
    dipole : tuple of float
        Dipole vector (x, y, z). In 1D only the z component couples.
    position : tuple of float
        Physical position in metres.
    gamma0 : float
        Vacuum decay rate (rad/m) entering the amplitude equation.
    mode : {"complex", "real"}
    """

    omega_a: float
    dipole: tuple
    position: tuple
    gamma0: float
    mode: str = "complex"

    def __post_init__(self):
        d = np.asarray(self.dipole, dtype=float)
        if d.shape != (3,):
            raise ValueError("dipole must have three components")
        if not np.linalg.norm(d) > 0:
            raise ValueError("dipole moment must be non-zero")
        if self.omega_a < 0 or self.gamma0 < 0:
            raise ValueError("omega_a and gamma0 must be non-negative")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        object.__setattr__(self, "dipole", tuple(float(v) for v in d))
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))

    @property
    def dipole_norm(self) -> float:
        return float(np.linalg.norm(self.dipole))


@dataclass
class EmitterState:
    """Two amplitude levels plus the recorded history."""

    c_prev: complex
    c_now: complex
    step: int = 0
    times: list = field(default_factory=list)
    amplitudes: list = field(default_factory=list)
    drive: list = field(default_factory=list)

    def record(self, t, c, e_scatt):
        self.times.append(t)
        self.amplitudes.append(c)
        self.drive.append(e_scatt)


def snap(grid: YeeGrid, spec: EmitterSpec):
    """Flat sample indices of the E components carrying the dipole.

    Each non-zero dipole component uses its own nearest E sample; in 1D only
    the z component exists.
    """
    out = {}
    comps = {"x": 0, "y": 1, "z": 2}
    for c in grid.e_components:
        dc = spec.dipole[comps[c]]
        if dc == 0:
            continue
        idx = grid.nearest_index("e", c, spec.position[:grid.ndim])
        out[c] = (int(np.ravel_multi_index(idx, grid.shape)), dc)
    if not out:
        raise ValueError("dipole has no component on this lattice")
    return out


def index_position(grid: YeeGrid, spec: EmitterSpec):
    """Emitter position in fractional lattice-index units."""
    return tuple(spec.position[a] / grid.dx for a in range(grid.ndim))


def sample_scatt(e_fields: dict, samples: dict) -> complex:
    """``-d . E`` at the emitter samples (hbar = 1)."""
    val = 0.0
    for c, (flat, dc) in samples.items():
        val = val - dc * e_fields[c].reshape(-1)[flat]
    return complex(val)


def bootstrap(spec: EmitterSpec, dt: float, c0: complex = 1.0, method: str = "leapfrog"):
    """Second amplitude level C^1 needed to start the two-level recursion.

    ``"euler"`` is the first-order step ``C0 (1 - (i w_a + G0/2) dt)``.
    ``"leapfrog"`` picks the decaying root of the recursion's characteristic
    equation, ``C0 (sqrt(1 + z^2) - z)`` with ``z = (i w_a + G0/2) dt``, which
    leaves the alternating parasitic mode of the recursion unexcited.
    """
    z = (1j * spec.omega_a + spec.gamma0 / 2) * dt
    if method == "euler":
        return c0 * (1 - z)
    if method == "leapfrog":
        return c0 * (np.sqrt(1 + z * z) - z)
    raise ValueError(f"unknown bootstrap method {method!r}")


def update_amplitude(state: EmitterState, spec: EmitterSpec, e_scatt: complex, dt: float):
    """Advance ``state`` one step and return the new amplitude."""
    new = state.c_prev - 2 * dt * ((1j * spec.omega_a + spec.gamma0 / 2) * state.c_now
                                   + 1j * e_scatt)
    state.c_prev, state.c_now = state.c_now, new
    state.step += 1
    return new


def tls_current(state: EmitterState, samples: dict, grid: YeeGrid):
    """Complex dipole current ``d (C^{n+1} - C^n) / dt`` as a current density.

    Call after :func:`update_amplitude`, so ``c_prev, c_now`` hold the two
    levels straddling the half step that the D update consumes.
    """
    rate = (state.c_now - state.c_prev) / grid.dt
    return _deposit(rate, samples, grid)


def tls_current_real(state: EmitterState, samples: dict, grid: YeeGrid,
                     spec: EmitterSpec):
    """Real dipole current ``2 w_a Im(C) d`` at the half step."""
    if spec.mode != "real":
        raise RuntimeError("real-valued current requested for a complex-mode emitter")
    c_mid = 0.5 * (state.c_now + state.c_prev)
    return _deposit(2 * spec.omega_a * c_mid.imag, samples, grid)


def _deposit(amplitude, samples, grid):
    vol = grid.cell_volume
    return [SparseSource(c, np.array([flat]), np.array([dc * amplitude / vol]))
            for c, (flat, dc) in samples.items()]


class Emitter:
    """Emitter bound to a lattice: snapping, stepping and recording."""

    def __init__(self, spec: EmitterSpec, grid: YeeGrid, bootstrap_method="leapfrog"):
        self.spec = spec
        self.grid = grid
        self.samples = snap(grid, spec)
        c1 = bootstrap(spec, grid.dt, 1.0, bootstrap_method)
        # C^0 = 1; the recursion starts from (C^0, C^1) on its first update.
        self.state = EmitterState(c_prev=1.0 + 0j, c_now=1.0 + 0j)
        self._c1 = c1
        self.max_abs = 1.0

    def advance(self, e_fields: dict) -> complex:
        """Sample the drive at step n, move C to n + 1, return the drive."""
        st = self.state
        e_s = sample_scatt(e_fields, self.samples)
        if self.spec.mode == "real":
            e_s = complex(e_s.real)
        st.record(st.step * self.grid.dt, st.c_now, e_s)
        if st.step == 0:
            # first step uses the bootstrap value instead of the recursion
            st.c_prev, st.c_now = st.c_now, self._c1
            st.step = 1
        else:
            update_amplitude(st, self.spec, e_s, self.grid.dt)
        self.max_abs = max(self.max_abs, abs(st.c_now))
        return e_s

    def current(self):
        if self.spec.mode == "real":
            return tls_current_real(self.state, self.samples, self.grid, self.spec)
        return tls_current(self.state, self.samples, self.grid)

    def history(self):
        st = self.state
        return (np.array(st.times), np.array(st.amplitudes, dtype=complex),
                np.array(st.drive, dtype=complex))
