"""Yee-lattice leapfrog integrator for the Maxwell curl equations.

Natural units (c = eps0 = mu0 = 1) with lengths in metres. Fields are stored
structure-of-arrays, one array per Cartesian component, all with the lattice
shape. Staggering follows the usual Yee layout: ``E_c`` sits half a cell along
``c``; ``H_b`` sits half a cell along both axes other than ``b``.

The outer faces are always perfect conductors. Low faces zero the tangential
E samples at index 0; high faces are the implicit zero one sample past the
end of each array. Absorbing layers (CPML) live inside those walls.

In 1D only ``E_z`` and ``H_y`` exist and everything varies along x::

    H_y[i] += dt/dx (E_z[i+1] - E_z[i])
    D_z[i] += dt/dx (H_y[i] - H_y[i-1]) - dt J_z[i]
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .boundaries import FACES, CpmlSpec, apply_pec, check_faces, make_cpml
from .media import LorentzDrudeParams, PerfectConductor, recursion_coefficients

AXES = ("x", "y", "z")
AXIS_INDEX = {"x": 0, "y": 1, "z": 2}

# (curl F)_c = sum of sign * d/d(axis) F_(source) over these terms.
CURL_TERMS = {
    "x": ((+1, "z", "y"), (-1, "y", "z")),
    "y": ((+1, "x", "z"), (-1, "z", "x")),
    "z": ((+1, "y", "x"), (-1, "x", "y")),
}

WORKERS_ENV = "FDTDQE_WORKERS"


def cfl_dt(grid_spacing: float, dimensionality: int, safety: float = 0.99) -> float:
    """Courant-limited time step ``safety * dx / sqrt(D)``."""
    if not grid_spacing > 0:
        raise ValueError("grid spacing must be positive")
    if not 0 < safety <= 1:
        raise ValueError("safety factor must lie in (0, 1]")
    if dimensionality not in (1, 3):
        raise ValueError("dimensionality must be 1 or 3")
    return safety * grid_spacing / math.sqrt(dimensionality)


@dataclass(frozen=True)
class YeeGrid:
    """Uniform cubic lattice.

    Parameters
    ----------
    shape : tuple of int
        ``(nx,)`` for a 1D lattice, ``(nx, ny, nz)`` for 3D. ``(nx, 1, 1)``
        with ``dim=1`` is accepted and normalised to ``(nx,)``.
    dx : float
        Cell size in metres.
    dt : float
        Time step in metres of light travel.
    """

    shape: tuple
    dx: float
    dt: float

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        if len(shape) == 3 and shape[1:] == (1, 1) and shape[0] > 1:
            shape = shape[:1]
        if len(shape) not in (1, 3):
            raise ValueError("shape must have 1 or 3 entries")
        if any(n < 1 for n in shape):
            raise ValueError("all dims must be >= 1")
        if not self.dx > 0 or not self.dt > 0:
            raise ValueError("dx and dt must be positive")
        limit = self.dx / math.sqrt(len(shape))
        if self.dt > limit * (1 + 1e-12):
            raise ValueError(f"dt={self.dt:g} violates the Courant bound {limit:g}")
        object.__setattr__(self, "shape", shape)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def e_components(self):
        return ("z",) if self.dim == 1 else AXES

    @property
    def h_components(self):
        return ("y",) if self.dim == 1 else AXES

    @property
    def cell_volume(self) -> float:
        return self.dx**self.dim

    def offsets(self, kind: str, comp: str):
        """Fractional-cell offsets of a component along each lattice axis."""
        a = AXIS_INDEX[comp]
        if kind == "e":
            return tuple(0.5 if ax == a else 0.0 for ax in range(self.ndim))
        if kind == "h":
            return tuple(0.0 if ax == a else 0.5 for ax in range(self.ndim))
        raise ValueError(f"kind must be 'e' or 'h', got {kind!r}")

    def positions(self, kind: str, comp: str):
        """Physical (x, y, z) coordinates of every sample, as open meshes."""
        off = self.offsets(kind, comp)
        coords = []
        for ax in range(3):
            if ax < self.ndim:
                c = (np.arange(self.shape[ax]) + off[ax]) * self.dx
                s = [1] * self.ndim
                s[ax] = -1
                coords.append(c.reshape(s))
            else:
                coords.append(0.0)
        return tuple(coords)

    def nearest_index(self, kind: str, comp: str, point) -> tuple:
        """Index of the ``comp`` sample closest to a physical point."""
        off = self.offsets(kind, comp)
        idx = []
        for ax in range(self.ndim):
            i = int(round(point[ax] / self.dx - off[ax]))
            if not 0 <= i < self.shape[ax]:
                raise ValueError(f"point {tuple(point)} lies outside the lattice")
            idx.append(i)
        return tuple(idx)

    def extent(self):
        return tuple(n * self.dx for n in self.shape)


@dataclass
class FieldState:
    """Field arrays at one leapfrog instant (E, D at n; H at n - 1/2)."""

    e: dict
    h: dict
    d: dict
    p_drude: dict
    p_lorentz: dict
    step: int = 0

    @classmethod
    def zeros(cls, grid: YeeGrid, dtype=complex):
        def z(comps):
            return {c: np.zeros(grid.shape, dtype=dtype) for c in comps}
        ec = grid.e_components
        return cls(e=z(ec), h=z(grid.h_components), d=z(ec),
                   p_drude=z(ec), p_lorentz=z(ec))

    def copy(self):
        def cp(f):
            return {k: v.copy() for k, v in f.items()}
        return FieldState(cp(self.e), cp(self.h), cp(self.d), cp(self.p_drude),
                          cp(self.p_lorentz), self.step)

    def max_abs(self) -> float:
        m = 0.0
        for f in (self.e, self.h):
            for v in f.values():
                if v.size:
                    m = max(m, float(np.max(np.abs(v))))
        return m


@dataclass
class SparseSource:
    """Current samples on one field component, at flat lattice indices.

    Duplicate indices accumulate.
    """

    comp: str
    index: np.ndarray
    value: np.ndarray

    def validate(self, grid: YeeGrid, kind: str):
        comps = grid.e_components if kind == "e" else grid.h_components
        if self.comp not in comps:
            raise ValueError(f"component {self.comp!r} does not exist on this lattice")
        idx = np.asarray(self.index)
        size = int(np.prod(grid.shape))
        if idx.size and (idx.min() < 0 or idx.max() >= size):
            raise ValueError("current sample lies outside the lattice")


def point_source(grid: YeeGrid, comp: str, index, value) -> SparseSource:
    """Single-sample source at a multi-index, with bounds checking."""
    index = tuple(int(i) for i in np.atleast_1d(index))
    if len(index) != grid.ndim or any(not 0 <= i < n for i, n in zip(index, grid.shape)):
        raise ValueError(f"index {index} lies outside the lattice {grid.shape}")
    flat = np.ravel_multi_index(index, grid.shape)
    return SparseSource(comp, np.array([flat]), np.array([value]))


def _inject(fields: dict, sources, scale, grid, kind):
    for s in sources or ():
        s.validate(grid, kind)
        np.add.at(fields[s.comp].reshape(-1), np.asarray(s.index),
                  -scale * np.asarray(s.value))


# --- difference stencils restricted to rows [x0, x1) of axis 0 -------------

def _axis_slice(ndim, a, sl):
    out = [slice(None)] * ndim
    out[a] = sl
    return tuple(out)


def _forward_diff(f, a, x0, x1, out=None):
    """f[i+1] - f[i] along axis a, with f beyond the last sample equal to 0."""
    n = f.shape[a]
    if out is None:
        out = np.empty((x1 - x0,) + f.shape[1:], dtype=f.dtype)
    if a == 0:
        m = min(x1 + 1, n) - x0 - 1          # rows that have a successor
        np.subtract(f[x0 + 1:x0 + 1 + m], f[x0:x0 + m], out=out[:m])
        if m < x1 - x0:
            np.negative(f[x0 + m:x1], out=out[m:])
        return out
    nd = f.ndim
    blk = f[x0:x1]
    lo = _axis_slice(nd, a, slice(0, n - 1))
    np.subtract(blk[_axis_slice(nd, a, slice(1, n))], blk[lo], out=out[lo])
    last = _axis_slice(nd, a, slice(n - 1, n))
    np.negative(blk[last], out=out[last])
    return out


def _backward_diff(f, a, x0, x1, out=None):
    """f[i] - f[i-1] along axis a, with f[-1] equal to 0."""
    if out is None:
        out = np.empty((x1 - x0,) + f.shape[1:], dtype=f.dtype)
    if a == 0:
        if x0 == 0:
            out[0] = f[0]
            np.subtract(f[1:x1], f[0:x1 - 1], out=out[1:])
        else:
            np.subtract(f[x0:x1], f[x0 - 1:x1 - 1], out=out)
        return out
    nd = f.ndim
    blk = f[x0:x1]
    rest = _axis_slice(nd, a, slice(1, None))
    np.subtract(blk[rest], blk[_axis_slice(nd, a, slice(0, -1))], out=out[rest])
    first = _axis_slice(nd, a, slice(0, 1))
    out[first] = blk[first]
    return out


def _curl_terms(grid: YeeGrid, comp: str, source_comps):
    terms = []
    for sign, src, axis in CURL_TERMS[comp]:
        a = AXIS_INDEX[axis]
        if src in source_comps and a < grid.ndim:
            terms.append((sign, src, a))
    return terms


class _CpmlMemory:
    """Convolution memory variables for every (field, component, axis) term."""

    def __init__(self, cpml, grid: YeeGrid, dtype):
        self.cpml = cpml
        self.psi = {}
        for kind, comps, src in (("e", grid.e_components, grid.h_components),
                                 ("h", grid.h_components, grid.e_components)):
            prof = cpml.e_profiles if kind == "e" else cpml.h_profiles
            for c in comps:
                for _, _, a in _curl_terms(grid, c, src):
                    if a in prof:
                        self.psi[(kind, c, a)] = np.zeros(grid.shape, dtype=dtype)

    def apply(self, kind, comp, a, diff, x0, x1):
        key = (kind, comp, a)
        if key not in self.psi:
            return diff
        prof = (self.cpml.e_profiles if kind == "e" else self.cpml.h_profiles)[a]
        psi = self.psi[key]
        nd = diff.ndim
        shape = [1] * nd
        shape[a] = -1
        for r0, r1 in prof.regions:
            if a == 0:
                lo, hi = max(r0, x0), min(r1, x1)
                if lo >= hi:
                    continue
                absl = (slice(lo, hi),)
                rel = (slice(lo - x0, hi - x0),)
                b, c, ik = (prof.b[lo:hi], prof.c[lo:hi], prof.inv_kappa[lo:hi])
            else:
                absl = (slice(x0, x1),) + _axis_slice(nd, a, slice(r0, r1))[1:]
                rel = _axis_slice(nd, a, slice(r0, r1))
                b, c, ik = (prof.b[r0:r1], prof.c[r0:r1], prof.inv_kappa[r0:r1])
            b, c, ik = (v.reshape(shape) for v in (b, c, ik))
            p = psi[absl]
            dv = diff[rel]
            p *= b
            p += c * dv
            if prof.stretched:
                dv *= ik
            dv += p
        return diff


def _slab_ranges(n, workers):
    workers = max(1, min(workers, n))
    edges = np.linspace(0, n, workers + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _curl_kernel(target, source, terms, diff, kind, memory, k, sign_out):
    """``target += sign_out * k * curl(source)`` over rows [x0, x1).

    Scratch blocks are kept per row range so repeated steps allocate nothing.
    """
    scratch = {}

    def run(x0, x1):
        bufs = scratch.get((x0, x1))
        if bufs is None:
            f = next(iter(source.values()))
            shape = (x1 - x0,) + f.shape[1:]
            bufs = scratch[(x0, x1)] = (np.empty(shape, f.dtype), np.empty(shape, f.dtype))
        for comp, tl in terms.items():
            if not tl:
                continue
            acc = None
            sign0 = tl[0][0]
            for (sign, src, a), buf in zip(tl, bufs):
                d = diff(source[src], a, x0, x1, out=buf)
                if memory is not None:
                    d = memory.apply(kind, comp, a, d, x0, x1)
                if acc is None:
                    acc = d
                elif sign == sign0:
                    np.add(acc, d, out=acc)
                else:
                    np.subtract(acc, d, out=acc)
            acc *= sign_out * sign0 * k
            target[comp][x0:x1] += acc
    return run


def _h_kernel(state, grid, memory, dt):
    terms = {b: _curl_terms(grid, b, grid.e_components) for b in grid.h_components}
    return _curl_kernel(state.h, state.e, terms, _forward_diff, "h", memory,
                        dt / grid.dx, -1.0)


def _d_kernel(state, grid, memory, dt):
    terms = {c: _curl_terms(grid, c, grid.h_components) for c in grid.e_components}
    return _curl_kernel(state.d, state.h, terms, _backward_diff, "e", memory,
                        dt / grid.dx, 1.0)


def advance_h(state: FieldState, grid: YeeGrid, m_sources=None, dt=None) -> FieldState:
    """Faraday half-step ``H -= dt (curl E + M)`` on a lattice without PML.

    ``dt`` overrides the grid step (a negative value runs the update backwards).
    """
    dt = grid.dt if dt is None else dt
    _h_kernel(state, grid, None, dt)(0, grid.shape[0])
    _inject(state.h, m_sources, dt, grid, "h")
    return state


def advance_d(state: FieldState, grid: YeeGrid, j_external=None, dt=None) -> FieldState:
    """Ampere half-step ``D += dt (curl H - J)`` on a lattice without PML."""
    dt = grid.dt if dt is None else dt
    _d_kernel(state, grid, None, dt)(0, grid.shape[0])
    _inject(state.d, j_external, dt, grid, "e")
    return state


def field_energy(grid: YeeGrid, e: dict, d: dict, h_old: dict, h_new: dict) -> float:
    """Leapfrog-invariant energy ``E.D + Re(H^{n-1/2} . H^{n+1/2})`` times cell volume.

    Exactly conserved by the undamped, non-dispersive update.
    """
    w = 0.0
    for c in e:
        w += float(np.sum((np.conj(e[c]) * d[c]).real))
    for b in h_old:
        w += float(np.sum((np.conj(h_old[b]) * h_new[b]).real))
    return w * grid.cell_volume


@dataclass
class _DispersiveGroup:
    index: np.ndarray
    eps_inf: float
    drude: tuple
    lorentz: tuple
    has_drude: bool
    has_lorentz: bool


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


class Lattice:
    """A Yee lattice with materials, terminations and its own field state.

    Parameters
    ----------
    grid : YeeGrid
    materials : sequence of (shape, material)
        Painted in order; later entries override earlier ones. ``material`` is
        a :class:`LorentzDrudeParams` or a :class:`PerfectConductor`.
    pml : dict, optional
        Face name -> :class:`CpmlSpec`. Faces without a layer are plain PEC.
    dtype : numpy dtype
        ``complex`` for the rotating-wave formulation, ``float`` for real fields.
    workers : int, optional
        Threads for slab-parallel curl updates. Results do not depend on it.
    """

    def __init__(self, grid: YeeGrid, materials=(), pml=None, dtype=complex,
                 workers=None):
        self.grid = grid
        self.dtype = np.dtype(dtype)
        pml = {f: s for f, s in (pml or {}).items() if s.thickness > 0}
        faces = [f for f in FACES if grid.dim == 3 or f[0] == "x"]
        pec_faces = [f for f in faces if f not in pml]
        check_faces(pml, pec_faces)
        self.pml_specs = pml
        self.cpml = make_cpml(pml, grid) if pml else None
        self.memory = _CpmlMemory(self.cpml, grid, self.dtype) if self.cpml else None
        # All faces end in a conducting wall, including those behind a PML.
        self.walls = apply_pec(faces)
        self.state = FieldState.zeros(grid, self.dtype)
        self.p_drude_prev = {c: np.zeros(grid.shape, self.dtype) for c in grid.e_components}
        self.p_lorentz_prev = {c: np.zeros(grid.shape, self.dtype) for c in grid.e_components}
        self.workers = default_workers() if workers is None else max(1, int(workers))
        self._ranges = _slab_ranges(grid.shape[0], self.workers)
        self._pool = ThreadPoolExecutor(self.workers) if len(self._ranges) > 1 else None
        self._paint(list(materials))
        self.h_prev = None

    # -- material raster ---------------------------------------------------
    def _paint(self, materials):
        g = self.grid
        self.inv_eps = {}
        self.pec_index = {}
        self.groups = {}
        self.material_map = {}
        for c in g.e_components:
            x, y, z = g.positions("e", c)
            ids = np.full(g.shape, -1, dtype=int)
            for k, (shape, _) in enumerate(materials):
                mask = np.broadcast_to(shape.contains(x, y, z), g.shape)
                ids[mask] = k
            self.material_map[c] = ids
            inv = np.ones(g.shape)
            pec = []
            groups = []
            for k, (_, mat) in enumerate(materials):
                idx = np.flatnonzero(ids.reshape(-1) == k)
                if idx.size == 0:
                    continue
                if isinstance(mat, PerfectConductor):
                    pec.append(idx)
                    inv.reshape(-1)[idx] = 0.0
                elif isinstance(mat, LorentzDrudeParams):
                    inv.reshape(-1)[idx] = 1.0 / mat.eps_inf
                    if mat.is_dispersive:
                        dr, lo = recursion_coefficients(mat, g.dt)
                        groups.append(_DispersiveGroup(idx, mat.eps_inf, dr, lo,
                                                       mat.has_drude, mat.has_lorentz))
                else:
                    raise TypeError(f"unsupported material {mat!r}")
            self.inv_eps[c] = inv
            self.pec_index[c] = np.concatenate(pec) if pec else np.zeros(0, int)
            self.groups[c] = groups
        self.uniform_vacuum = all(
            np.all(self.inv_eps[c] == 1.0) and not self.groups[c]
            for c in g.e_components)

    # -- stepping ----------------------------------------------------------
    def _run(self, fn):
        if self._pool is None:
            for r in self._ranges:
                fn(*r)
        else:
            list(self._pool.map(lambda r: fn(*r), self._ranges))

    def step_h(self, m_sources=None, keep_previous=False):
        """Advance H from n - 1/2 to n + 1/2."""
        if keep_previous:
            self.h_prev = {k: v.copy() for k, v in self.state.h.items()}
        self._run(_h_kernel(self.state, self.grid, self.memory, self.grid.dt))
        _inject(self.state.h, m_sources, self.grid.dt, self.grid, "h")

    def step_e(self, j_sources=None):
        """Advance D, the polarizations and E from n to n + 1."""
        st, g = self.state, self.grid
        self._run(_d_kernel(st, g, self.memory, g.dt))
        _inject(st.d, j_sources, g.dt, g, "e")
        for c in g.e_components:
            e, d = st.e[c], st.d[c]
            saved = [e.reshape(-1)[grp.index] for grp in self.groups[c]]
            if self.uniform_vacuum:
                e[...] = d
            else:
                np.multiply(d, self.inv_eps[c], out=e)
            for grp, e_old in zip(self.groups[c], saved):
                self._advance_polarization(c, grp, e_old)
            if self.pec_index[c].size:
                d.reshape(-1)[self.pec_index[c]] = 0
                e.reshape(-1)[self.pec_index[c]] = 0
        self.walls.apply(st.e, g.dim)
        self.walls.apply(st.d, g.dim)
        st.step += 1

    def _advance_polarization(self, c, grp, e_old):
        st = self.state
        idx = grp.index
        total = 0
        for on, coef, p, pp in ((grp.has_drude, grp.drude, st.p_drude[c], self.p_drude_prev[c]),
                                (grp.has_lorentz, grp.lorentz, st.p_lorentz[c], self.p_lorentz_prev[c])):
            if not on:
                continue
            pf, ppf = p.reshape(-1), pp.reshape(-1)
            now = pf[idx]
            new = coef[0] * now + coef[1] * ppf[idx] + coef[2] * e_old
            ppf[idx] = now
            pf[idx] = new
            total = total + new
        st.e[c].reshape(-1)[idx] = (st.d[c].reshape(-1)[idx] - total) / grp.eps_inf

    def step(self, j_sources=None, m_sources=None):
        self.step_h(m_sources)
        self.step_e(j_sources)

    def energy(self) -> float:
        """Leapfrog energy; requires the last ``step_h`` to keep the previous H."""
        if self.h_prev is None:
            raise RuntimeError("call step_h(keep_previous=True) before energy()")
        return field_energy(self.grid, self.state.e, self.state.d, self.h_prev,
                            self.state.h)

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass
