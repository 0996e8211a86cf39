"""Total-field / scattered-field coupling between the auxiliary and main lattices.

The auxiliary lattice is empty (vacuum, same size, step and PML as the main
one) and carries the emitter's own radiation. Inside the box Omega the main
lattice stores only the scattered part of the field; outside it stores the
total field. The split is enforced by equivalent surface currents on the
faces of Omega, built from the auxiliary fields.

The currents are derived from the discrete stencils rather than sampled from
a continuous ``n x H`` rule: every curl stencil that pairs one sample inside
Omega with one outside gets the missing incident contribution added back (or
subtracted). Because both lattices share the same update arithmetic, an empty
main scene therefore receives exactly the auxiliary field outside Omega and
exactly zero inside, up to round-off. On a smooth field the result reduces to
``J = n x H_aux`` and ``M = -n x E_aux`` on the surface.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import AXIS_INDEX, SparseSource, YeeGrid, _curl_terms


@dataclass
class _Coupling:
    target: str            # component receiving the current
    target_index: np.ndarray
    source: str            # auxiliary component supplying the value
    source_index: np.ndarray
    coeff: np.ndarray


@dataclass
class TfsfSurface:
    """Box Omega in lattice index units, inclusive on both ends.

    A sample belongs to Omega when its staggered index position ``p``
    satisfies ``lo <= p <= hi`` along every lattice axis.
    """

    grid: YeeGrid
    lo: tuple
    hi: tuple
    _e_couplings: list = field(default_factory=list, repr=False)
    _h_couplings: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        g = self.grid
        self.lo = tuple(float(v) for v in np.atleast_1d(self.lo))[: g.ndim]
        self.hi = tuple(float(v) for v in np.atleast_1d(self.hi))[: g.ndim]
        if len(self.lo) != g.ndim or len(self.hi) != g.ndim:
            raise ValueError("TFSF box needs one bound per lattice axis")
        for a in range(g.ndim):
            if not 0 < self.lo[a] < self.hi[a] < g.shape[a] - 1:
                raise ValueError(
                    f"TFSF box [{self.lo}, {self.hi}] must lie strictly inside "
                    f"the lattice {g.shape}")
        self._e_couplings = self._build("e")
        self._h_couplings = self._build("h")

    def inside(self, kind: str, comp: str) -> np.ndarray:
        """Boolean mask of the ``comp`` samples lying in Omega."""
        g = self.grid
        off = g.offsets(kind, comp)
        mask = np.ones(g.shape, dtype=bool)
        for a in range(g.ndim):
            p = np.arange(g.shape[a]) + off[a]
            m1 = (p >= self.lo[a]) & (p <= self.hi[a])
            s = [1] * g.ndim
            s[a] = -1
            mask = mask & m1.reshape(s)
        return mask

    def contains_point(self, index_position) -> bool:
        return all(self.lo[a] <= index_position[a] <= self.hi[a]
                   for a in range(self.grid.ndim))

    def _build(self, kind):
        g = self.grid
        if kind == "e":
            targets, sources, other = g.e_components, g.h_components, "h"
            # backward difference: +H[i], -H[i-1]
            stencil = ((0, +1), (-1, -1))
        else:
            targets, sources, other = g.h_components, g.e_components, "e"
            # forward difference: +E[i+1], -E[i]
            stencil = ((+1, +1), (0, -1))
        out = []
        for c in targets:
            q_in = self.inside(kind, c)
            for sign, src, a in _curl_terms(g, c, sources):
                s_in = self.inside(other, src)
                n = g.shape[a]
                for shift, w in stencil:
                    # pair target index i with source index i + shift along a
                    q_sl = [slice(None)] * g.ndim
                    s_sl = [slice(None)] * g.ndim
                    q_sl[a] = slice(max(0, -shift), n - max(0, shift))
                    s_sl[a] = slice(max(0, shift), n - max(0, -shift))
                    qm = q_in[tuple(q_sl)]
                    sm = s_in[tuple(s_sl)]
                    cross = qm != sm
                    if not cross.any():
                        continue
                    # +1: target outside Omega needs the incident value added back
                    delta = np.where(sm, 1.0, -1.0)[cross]
                    loc = np.nonzero(cross)
                    q_idx = list(loc)
                    s_idx = list(loc)
                    q_idx[a] = q_idx[a] + q_sl[a].start
                    s_idx[a] = s_idx[a] + s_sl[a].start
                    qf = np.ravel_multi_index(tuple(q_idx), g.shape)
                    sf = np.ravel_multi_index(tuple(s_idx), g.shape)
                    if kind == "e":
                        coeff = -sign * w * delta / g.dx
                    else:
                        coeff = sign * w * delta / g.dx
                    out.append(_Coupling(c, qf, src, sf, coeff))
        return out

    def electric_currents(self, aux_h: dict):
        """Equivalent J for the main D update, from auxiliary H at n + 1/2."""
        return [SparseSource(k.target, k.target_index,
                             k.coeff * aux_h[k.source].reshape(-1)[k.source_index])
                for k in self._e_couplings]

    def magnetic_currents(self, aux_e: dict):
        """Equivalent M for the main H update, from auxiliary E at n."""
        return [SparseSource(k.target, k.target_index,
                             k.coeff * aux_e[k.source].reshape(-1)[k.source_index])
                for k in self._h_couplings]

    def check_standoff(self, pml_specs: dict, margin: int = 2):
        """Require Omega to sit at least ``margin`` cells from any PML layer."""
        g = self.grid
        for face, spec in pml_specs.items():
            a = AXIS_INDEX[face[0]]
            if a >= g.ndim or spec.thickness == 0:
                continue
            if face[1] == "-":
                ok = self.lo[a] - spec.thickness >= margin
            else:
                ok = (g.shape[a] - spec.thickness) - self.hi[a] >= margin
            if not ok:
                raise ValueError(f"TFSF box is closer than {margin} cells to the {face} PML")

    def check_empty(self, lattice):
        """Raise if any non-vacuum material sample lies inside Omega."""
        for c in lattice.grid.e_components:
            inside = self.inside("e", c)
            if np.any(lattice.material_map[c][inside] >= 0):
                raise ValueError("a scatterer overlaps the TFSF box")


def equivalent_currents(aux_state, surface: TfsfSurface, kind: str):
    """Surface currents for the main lattice.

    ``kind="e"`` returns J for the D update (needs auxiliary H at n + 1/2);
    ``kind="h"`` returns M for the H update (needs auxiliary E at n).
    """
    if kind == "e":
        return surface.electric_currents(aux_state.h)
    if kind == "h":
        return surface.magnetic_currents(aux_state.e)
    raise ValueError("kind must be 'e' or 'h'")


def default_box(grid: YeeGrid, emitter_index_pos, scatterer_distance=None, pml_cells=0,
                margin: int = 2):
    """Cubic Omega centred on the emitter.

    The half-width is half the distance to the nearest scatterer (in cells)
    when known, otherwise as large as the PML standoff allows.
    """
    lo, hi = [], []
    for a in range(grid.ndim):
        p = emitter_index_pos[a]
        room = min(p - pml_cells - margin, grid.shape[a] - pml_cells - margin - p)
        half = room if scatterer_distance is None else min(room, 0.5 * scatterer_distance)
        half = max(half, 1.0)
        lo.append(np.floor(p - half) + 0.25)
        hi.append(np.ceil(p + half) - 0.25)
    return tuple(lo), tuple(hi)
