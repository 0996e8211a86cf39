"""Domain terminations: convolutional PML layers and PEC walls.

Every lattice is closed by a perfect conductor at its outer faces (tangential
E vanishes there). A face marked ``pml`` additionally carries a graded CPML
layer just inside that wall, which absorbs outgoing waves before they reach
it.

Profiles, with depth rho running from 0 at the inner edge to 1 at the wall::

    sigma(rho) = sigma_max rho^m,   sigma_max = scale * 0.8 (m + 1) / dx
    kappa(rho) = 1 + (kappa_max - 1) rho^m
    alpha(rho) = alpha_max (1 - rho)

and the recursive-convolution coefficients are
``b = exp(-(sigma/kappa + alpha) dt)``,
``c = sigma (b - 1) / (sigma kappa + kappa^2 alpha)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FACES = ("x-", "x+", "y-", "y+", "z-", "z+")
AXIS_INDEX = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class CpmlSpec:
    thickness: int = 10
    order: float = 3.0
    sigma_scale: float = 1.0
    kappa_max: float = 1.0
    alpha_max: float = 0.0

    def __post_init__(self):
        if self.thickness != 0 and self.thickness < 4:
            raise ValueError("CPML thickness must be 0 or >= 4 cells")
        if not 2 <= self.order <= 4:
            raise ValueError("CPML grading order must lie in [2, 4]")
        if self.sigma_scale < 0:
            raise ValueError("sigma_scale must be non-negative")
        if self.kappa_max < 1:
            raise ValueError("kappa_max must be >= 1")
        if self.alpha_max < 0:
            raise ValueError("alpha_max must be non-negative")


@dataclass
class AxisProfile:
    """Coefficient tables along one axis for one staggering (E or H nodes)."""

    b: np.ndarray
    c: np.ndarray
    inv_kappa: np.ndarray
    regions: list[tuple[int, int]]
    stretched: bool


@dataclass
class Cpml:
    """Per-axis coefficient tables; memory variables live in the lattice."""

    specs: dict[str, CpmlSpec]
    e_profiles: dict[int, AxisProfile]
    h_profiles: dict[int, AxisProfile]

    def axes(self):
        return sorted(self.e_profiles)


def _profile(n, dx, dt, lo: CpmlSpec | None, hi: CpmlSpec | None, offset):
    pos = np.arange(n) + offset
    sigma = np.zeros(n)
    kappa = np.ones(n)
    alpha = np.zeros(n)
    regions = []
    for spec, depth, region in (
        (lo, lambda t: (t - pos) / t, lambda t: (0, t)),
        (hi, lambda t: (pos - (n - t)) / t, lambda t: (n - t, n)),
    ):
        if spec is None or spec.thickness == 0:
            continue
        t = spec.thickness
        rho = depth(t)
        inside = rho > 0
        rho = np.where(inside, rho, 0.0)
        smax = spec.sigma_scale * 0.8 * (spec.order + 1) / dx
        sigma = np.where(inside, smax * rho**spec.order, sigma)
        kappa = np.where(inside, 1 + (spec.kappa_max - 1) * rho**spec.order, kappa)
        alpha = np.where(inside, spec.alpha_max * (1 - rho), alpha)
        regions.append(region(t))
    b = np.exp(-(sigma / kappa + alpha) * dt)
    denom = sigma * kappa + kappa**2 * alpha
    c = np.where(sigma > 0, sigma * (b - 1) / np.where(denom > 0, denom, 1.0), 0.0)
    return AxisProfile(b=b, c=c, inv_kappa=1.0 / kappa, regions=regions,
                       stretched=bool(np.any(kappa != 1.0)))


def make_cpml(specs, grid, faces=None) -> Cpml:
    """Build coefficient tables for the faces listed in ``specs``.

    ``specs`` maps face names ("x-", "x+", ...) to a :class:`CpmlSpec`.
    Alternatively pass one :class:`CpmlSpec` and the set of ``faces`` it
    applies to. Faces absent from the mapping (or with thickness 0) carry no
    layer.
    """
    if isinstance(specs, CpmlSpec):
        specs = {f: specs for f in (faces or ())}
    for face in specs:
        if face not in FACES:
            raise ValueError(f"unknown face {face!r}")
        if grid.dim == 1 and face[0] != "x":
            raise ValueError(f"face {face} does not exist in a 1D lattice")
    e_prof, h_prof = {}, {}
    for name, a in AXIS_INDEX.items():
        if a >= grid.ndim:
            continue
        lo, hi = specs.get(name + "-"), specs.get(name + "+")
        t_lo = lo.thickness if lo else 0
        t_hi = hi.thickness if hi else 0
        if t_lo == 0 and t_hi == 0:
            continue
        n = grid.shape[a]
        if 2 * max(t_lo, t_hi) >= n:
            raise ValueError(
                f"PML on axis {name} ({max(t_lo, t_hi)} cells) is thicker than "
                f"half the domain ({n} cells)")
        # E-update derivatives along a sit on integer nodes, H-update on half nodes.
        e_prof[a] = _profile(n, grid.dx, grid.dt, lo, hi, 0.0)
        h_prof[a] = _profile(n, grid.dx, grid.dt, lo, hi, 0.5)
    return Cpml(specs=dict(specs), e_profiles=e_prof, h_profiles=h_prof)


@dataclass(frozen=True)
class PecFaces:
    """Faces whose tangential E is pinned to zero after every E update.

    The high faces coincide with the implicit zero beyond the last stored
    sample, so only low faces need explicit work.
    """

    faces: frozenset

    def apply(self, e_fields: dict, dim: int):
        for face in self.faces:
            if face[1] != "-":
                continue
            a = AXIS_INDEX[face[0]]
            for comp, arr in e_fields.items():
                if AXIS_INDEX[comp] == a:
                    continue
                idx = [slice(None)] * arr.ndim
                idx[a] = 0
                arr[tuple(idx)] = 0


def apply_pec(faces) -> PecFaces:
    faces = frozenset(faces)
    for f in faces:
        if f not in FACES:
            raise ValueError(f"unknown face {f!r}")
    return PecFaces(faces)


def check_faces(pml_faces, pec_faces):
    both = set(pml_faces) & set(pec_faces)
    if both:
        raise ValueError(f"faces {sorted(both)} are marked both PEC and PML")
