"""Reconstruction of Im g from boundary-assisted and medium-assisted modes (1D).

For a planar scene with vacuum outer media the local density of states
splits into two non-negative parts::

    Im g(x_a, x_a) = 1/(4k) sum_channels |E_in(x_a)|^2
                   + k^2 sum_n Im eps(x_n) |g(x_n, x_a)|^2 dx_n

The first sum runs over the two unit-amplitude scattering states (waves
incident from the left and from the right): these are the boundary-assisted
modes. The second is a midpoint quadrature over the lossy layers: each term
is a medium-assisted mode, the field at x_a radiated by a noise current of
amplitude ``k sqrt(Im eps / pi)`` at x_n, i.e.
``E_MA = k^2 sqrt(Im eps / pi) g(x_n, x_a)``. By reciprocity one solve with
the source at x_a gives every ``g(x_n, x_a)``.

Written with the weight ``A(w) = w^2`` the same identity reads
``(A/pi) Im g = sum_BA (w/(4 pi)) |E|^2 + sum_MA dx |E_MA|^2``; the
boundary-assisted weight ``w/(4 pi)`` is the 1D counterpart of the 3D
plane-wave measure and is fixed by requiring exact vacuum reconstruction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import LayeredSolution, Scene1D
from .media import permittivity
from .spectral import greens_1d


@dataclass
class ModeSet:
    omega: float
    ba_values: list = field(default_factory=list)   # E at x_a per incidence channel
    ma_values: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    ma_weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ma_points: np.ndarray = field(default_factory=lambda: np.zeros(0))


def ba_modes(scene: Scene1D, omega: float, x_a: float) -> ModeSet:
    """Scattering states (left- and right-incident) evaluated at ``x_a``."""
    sol = LayeredSolution.solve(scene, omega, x_a)
    vals = [m[0] for m in sol.scattering_modes([x_a]) if m is not None]
    return ModeSet(omega, ba_values=vals)


def _truncate(layer, k_medium, tail=25.0):
    """Finite extent for a semi-infinite lossy layer: ``tail`` field e-foldings."""
    lo, hi = layer.start, layer.end
    depth = tail / max(k_medium.imag, 1e-300)
    if not np.isfinite(hi):
        hi = lo + depth
    if not np.isfinite(lo):
        lo = hi - depth
    return lo, hi


def ma_modes(scene: Scene1D, omega: float, x_a: float, points_per_wavelength: int = 60):
    """Medium-assisted mode amplitudes at ``x_a`` from every lossy sample point.

    Semi-infinite lossy layers are cut after 25 field e-foldings, beyond which
    their contribution is below 1e-21 of the surface value.
    """
    if points_per_wavelength < 20:
        raise ValueError("use at least 20 points per in-medium wavelength")
    sol = LayeredSolution.solve(scene, omega, x_a)
    pts, wts, amps = [], [], []
    for layer in scene.lossy_layers(omega):
        eps = complex(permittivity(layer.material, omega))
        k_med = omega * np.sqrt(eps)
        lo, hi = _truncate(layer, k_med)
        # stay within the region visible from x_a (conductors hide the rest)
        lo = max(lo, sol.segs[0][0])
        hi = min(hi, sol.segs[-1][1])
        if lo >= hi:
            continue
        lam_med = 2 * np.pi / abs(k_med)
        n = max(1, int(np.ceil((hi - lo) / lam_med * points_per_wavelength)))
        dx = (hi - lo) / n
        x = lo + (np.arange(n) + 0.5) * dx
        g = sol.green(x, x_a)   # g(x, x_a) = g(x_a, x) by reciprocity
        # noise current w sqrt(Im eps / pi) radiating through w g
        amps.append(omega**2 * np.sqrt(eps.imag / np.pi) * g)
        pts.append(x)
        wts.append(np.full(n, dx))
    if pts:
        return ModeSet(omega, ma_values=np.concatenate(amps),
                       ma_weights=np.concatenate(wts), ma_points=np.concatenate(pts))
    return ModeSet(omega)


def reconstruct_im_g(ba: ModeSet, ma: ModeSet, omega: float | None = None):
    """Im g(x_a, x_a) from the two mode families.

    Returns ``(total, ba_part, ma_part)``.
    """
    if ba.omega != ma.omega or (omega is not None and omega != ba.omega):
        raise ValueError("mode sets belong to different frequencies")
    w = ba.omega
    a_norm = w * w  # A(w) = hbar w^2 mu0 with hbar = mu0 = 1
    ba_sum = sum(w / (4 * np.pi) * abs(v) ** 2 for v in ba.ba_values)
    ma_sum = float(np.sum(ma.ma_weights * np.abs(ma.ma_values) ** 2))
    ba_part = np.pi / a_norm * ba_sum
    ma_part = np.pi / a_norm * ma_sum
    return ba_part + ma_part, ba_part, ma_part


@dataclass
class CompletenessRow:
    omega: float
    direct: float
    ba_only: float
    total: float

    @property
    def rel_error(self):
        return abs(self.total - self.direct) / abs(self.direct)


def completeness_table(scene: Scene1D, omegas, x_a: float, points_per_wavelength=60,
                       h=None):
    """Reconstructed vs direct (finite-difference) Im g across ``omegas``."""
    rows = []
    direct = np.imag(greens_1d(scene, np.asarray(omegas, float), x_a, h))
    for w, dval in zip(omegas, direct):
        ba = ba_modes(scene, w, x_a)
        ma = ma_modes(scene, w, x_a, points_per_wavelength)
        total, ba_part, _ = reconstruct_im_g(ba, ma, w)
        rows.append(CompletenessRow(float(w), float(dval), float(ba_part), float(total)))
    return rows
