"""Observables: vacuum decay rates, Purcell factors and parameter scans."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)


class InsufficientRunError(ValueError):
    """The population never fell to 1/e within the recorded series."""


def gamma0(omega_a: float, dipole_norm: float, dim: int = 3) -> float:
    """Vacuum spontaneous-emission rate in natural units.

    3D: ``w^3 |d|^2 / (3 pi)``. 1D (sheet dipole radiating into two
    half-spaces): ``w |d|^2``, so that the 1D kernel ``2 w^2 |d|^2 Im g`` with
    ``Im g = 1/(2w)`` gives back the same rate.
    """
    if dim == 3:
        return omega_a**3 * dipole_norm**2 / (3 * np.pi)
    if dim == 1:
        return omega_a * dipole_norm**2
    raise ValueError("dim must be 1 or 3")


def dipole_for_rate(omega_a: float, rate: float, dim: int = 3) -> float:
    """Inverse of :func:`gamma0`: dipole magnitude giving a chosen vacuum rate."""
    if dim == 3:
        return float(np.sqrt(3 * np.pi * rate / omega_a**3))
    if dim == 1:
        return float(np.sqrt(rate / omega_a))
    raise ValueError("dim must be 1 or 3")


def purcell_sfa(im_g_projected: float, omega_a: float) -> float:
    """Purcell factor ``(6 pi / k0) e.Im G.e`` for the 3D dyadic self-term."""
    return 6 * np.pi / omega_a * im_g_projected


def purcell_sfa_1d(im_g: float, omega_a: float) -> float:
    """1D counterpart ``2 k0 Im g`` (1 in vacuum)."""
    return 2 * omega_a * im_g


def mirror_im_g_3d(omega_a: float, h: float, parallel: bool = True) -> float:
    """Projected Im G for a dipole at distance ``h`` from a perfect mirror.

    Image dipole at ``2h``; the image of a parallel dipole is reversed, that
    of a perpendicular one is not. Uses the free-space dyadic at separation
    ``r = 2h`` along the mirror normal.
    """
    k = omega_a
    r = 2 * h
    kr = k * r
    g0 = k / (6 * np.pi)
    e = np.exp(1j * kr) / (4 * np.pi * r)
    if parallel:
        # transverse component of the dyadic: (1 + i/kr - 1/(kr)^2)
        gs = -e * (1 + 1j / kr - 1 / kr**2)
    else:
        # longitudinal component: 2 (1/(kr)^2 - i/kr)
        gs = e * 2 * (1 / kr**2 - 1j / kr)
    return float(g0 + gs.imag)


@dataclass
class DecayFit:
    tau: float
    gamma: float
    purcell: float
    crossings: int

    @property
    def multi_crossing(self) -> bool:
        return self.crossings > 1


def purcell_from_decay(times, population, gamma0_value: float) -> DecayFit:
    """Lifetime from the first 1/e crossing of ``population`` (linear interpolation)."""
    t = np.asarray(times, dtype=float)
    p = np.asarray(population, dtype=float)
    if t.shape != p.shape or t.size < 2:
        raise ValueError("times and population must be equal-length series")
    level = np.exp(-1.0)
    below = p <= level
    if not below.any():
        raise InsufficientRunError("population never reaches 1/e; run longer")
    i = int(np.argmax(below))
    if i == 0:
        tau = t[0]
    else:
        t0, t1, p0, p1 = t[i - 1], t[i], p[i - 1], p[i]
        tau = t0 + (p0 - level) * (t1 - t0) / (p0 - p1)
    if not tau > 0:
        raise ValueError("population starts below 1/e")
    sign = np.sign(p - level)
    crossings = int(np.count_nonzero(np.diff(sign[sign != 0]) != 0))
    gamma = 1.0 / tau
    return DecayFit(tau=float(tau), gamma=float(gamma), purcell=float(gamma / gamma0_value),
                    crossings=crossings)


def extremum_offset(values, reference, kind: str = "max", rtol: float = 1e-6) -> int:
    """Samples between the extremum of ``values`` and that of ``reference``.

    Every sample where ``reference`` reaches its extremum to within ``rtol``
    counts, so periodic sweeps with repeated equal extrema are compared with
    the nearest copy.
    """
    v = np.asarray(values, dtype=float)
    r = np.asarray(reference, dtype=float)
    if kind not in ("max", "min"):
        raise ValueError("kind must be 'max' or 'min'")
    i = int(np.argmax(v) if kind == "max" else np.argmin(v))
    ext = r.max() if kind == "max" else r.min()
    ties = np.flatnonzero(np.abs(r - ext) <= rtol * abs(ext))
    return int(np.min(np.abs(ties - i)))


@dataclass
class ScanRow:
    parameter: float
    tau: float
    gamma: float
    purcell: float
    error: str = ""


def _scan_point(args):
    build, value, gamma0_value = args
    from .simulation import run_scenario
    try:
        res = run_scenario(build(value))
        fit = purcell_from_decay(res.times, res.population, gamma0_value)
        return ScanRow(value, fit.tau, fit.gamma, fit.purcell), res
    except Exception as exc:  # recorded per point, scan continues
        log.warning("scan point %g failed: %s", value, exc)
        return ScanRow(value, np.nan, np.nan, np.nan, f"{type(exc).__name__}: {exc}"), None


def resonance_scan(build, values, gamma0_value: float, workers: int = 1,
                   keep_series: bool = False):
    """Time-domain Purcell factor for each parameter value.

    ``build(value) -> Scenario`` must be picklable when ``workers > 1``.
    Rows come back in ascending parameter order regardless of completion
    order. Failed points carry NaN and an error string.
    """
    vals = sorted(float(v) for v in values)
    jobs = [(build, v, gamma0_value) for v in vals]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            out = list(ex.map(_scan_point, jobs))
    else:
        out = [_scan_point(j) for j in jobs]
    rows = [r for r, _ in out]
    if keep_series:
        return rows, [s for _, s in out]
    return rows
