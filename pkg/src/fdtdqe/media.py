"""Lorentz-Drude dispersive media.

Frequencies and rates are in natural units (c = 1), i.e. rad per metre when
lengths are metres. ``eps0`` is 1 internally; it is kept as a named factor in
the recursions so they read like their SI counterparts.

Time convention is exp(-i omega t), so Im(eps) > 0 means loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPS0 = 1.0


@dataclass(frozen=True)
class LorentzDrudeParams:
    """Single Drude pole plus single Lorentz pole."""

    eps_inf: float = 1.0
    omega_p_drude: float = 0.0
    gamma_drude: float = 0.0
    omega_p_lorentz: float = 0.0
    omega_0_lorentz: float = 0.0
    gamma_lorentz: float = 0.0
    # Optional (omega_min, omega_max) over which the model is trusted.
    fit_band: tuple[float, float] | None = None

    def __post_init__(self):
        if self.eps_inf < 1.0:
            raise ValueError(f"eps_inf must be >= 1, got {self.eps_inf}")
        for name in ("omega_p_drude", "gamma_drude", "omega_p_lorentz",
                     "omega_0_lorentz", "gamma_lorentz"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.fit_band is not None:
            lo, hi = self.fit_band
            if not 0 <= lo < hi:
                raise ValueError(f"bad fit_band {self.fit_band}")

    @property
    def has_drude(self) -> bool:
        return self.omega_p_drude > 0

    @property
    def has_lorentz(self) -> bool:
        return self.omega_p_lorentz > 0

    @property
    def is_dispersive(self) -> bool:
        return self.has_drude or self.has_lorentz

    @property
    def is_lossy(self) -> bool:
        return ((self.has_drude and self.gamma_drude > 0)
                or (self.has_lorentz and self.gamma_lorentz > 0))


VACUUM = LorentzDrudeParams()

# Mirror metal used throughout the reduced-scale scenarios.
MIRROR_METAL = LorentzDrudeParams(
    eps_inf=5.485,
    omega_p_drude=4.20e7,
    gamma_drude=2.43e5,
    omega_p_lorentz=1.61e7,
    omega_0_lorentz=2.27e7,
    gamma_lorentz=6.33e5,
)


@dataclass(frozen=True)
class PerfectConductor:
    """Marker material: tangential E forced to zero inside."""

    name: str = "pec"


PEC = PerfectConductor()


class OutOfBandError(ValueError):
    pass


def permittivity(params: LorentzDrudeParams, omega):
    """Relative permittivity at angular frequency ``omega`` (scalar or array).

    eps = eps_inf - wpD^2 / (w^2 + i gD w) + wpL^2 / (w0L^2 - w^2 - i gL w)
    """
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise ValueError("omega must be positive")
    if params.fit_band is not None:
        lo, hi = params.fit_band
        if np.any((w < lo) | (w > hi)):
            raise OutOfBandError(
                f"omega outside fitted band [{lo:g}, {hi:g}]")
    eps = np.full(w.shape, params.eps_inf, dtype=complex)
    if params.has_drude:
        eps -= params.omega_p_drude**2 / (w**2 + 1j * params.gamma_drude * w)
    if params.has_lorentz:
        eps += params.omega_p_lorentz**2 / (
            params.omega_0_lorentz**2 - w**2 - 1j * params.gamma_lorentz * w)
    return eps if eps.ndim else complex(eps)


def susceptibility(params: LorentzDrudeParams, omega):
    return permittivity(params, omega) - 1.0


def advance_p_lorentz(p_now, p_prev, e_now, params: LorentzDrudeParams, dt):
    """Lorentz polarization recursion, P^{n+1} from P^n, P^{n-1}, E^n."""
    g = params.gamma_lorentz * dt / 2
    w0dt2 = (params.omega_0_lorentz * dt) ** 2
    wpdt2 = (params.omega_p_lorentz * dt) ** 2
    return ((2 - w0dt2) * p_now - (1 - g) * p_prev
            + EPS0 * wpdt2 * e_now) / (1 + g)


def advance_p_drude(p_now, p_prev, e_now, params: LorentzDrudeParams, dt):
    """Drude polarization recursion, P^{n+1} from P^n, P^{n-1}, E^n."""
    g = params.gamma_drude * dt / 2
    wpdt2 = (params.omega_p_drude * dt) ** 2
    return (2 * p_now - (1 - g) * p_prev + EPS0 * wpdt2 * e_now) / (1 + g)


def e_from_d(d, p_drude, p_lorentz, eps_inf):
    """Constitutive recovery E = (D - P_D - P_L) / (eps0 eps_inf)."""
    if np.any(np.asarray(eps_inf) <= 0):
        raise ValueError("eps_inf must be positive")
    return (d - p_drude - p_lorentz) / (EPS0 * eps_inf)


def recursion_coefficients(params: LorentzDrudeParams, dt):
    """(a1, a2, a3) per pole so that P^{n+1} = a1 P^n + a2 P^{n-1} + a3 E^n.

    Used by the vectorised per-cell update in :mod:`fdtdqe.engine`; it is the
    same arithmetic as :func:`advance_p_drude` / :func:`advance_p_lorentz`.
    """
    gd = params.gamma_drude * dt / 2
    gl = params.gamma_lorentz * dt / 2
    drude = (2 / (1 + gd), -(1 - gd) / (1 + gd),
             EPS0 * (params.omega_p_drude * dt) ** 2 / (1 + gd))
    lorentz = ((2 - (params.omega_0_lorentz * dt) ** 2) / (1 + gl),
               -(1 - gl) / (1 + gl),
               EPS0 * (params.omega_p_lorentz * dt) ** 2 / (1 + gl))
    return drude, lorentz
