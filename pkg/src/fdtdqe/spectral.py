"""Frequency-domain route: Green's function -> kernel -> amplitude spectrum -> C(t).

The 1D Green's function comes from a second-order finite-difference solve of
``g'' + k^2 eps g = -delta(x - x_a)`` on a uniform node grid, closed by the
exact discrete outgoing wave ``g[N+1] = exp(i kt h) g[N]`` with
``cos(kt h) = 1 - k^2 eps h^2 / 2`` (no spurious reflection from the ends),
or by a Dirichlet wall for a perfect conductor.

The amplitude spectrum matches the time-domain model (analytic vacuum rate
plus scattered-field memory)::

    C(w) = C0 / (-i w + i w_a + K(w)/2 + i S(w))
    K(w) = G0 + 2 w^2 |d|^2 Im g_s(w) c,    S(w) = -w^2 |d|^2 Re g_s(w) c

with ``g_s`` the environment part of the Green's function and ``c`` the
calibration constant making the empty-scene kernel reproduce ``G0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .layers import Scene1D
from .media import LorentzDrudeParams, PerfectConductor, permittivity

TAGS = ("ImG", "kernel", "amplitude", "green")


class DegeneratePoleError(ValueError):
    pass


class WindowTooShortError(ValueError):
    pass


@dataclass
class Spectrum:
    omega: np.ndarray
    values: np.ndarray
    tag: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        self.values = np.asarray(self.values)
        if self.tag not in TAGS:
            raise ValueError(f"unknown spectrum tag {self.tag!r}")
        if self.omega.ndim != 1 or self.omega.shape != self.values.shape:
            raise ValueError("omega and values must be 1D arrays of equal length")
        if self.omega.size > 1:
            step = np.diff(self.omega)
            if np.any(step <= 0) or np.ptp(step) > 1e-9 * abs(step[0]) + 1e-12 * self.omega.max():
                raise ValueError("omega grid must be uniform and increasing")

    @property
    def step(self):
        return float(self.omega[1] - self.omega[0])


def omega_grid(omega_a, gamma0, n=2**14, span=200.0):
    """Uniform grid over ``omega_a +- span * gamma0``, clamped to positive omega."""
    lo = max(omega_a - span * gamma0, 0.0)
    hi = omega_a + span * gamma0
    if lo == 0.0:
        # keep uniform spacing and drop the omega = 0 sample
        w = np.linspace(lo, hi, n + 1)[1:]
    else:
        w = np.linspace(lo, hi, n)
    return w


# --- finite-difference Green's function --------------------------------------

def _discrete_k(k2eps, h):
    c = 1 - k2eps * h * h / 2
    kt = np.arccos(np.complex128(c)) / h
    if kt.imag < 0 or (kt.imag == 0 and kt.real < 0):
        kt = -kt
    return kt


def green_fd(eps, h, omega, source, left="open", right="open",
             left_gap=1.0, right_gap=1.0):
    """Finite-difference Green's function on a uniform node grid.

    Parameters
    ----------
    eps : complex array
        Relative permittivity at each node; NaN marks a conductor node (g = 0).
    h : float
        Node spacing.
    omega : float
    source : int
        Node index of the unit source.
    left, right : {"open", "pec"}
        Outer closures. "open" continues the end node's medium to infinity,
        "pec" puts a wall ``gap * h`` beyond the end node.

    Returns
    -------
    complex ndarray
        ``g(x_j, x_source)`` at every node.
    """
    eps = np.asarray(eps, dtype=complex)
    n = eps.size
    k2 = omega * omega
    pec = np.isnan(eps.real)
    main = -2.0 / h**2 + k2 * np.where(pec, 0, eps)
    upper = np.full(n, 1.0 / h**2, dtype=complex)   # coefficient of g[j+1] in row j
    lower = np.full(n, 1.0 / h**2, dtype=complex)   # coefficient of g[j-1] in row j
    if left == "open":
        main[0] += np.exp(1j * _discrete_k(k2 * eps[0], h) * h) / h**2
    elif left == "pec":
        th = left_gap
        main[0] = -2.0 / (h * h * th) + k2 * eps[0]
        upper[0] = 2.0 / (h * h * (1 + th))
    else:
        raise ValueError("left closure must be 'open' or 'pec'")
    if right == "open":
        main[-1] += np.exp(1j * _discrete_k(k2 * eps[-1], h) * h) / h**2
    elif right == "pec":
        th = right_gap
        main[-1] = -2.0 / (h * h * th) + k2 * eps[-1]
        lower[-1] = 2.0 / (h * h * (1 + th))
    else:
        raise ValueError("right closure must be 'open' or 'pec'")
    rhs = np.zeros(n, dtype=complex)
    rhs[source] = -1.0 / h
    # conductor nodes: identity rows, and no coupling into them
    main[pec] = 1.0
    upper[pec] = 0.0
    lower[pec] = 0.0
    rhs[pec] = 0.0
    ab = np.zeros((3, n), dtype=complex)
    ab[0, 1:] = upper[:-1]
    ab[1] = main
    ab[2, :-1] = lower[1:]
    # drop couplings from live rows into conductor nodes
    ab[0, 1:][pec[1:]] = 0.0
    ab[2, :-1][pec[:-1]] = 0.0
    return solve_banded((1, 1), ab, rhs)


@dataclass
class FdScene:
    """Node-sampled discretisation of a :class:`Scene1D` around ``x_a``."""

    x: np.ndarray
    source: int
    left: str
    right: str
    left_gap: float
    right_gap: float
    h: float
    _scene: Scene1D

    def eps(self, omega):
        return _cell_average_eps(self._scene, self.x, self.h, omega)


def discretize(scene: Scene1D, x_a: float, h: float, margin_cells: int = 4) -> FdScene:
    """Node grid containing ``x_a`` and spanning every interface of ``scene``."""
    lo_wall, hi_wall = -np.inf, np.inf
    edges = [x_a]
    for l in scene.layers:
        if isinstance(l.material, PerfectConductor):
            if l.end <= x_a:
                lo_wall = max(lo_wall, l.end)
            else:
                hi_wall = min(hi_wall, l.start)
    for l in scene.layers:
        for e in (l.start, l.end):
            if np.isfinite(e) and lo_wall <= e <= hi_wall:
                edges.append(e)
    if np.isfinite(lo_wall):
        j_lo = int(np.floor((lo_wall - x_a) / h + 1e-9)) + 1
        left, left_gap = "pec", (x_a + j_lo * h - lo_wall) / h
    else:
        j_lo = int(np.floor((min(edges) - x_a) / h)) - margin_cells
        left, left_gap = "open", 1.0
    if np.isfinite(hi_wall):
        j_hi = int(np.ceil((hi_wall - x_a) / h - 1e-9)) - 1
        right, right_gap = "pec", (hi_wall - (x_a + j_hi * h)) / h
    else:
        j_hi = int(np.ceil((max(edges) - x_a) / h)) + margin_cells
        right, right_gap = "open", 1.0
    x = x_a + np.arange(j_lo, j_hi + 1) * h
    return FdScene(x, -j_lo, left, right, left_gap, right_gap, h, scene)


def _cell_average_eps(scene: Scene1D, x, h, omega):
    """Permittivity averaged over each node's cell ``[x - h/2, x + h/2]``."""
    eps = np.ones(x.size, dtype=complex)
    a, b = x - h / 2, x + h / 2
    for l in scene.layers:
        if isinstance(l.material, PerfectConductor):
            continue
        frac = np.clip((np.minimum(b, l.end) - np.maximum(a, l.start)) / h, 0, 1)
        if np.any(frac > 0):
            eps += frac * (complex(permittivity(l.material, omega)) - 1.0)
    return eps


def greens_1d(scene: Scene1D, omega, x_a: float, h: float | None = None,
              points_per_wavelength: int = 400):
    """Complex self Green's function ``g(x_a, x_a)`` by finite differences.

    ``h`` defaults to the shortest in-medium wavelength (or skin depth) at
    the highest requested frequency divided by ``points_per_wavelength``.
    """
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    if np.any(w <= 0):
        raise ValueError("omega must be positive")
    if scene.material_at(x_a) is not None:
        raise ValueError("the emitter must sit in vacuum")
    if h is None:
        h = default_step(scene, w.max(), points_per_wavelength)
    fd = discretize(scene, x_a, h)
    out = np.empty(w.size, dtype=complex)
    for i, wi in enumerate(w):
        g = green_fd(fd.eps(wi), h, wi, fd.source, fd.left, fd.right,
                     fd.left_gap, fd.right_gap)
        out[i] = g[fd.source]
    return out if np.ndim(omega) else complex(out[0])


def greens_im_1d(scene: Scene1D, omega, x_a: float, h: float | None = None):
    """Imaginary part of the self Green's function (1/(2k) in vacuum)."""
    return np.imag(greens_1d(scene, omega, x_a, h))


def default_step(scene: Scene1D, omega_max, points_per_wavelength=400):
    nmax = 1.0
    for l in scene.layers:
        if isinstance(l.material, LorentzDrudeParams):
            nmax = max(nmax, abs(np.sqrt(complex(permittivity(l.material, omega_max)))))
    return 2 * np.pi / (omega_max * nmax) / points_per_wavelength


def greens_lattice(eps_nodes, h, omega, source, left="open", right="open"):
    """Self Green's function on a node-sampled lattice (one eps array per omega).

    ``eps_nodes`` is a callable ``omega -> eps array`` (NaN for conductor
    nodes), matching the E-sample material map of a 1D time-domain lattice.
    """
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    out = np.empty(w.size, dtype=complex)
    for i, wi in enumerate(w):
        out[i] = green_fd(eps_nodes(wi), h, wi, source, left, right)[source]
    return out


# --- kernel, amplitude, inverse transform -------------------------------------

def kernel_spectrum(im_g: Spectrum, dipole_norm: float, calibration: float = 1.0,
                    omega_a: float | None = None, linewidth: float | None = None):
    """``K(w) = 2 w^2 |d|^2 Im g(w)`` (times a calibration constant).

    With ``omega_a`` and ``linewidth`` the band must extend at least ten
    linewidths on each side of the line (or reach omega = 0 on the low side).
    """
    if omega_a is not None and linewidth is not None:
        w = im_g.omega
        low_ok = w[0] <= omega_a - 10 * linewidth or w[0] <= im_g.step * 1.5
        if not (low_ok and w[-1] >= omega_a + 10 * linewidth):
            raise ValueError("spectral band narrower than ten linewidths around omega_a")
    vals = 2 * im_g.omega**2 * dipole_norm**2 * np.real(im_g.values) * calibration
    return Spectrum(im_g.omega, vals, "kernel", {"calibration": calibration})


def amplitude_spectrum(kernel: Spectrum, omega_a: float, c0: complex = 1.0,
                       shift: np.ndarray | None = None):
    """``C(w) = C0 / (-i w + i w_a + K(w)/2 + i S(w))``.

    ``shift`` is the frequency-pulling term ``S``; omitted means zero.
    """
    w = kernel.omega
    s = 0.0 if shift is None else np.asarray(shift)
    den = -1j * w + 1j * omega_a + kernel.values / 2 + 1j * s
    if np.min(np.abs(den)) < 1e-12 * max(1.0, abs(omega_a)):
        raise DegeneratePoleError("amplitude spectrum has a pole on the grid")
    return Spectrum(w, c0 / den, "amplitude", dict(kernel.meta, omega_a=omega_a, c0=c0))


def to_time(amp: Spectrum, t, reference_rate: float | None = None):
    """Inverse transform ``C(t) = (1/2pi) int C(w) exp(-i w t) dw`` for t >= 0.

    A reference Lorentzian with the same C0 and ``omega_a`` is removed before
    the quadrature and added back analytically; this removes the t = 0 jump
    that a truncated band cannot represent. ``reference_rate`` defaults to
    the kernel at the sample nearest ``omega_a``.
    """
    w = amp.omega
    dw = amp.step
    t = np.atleast_1d(np.asarray(t, dtype=float))
    c0 = amp.meta.get("c0", 1.0)
    wa = amp.meta["omega_a"]
    if reference_rate is None:
        # recover K(w_a) from the spectrum itself: 1/C = (...)/C0
        i = int(np.argmin(np.abs(w - wa)))
        reference_rate = max(2 * np.real(c0 / amp.values[i]), 1e-3 * dw)
    ref = c0 / (-1j * w + 1j * wa + reference_rate / 2)
    resid = amp.values - ref
    window = 2 * np.pi / dw
    if t.max() > window / 2:
        raise WindowTooShortError(
            f"requested t={t.max():g} exceeds half the transform window {window / 2:g}")
    out = np.empty(t.size, dtype=complex)
    chunk = max(1, 2_000_000 // max(w.size, 1))
    for s in range(0, t.size, chunk):
        tt = t[s:s + chunk]
        out[s:s + chunk] = (np.exp(-1j * np.outer(tt, w)) @ resid) * dw / (2 * np.pi)
    out += c0 * np.exp(-1j * wa * t - reference_rate * t / 2) * (t >= 0)
    edge = np.array([window / 2])
    c_edge = (np.exp(-1j * np.outer(edge, w)) @ resid) * dw / (2 * np.pi)
    c_edge += c0 * np.exp(-1j * wa * edge - reference_rate * edge / 2)
    if abs(c_edge[0]) > 1e-3 * max(abs(c0), 1e-300):
        raise WindowTooShortError(
            f"|C| = {abs(c_edge[0]):.2e} at the window edge; refine the frequency grid")
    return out


@dataclass
class SpectralRoute:
    """Full frequency-domain pipeline for one 1D emitter."""

    omega: np.ndarray
    green: np.ndarray
    green_vacuum: np.ndarray
    kernel: Spectrum
    shift: np.ndarray
    amplitude: Spectrum
    calibration: float

    def population(self, t):
        return np.abs(to_time(self.amplitude, t)) ** 2

    def amplitude_t(self, t):
        return to_time(self.amplitude, t)


def spectral_route(green_provider, omega_a, gamma0, dipole_norm, omega=None, c0=1.0):
    """Run the pipeline.

    ``green_provider(omega_array, vacuum: bool)`` returns complex self Green's
    function samples for the scene (``vacuum=False``) or for the same
    discretisation without scatterers (``vacuum=True``).
    """
    if omega is None:
        omega = omega_grid(omega_a, gamma0)
    g = green_provider(omega, False)
    gv = green_provider(omega, True)
    gva = green_provider(np.array([omega_a]), True)[0]
    calibration = gamma0 / (2 * omega_a**2 * dipole_norm**2 * gva.imag)
    gs = g - gv
    ks = kernel_spectrum(Spectrum(omega, gs.imag, "ImG"), dipole_norm, calibration)
    kernel = Spectrum(omega, gamma0 + ks.values, "kernel", {"calibration": calibration})
    shift = -omega**2 * dipole_norm**2 * gs.real * calibration
    amp = amplitude_spectrum(kernel, omega_a, c0, shift)
    return SpectralRoute(omega, g, gv, kernel, shift, amp, calibration)


def hilbert_transform(values, step):
    """Discrete principal-value Hilbert transform on a uniform grid.

    ``H[f](w) = (1/pi) PV int f(w') / (w - w') dw'``, evaluated with the
    kernel ``1/(pi m)`` at odd offsets (Maclaurin's rule) via FFT convolution.
    """
    f = np.asarray(values, dtype=float)
    n = f.size
    m = np.arange(-(n - 1), n)
    ker = np.zeros(m.size)
    odd = (m % 2) != 0
    ker[odd] = 2.0 / (np.pi * m[odd])
    size = 1 << int(np.ceil(np.log2(f.size + ker.size)))
    conv = np.fft.irfft(np.fft.rfft(f, size) * np.fft.rfft(ker, size), size)
    return conv[n - 1:2 * n - 1]
