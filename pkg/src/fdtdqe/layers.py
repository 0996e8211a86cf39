"""Planar 1D scenes and their exact (transfer-matrix) Green's function.

The scalar field obeys ``u'' + k^2 eps(x) u = -delta(x - x_a)`` with
``k = omega`` (c = 1) and outgoing waves at infinity, so in vacuum
``g(x, x') = i exp(ik|x - x'|) / (2k)``. A perfect conductor layer forces
``u = 0`` at its face and hides everything behind it.

Inside each uniform segment the state ``(u, u')`` propagates by::

    [u ]        [ cos ks      sin(ks)/k ] [u ]
    [u'](x+s) = [ -k sin ks   cos ks    ] [u'](x)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .media import LorentzDrudeParams, PerfectConductor, permittivity


@dataclass(frozen=True)
class Layer:
    start: float
    end: float
    material: object

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"layer start {self.start} must be below end {self.end}")
        if not isinstance(self.material, (LorentzDrudeParams, PerfectConductor)):
            raise TypeError("layer material must be LorentzDrudeParams or PEC")


@dataclass(frozen=True)
class Scene1D:
    """Vacuum background with non-overlapping layers (any order on input)."""

    layers: tuple = ()

    def __post_init__(self):
        ls = tuple(sorted(self.layers, key=lambda l: l.start))
        for a, b in zip(ls[:-1], ls[1:]):
            if b.start < a.end:
                raise ValueError("layers overlap")
        object.__setattr__(self, "layers", ls)

    def material_at(self, x):
        for l in self.layers:
            if l.start <= x < l.end:
                return l.material
        return None

    def material_strictly_at(self, x):
        """Material whose open interval contains ``x`` (faces count as outside)."""
        for l in self.layers:
            if l.start < x < l.end:
                return l.material
        return None

    def segments(self, omega, x_a):
        """Uniform segments between the terminations seen from ``x_a``.

        Returns ``(segs, left_pec, right_pec)`` where ``segs`` is a list of
        ``(lo, hi, eps)`` covering ``(lo_0, hi_last)``; outer bounds are
        ``-inf``/``inf`` for open sides and the conductor face otherwise.
        """
        m = self.material_strictly_at(x_a)
        if m is not None and not _is_vacuum(m):
            raise ValueError("the evaluation point must lie in vacuum")
        lo_bound, hi_bound = -np.inf, np.inf
        for l in self.layers:
            if isinstance(l.material, PerfectConductor):
                if l.end <= x_a:
                    lo_bound = max(lo_bound, l.end)
                elif l.start >= x_a:
                    hi_bound = min(hi_bound, l.start)
                else:
                    raise ValueError("evaluation point inside a conductor")
        segs = []
        pos = lo_bound
        for l in self.layers:
            if isinstance(l.material, PerfectConductor):
                continue
            lo, hi = max(l.start, lo_bound), min(l.end, hi_bound)
            if lo >= hi:
                continue
            if lo > pos:
                segs.append((pos, lo, 1.0 + 0j))
            segs.append((lo, hi, complex(permittivity(l.material, omega))))
            pos = hi
        if pos < hi_bound:
            segs.append((pos, hi_bound, 1.0 + 0j))
        return segs, np.isfinite(lo_bound), np.isfinite(hi_bound)

    def lossy_layers(self, omega):
        out = []
        for l in self.layers:
            if isinstance(l.material, LorentzDrudeParams):
                if permittivity(l.material, omega).imag > 0:
                    out.append(l)
        return out


def _is_vacuum(m):
    return isinstance(m, LorentzDrudeParams) and not m.is_dispersive and m.eps_inf == 1.0


def _wavenumber(omega, eps):
    k = omega * np.sqrt(complex(eps))
    return k if k.imag >= 0 else -k


def _propagate(state, k, s):
    u, du = state
    ks = k * s
    c, sn = np.cos(ks), np.sin(ks)
    return u * c + du * sn / k, -u * k * sn + du * c


@dataclass
class LayeredSolution:
    """Homogeneous solutions satisfying the left / right outer conditions.

    ``u_left`` obeys the left condition (outgoing to -inf or zero at a left
    conductor), ``u_right`` the right one. States are stored at every segment
    edge so fields can be evaluated anywhere without long propagations.
    """

    omega: float
    segs: list
    left_pec: bool
    right_pec: bool
    ks: list = field(default_factory=list)
    left_states: list = field(default_factory=list)    # u_left at each seg's lo
    right_states: list = field(default_factory=list)   # u_right at each seg's hi

    @classmethod
    def solve(cls, scene: Scene1D, omega: float, x_a: float):
        if not omega > 0:
            raise ValueError("omega must be positive")
        segs, lp, rp = scene.segments(omega, x_a)
        sol = cls(omega, segs, lp, rp)
        sol.ks = [_wavenumber(omega, e) for _, _, e in segs]
        n = len(segs)
        # u_left: start at the left end, march right.
        left = [None] * n
        for j, (lo, hi, _) in enumerate(segs):
            if j == 0:
                if lp:
                    ref, state = lo, (0j, 1 + 0j)
                else:
                    # outgoing towards -inf: e^{-ik(x - ref)}
                    ref = hi if np.isfinite(hi) else 0.0
                    state = (1 + 0j, -1j * sol.ks[0])
            else:
                ref = lo
            left[j] = (ref, state)
            if np.isfinite(hi):
                state = _propagate(state, sol.ks[j], hi - ref)
        # u_right: start at the right end, march left.
        right = [None] * n
        for j in range(n - 1, -1, -1):
            lo, hi, _ = segs[j]
            if j == n - 1:
                if rp:
                    ref, state = hi, (0j, 1 + 0j)
                else:
                    ref = lo if np.isfinite(lo) else 0.0
                    state = (1 + 0j, 1j * sol.ks[-1])
            else:
                ref = hi
            right[j] = (ref, state)
            if np.isfinite(lo):
                state = _propagate(state, sol.ks[j], lo - ref)
        sol.left_states, sol.right_states = left, right
        return sol

    def _segment(self, x):
        for j, (lo, hi, _) in enumerate(self.segs):
            if lo <= x <= hi:
                return j
        raise ValueError(f"x={x} lies outside the open region of the scene")

    def _eval(self, which, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        u = np.empty(x.shape, complex)
        du = np.empty(x.shape, complex)
        for i, xi in enumerate(x):
            j = self._segment(xi)
            ref, st = (self.left_states if which == "left" else self.right_states)[j]
            u[i], du[i] = _propagate(st, self.ks[j], xi - ref)
        return u, du

    def u_left(self, x):
        return self._eval("left", x)

    def u_right(self, x):
        return self._eval("right", x)

    def wronskian(self, x):
        ul, dul = self.u_left(x)
        ur, dur = self.u_right(x)
        return ul * dur - dul * ur

    def _absorbing(self, j):
        eps = self.segs[j][2]
        if eps.imag > 0:
            return True
        if abs(eps - 1) > 1e-12:
            raise ValueError("incident channels need vacuum outer media")
        return False

    def green(self, x, x_src):
        """``g(x, x_src)`` for arrays of field points ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        w = self.wronskian(x_src)[0]
        ul_s, _ = self.u_left(x_src)
        ur_s, _ = self.u_right(x_src)
        ul, _ = self.u_left(x)
        ur, _ = self.u_right(x)
        g = np.where(x <= x_src, ul * ur_s[0], ul_s[0] * ur)
        return -g / w

    def scattering_modes(self, x):
        """Total fields for unit waves incident from the left and from the right.

        A side closed by a conductor or by a semi-infinite absorber has no
        incident channel (returns None); radiation from an absorber is carried
        by the medium-assisted modes instead. Other open outer media must be
        vacuum.
        """
        out = []
        if not self.left_pec and not self._absorbing(0):
            ref, (u, du) = self.right_states[0]
            k = self.ks[0]
            # u_right = A e^{ik(x-ref)} + B e^{-ik(x-ref)} in the left vacuum
            amp = 0.5 * (u + du / (1j * k))
            out.append(self.u_right(x)[0] / amp)
        else:
            out.append(None)
        if not self.right_pec and not self._absorbing(-1):
            ref, (u, du) = self.left_states[-1]
            k = self.ks[-1]
            amp = 0.5 * (u - du / (1j * k))
            out.append(self.u_left(x)[0] / amp)
        else:
            out.append(None)
        return out


def green_self(scene: Scene1D, omega, x_a):
    """``g(x_a, x_a)`` (complex) at one or many frequencies."""
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    out = np.array([LayeredSolution.solve(scene, wi, x_a).green([x_a], x_a)[0] for wi in w])
    return out if np.ndim(omega) else complex(out[0])


def purcell_1d(scene: Scene1D, omega, x_a):
    """Local decay enhancement ``2k Im g(x_a, x_a)`` (1 in vacuum)."""
    return 2 * np.asarray(omega) * np.imag(green_self(scene, omega, x_a))


def reflection_from_right(scene: Scene1D, omega, x_ref):
    """Reflection of the structure right of ``x_ref`` (in vacuum).

    A wave ``exp(ik(x - x_ref))`` heading right returns as
    ``r exp(-ik(x - x_ref))``; that combination is proportional to the
    solution that is outgoing beyond the stack.
    """
    sol = LayeredSolution.solve(scene, omega, x_ref)
    u, du = sol.u_right([x_ref])
    k = sol.omega
    inc = 0.5 * (u[0] + du[0] / (1j * k))
    ref = 0.5 * (u[0] - du[0] / (1j * k))
    return ref / inc
