import numpy as np
import pytest

from fdtdqe.boundaries import CpmlSpec, apply_pec, check_faces, make_cpml
from fdtdqe.engine import Lattice, YeeGrid, cfl_dt, point_source

ALL_FACES = ("x-", "x+", "y-", "y+", "z-", "z+")


def test_spec_validation():
    for bad in (dict(thickness=3), dict(order=5), dict(order=1.5),
                dict(sigma_scale=-1), dict(kappa_max=0.5), dict(alpha_max=-1)):
        with pytest.raises(ValueError):
            CpmlSpec(**bad)
    CpmlSpec(thickness=0)


def test_pml_thicker_than_half_domain_rejected():
    g = YeeGrid((20,), 1.0, 0.5)
    with pytest.raises(ValueError):
        make_cpml(CpmlSpec(thickness=10), g, {"x-"})
    make_cpml(CpmlSpec(thickness=9), g, {"x-", "x+"})


def test_face_names_checked():
    g = YeeGrid((20,), 1.0, 0.5)
    with pytest.raises(ValueError):
        make_cpml({"y-": CpmlSpec(thickness=4)}, g)
    with pytest.raises(ValueError):
        apply_pec({"w+"})
    with pytest.raises(ValueError):
        check_faces({"x-"}, {"x-", "x+"})


def test_profiles_graded_and_zero_outside():
    g = YeeGrid((60,), 1.0, 0.5)
    cp = make_cpml(CpmlSpec(thickness=10), g, {"x-", "x+"})
    prof = cp.e_profiles[0]
    assert np.all(prof.c[10:51] == 0) and np.all(prof.b[10:51] == 1)
    # conductivity grows towards the walls
    assert np.all(np.diff(prof.b[:10]) > 0)
    assert np.all(np.diff(prof.b[51:]) < 0)


def test_zero_thickness_is_plain_reflector():
    g = YeeGrid((80,), 1.0, 0.5)
    a = Lattice(g, pml={"x-": CpmlSpec(thickness=0), "x+": CpmlSpec(thickness=0)})
    b = Lattice(g)
    assert a.cpml is None
    for lat in (a, b):
        for n in range(300):
            lat.step(j_sources=[point_source(g, "z", (30,), np.exp(-((n - 20) / 6) ** 2))])
    assert np.array_equal(a.state.e["z"], b.state.e["z"])


def test_zero_conductivity_layer_is_transparent():
    g = YeeGrid((80,), 1.0, 0.5)
    a = Lattice(g, pml={"x+": CpmlSpec(thickness=20, sigma_scale=0.0)})
    b = Lattice(g)
    for lat in (a, b):
        for n in range(400):
            lat.step(j_sources=[point_source(g, "z", (30,), np.exp(-((n - 20) / 6) ** 2))])
    assert np.array_equal(a.state.e["z"], b.state.e["z"])


def _reflection_1d(spec, lam=40.0):
    w = 2 * np.pi / lam

    def run(n, src, probe, steps):
        g = YeeGrid((n,), 1.0, cfl_dt(1.0, 1, 0.99))
        lat = Lattice(g, pml={"x-": spec, "x+": spec}, dtype=float)
        out = np.empty(steps)
        for k in range(steps):
            t = (k + 0.5) * g.dt
            j = np.exp(-((t - 60) / 15) ** 2) * np.cos(w * t)
            lat.step(j_sources=[point_source(g, "z", (src,), j)])
            out[k] = lat.state.e["z"][probe]
        return out, g.dt

    a, dt = run(200, 100, 130, 800)
    b, _ = run(2000, 1000, 1030, 800)
    return a, b, dt, w


def test_cpml_reflection_1d_broadband():
    a, b, dt, w = _reflection_1d(CpmlSpec())
    r = a - b
    assert np.max(np.abs(r)) / np.max(np.abs(b)) < 1e-4
    f = np.fft.rfftfreq(len(a), dt) * 2 * np.pi
    band = (f > 0.5 * w) & (f < 1.5 * w)
    ratio = np.abs(np.fft.rfft(r))[band] / np.abs(np.fft.rfft(b))[band]
    assert 20 * np.log10(ratio.max()) < -40


@pytest.mark.slow
def test_cpml_reflection_3d_on_axis():
    lam = 10.0
    w = 2 * np.pi / lam

    def run(n, steps, off=6):
        g = YeeGrid((n, n, n), 1.0, cfl_dt(1.0, 3, 0.95))
        lat = Lattice(g, pml={f: CpmlSpec() for f in ALL_FACES}, dtype=float)
        c = n // 2
        out = np.empty(steps)
        for k in range(steps):
            t = (k + 0.5) * g.dt
            j = np.exp(-((t - 12) / 4) ** 2) * np.cos(w * t)
            lat.step(j_sources=[point_source(g, "z", (c, c, c), j)])
            out[k] = lat.state.e["z"][c + off, c, c]
        return out, g.dt

    a, dt = run(40, 125)
    b, _ = run(100, 125)
    nfft = 4096
    f = np.fft.rfftfreq(nfft, dt) * 2 * np.pi
    band = (f > 0.5 * w) & (f < 1.5 * w)
    ratio = np.abs(np.fft.rfft(a - b, nfft))[band] / np.abs(np.fft.rfft(b, nfft))[band]
    assert 20 * np.log10(ratio.max()) < -40


def test_pec_cavity_eigenfrequency():
    n, dt = 100, 0.5
    g = YeeGrid((n,), 1.0, dt)
    lat = Lattice(g)
    # Ez samples sit at x = i, walls at x = 0 and x = n.
    x = np.arange(n)
    lat.state.e["z"][:] = np.sin(np.pi * x / n)
    lat.state.d["z"][:] = lat.state.e["z"]
    probe = []
    for _ in range(4000):
        lat.step()
        probe.append(lat.state.e["z"][n // 2].real)
    probe = np.array(probe)
    k = np.flatnonzero(np.diff(np.sign(probe)) != 0)
    # sub-step zero crossings by linear interpolation
    cross = k + probe[k] / (probe[k] - probe[k + 1])
    period = 2 * (cross[-1] - cross[0]) / (len(cross) - 1) * dt
    w_analytic = np.pi / n
    # discrete dispersion: sin(w dt / 2) = dt sin(k / 2)
    w_discrete = 2 / dt * np.arcsin(dt * np.sin(w_analytic / 2))
    assert 2 * np.pi / period == pytest.approx(w_analytic, rel=1e-4)
    assert 2 * np.pi / period == pytest.approx(w_discrete, rel=2e-5)
    assert np.max(np.abs(probe)) == pytest.approx(1.0, abs=1e-3)


def test_pec_reflection_flips_sign():
    g = YeeGrid((300,), 1.0, 1.0)  # magic time step: dispersion-free in 1D
    lat = Lattice(g, pml={"x+": CpmlSpec()})
    x = np.arange(300)
    pulse = np.exp(-((x - 100) / 8.0) ** 2)
    lat.state.e["z"][:] = pulse
    lat.state.d["z"][:] = pulse
    lat.state.h["y"][:] = np.exp(-((x + 0.5 + 0.5 - 100) / 8.0) ** 2)  # leftward packet
    for _ in range(200):
        lat.step()
    e = lat.state.e["z"].real
    peak = np.argmax(np.abs(e))
    assert e[peak] < 0
    assert abs(e[peak]) == pytest.approx(1.0, abs=0.02)


def test_apply_pec_zeroes_low_face_tangential_e():
    g = YeeGrid((4, 5, 6), 1.0, 0.5)
    fields = {c: np.ones(g.shape) for c in "xyz"}
    apply_pec({"y-", "x+"}).apply(fields, 3)
    assert not np.any(fields["x"][:, 0, :]) and not np.any(fields["z"][:, 0, :])
    assert np.all(fields["y"] == 1)
    assert np.all(fields["x"][:, 1:, :] == 1)


def test_closed_pec_box_conserves_energy():
    g = YeeGrid((12, 10, 8), 1.0, cfl_dt(1.0, 3, 0.9))
    lat = Lattice(g)
    for n in range(20):
        lat.step(j_sources=[point_source(g, "x", (5, 5, 4), np.sin(0.7 * n))])
    w = []
    for _ in range(3000):
        lat.step_h(keep_previous=True)
        w.append(lat.energy())
        lat.step_e()
    w = np.array(w)
    assert np.max(np.abs(w - w[0])) / w[0] < 1e-10
