import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from fdtdqe.media import (
    MIRROR_METAL, VACUUM, LorentzDrudeParams, OutOfBandError, advance_p_drude,
    advance_p_lorentz, e_from_d, permittivity, recursion_coefficients,
)

LAMBDA_600 = 600e-9


def test_mirror_metal_at_600nm_matches_published_value():
    eps = permittivity(MIRROR_METAL, 2 * np.pi / LAMBDA_600)
    # Published to two decimals; parameters are themselves rounded.
    assert eps.real == pytest.approx(-9.93, abs=0.05)
    assert eps.imag == pytest.approx(0.38, abs=0.01)


def test_mirror_metal_at_600nm_frozen():
    eps = permittivity(MIRROR_METAL, 2 * np.pi / LAMBDA_600)
    assert eps == pytest.approx(-9.953230599231057 + 0.3835059028534567j, rel=1e-12)


def test_high_frequency_limit():
    assert permittivity(MIRROR_METAL, 1e15) == pytest.approx(5.485, rel=1e-6)


def test_zero_strengths_give_eps_inf():
    p = LorentzDrudeParams(eps_inf=2.5, gamma_drude=3.0, omega_0_lorentz=7.0)
    w = np.array([0.1, 1.0, 1e9])
    assert np.all(permittivity(p, w) == 2.5)


@pytest.mark.parametrize("w", [0.0, -1.0])
def test_nonpositive_frequency_rejected(w):
    with pytest.raises(ValueError):
        permittivity(MIRROR_METAL, w)


def test_out_of_band_rejected():
    p = LorentzDrudeParams(omega_p_drude=1.0, fit_band=(1.0, 2.0))
    with pytest.raises(OutOfBandError):
        permittivity(p, 3.0)
    permittivity(p, 1.5)


def test_invalid_params():
    with pytest.raises(ValueError):
        LorentzDrudeParams(eps_inf=0.5)
    with pytest.raises(ValueError):
        LorentzDrudeParams(gamma_drude=-1.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(1, 10), st.floats(0, 5), st.floats(0.01, 2), st.floats(0, 5),
       st.floats(0, 5), st.floats(0.01, 2), st.floats(0.01, 20))
def test_passivity(einf, wpd, gd, wpl, w0, gl, w):
    p = LorentzDrudeParams(einf, wpd, gd, wpl, w0, gl)
    assert permittivity(p, w).imag >= -1e-12


def test_kramers_kronig_recovers_real_part():
    # Lorentz-only medium so the integrals converge without a Drude pole.
    p = LorentzDrudeParams(eps_inf=2.0, omega_p_lorentz=1.0, omega_0_lorentz=1.0,
                           gamma_lorentz=0.3)

    def im_eps(w):
        return permittivity(p, w).imag

    for w in (0.5, 0.8, 1.2, 1.6):
        # Re eps(w) - eps_inf = (2/pi) PV int w' Im eps(w') / (w'^2 - w^2) dw'
        f = lambda x: x * im_eps(x) / (x + w)
        val, _ = quad(f, 1e-9, 60.0, weight="cauchy", wvar=w, limit=400)
        tail = quad(lambda x: x * im_eps(x) / (x * x - w * w), 60.0, np.inf)[0]
        recon = 2 / np.pi * (val + tail)
        assert recon == pytest.approx(permittivity(p, w).real - 2.0, rel=0.02)


def test_lorentz_zero_history_zero_field():
    assert advance_p_lorentz(0.0, 0.0, 0.0, MIRROR_METAL, 1e-9) == 0.0


def test_lorentz_uncoupled_without_strength():
    p = LorentzDrudeParams(omega_0_lorentz=2.0, gamma_lorentz=0.1)
    pn, pp = 0.0, 0.0
    for _ in range(50):
        pn, pp = advance_p_lorentz(pn, pp, 1.0, p, 0.1), pn
    assert pn == 0.0


def test_lorentz_static_response():
    p = LorentzDrudeParams(omega_p_lorentz=2.0, omega_0_lorentz=3.0, gamma_lorentz=1.0)
    pn, pp = 0.0, 0.0
    for _ in range(4000):
        pn, pp = advance_p_lorentz(pn, pp, 1.5, p, 0.05), pn
    assert pn == pytest.approx(4.0 / 9.0 * 1.5, rel=1e-9)


def test_drude_free_acceleration_is_quadratic():
    p = LorentzDrudeParams(omega_p_drude=1.0)
    dt, e = 0.1, 1.0
    seq = [0.0, 0.0]
    for _ in range(20):
        seq.append(advance_p_drude(seq[-1], seq[-2], e, p, dt))
    # Second difference equals dt^2 E, so seq[k] = dt^2 E k(k-1)/2.
    n = np.arange(len(seq))
    assert np.allclose(seq, dt**2 * e * n * (n - 1) / 2)


def _steady_ratio(step, p, w, dt, nsteps=20000, tail=2000):
    pn, pp = 0.0j, 0.0j
    hist = np.empty(nsteps, complex)
    for n in range(nsteps):
        pn, pp = step(pn, pp, np.exp(-1j * w * n * dt), p, dt), pn
        hist[n] = pn
    # hist[n] holds P^{n+1}; a Drude medium also keeps a constant offset.
    t = (np.arange(nsteps)[-tail:] + 1) * dt
    basis = np.stack([np.exp(-1j * w * t), np.ones(tail)], axis=1)
    coef = np.linalg.lstsq(basis, hist[-tail:], rcond=None)[0]
    return coef[0]


def test_drude_transfer_function_second_order():
    p = LorentzDrudeParams(omega_p_drude=2.0, gamma_drude=0.5)
    w = 1.3
    exact = -p.omega_p_drude**2 / (w**2 + 1j * p.gamma_drude * w)
    errs = [abs(_steady_ratio(advance_p_drude, p, w, dt) - exact) for dt in (0.04, 0.02)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


def test_lorentz_transfer_function_second_order():
    p = LorentzDrudeParams(omega_p_lorentz=1.0, omega_0_lorentz=2.0, gamma_lorentz=0.4)
    w = 1.3
    exact = p.omega_p_lorentz**2 / (p.omega_0_lorentz**2 - w**2 - 1j * p.gamma_lorentz * w)
    errs = [abs(_steady_ratio(advance_p_lorentz, p, w, dt) - exact) for dt in (0.04, 0.02)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


def test_recursion_coefficients_match_recursions():
    dt = 1e-9
    (d1, d2, d3), (l1, l2, l3) = recursion_coefficients(MIRROR_METAL, dt)
    a, b, e = 0.3 + 0.1j, -0.2j, 1.7
    assert d1 * a + d2 * b + d3 * e == pytest.approx(advance_p_drude(a, b, e, MIRROR_METAL, dt))
    assert l1 * a + l2 * b + l3 * e == pytest.approx(advance_p_lorentz(a, b, e, MIRROR_METAL, dt))


def test_e_from_d():
    assert e_from_d(2.0, 0.5, 0.5, 2.0) == 0.5
    assert e_from_d(1.0, 0.4, 0.6, 5.0) == 0.0
    assert e_from_d(0.7, 0.0, 0.0, VACUUM.eps_inf) == 0.7
    with pytest.raises(ValueError):
        e_from_d(1.0, 0.0, 0.0, 0.0)
