import numpy as np
import pytest

from fdtdqe.layers import Layer, LayeredSolution, Scene1D, green_self, reflection_from_right
from fdtdqe.media import MIRROR_METAL, PEC, LorentzDrudeParams, permittivity
from fdtdqe.modes1d import (
    ModeSet, ba_modes, completeness_table, ma_modes, reconstruct_im_g,
)

LAM = 600e-9
W = 2 * np.pi / LAM


def im_direct(scene, w, x_a=0.0):
    return green_self(scene, w, x_a).imag


def test_vacuum_ba_modes_are_unit_plane_waves():
    ba = ba_modes(Scene1D(), W, 0.0)
    assert len(ba.ba_values) == 2
    assert np.allclose(np.abs(ba.ba_values), 1.0, rtol=1e-14)
    total, ba_part, ma_part = reconstruct_im_g(ba, ma_modes(Scene1D(), W, 0.0))
    assert ma_part == 0
    assert total == pytest.approx(1 / (2 * W), rel=1e-6)


def test_quarter_wave_slab_standing_wave():
    n = 2.0
    d = LAM / (4 * n)
    front = 0.3e-6
    scene = Scene1D((Layer(front, front + d, LorentzDrudeParams(eps_inf=n * n)),))
    x_a = 0.0
    r = reflection_from_right(scene, W, front)
    ba = ba_modes(scene, W, x_a)
    left_incident = ba.ba_values[0]
    assert abs(left_incident) == pytest.approx(abs(1 + r * np.exp(2j * W * (front - x_a))),
                                               rel=1e-10)


def test_absorbing_halfspace_fresnel_return():
    lossy = LorentzDrudeParams(eps_inf=2.25, omega_p_lorentz=0.8 * W, omega_0_lorentz=1.2 * W,
                               gamma_lorentz=2.0 * W)
    scene = Scene1D((Layer(0.2e-6, np.inf, lossy),))
    nm = np.sqrt(permittivity(lossy, W))
    r = (1 - nm) / (1 + nm)
    ba = ba_modes(scene, W, 0.0)
    assert abs(ba.ba_values[0]) == pytest.approx(abs(1 + r * np.exp(2j * W * 0.2e-6)), rel=1e-10)
    # the channel incident from the absorbing side is gone
    assert len(ba.ba_values) == 1


def test_lossless_scene_needs_no_ma_modes():
    n = 1.7
    scene = Scene1D((Layer(0.25e-6, 0.4e-6, LorentzDrudeParams(eps_inf=n * n)),
                     Layer(-0.6e-6, -0.35e-6, LorentzDrudeParams(eps_inf=3.0))))
    for w in np.linspace(0.7, 1.3, 13) * W:
        ma = ma_modes(scene, w, 0.0)
        assert ma.ma_values.size == 0
        total, _, _ = reconstruct_im_g(ba_modes(scene, w, 0.0), ma, w)
        assert total == pytest.approx(im_direct(scene, w), rel=1e-2)


def test_ld_slab_needs_both_families():
    scene = Scene1D((Layer(150e-9, 170e-9, MIRROR_METAL),))
    total, ba_part, ma_part = reconstruct_im_g(ba_modes(scene, W, 0.0), ma_modes(scene, W, 0.0))
    direct = im_direct(scene, W)
    assert ba_part < 0.995 * direct
    assert ma_part > 0
    assert total == pytest.approx(direct, rel=1e-2)


def test_single_lossy_cell_by_hand():
    lossy = LorentzDrudeParams(eps_inf=1.0, omega_p_lorentz=0.3 * W, omega_0_lorentz=1.5 * W, gamma_lorentz=0.5 * W)
    dx = LAM / 400
    scene = Scene1D((Layer(0.2e-6, 0.2e-6 + dx, lossy),))
    ma = ma_modes(scene, W, 0.0, points_per_wavelength=20)
    assert ma.ma_values.size == 1
    g = LayeredSolution.solve(scene, W, 0.0).green([0.2e-6 + dx / 2], 0.0)[0]
    im_chi = permittivity(lossy, W).imag
    # the 1/pi of the noise-current weight cancels against the pi / A prefactor
    hand = abs(g) ** 2 * W**2 * im_chi * dx
    _, _, ma_part = reconstruct_im_g(ModeSet(W), ma, W)
    assert ma_part == pytest.approx(hand, rel=1e-12)


def test_quadrature_self_convergence():
    scene = Scene1D((Layer(150e-9, 300e-9, MIRROR_METAL), Layer(-np.inf, -0.5e-6, MIRROR_METAL)))
    ba = ba_modes(scene, W, 0.0)
    a = reconstruct_im_g(ba, ma_modes(scene, W, 0.0, 60))[0]
    b = reconstruct_im_g(ba, ma_modes(scene, W, 0.0, 120))[0]
    assert abs(a - b) / abs(b) < 5e-3


def test_pec_closure_has_no_ba_part():
    scene = Scene1D((Layer(150e-9, 300e-9, MIRROR_METAL), Layer(-np.inf, -0.4e-6, PEC),
                     Layer(0.5e-6, np.inf, PEC)))
    rows = completeness_table(scene, np.linspace(0.7, 1.3, 5) * W, 0.0)
    for r in rows:
        assert r.ba_only < 1e-3 * r.total
        assert r.rel_error < 1e-2


def test_mismatched_frequencies_rejected():
    with pytest.raises(ValueError):
        reconstruct_im_g(ModeSet(1.0), ModeSet(2.0))
    with pytest.raises(ValueError):
        ma_modes(Scene1D(), W, 0.0, points_per_wavelength=5)
