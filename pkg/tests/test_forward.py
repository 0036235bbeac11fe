import math

import numpy as np
import pytest

from elastinv.forward import (
    ElasticScatterer,
    IncidentWave,
    Medium,
    ScatteringSolverError,
    TruncationWarning,
    default_truncation,
    dirichlet_far_field,
    disc_curve,
    disc_farfield_elastic,
    disc_farfield_scalar,
    elastic_disc_modes,
    incident_traces,
    solve_scattering,
)
from elastinv.geometry import BoundaryCurve, preset_curve

MED = Medium()
OBS = 2 * np.pi * np.arange(64) / 64


def relmax(a, b):
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


def test_medium_wavenumbers():
    assert MED.kp == pytest.approx(math.pi / 2)
    assert MED.ks == pytest.approx(math.pi)
    assert MED.kp < MED.ks
    with pytest.raises(ValueError):
        Medium(1.0, -2.0, 1.0)
    with pytest.raises(ValueError):
        Medium(1.0, 1.0, 0.0)


def _single_node_curve(point, normal_angle):
    """Two-node stand-in whose first node sits at ``point`` with the given outward normal."""
    p = np.asarray(point, dtype=float)

    def sampler(theta):
        # circle of radius 1 through p with normal at angle normal_angle at theta = 2 pi
        c = p - np.array([math.cos(normal_angle), math.sin(normal_angle)])
        th = theta + normal_angle
        x = np.column_stack([np.cos(th), np.sin(th)]) + c
        dx = np.column_stack([-np.sin(th), np.cos(th)])
        return x, dx, -np.column_stack([np.cos(th), np.sin(th)])

    return BoundaryCurve(sampler, 2)


def test_incident_traces_examples():
    curve = _single_node_curve((0.0, 0.0), 0.0)  # nu = (1, 0), tau = (0, 1) at the last node
    i = -1
    np.testing.assert_allclose(curve.normals[i], [1, 0], atol=1e-15)
    g1, g2 = incident_traces(curve, IncidentWave(0.0, 1.0, 0.0), MED)
    assert g1[i] == pytest.approx(-1) and abs(g2[i]) < 1e-15
    g1, g2 = incident_traces(curve, IncidentWave(0.0, 0.0, 1.0), MED)
    assert abs(g1[i]) < 1e-15 and g2[i] == pytest.approx(-1)
    curve = _single_node_curve((1.0, 0.0), 0.0)
    ap = 0.3 - 0.2j
    g1, _ = incident_traces(curve, IncidentWave(0.0, ap, 0.7), MED)
    assert g1[i] == pytest.approx(-ap * np.exp(1j * MED.kp))


@pytest.mark.parametrize("n_nodes", [32, 64, 128])
@pytest.mark.parametrize("alphas", [(1.0, 0.0), (0.0, 1.0)])
def test_disc_matches_modal_series(n_nodes, alphas):
    wave = IncidentWave(0.4, *alphas)
    up, us = solve_scattering(disc_curve(1.0, (0, 0), n_nodes), wave, MED)(OBS)
    rp, rs = disc_farfield_elastic(1.0, (0, 0), MED, wave, OBS)
    assert relmax(up, rp) < 1e-6
    assert relmax(us, rs) < 1e-6


def test_disc_mode_series_machine_precision_at_64():
    wave = IncidentWave(0.0)
    up, us = solve_scattering(disc_curve(1.0, (0, 0), 64), wave, MED)(OBS)
    rp, rs = disc_farfield_elastic(1.0, (0, 0), MED, wave, OBS)
    assert relmax(up, rp) < 1e-10 and relmax(us, rs) < 1e-10


def test_potentials_conversion():
    ff = solve_scattering(preset_curve("pear", 64), IncidentWave(1.0, 0.5, 0.5j), MED)
    phi, psi = ff.potentials(OBS)
    up, us = ff(OBS)
    np.testing.assert_array_equal(up, 1j * MED.kp * phi[:, 0])
    np.testing.assert_array_equal(us, 1j * MED.ks * psi[:, 0])


def test_superposition_and_linearity():
    curve = preset_curve("kite", 64)
    sc = ElasticScatterer(curve, MED)
    ap, as_ = 0.7 - 0.1j, -0.4 + 0.9j
    up1, us1 = sc.solve(IncidentWave(0.9, 1.0, 0.0))(OBS)
    up2, us2 = sc.solve(IncidentWave(0.9, 0.0, 1.0))(OBS)
    upm, usm = sc.solve(IncidentWave(0.9, ap, as_))(OBS)
    assert relmax(upm, ap * up1 + as_ * up2) < 1e-10
    assert relmax(usm, ap * us1 + as_ * us2) < 1e-10


def test_many_waves_match_single_solves():
    sc = ElasticScatterer(preset_curve("peanut", 64), MED)
    waves = [IncidentWave(a) for a in (0.0, 1.0, 2.0)]
    up, us = sc.solve(waves)(OBS)
    for j, w in enumerate(waves):
        u1, s1 = sc.solve(w)(OBS)
        np.testing.assert_allclose(up[:, j], u1, rtol=1e-13, atol=1e-15)


@pytest.mark.parametrize("alphas, kt", [((1.0, 0.0), "p"), ((0.0, 1.0), "s")])
def test_translation_identity_two_solves(alphas, kt):
    t = np.array([1.3, -0.6])
    wave = IncidentWave(0.7, *alphas)
    base = preset_curve("kite", 64, (0.0, 0.0))
    up0, us0 = solve_scattering(base, wave, MED)(OBS)
    up1, us1 = solve_scattering(base.translated(t), wave, MED)(OBS)
    xh = np.column_stack([np.cos(OBS), np.sin(OBS)])
    k_t = MED.k(kt)
    ph_p = np.exp(1j * k_t * (t @ wave.d) - 1j * MED.kp * (xh @ t))
    ph_s = np.exp(1j * k_t * (t @ wave.d) - 1j * MED.ks * (xh @ t))
    assert relmax(up1, ph_p * up0) < 1e-8
    assert relmax(us1, ph_s * us0) < 1e-8


def _kite_errors():
    wave = IncidentWave(math.pi / 3)
    ref = solve_scattering(preset_curve("kite", 256), wave, MED)(OBS)
    errs = {}
    for n in (32, 64, 128):
        up, us = solve_scattering(preset_curve("kite", n), wave, MED)(OBS)
        errs[n] = max(relmax(up, ref[0]), relmax(us, ref[1]))
    return errs


def test_kite_spectral_convergence():
    errs = _kite_errors()
    assert errs[32] > errs[64] > errs[128]
    assert errs[32] / errs[128] >= 1e4


def test_kite_self_convergence_64_vs_128_loose():
    wave = IncidentWave(math.pi / 3)
    a = solve_scattering(preset_curve("kite", 64), wave, MED)(OBS)
    b = solve_scattering(preset_curve("kite", 128), wave, MED)(OBS)
    assert max(relmax(a[0], b[0]), relmax(a[1], b[1])) < 1e-5


@pytest.mark.xfail(strict=True, reason="64-node kite solve agrees with 128 nodes to a few 1e-6, not 1e-6")
def test_kite_self_convergence_64_vs_128_strict():
    wave = IncidentWave(math.pi / 3)
    a = solve_scattering(preset_curve("kite", 64), wave, MED)(OBS)
    b = solve_scattering(preset_curve("kite", 128), wave, MED)(OBS)
    assert max(relmax(a[0], b[0]), relmax(a[1], b[1])) <= 1e-6


def test_ill_conditioned_system_reported():
    from elastinv.forward import _lu_checked

    mat = np.ones((6, 6), dtype=complex)
    mat[np.diag_indices(6)] += 1e-15
    with pytest.raises(ScatteringSolverError):
        _lu_checked(mat)
    _lu_checked(np.eye(6, dtype=complex))


# scalar disc


def test_scalar_disc_rotation_invariance():
    a = disc_farfield_scalar(1.0, (0, 0), 2.0, 0.3, 1.1)
    b = disc_farfield_scalar(1.0, (0, 0), 2.0, 0.3 + 0.8, 1.1 + 0.8)
    assert abs(a - b) < 1e-14 * abs(a)


def test_scalar_disc_matches_dirichlet_nystrom():
    k = math.pi / 2
    inc = np.array([0.0, 1.2])
    num = dirichlet_far_field(disc_curve(1.0, (0, 0), 64), k, inc, OBS)
    ref = disc_farfield_scalar(1.0, (0, 0), k, inc[None, :], OBS[:, None])
    assert relmax(num, ref) < 1e-8


def test_scalar_disc_translated_matches_nystrom():
    k = math.pi
    z = np.array([-2.0, 3.0])
    num = dirichlet_far_field(disc_curve(1.0, z, 64), k, [0.5], OBS)[:, 0]
    ref = disc_farfield_scalar(1.0, z, k, 0.5, OBS)
    assert relmax(num, ref) < 1e-8


def test_scalar_disc_translation_phase_exact():
    k, z, d, x = 1.7, np.array([-2.0, 3.0]), 0.4, np.linspace(0, 6, 9)
    base = disc_farfield_scalar(1.0, (0, 0), k, d, x)
    moved = disc_farfield_scalar(1.0, z, k, d, x)
    dvec = np.array([math.cos(d), math.sin(d)])
    xh = np.column_stack([np.cos(x), np.sin(x)])
    np.testing.assert_allclose(moved, base * np.exp(1j * k * ((dvec - xh) @ z)), rtol=1e-14)


def test_scalar_truncation_guards():
    with pytest.raises(ValueError):
        disc_farfield_scalar(1.0, (0, 0), 2.0, 0.0, 0.0, n_trunc=10)
    from elastinv.forward import _warn_tail

    with pytest.warns(TruncationWarning):
        _warn_tail(np.array([1.0, 1e-3]), 1.0)


# elastic disc


def test_elastic_disc_axis_parity():
    wave = IncidentWave(0.0, 1.0, 0.0)
    _, us = disc_farfield_elastic(1.0, (0, 0), MED, wave, np.array([0.0, math.pi]))
    up, _ = disc_farfield_elastic(1.0, (0, 0), MED, wave, OBS)
    assert np.max(np.abs(us)) < 1e-10 * np.max(np.abs(up))


def test_elastic_disc_translation_against_nystrom():
    z = np.array([-2.0, 3.0])
    for alphas in [(1.0, 0.0), (0.0, 1.0)]:
        wave = IncidentWave(1.1, *alphas)
        up, us = solve_scattering(disc_curve(1.0, z, 64), wave, MED)(OBS)
        rp, rs = disc_farfield_elastic(1.0, z, MED, wave, OBS)
        assert relmax(up, rp) < 1e-8 and relmax(us, rs) < 1e-8


def test_elastic_modes_symmetric_index_range():
    n = default_truncation(1.0, MED)
    m, A, B = elastic_disc_modes(1.0, MED, 1.0, 0.0, n)
    assert m[0] == -n and m[-1] == n and A.shape == B.shape == (2 * n + 1,)
    assert np.all(np.isfinite(A)) and np.all(np.isfinite(B))
