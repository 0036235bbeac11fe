"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Set ELASTINV_ACCEPT_CI=1 for the reduced EnKF budget (J=200, d_H threshold
0.7) and the coarser 0.2 ESM grid.
"""
import math
import os
import time

import numpy as np
import pytest

from elastinv.config import ExperimentConfig
from elastinv.enkf import (
    EnKFConfig,
    Ensemble,
    InversionError,
    ObservationSpec,
    Scene,
    analysis_update,
    predict,
    run_inversion,
)
from elastinv.esm import tikhonov_solve, tikhonov_svd
from elastinv.forward import IncidentWave, Medium, disc_curve, disc_farfield_elastic, solve_scattering
from elastinv.geometry import hausdorff, preset_curve
from elastinv.pipeline import generate_data, invert, locate, truth_points
from elastinv.specfun import bessel_j_table, hankel1_table

CI = os.environ.get("ELASTINV_ACCEPT_CI", "") not in ("", "0")
SEEDS = range(5)
J_ENKF, DH_MAX = (200, 0.7) if CI else (500, 0.5)
ESM_STEP = 0.2 if CI else 0.1
MED = Medium()
OBS64 = 2 * np.pi * np.arange(64) / 64
TRUE_CENTER = np.array([-2.0, 3.0])


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {n:2d}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail

    return emit


def relmax(a, b):
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


def case_config(kind, channel, seed):
    text = f"[experiment]\nchannel = {channel}\n[obstacle]\nkind = {kind}\n[esm]\nstep = {ESM_STEP}\n"
    text += f"[enkf]\nJ = {J_ENKF}\n"
    return ExperimentConfig.parse(text).with_seed(seed)


@pytest.fixture(scope="module")
def kite_runs():
    """Noisy/clean kite P datasets and their ESM location per seed."""
    runs = {}
    for s in SEEDS:
        cfg = case_config("kite", "P", s)
        noisy, clean = generate_data(cfg)
        runs[s] = (cfg, noisy, clean, locate(noisy, cfg).argmin)
    return runs


def test_criterion_01_disc_oracle(verdict):
    t0 = time.perf_counter()
    errs = []
    for alphas in [(1.0, 0.0), (0.0, 1.0)]:
        wave = IncidentWave(0.0, *alphas)
        up, us = solve_scattering(disc_curve(1.0, (0, 0), 64), wave, MED)(OBS64)
        rp, rs = disc_farfield_elastic(1.0, (0, 0), MED, wave, OBS64)
        errs += [relmax(up, rp), relmax(us, rs)]
    dt = time.perf_counter() - t0
    verdict(1, max(errs) <= 1e-6 and dt < 5,
            f"disc Nystrom vs modal series max rel err {max(errs):.2e} (<= 1e-6), {dt:.2f}s (< 5s)")


def test_criterion_02_spectral_convergence(verdict):
    t0 = time.perf_counter()
    wave = IncidentWave(math.pi / 3)
    ref = solve_scattering(preset_curve("kite", 256), wave, MED)(OBS64)
    errs = []
    for n in (32, 64, 128):
        up, us = solve_scattering(preset_curve("kite", n), wave, MED)(OBS64)
        errs.append(max(relmax(up, ref[0]), relmax(us, ref[1])))
    dt = time.perf_counter() - t0
    monotone = errs[0] > errs[1] > errs[2]
    orders = math.log10(errs[0] / errs[2])
    verdict(2, monotone and orders >= 4 and dt < 30,
            f"kite errors {', '.join(f'{e:.1e}' for e in errs)} at n=32/64/128; {orders:.1f} orders, "
            f"monotone={monotone}, {dt:.2f}s")


def test_criterion_03_translation_identity(verdict):
    t0 = time.perf_counter()
    t = np.array([0.8, -1.7])
    base = preset_curve("peanut", 64, (0.0, 0.0))
    xh = np.column_stack([np.cos(OBS64), np.sin(OBS64)])
    errs = []
    for alphas, kt in [((1.0, 0.0), MED.kp), ((0.0, 1.0), MED.ks)]:
        wave = IncidentWave(1.0, *alphas)
        up0, us0 = solve_scattering(base, wave, MED)(OBS64)
        up1, us1 = solve_scattering(base.translated(t), wave, MED)(OBS64)
        shift = np.exp(1j * kt * (t @ wave.d))
        errs.append(relmax(up1, shift * np.exp(-1j * MED.kp * (xh @ t)) * up0))
        errs.append(relmax(us1, shift * np.exp(-1j * MED.ks * (xh @ t)) * us0))
    dt = time.perf_counter() - t0
    verdict(3, max(errs) <= 1e-8 and dt < 10, f"translation phase relation max rel err {max(errs):.2e}, {dt:.2f}s")


def test_criterion_04_tikhonov_oracle(verdict):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for k in range(50):
        m, n = (64, 128) if k == 0 else (int(rng.integers(1, 65)), int(rng.integers(1, 129)))
        A = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
        b = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        g1, g2 = tikhonov_solve(A, b, 1e-5), tikhonov_svd(A, b, 1e-5)
        worst = max(worst, float(np.linalg.norm(g1 - g2) / np.linalg.norm(g2)))
    verdict(4, worst <= 1e-10, f"normal equations vs SVD filter factors, worst rel diff {worst:.2e} over 50 systems")


@pytest.mark.slow
@pytest.mark.parametrize("kind, channel", [("kite", "P"), ("peanut", "S"), ("pear", "FULL")])
def test_criterion_05_esm_localisation(kind, channel, verdict, kite_runs):
    t0 = time.perf_counter()
    dists = []
    for s in SEEDS:
        if kind == "kite":
            z = kite_runs[s][3]
        else:
            cfg = case_config(kind, channel, s)
            z = locate(generate_data(cfg)[0], cfg).argmin
        dists.append(float(np.linalg.norm(z - TRUE_CENTER)))
    dt = time.perf_counter() - t0
    hits = sum(d <= 1.0 for d in dists)
    verdict(5, hits >= 4, f"{kind}/{channel}: |z* - z| = {[round(d, 2) for d in dists]}, {hits}/5 within 1.0 "
                          f"(grid step {ESM_STEP}, {dt:.0f}s)")


def _final_dh(noisy, clean, cfg, z_star):
    try:
        res, _ = invert(noisy, cfg, z_star, clean, truth_points(cfg))
        return res.records[0].d_H, res.records[-1].d_H, False
    except InversionError as exc:
        # the run stopped: score the last completed estimate
        return exc.records[0].d_H, exc.last_d_H, True


@pytest.mark.slow
def test_criterion_06_enkf_convergence(verdict, kite_runs):
    t0 = time.perf_counter()
    rows = []
    for s in SEEDS:
        cfg, noisy, clean, z_star = kite_runs[s]
        d0, dn, aborted = _final_dh(noisy, clean, cfg, z_star)
        rows.append((d0, dn, aborted))
    ok = [(not ab) and dn <= DH_MAX and dn < d0 for d0, dn, ab in rows]
    dt = time.perf_counter() - t0
    detail = "; ".join(f"seed {s}: {d0:.3f}->{dn:.3f}{' (aborted)' if ab else ''}" for s, (d0, dn, ab) in
                       zip(SEEDS, rows))
    verdict(6, sum(ok) >= 4, f"ESM-seeded kite/P, J={J_ENKF}: {detail}; {sum(ok)}/5 with final d_H <= {DH_MAX} "
                             f"and below initial ({dt:.0f}s)")


@pytest.mark.slow
def test_criterion_07_poor_initialisation(verdict, kite_runs):
    t0 = time.perf_counter()
    rows = []
    for s in SEEDS:
        cfg, noisy, clean, _ = kite_runs[s]
        rows.append(_final_dh(noisy, clean, cfg, (0.0, 0.0)))
    ok = [dn > 1.0 for _, dn, _ in rows]
    dt = time.perf_counter() - t0
    detail = "; ".join(f"seed {s}: {dn:.3f}{' (aborted at invalid-particle limit)' if ab else ''}"
                       for s, (_, dn, ab) in zip(SEEDS, rows))
    verdict(7, sum(ok) >= 4, f"z*=(0,0) final d_H {detail}; {sum(ok)}/5 above 1.0 ({dt:.0f}s)")


@pytest.mark.slow
def test_criterion_08_subspace_invariance(verdict, kite_runs):
    cfg, noisy, clean, z_star = kite_runs[0]
    obs = ObservationSpec.from_data(noisy, clean)
    scene = Scene.from_data(noisy)
    res = run_inversion(obs, scene, z_star, EnKFConfig(J=10, n_iter=30, seed=0), keep_history=True)
    X0 = res.history[0]
    basis = (X0[1:] - X0[0]).T  # 15 x 9: the initial affine span is a proper subspace
    worst = 0.0
    for X in res.history:
        D = (X - X0[0]).T
        coef, *_ = np.linalg.lstsq(basis, D, rcond=None)
        worst = max(worst, float(np.linalg.norm(basis @ coef - D, axis=0).max() / np.linalg.norm(D, axis=0).max()))
    verdict(8, worst <= 1e-8 and len(res.history) == 31,
            f"J=10 in R^15, 30 iterations: max relative projection residual {worst:.1e}")


def test_criterion_09_linear_kalman(verdict):
    rng = np.random.default_rng(9)
    A = rng.standard_normal((4, 3))
    m0, P0 = np.array([0.5, -1.0, 0.2]), np.array([[1.0, 0.3, 0.0], [0.3, 0.8, 0.1], [0.0, 0.1, 0.5]])
    C = np.diag([0.1, 0.2, 0.1, 0.3])
    y = A @ np.array([1.0, 0.0, -0.5]) + rng.normal(0, 0.3, 4)
    exact = m0 + P0 @ A.T @ np.linalg.solve(A @ P0 @ A.T + C, y - A @ m0)
    obs = ObservationSpec(y, np.diag(C), (4,), "P")
    means = []
    for rep in range(20):
        X = np.random.default_rng([9, rep]).multivariate_normal(m0, P0, size=10_000)
        ens = Ensemble(X, X @ A.T)
        means.append(analysis_update(ens, predict(ens), obs, "joint", True, rep).mean())
    means = np.array(means)
    se = means.std(axis=0, ddof=1) / math.sqrt(20)
    z = np.abs(means.mean(axis=0) - exact) / se
    verdict(9, bool(np.all(z <= 3)), f"J=1e4 ensemble mean vs exact Kalman mean, |diff|/SE = {np.round(z, 2)}")


def test_criterion_10_property_suites(verdict, kite_runs):
    checks = {}
    # special functions: Wronskian and recurrence on a log grid
    x = np.geomspace(0.1, 50, 200)
    J = bessel_j_table(21, x)
    Y = hankel1_table(21, x).imag
    w = J[1:] * Y[:-1] - J[:-1] * Y[1:]
    checks["wronskian"] = float(np.max(np.abs(w * np.pi * x / 2 - 1))) < 1e-10
    n = np.arange(1, 21)[:, None]
    rec = np.abs(J[:-2] + J[2:] - 2 * n / x * J[1:-1]) / (np.abs(J[:-2]) + np.abs(J[2:]) + 1e-300)
    checks["recurrence"] = float(rec.max()) < 1e-12
    # Hausdorff: brute force and metric axioms
    rng = np.random.default_rng(10)
    ok_h = True
    for _ in range(20):
        A, B, Cs = (rng.normal(size=(int(rng.integers(1, 40)), 2)) for _ in range(3))
        brute = max(max(min(np.hypot(*(a - b)) for b in B) for a in A), max(min(np.hypot(*(a - b)) for a in A)
                                                                           for b in B))
        h = hausdorff(A, B)
        ok_h &= abs(h - brute) <= 1e-12 * max(1, brute) and h == hausdorff(B, A) and hausdorff(A, A) == 0
        ok_h &= hausdorff(A, Cs) <= h + hausdorff(B, Cs) + 1e-12
    checks["hausdorff"] = bool(ok_h)
    # covariance blocks vs a brute-force loop
    X, W = rng.normal(size=(7, 15)), rng.normal(size=(7, 8))
    st = predict(Ensemble(X, W))
    ref = sum(np.outer(X[j] - X.mean(0), W[j] - W.mean(0)) for j in range(7)) / 6
    refw = sum(np.outer(W[j] - W.mean(0), W[j] - W.mean(0)) for j in range(7)) / 6
    checks["covariance"] = bool(np.allclose(st.cov_xw, ref, rtol=0, atol=1e-12)
                                and np.allclose(st.cov_ww, refw, rtol=0, atol=1e-12)
                                and np.array_equal(np.vstack([st.cov_qw, st.cov_zw]), st.cov_xw))
    # determinism under a fixed seed, independent of the worker count
    cfg, noisy, clean, z_star = kite_runs[0]
    obs, scene = ObservationSpec.from_data(noisy, clean), Scene.from_data(noisy)
    ecfg = EnKFConfig(J=12, n_iter=3, seed=77)
    runs = [run_inversion(obs, scene, z_star, ecfg, threads=t) for t in (1, 1, 3)]
    checks["determinism"] = all(np.array_equal(runs[0].ensemble.particles, r.ensemble.particles)
                                and [a.to_json() for a in runs[0].records] == [a.to_json() for a in r.records]
                                for r in runs[1:])
    failed = [k for k, v in checks.items() if not v]
    verdict(10, not failed, f"property suites {sorted(checks)}; failed: {failed or 'none'}")
