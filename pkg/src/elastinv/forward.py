"""Direct elastic scattering by a rigid obstacle in two dimensions.

The scattered displacement is written as u = grad(phi) + curl(psi) with
radiating Helmholtz potentials phi (wavenumber k_p) and psi (k_s).  Both
are single-layer potentials of unknown densities on the boundary, and the
rigid condition u = -u_inc becomes

    d(phi)/d(nu) + d(psi)/d(tau) = g1 = -nu . u_inc
    d(phi)/d(tau) - d(psi)/d(nu) = g2 = -tau . u_inc

The normal derivatives are discretised with Kress' logarithmic splitting
quadrature; tangential derivatives of the single layer are obtained by
spectral differentiation of its nodal values.  Far fields use the
convention v(x) ~ exp(ik|x|)/sqrt(|x|) v_inf(x_hat), and the elastic far
fields follow as u_p_inf = i k_p phi_inf, u_s_inf = i k_s psi_inf.

The same module carries the analytic modal series for discs (scalar
sound-soft and elastic rigid), which serve as the extended-sampling kernel
and as verification oracles for the boundary-integral solver.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from . import specfun
from .geometry import BoundaryCurve, circle_sampler

COND_LIMIT = 1e12
_FF_CONST = np.exp(0.25j * np.pi) / math.sqrt(8.0 * math.pi)


class ScatteringSolverError(RuntimeError):
    """The discrete boundary-integral system could not be solved reliably."""


class TruncationWarning(UserWarning):
    """Modal series tail not negligible at the requested truncation."""


@dataclass(frozen=True)
class Medium:
    """Homogeneous isotropic elastic background."""

    omega: float = math.pi
    lam: float = 2.0
    mu: float = 1.0

    def __post_init__(self):
        if not (self.omega > 0 and self.mu > 0 and self.lam + self.mu > 0):
            raise ValueError("medium requires omega > 0, mu > 0 and lambda + mu > 0")

    @property
    def kp(self) -> float:
        return self.omega / math.sqrt(self.lam + 2.0 * self.mu)

    @property
    def ks(self) -> float:
        return self.omega / math.sqrt(self.mu)

    def k(self, kind: str) -> float:
        return {"p": self.kp, "s": self.ks}[kind.lower()]


def unit(angle) -> np.ndarray:
    angle = np.asarray(angle, dtype=float)
    return np.stack([np.cos(angle), np.sin(angle)], axis=-1)


@dataclass(frozen=True)
class IncidentWave:
    """u_inc(x) = alpha_p d exp(i k_p x.d) + alpha_s d_perp exp(i k_s x.d)."""

    angle: float
    alpha_p: complex = 1.0
    alpha_s: complex = 0.0

    def __post_init__(self):
        if self.alpha_p == 0 and self.alpha_s == 0:
            raise ValueError("incident wave needs a nonzero P or S amplitude")

    @property
    def d(self) -> np.ndarray:
        return unit(self.angle)

    @property
    def d_perp(self) -> np.ndarray:
        d = self.d
        return np.array([-d[1], d[0]])

    @classmethod
    def from_direction(cls, d, alpha_p=1.0, alpha_s=0.0):
        d = np.asarray(d, dtype=float)
        n = math.hypot(d[0], d[1])
        if not math.isclose(n, 1.0, rel_tol=0, abs_tol=1e-12):
            raise ValueError("incident direction must be a unit vector")
        return cls(math.atan2(d[1], d[0]), alpha_p, alpha_s)

    def field(self, x, med: Medium) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        xd = x @ self.d
        ep = self.alpha_p * np.exp(1j * med.kp * xd)
        es = self.alpha_s * np.exp(1j * med.ks * xd)
        return ep[..., None] * self.d + es[..., None] * self.d_perp


def incident_traces(curve: BoundaryCurve, wave: IncidentWave, med: Medium):
    """Boundary data g1 = -nu . u_inc and g2 = -tau . u_inc at the curve nodes."""
    u = wave.field(curve.points, med)
    g1 = -np.einsum("ij,ij->i", curve.normals, u)
    g2 = -np.einsum("ij,ij->i", curve.tangents, u)
    return g1, g2


# --------------------------------------------------------------------------
# quadrature building blocks
# --------------------------------------------------------------------------


@lru_cache(maxsize=16)
def _kress_weights(n_nodes: int) -> np.ndarray:
    """R_{ij} for int ln(4 sin^2((t - tau)/2)) f(tau) dtau on 2n = n_nodes nodes."""
    n = n_nodes // 2
    lag = 2.0 * np.pi * np.arange(n_nodes) / n_nodes
    m = np.arange(1, n)
    row = -(2.0 * np.pi / n) * (np.cos(np.outer(lag, m)) @ (1.0 / m)) - (np.pi / n**2) * np.cos(n * lag)
    idx = (np.arange(n_nodes)[:, None] - np.arange(n_nodes)[None, :]) % n_nodes
    out = row[idx]
    out.setflags(write=False)
    return out


@lru_cache(maxsize=16)
def _log_sin(n_nodes: int) -> np.ndarray:
    lag = 2.0 * np.pi * (np.arange(n_nodes)[:, None] - np.arange(n_nodes)[None, :]) / n_nodes
    with np.errstate(divide="ignore"):
        out = np.log(4.0 * np.sin(0.5 * lag) ** 2)
    np.fill_diagonal(out, 0.0)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=16)
def spectral_diff_matrix(n_nodes: int) -> np.ndarray:
    """Derivative of the trigonometric interpolant on equispaced nodes (even count)."""
    lag = np.arange(n_nodes)[:, None] - np.arange(n_nodes)[None, :]
    h = 2.0 * np.pi / n_nodes
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 0.5 * np.where(lag % 2 == 0, 1.0, -1.0) / np.tan(0.5 * h * lag)
    np.fill_diagonal(out, 0.0)
    out.setflags(write=False)
    return out


class _Pairwise:
    """Geometry shared by all kernels on one curve."""

    def __init__(self, curve: BoundaryCurve):
        self.curve = curve
        self.n = curve.n_nodes
        x = curve.points
        self.diff = x[:, None, :] - x[None, :, :]
        r = np.hypot(self.diff[..., 0], self.diff[..., 1])
        np.fill_diagonal(r, 1.0)
        self.r = r
        self.speed = curve.speed
        nu = curve.normals
        # (x_i - x_j) . nu_i and (x_i - x_j) . nu_j
        self.dn_obs = np.einsum("ijk,ik->ij", self.diff, nu)
        self.dn_src = np.einsum("ijk,jk->ij", self.diff, nu)
        # both normal-derivative kernels tend to (x'' . nu) / (4 pi |x'|^2) per unit arc
        curv = (curve.deriv2 * nu).sum(axis=1)
        self.diag_curv = curv / (4.0 * np.pi * self.speed)
        self.R = _kress_weights(self.n)
        self.L = _log_sin(self.n)
        self.h = 2.0 * np.pi / self.n

    def bessel(self, k: float):
        iu = np.triu_indices(self.n, 1)
        vals = specfun.jy01(k * self.r[iu])
        out = []
        for v in vals:
            m = np.zeros((self.n, self.n))
            m[iu] = v
            m = m + m.T
            out.append(m)
        return out

    def _assemble(self, m1, m2):
        return self.R * m1 + self.h * m2

    def single_layer(self, k: float, bes=None):
        """Nystrom matrix of S_k with density per unit arc length."""
        j0, _, y0, _ = bes if bes is not None else self.bessel(k)
        sp = self.speed[None, :]
        m = 0.25j * (j0 + 1j * y0) * sp
        m1 = -(0.25 / np.pi) * j0 * sp
        m2 = m - m1 * self.L
        diag = (0.25j - specfun.EULER_GAMMA / (2 * np.pi) - np.log(0.5 * k * self.speed) / (2 * np.pi)) * self.speed
        np.fill_diagonal(m1, -(0.25 / np.pi) * self.speed)
        np.fill_diagonal(m2, diag)
        return self._assemble(m1, m2)

    def _normal_kernel(self, k: float, bes, proj, sign):
        _, j1, _, y1 = bes
        sp = self.speed[None, :]
        base = sign * 0.25j * k * (j1 + 1j * y1) * proj / self.r * sp
        m1 = -sign * (0.25 * k / np.pi) * j1 * proj / self.r * sp
        m2 = base - m1 * self.L
        np.fill_diagonal(m1, 0.0)
        np.fill_diagonal(m2, self.diag_curv)
        return self._assemble(m1, m2)

    def normal_derivative_single(self, k: float, bes=None):
        """K'_k: normal derivative (at the target) of the single layer, principal value."""
        bes = bes if bes is not None else self.bessel(k)
        return self._normal_kernel(k, bes, self.dn_obs, -1.0)

    def double_layer(self, k: float, bes=None):
        """K_k: double layer with source normal, principal value."""
        bes = bes if bes is not None else self.bessel(k)
        return self._normal_kernel(k, bes, self.dn_src, 1.0)

    def tangential(self, mat):
        """Matrix of d/dtau applied after ``mat`` (differentiate nodal values)."""
        return (spectral_diff_matrix(self.n) @ mat) / self.speed[:, None]


def _far_field_matrix(curve: BoundaryCurve, k: float, obs_angles) -> np.ndarray:
    """Far field of the single layer: columns act on nodal densities."""
    xh = unit(np.atleast_1d(obs_angles))
    phase = np.exp(-1j * k * (xh @ curve.points.T))
    w = (2.0 * np.pi / curve.n_nodes) * curve.speed
    return (_FF_CONST / math.sqrt(k)) * phase * w[None, :]


def _lu_checked(mat: np.ndarray):
    lu, piv = sla.lu_factor(mat, check_finite=True)
    anorm = np.abs(mat).sum(axis=0).max()
    gecon = lapack.zgecon if np.iscomplexobj(lu) else lapack.dgecon
    rcond, info = gecon(lu, anorm, norm="1")
    if info != 0 or not rcond > 1.0 / COND_LIMIT:
        cond = np.inf if rcond == 0 else 1.0 / rcond
        raise ScatteringSolverError(f"boundary-integral system ill-conditioned (cond ~ {cond:.3g})")
    return lu, piv


@dataclass
class FarField:
    """Far-field evaluator of one or several solves on the same obstacle.

    ``phi_density`` / ``psi_density`` have shape (n_nodes, n_waves).
    """

    curve: BoundaryCurve = field(repr=False)
    medium: Medium
    phi_density: np.ndarray = field(repr=False)
    psi_density: np.ndarray = field(repr=False)

    def potentials(self, obs_angles):
        """(phi_inf, psi_inf) of shape (n_obs, n_waves)."""
        fp = _far_field_matrix(self.curve, self.medium.kp, obs_angles) @ self.phi_density
        fs = _far_field_matrix(self.curve, self.medium.ks, obs_angles) @ self.psi_density
        return fp, fs

    def __call__(self, obs_angles):
        """(u_p_inf, u_s_inf); squeezed to 1-D when a single wave was solved."""
        fp, fs = self.potentials(obs_angles)
        up = 1j * self.medium.kp * fp
        us = 1j * self.medium.ks * fs
        if up.shape[1] == 1:
            return up[:, 0], us[:, 0]
        return up, us


class ElasticScatterer:
    """Factorised Nystrom system for one rigid obstacle; solves many incident waves."""

    def __init__(self, curve: BoundaryCurve, med: Medium):
        if curve.n_nodes < 8:
            raise ValueError("need at least 8 boundary nodes")
        self.curve = curve
        self.medium = med
        self.matrix = self._build()
        self._lu = _lu_checked(self.matrix)

    def _build(self) -> np.ndarray:
        pw = _Pairwise(self.curve)
        n = pw.n
        bp, bs = pw.bessel(self.medium.kp), pw.bessel(self.medium.ks)
        kp_ = pw.normal_derivative_single(self.medium.kp, bp)
        ks_ = pw.normal_derivative_single(self.medium.ks, bs)
        tp = pw.tangential(pw.single_layer(self.medium.kp, bp))
        ts = pw.tangential(pw.single_layer(self.medium.ks, bs))
        eye = np.eye(n)
        top = np.hstack([kp_ - 0.5 * eye, ts])
        bot = np.hstack([tp, 0.5 * eye - ks_])
        return np.vstack([top, bot])

    def solve(self, waves) -> FarField:
        if isinstance(waves, IncidentWave):
            waves = [waves]
        rhs = np.empty((2 * self.curve.n_nodes, len(waves)), dtype=complex)
        for j, wave in enumerate(waves):
            g1, g2 = incident_traces(self.curve, wave, self.medium)
            rhs[:, j] = np.concatenate([g1, g2])
        dens = sla.lu_solve(self._lu, rhs)
        if not np.all(np.isfinite(dens)):
            raise ScatteringSolverError("non-finite boundary densities")
        n = self.curve.n_nodes
        return FarField(self.curve, self.medium, dens[:n], dens[n:])


def solve_scattering(curve: BoundaryCurve, wave, med: Medium, n_nodes: int | None = None) -> FarField:
    """Far-field evaluator for a rigid obstacle hit by ``wave`` (or a list of waves)."""
    if n_nodes is not None and n_nodes != curve.n_nodes:
        curve = curve.with_nodes(n_nodes)
    return ElasticScatterer(curve, med).solve(wave)


def dirichlet_far_field(curve: BoundaryCurve, k: float, inc_angles, obs_angles, coupling=None):
    """Sound-soft scalar scattering, combined-field Nystrom; returns (n_obs, n_inc)."""
    eta = k if coupling is None else coupling
    pw = _Pairwise(curve)
    bes = pw.bessel(k)
    a = 0.5 * np.eye(pw.n) + pw.double_layer(k, bes) - 1j * eta * pw.single_layer(k, bes)
    lu = _lu_checked(a)
    d = unit(np.atleast_1d(inc_angles))
    rhs = -np.exp(1j * k * (curve.points @ d.T))
    dens = sla.lu_solve(lu, rhs)
    xh = unit(np.atleast_1d(obs_angles))
    nu = curve.normals
    phase = np.exp(-1j * k * (xh @ curve.points.T))
    kern = (-1j * k * (xh @ nu.T) - 1j * eta) * phase
    w = (2.0 * np.pi / curve.n_nodes) * curve.speed
    return (_FF_CONST / math.sqrt(k)) * (kern * w[None, :]) @ dens


# --------------------------------------------------------------------------
# analytic discs
# --------------------------------------------------------------------------


def default_truncation(R: float, med: Medium) -> int:
    return int(math.ceil(med.ks * R)) + 25


def _check_truncation(n_trunc: int, k: float, R: float):
    if n_trunc < math.ceil(k * R) + 20:
        raise ValueError(f"n_trunc={n_trunc} below ceil(kR)+20 for kR={k * R:.3g}")
    if n_trunc + 1 > specfun.MAX_ORDER:
        raise ValueError(f"n_trunc={n_trunc} exceeds the special-function order cap")


def _warn_tail(coef: np.ndarray, total: float):
    if abs(coef[-1]) > 1e-14 * max(total, 1e-300):
        warnings.warn("disc modal series tail exceeds 1e-14 of the sum", TruncationWarning, stacklevel=3)


def _mode_sum(coef_pos, coef_neg, delta):
    """sum_{m=-N..N} c_m exp(i m delta) given c_m for m >= 0 and m <= 0."""
    delta = np.asarray(delta, dtype=float)
    n = coef_pos.size - 1
    m = np.arange(1, n + 1)
    e = np.exp(1j * np.multiply.outer(delta, m))
    return coef_pos[0] + e @ coef_pos[1:] + np.conj(e) @ coef_neg[1:]


def scalar_disc_modes(R: float, k: float, n_trunc: int) -> np.ndarray:
    """c_m, m = 0..N: centered far field is sum_m c_m exp(i m (theta_x - theta_d)), c_{-m} = c_m."""
    _check_truncation(n_trunc, k, R)
    h = specfun.hankel1_table(n_trunc, k * R)
    j = h.real
    coef = -math.sqrt(2.0 / (math.pi * k)) * np.exp(-0.25j * np.pi) * j / h
    _warn_tail(coef, float(np.abs(coef).sum()))
    return coef


def disc_farfield_scalar(R, z, k, d_angle, xhat_angle, n_trunc=None):
    """Far field of the sound-soft disc |x - z| = R for the plane wave exp(i k x.d).

    Angles broadcast against each other.
    """
    n_trunc = int(math.ceil(k * R)) + 25 if n_trunc is None else n_trunc
    coef = scalar_disc_modes(R, k, n_trunc)
    d_angle = np.asarray(d_angle, dtype=float)
    xhat_angle = np.asarray(xhat_angle, dtype=float)
    val = _mode_sum(coef, coef, xhat_angle - d_angle)
    z = np.asarray(z, dtype=float)
    shift = k * ((unit(d_angle) - unit(xhat_angle)) @ z)
    return val * np.exp(1j * shift)


def elastic_disc_modes(R: float, med: Medium, alpha_p: complex, alpha_s: complex, n_trunc: int):
    """Hankel coefficients (A_m, B_m), m = -N..N, of the centered rigid disc.

    The incidence direction is taken as angle 0, i.e. the potentials are
    phi = sum A_m H_m(k_p r) exp(i m (theta - theta_d)) and likewise psi.
    """
    kp, ks = med.kp, med.ks
    _check_truncation(n_trunc, ks, R)
    m = np.arange(-n_trunc, n_trunc + 1)
    am = np.abs(m)
    hp_t = specfun.hankel1_table(n_trunc + 1, kp * R)
    hs_t = specfun.hankel1_table(n_trunc + 1, ks * R)
    sgn = np.where((m < 0) & (am % 2 == 1), -1.0, 1.0)
    hp, hs = sgn * hp_t[am], sgn * hs_t[am]
    dhp_t, dhs_t = specfun.derivative_from_table(hp_t), specfun.derivative_from_table(hs_t)
    # C_{-m}' = (-1)^m C_m'
    dhp, dhs = sgn * dhp_t[am], sgn * dhs_t[am]
    jp, js, djp, djs = hp.real, hs.real, dhp.real, dhs.real
    im_ = 1j**m
    g1 = -alpha_p * im_ / 1j * djp + alpha_s * (m / (ks * R)) * im_ * js
    g2 = -alpha_p * (m / (kp * R)) * im_ * jp - alpha_s * im_ / 1j * djs
    a11 = kp * dhp
    a12 = 1j * m / R * hs
    a21 = 1j * m / R * hp
    a22 = -ks * dhs
    det = a11 * a22 - a12 * a21
    if np.any(np.abs(det) == 0) or not np.all(np.isfinite(det)):
        raise ScatteringSolverError("singular modal system for the elastic disc")
    A = (g1 * a22 - a12 * g2) / det
    B = (a11 * g2 - a21 * g1) / det
    return m, A, B


def disc_farfield_elastic(R, z, med: Medium, wave: IncidentWave, xhat_angle, n_trunc=None):
    """(u_p_inf, u_s_inf) of the rigid elastic disc |x - z| = R."""
    n_trunc = default_truncation(R, med) if n_trunc is None else n_trunc
    z = np.asarray(z, dtype=float)
    d = wave.d
    ap = wave.alpha_p * np.exp(1j * med.kp * (z @ d))
    as_ = wave.alpha_s * np.exp(1j * med.ks * (z @ d))
    m, A, B = elastic_disc_modes(R, med, ap, as_, n_trunc)
    xhat_angle = np.asarray(xhat_angle, dtype=float)
    e = np.exp(1j * np.multiply.outer(xhat_angle - wave.angle, m))
    mi = (-1j) ** m
    cp = math.sqrt(2.0 / (math.pi * med.kp)) * np.exp(-0.25j * np.pi)
    cs = math.sqrt(2.0 / (math.pi * med.ks)) * np.exp(-0.25j * np.pi)
    tp = A * mi
    ts = B * mi
    _warn_tail(np.array([tp[0], tp[-1], ts[0], ts[-1]]), float(np.abs(tp).sum() + np.abs(ts).sum()))
    xh = unit(xhat_angle)
    phi = cp * (e @ tp) * np.exp(-1j * med.kp * (xh @ z))
    psi = cs * (e @ ts) * np.exp(-1j * med.ks * (xh @ z))
    return 1j * med.kp * phi, 1j * med.ks * psi


def disc_curve(R: float = 1.0, center=(0.0, 0.0), n_nodes: int = 64) -> BoundaryCurve:
    return BoundaryCurve(circle_sampler(R, center), n_nodes)
