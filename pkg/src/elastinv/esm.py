"""Extended sampling method: locate an obstacle from (partial) far-field data.

For every sampling point z the far field of a reference disc centered at z
serves as the kernel of a far-field equation over all incident directions
on the circle; the measured data form the right-hand side, restricted to the
observed directions.  The Tikhonov-regularised solution is small when the
obstacle sits inside the disc, so the normalised sum of solution norms over
the incident directions is minimal near the obstacle.

Discrete norms carry quadrature weights (2 pi / N_d per kernel direction,
the observation spacing per measured direction) and, for the FULL channel,
the factors omega/k_p and omega/k_s of the weighted inner product.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .dataset import FarFieldData, check_channel
from .forward import IncidentWave, Medium, disc_farfield_elastic, disc_farfield_scalar, unit

DEFAULT_BOX = ((-5.0, 5.0), (-5.0, 5.0))


@dataclass(frozen=True)
class ESMConfig:
    radius: float = 1.0
    eps: float = 1e-5
    n_dirs: int = 64
    n_trunc: int | None = None

    def __post_init__(self):
        if self.n_dirs < 32 or self.n_dirs % 2:
            raise ValueError("n_dirs must be an even integer >= 32")
        if not (self.radius > 0 and self.eps > 0):
            raise ValueError("radius and eps must be positive")


@dataclass(frozen=True)
class FarFieldOperator:
    """Discretised far-field operator of the reference disc at ``center``."""

    center: np.ndarray
    channel: str
    obs_angles: np.ndarray
    kernel_angles: np.ndarray
    matrix: np.ndarray
    quad_weight: float


def kernel_directions(n_dirs: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(n_dirs) / n_dirs


def observation_weight(obs_angles) -> float:
    """Arc weight of one observation direction (smallest circular spacing)."""
    a = np.sort(np.mod(np.asarray(obs_angles, dtype=float), 2 * np.pi))
    if a.size < 2:
        return 2 * np.pi
    gaps = np.diff(np.concatenate([a, [a[0] + 2 * np.pi]]))
    gaps = gaps[gaps > 1e-12]
    return float(gaps.min())


def assemble_operator(z, channel, obs_angles, n_dirs: int, med: Medium, R: float = 1.0,
                      n_trunc=None) -> FarFieldOperator:
    channel = check_channel(channel)
    z = np.asarray(z, dtype=float)
    obs = np.atleast_1d(np.asarray(obs_angles, dtype=float))
    if obs.size == 0:
        raise ValueError("empty observation aperture")
    dirs = kernel_directions(n_dirs)
    w = 2.0 * np.pi / n_dirs
    if channel in ("P", "S"):
        k = med.kp if channel == "P" else med.ks
        mat = disc_farfield_scalar(R, z, k, dirs[None, :], obs[:, None], n_trunc)
    else:
        mat = np.empty((2 * obs.size, 2 * n_dirs), dtype=complex)
        cp, cs = math.sqrt(med.kp / med.omega), math.sqrt(med.ks / med.omega)
        for j, d in enumerate(dirs):
            up, us = disc_farfield_elastic(R, z, med, IncidentWave(d, 1.0, 0.0), obs, n_trunc)
            mat[: obs.size, j], mat[obs.size :, j] = cp * up, cp * us
            up, us = disc_farfield_elastic(R, z, med, IncidentWave(d, 0.0, 1.0), obs, n_trunc)
            mat[: obs.size, n_dirs + j], mat[obs.size :, n_dirs + j] = cs * up, cs * us
    return FarFieldOperator(z, channel, obs, dirs, w * mat, w)


def tikhonov_solve(A, b, eps: float):
    """argmin ||A g - b||^2 + eps ||g||^2 via the regularised normal equations."""
    A = np.asarray(A)
    b = np.asarray(b)
    if not eps > 0:
        raise ValueError("eps must be positive")
    m, n = A.shape
    if m >= n:
        gram = A.conj().T @ A
        gram[np.diag_indices(n)] += eps
        return sla.cho_solve(sla.cho_factor(gram), A.conj().T @ b)
    # same minimiser through the m x m system (A A^H + eps I) y = b, g = A^H y
    gram = A @ A.conj().T
    gram[np.diag_indices(m)] += eps
    return A.conj().T @ sla.cho_solve(sla.cho_factor(gram), b)


def tikhonov_svd(A, b, eps: float):
    """Same minimiser through SVD filter factors sigma / (sigma^2 + eps)."""
    u, s, vh = np.linalg.svd(np.asarray(A), full_matrices=False)
    f = s / (s * s + eps)
    coef = f[:, None] * (u.conj().T @ np.asarray(b).reshape(len(u), -1))
    g = vh.conj().T @ coef
    return g.reshape((vh.shape[1],) + np.asarray(b).shape[1:])


def far_field_rhs(data: FarFieldData, j: int, channel=None) -> np.ndarray:
    """Right-hand side of the far-field equation for incident index ``j``."""
    if channel is not None and check_channel(channel) != data.channel:
        raise ValueError(f"requested {channel} right-hand side from {data.channel} data")
    col = data.values[:, j]
    if data.channel == "P":
        return col / (1j * data.medium.kp)
    if data.channel == "S":
        return col / (1j * data.medium.ks)
    return col.copy()


def _norm_weights(channel: str, n_obs: int, n_dirs: int, obs_w: float, quad_w: float, med: Medium):
    """sqrt weights turning the discrete problem into a plain Euclidean one."""
    if channel in ("P", "S"):
        return np.full(n_obs, math.sqrt(obs_w)), np.full(n_dirs, math.sqrt(quad_w))
    fp, fs = med.omega / med.kp, med.omega / med.ks
    rows = np.sqrt(obs_w * np.repeat([fp, fs], n_obs))
    cols = np.sqrt(quad_w * np.repeat([fp, fs], n_dirs))
    return rows, cols


def indicator_at(z, data: FarFieldData, cfg: ESMConfig = ESMConfig()) -> float:
    """Sum over incident directions of the norms of the regularised solutions."""
    op = assemble_operator(z, data.channel, data.obs_angles, cfg.n_dirs, data.medium, cfg.radius, cfg.n_trunc)
    rows, cols = _norm_weights(
        data.channel, data.n_obs, cfg.n_dirs, observation_weight(data.obs_angles), op.quad_weight, data.medium
    )
    a = rows[:, None] * op.matrix / cols[None, :]
    total = 0.0
    for j in range(data.n_inc):
        h = tikhonov_solve(a, rows * far_field_rhs(data, j), cfg.eps)
        total += float(np.linalg.norm(h))
    return total


@dataclass
class IndicatorGrid:
    """Normalised indicator on the lattice x[i], y[j]; ``values[i, j]``."""

    x: np.ndarray
    y: np.ndarray
    values: np.ndarray
    raw: np.ndarray
    grid_spec: dict

    @property
    def argmin(self) -> np.ndarray:
        # C-order argmin is the lexicographically smallest (z1, z2) among ties
        i, j = np.unravel_index(int(np.argmin(self.values)), self.values.shape)
        return np.array([self.x[i], self.y[j]])

    @property
    def min_value(self) -> float:
        return float(self.values.min())

    @property
    def points(self) -> np.ndarray:
        xx, yy = np.meshgrid(self.x, self.y, indexing="ij")
        return np.column_stack([xx.ravel(), yy.ravel()])

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["z1", "z2", "value"])
            for (a, b), v in zip(self.points, self.values.ravel()):
                w.writerow([repr(float(a)), repr(float(b)), repr(float(v))])
        return path

    def summary(self) -> dict:
        return {"argmin": self.argmin.tolist(), "min_value": self.min_value, "grid_spec": self.grid_spec}

    def write(self, csv_path, json_path):
        self.to_csv(csv_path)
        Path(json_path).write_text(json.dumps(self.summary(), indent=2))


def lattice(box=DEFAULT_BOX, step: float = 0.1):
    (x0, x1), (y0, y1) = box
    if not step > 0:
        raise ValueError("step must be positive")
    if not (x1 > x0 and y1 > y0):
        raise ValueError("sampling box is degenerate")
    nx = int(math.floor((x1 - x0) / step + 1e-9)) + 1
    ny = int(math.floor((y1 - y0) / step + 1e-9)) + 1
    return x0 + step * np.arange(nx), y0 + step * np.arange(ny)


def _phases(channel: str, pts: np.ndarray, obs: np.ndarray, dirs: np.ndarray, med: Medium):
    """Row and column phase factors relating the operator at z to the centered one."""
    xo, dd = unit(obs), unit(dirs)
    if channel in ("P", "S"):
        k = med.kp if channel == "P" else med.ks
        return np.exp(-1j * k * pts @ xo.T), np.exp(1j * k * pts @ dd.T)
    rp = np.exp(-1j * med.kp * pts @ xo.T)
    rs = np.exp(-1j * med.ks * pts @ xo.T)
    cp = np.exp(1j * med.kp * pts @ dd.T)
    cs = np.exp(1j * med.ks * pts @ dd.T)
    return np.hstack([rp, rs]), np.hstack([cp, cs])


def scan(data: FarFieldData, box=DEFAULT_BOX, step: float = 0.1, cfg: ESMConfig = ESMConfig(),
         chunk: int = 2048) -> IndicatorGrid:
    """Indicator on the sampling lattice; uses one SVD of the centered operator.

    Translating the disc multiplies the kernel by unitary diagonal phases on
    both sides, so the (weighted) operator at z shares the singular values of
    the centered one and only the data need to be rotated.
    """
    xs, ys = lattice(box, step)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    med = data.medium
    op0 = assemble_operator((0.0, 0.0), data.channel, data.obs_angles, cfg.n_dirs, med, cfg.radius, cfg.n_trunc)
    rows, cols = _norm_weights(
        data.channel, data.n_obs, cfg.n_dirs, observation_weight(data.obs_angles), op0.quad_weight, med
    )
    u, s, _ = np.linalg.svd(rows[:, None] * op0.matrix / cols[None, :], full_matrices=False)
    filt = s / (s * s + cfg.eps)
    bt = np.column_stack([rows * far_field_rhs(data, j) for j in range(data.n_inc)])
    raw = np.zeros(pts.shape[0])
    for lo in range(0, pts.shape[0], chunk):
        prow, _ = _phases(data.channel, pts[lo : lo + chunk], data.obs_angles, op0.kernel_angles, med)
        rot = np.conj(prow)
        for j in range(data.n_inc):
            coef = (rot * bt[:, j]) @ np.conj(u)
            raw[lo : lo + chunk] += np.linalg.norm(coef * filt, axis=1)
    vals = raw / raw.max()
    spec = {"box": [list(map(float, b)) for b in box], "step": float(step), "shape": [xs.size, ys.size],
            "radius": cfg.radius, "eps": cfg.eps, "n_dirs": cfg.n_dirs, "channel": data.channel}
    return IndicatorGrid(xs, ys, vals.reshape(xx.shape), raw.reshape(xx.shape), spec)
