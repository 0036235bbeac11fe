"""Ensemble Kalman inversion of starlike shape parameters from far-field data.

The static inverse problem y = G(xi) + eta is cast as a filter on the
trivial dynamics xi -> xi, omega -> G(xi).  Each iteration maps every
particle forward, forms sample covariances with the 1/(J-1) normalisation
and applies the Kalman update with gain Gamma^{xi w} (Gamma^{ww} + C)^{-1}.
Complex data are handled as stacked real and imaginary parts.
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .dataset import FarFieldData, check_channel, simulate
from .forward import Medium, ScatteringSolverError
from .geometry import DEFAULT_R_MAX, DEFAULT_SMOOTHING, ShapeError, ShapeState, hausdorff, starlike_boundary

log = logging.getLogger(__name__)

MAX_INVALID_FRACTION = 0.10
_INIT_TAG, _NOISE_TAG = 0, 1


class InversionError(RuntimeError):
    """An EnKF iteration could not be completed.

    ``records`` holds the diagnostics of the iterations finished before the
    failure (empty when the prior itself could not be built).
    """

    def __init__(self, msg: str, records=None):
        super().__init__(msg)
        self.records = list(records or [])

    @property
    def last_d_H(self):
        return self.records[-1].d_H if self.records else None


@dataclass(frozen=True)
class Scene:
    """Everything the forward map needs besides the shape vector."""

    medium: Medium
    obs_angles: tuple
    inc_angles: tuple
    channel: str
    n_nodes: int = 64
    s: float = DEFAULT_SMOOTHING
    r_max: float = DEFAULT_R_MAX

    @classmethod
    def from_data(cls, data: FarFieldData, n_nodes: int = 64, s: float = DEFAULT_SMOOTHING,
                  r_max: float = DEFAULT_R_MAX) -> "Scene":
        return cls(data.medium, tuple(map(float, data.obs_angles)), tuple(map(float, data.inc_angles)),
                   data.channel, n_nodes, s, r_max)


def stack_complex(values) -> np.ndarray:
    """Row-major flatten, then [Re; Im]: entries k and k + N belong together."""
    c = np.asarray(values, dtype=complex).ravel()
    return np.concatenate([c.real, c.imag])


def unstack_complex(y, shape) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    n = y.size // 2
    return (y[:n] + 1j * y[n:]).reshape(shape)


def forward_map(xi, scene: Scene) -> np.ndarray:
    """Stacked real far-field vector of the starlike shape encoded by ``xi``.

    Raises ShapeError or ScatteringSolverError for inadmissible particles.
    """
    shape = ShapeState.from_vector(xi, scene.s, scene.r_max)
    curve = starlike_boundary(shape, scene.n_nodes)
    vals = simulate(curve, scene.medium, scene.inc_angles, scene.obs_angles, scene.channel)
    return stack_complex(vals)


@dataclass
class ObservationSpec:
    """Stacked real data y with diagonal noise covariance C = diag(c)."""

    y: np.ndarray
    cov_diag: np.ndarray
    shape: tuple
    channel: str
    cov_source: str = "clean"

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.cov_diag = np.broadcast_to(np.asarray(self.cov_diag, dtype=float), self.y.shape).copy()
        if np.any(self.cov_diag <= 0):
            raise ValueError("observation covariance must be positive definite")
        self.channel = check_channel(self.channel)

    @classmethod
    def from_data(cls, noisy: FarFieldData, clean: FarFieldData | None = None, noise_level=None):
        """C = (delta * RMS(y_clean))^2 I; falls back to the noisy RMS without clean data."""
        delta = noisy.noise_level if noise_level is None else noise_level
        ref = clean if clean is not None else noisy
        y = stack_complex(noisy.values)
        rms = float(np.sqrt(np.mean(stack_complex(ref.values) ** 2)))
        var = (delta * rms) ** 2
        if var <= 0:
            # noise-free data: keep the gain well defined with a tiny floor
            var = (1e-8 * rms) ** 2 if rms > 0 else 1e-16
        return cls(y, var, noisy.values.shape, noisy.channel, "clean" if clean is not None else "noisy")


@dataclass
class Ensemble:
    """Particles xi^(j) (rows) with cached predictions omega^(j) = G(xi^(j))."""

    particles: np.ndarray
    cache: np.ndarray | None
    n: int = 0
    fresh: bool = True

    @property
    def J(self) -> int:
        return self.particles.shape[0]

    @property
    def dim(self) -> int:
        return self.particles.shape[1]

    def mean(self) -> np.ndarray:
        return self.particles.mean(axis=0)


@dataclass(frozen=True)
class Stats:
    xi_mean: np.ndarray
    w_mean: np.ndarray
    cov_xx: np.ndarray
    cov_xw: np.ndarray
    cov_ww: np.ndarray
    cov_qw: np.ndarray
    cov_zw: np.ndarray


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator per (seed, purpose, iteration, particle)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, key)]))


class ForwardPool:
    """Evaluates the forward map for many particles, optionally in worker processes.

    Failures are reported per particle as None so results never depend on
    scheduling.
    """

    def __init__(self, scene: Scene, threads: int = 1, fn=None):
        self.scene = scene
        self.fn = fn or forward_map
        self.threads = max(1, int(threads))
        self._pool = ProcessPoolExecutor(self.threads) if self.threads > 1 else None

    def __call__(self, xis) -> list:
        if self._pool is None:
            return [_safe_eval(self.fn, x, self.scene) for x in xis]
        jobs = [(self.fn, x, self.scene) for x in xis]
        return list(self._pool.map(_safe_eval_star, jobs, chunksize=max(1, len(jobs) // (4 * self.threads))))

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _safe_eval(fn, xi, scene):
    try:
        out = fn(xi, scene)
    except (ShapeError, ScatteringSolverError, np.linalg.LinAlgError):
        return None
    return out if np.all(np.isfinite(out)) else None


def _safe_eval_star(args):
    return _safe_eval(*args)


def draw_prior(z_star, M: int, rng: np.random.Generator) -> np.ndarray:
    """a0, a_m, b_m ~ N(0, 1); z_i ~ N(z_i*, 1)."""
    q = rng.standard_normal(2 * M + 1)
    z = np.asarray(z_star, dtype=float) + rng.standard_normal(2)
    return np.concatenate([q, z])


def init_ensemble(z_star, J: int, M: int, seed: int, evaluate, max_redraw: int = 50) -> Ensemble:
    """Prior ensemble around the located center with its cached predictions.

    An inadmissible draw is redrawn from the same particle stream.
    """
    if J < 2:
        raise ValueError("an ensemble needs at least two particles")
    gens = [stream(seed, _INIT_TAG, j) for j in range(J)]
    xis = np.array([draw_prior(z_star, M, g) for g in gens])
    preds = evaluate(list(xis))
    for attempt in range(max_redraw):
        bad = [j for j, p in enumerate(preds) if p is None]
        if not bad:
            break
        for j in bad:
            xis[j] = draw_prior(z_star, M, gens[j])
        for j, p in zip(bad, evaluate([xis[j] for j in bad])):
            preds[j] = p
    else:
        raise InversionError("could not draw admissible prior particles")
    return Ensemble(xis, np.array(preds), 0, True)


def predict(ens: Ensemble) -> Stats:
    """Sample means and (1/(J-1)) covariances of the predicted ensemble."""
    if ens.J < 2:
        raise ValueError("sample covariance needs J >= 2")
    if not ens.fresh or ens.cache is None:
        raise ValueError("ensemble predictions are stale; map the ensemble forward first")
    X, W = ens.particles, ens.cache
    xm, wm = X.mean(axis=0), W.mean(axis=0)
    dx, dw = X - xm, W - wm
    c = 1.0 / (ens.J - 1)
    cov_xw = c * dx.T @ dw
    cov_ww = c * dw.T @ dw
    cov_ww = 0.5 * (cov_ww + cov_ww.T)
    nq = max(ens.dim - 2, 0)  # the last two coordinates are the center z
    return Stats(xm, wm, c * dx.T @ dx, cov_xw, cov_ww, cov_xw[:nq], cov_xw[nq:])


def _innovations(ens: Ensemble, obs: ObservationSpec, perturb: bool, seed: int) -> np.ndarray:
    Y = np.broadcast_to(obs.y, ens.cache.shape).copy()
    if perturb:
        sd = np.sqrt(obs.cov_diag)
        for j in range(ens.J):
            Y[j] += sd * stream(seed, _NOISE_TAG, ens.n, j).standard_normal(obs.y.size)
    return Y - ens.cache


def analysis_update(ens: Ensemble, stats: Stats, obs: ObservationSpec, mode: str = "blocked",
                    perturb: bool = True, seed: int = 0) -> Ensemble:
    """Kalman analysis step; returns particles whose predictions are stale."""
    if mode not in ("joint", "blocked"):
        raise ValueError(f"unknown update mode {mode!r}")
    S = stats.cov_ww + np.diag(obs.cov_diag)
    try:
        fac = sla.cho_factor(S)
    except np.linalg.LinAlgError as exc:
        raise InversionError(f"innovation covariance not SPD at iteration {ens.n}: {exc}") from exc
    D = _innovations(ens, obs, perturb, seed)
    K = sla.cho_solve(fac, D.T)  # (Gamma_ww + C)^{-1} (y_j - G(xi_j)), one column per particle
    if mode == "joint":
        dxi = (stats.cov_xw @ K).T
    else:
        dxi = np.hstack([(stats.cov_qw @ K).T, (stats.cov_zw @ K).T])
    return Ensemble(ens.particles + dxi, ens.cache, ens.n + 1, False)


def map_forward(ens: Ensemble, evaluate):
    """Recompute G for every particle; inadmissible particles keep their previous prediction."""
    preds = evaluate(list(ens.particles))
    cache = ens.cache.copy()
    invalid = 0
    for j, p in enumerate(preds):
        if p is None:
            invalid += 1
        else:
            cache[j] = p
    if invalid > MAX_INVALID_FRACTION * ens.J:
        raise InversionError(f"iteration {ens.n}: {invalid}/{ens.J} particles inadmissible")
    return Ensemble(ens.particles, cache, ens.n, True), invalid


@dataclass(frozen=True)
class EnKFConfig:
    J: int = 500
    M: int = 6
    s: float = DEFAULT_SMOOTHING
    n_iter: int = 30
    mode: str = "blocked"
    perturb: bool = True
    seed: int = 0
    n_nodes: int = 64
    r_max: float = DEFAULT_R_MAX


@dataclass
class IterationRecord:
    n: int
    xi_mean: list
    z: list
    d_H: float | None
    invalid_count: int

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "xi_mean": self.xi_mean, "z": self.z, "d_H": self.d_H,
                           "invalid_count": self.invalid_count})


@dataclass
class InversionResult:
    records: list
    ensemble: Ensemble
    config: EnKFConfig
    history: list = field(default_factory=list, repr=False)

    @property
    def estimate(self) -> np.ndarray:
        return np.asarray(self.records[-1].xi_mean)

    @property
    def shape(self) -> ShapeState:
        return ShapeState.from_vector(self.estimate, self.config.s, self.config.r_max)

    @property
    def d_H(self) -> list:
        return [r.d_H for r in self.records[1:]]

    def boundary(self, n: int = 512) -> np.ndarray:
        return starlike_boundary(self.shape, 64).sample(n)

    def write_trajectory(self, path) -> Path:
        path = Path(path)
        path.write_text("".join(r.to_json() + "\n" for r in self.records))
        return path


def _record(n, ens, cfg, truth, invalid):
    xm = ens.mean()
    dh = None
    if truth is not None:
        try:
            pts = starlike_boundary(ShapeState.from_vector(xm, cfg.s, cfg.r_max), 64).sample(512)
            dh = hausdorff(truth, pts)
        except ShapeError:
            dh = float("inf")
    return IterationRecord(n, xm.tolist(), xm[-2:].tolist(), dh, invalid)


def run_inversion(obs: ObservationSpec, scene: Scene, z_star, cfg: EnKFConfig = EnKFConfig(),
                  truth=None, threads: int = 1, keep_history: bool = False, evaluate=None) -> InversionResult:
    """Iterate prediction + analysis ``cfg.n_iter`` times from a prior centered at ``z_star``.

    ``truth`` is an optional sampled exact boundary used for the Hausdorff trace.
    """
    scene = replace(scene, n_nodes=cfg.n_nodes, s=cfg.s, r_max=cfg.r_max)
    pool = None
    if evaluate is None:
        pool = evaluate = ForwardPool(scene, threads)
    try:
        ens = init_ensemble(z_star, cfg.J, cfg.M, cfg.seed, evaluate)
        records = [_record(0, ens, cfg, truth, 0)]
        history = [ens.particles.copy()] if keep_history else []
        for it in range(cfg.n_iter):
            try:
                stats = predict(ens)
                ens = analysis_update(ens, stats, obs, cfg.mode, cfg.perturb, cfg.seed)
                ens, invalid = map_forward(ens, evaluate)
            except InversionError as exc:
                exc.records = records
                raise
            except Exception as exc:  # surface the iteration index with any numerical failure
                raise InversionError(f"iteration {it + 1} failed: {exc}", records) from exc
            records.append(_record(it + 1, ens, cfg, truth, invalid))
            if keep_history:
                history.append(ens.particles.copy())
            log.debug("iteration %d d_H=%s invalid=%d", it + 1, records[-1].d_H, invalid)
    finally:
        if pool is not None:
            pool.close()
    return InversionResult(records, ens, cfg, history)
