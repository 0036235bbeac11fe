"""Synthetic data generation and the two-step reconstruction pipeline."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .dataset import FarFieldData, simulate
from .enkf import EnKFConfig, InversionError, ObservationSpec, Scene, run_inversion
from .esm import ESMConfig, IndicatorGrid, scan
from .forward import ScatteringSolverError
from .geometry import BoundaryCurve, preset_curve, starlike_boundary, write_points_csv, circle_sampler

log = logging.getLogger(__name__)

_NOISE_STREAM = 0x6E6F6973  # keeps the noise draw independent of the EnKF streams
TRUTH_SAMPLES = 512


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it and ``__cause__`` holds the original error."""

    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"{stage} stage failed: {exc}")
        self.stage = stage


def obstacle_curve(cfg: ExperimentConfig, n_nodes: int) -> BoundaryCurve:
    o = cfg.obstacle
    if o.kind == "starlike":
        return starlike_boundary(o.shape(cfg.enkf.s), n_nodes)
    if o.kind == "circle":
        return BoundaryCurve(circle_sampler(o.radius, o.center), n_nodes)
    return preset_curve(o.kind, n_nodes, o.center)


def truth_points(cfg: ExperimentConfig) -> np.ndarray:
    return obstacle_curve(cfg, cfg.data_nodes).sample(TRUTH_SAMPLES)


def add_noise(values, level: float, rng: np.random.Generator) -> np.ndarray:
    """Complex Gaussian noise rescaled to exactly ``level`` relative Frobenius norm."""
    values = np.asarray(values, dtype=complex)
    if level == 0:
        return values.copy()
    noise = rng.standard_normal(values.shape) + 1j * rng.standard_normal(values.shape)
    noise *= level * np.linalg.norm(values) / np.linalg.norm(noise)
    return values + noise


def generate_data(cfg: ExperimentConfig):
    """(noisy, clean) far-field data on the fine data mesh."""
    curve = obstacle_curve(cfg, cfg.data_nodes)
    obs = cfg.obs_aperture.directions()
    inc = cfg.inc_aperture.directions()
    cols = []
    for j, d in enumerate(inc):
        try:
            cols.append(simulate(curve, cfg.medium, [d], obs, cfg.channel)[:, 0])
        except ScatteringSolverError as exc:
            raise ScatteringSolverError(f"incident direction {j} (angle {d:.6g}): {exc}") from exc
    clean_vals = np.column_stack(cols)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _NOISE_STREAM]))
    noisy_vals = add_noise(clean_vals, cfg.noise_level, rng)
    realized = float(np.linalg.norm(noisy_vals - clean_vals) / np.linalg.norm(clean_vals))
    clean = FarFieldData(cfg.channel, obs, inc, clean_vals, cfg.medium, 0.0)
    sha = clean.sha256()
    clean.extra["sha256"] = sha
    noisy = FarFieldData(cfg.channel, obs, inc, noisy_vals, cfg.medium, cfg.noise_level,
                         {"sha256": sha, "realized_noise": realized, "seed": cfg.seed})
    return noisy, clean


def locate(data: FarFieldData, cfg: ExperimentConfig) -> IndicatorGrid:
    e = cfg.esm
    box = ((e.box[0], e.box[1]), (e.box[2], e.box[3]))
    return scan(data, box, e.step, ESMConfig(e.radius, e.eps, e.n_dirs))


def invert(noisy: FarFieldData, cfg: ExperimentConfig, z_star, clean: FarFieldData | None = None,
           truth=None, threads: int = 1):
    obs = ObservationSpec.from_data(noisy, clean, cfg.noise_level)
    scene = Scene.from_data(noisy, cfg.inversion_nodes, cfg.enkf.s)
    k = cfg.enkf
    ecfg = EnKFConfig(k.J, k.M, k.s, k.n_iter, k.mode, k.perturb, cfg.seed, cfg.inversion_nodes)
    return run_inversion(obs, scene, z_star, ecfg, truth=truth, threads=threads), obs


@dataclass
class RunPaths:
    root: Path

    def __post_init__(self):
        self.root = Path(self.root)

    data = property(lambda self: self.root / "data.json")
    clean = property(lambda self: self.root / "clean.json")
    grid_csv = property(lambda self: self.root / "indicator.csv")
    grid_json = property(lambda self: self.root / "indicator.json")
    trajectory = property(lambda self: self.root / "trajectory.jsonl")
    boundary = property(lambda self: self.root / "boundary.csv")
    report = property(lambda self: self.root / "report.json")
    config = property(lambda self: self.root / "config.ini")

    def mkdir(self):
        self.root.mkdir(parents=True, exist_ok=True)
        return self


def run_dir(cfg: ExperimentConfig, out) -> RunPaths:
    return RunPaths(Path(out) / cfg.run_name())


def write_inversion(result, paths: RunPaths):
    result.write_trajectory(paths.trajectory)
    write_points_csv(paths.boundary, result.boundary())


def run_pipeline(cfg: ExperimentConfig, out, z_star=None, threads: int = 1) -> dict:
    """generate -> locate -> invert on the same noisy data, writing every artifact.

    ``z_star`` bypasses the localisation step.  Artifacts of completed
    stages stay on disk when a later stage fails.
    """
    paths = run_dir(cfg, out).mkdir()
    paths.config.write_text(cfg.canonical())
    try:
        noisy, clean = generate_data(cfg)
    except Exception as exc:
        raise StageError("generate", exc) from exc
    noisy.save(paths.data)
    clean.save(paths.clean)

    report = {"run": cfg.run_name(), "seed": cfg.seed, "sha256": noisy.extra["sha256"],
              "realized_noise": noisy.extra["realized_noise"]}
    if z_star is None:
        try:
            grid = locate(noisy, cfg)
        except Exception as exc:
            raise StageError("locate", exc) from exc
        grid.write(paths.grid_csv, paths.grid_json)
        z_star = grid.argmin
        report.update(indicator_grid=str(paths.grid_csv), z_star_source="esm")
    else:
        report.update(indicator_grid=None, z_star_source="manual")
    z_star = [float(v) for v in z_star]
    report["z_star"] = z_star

    try:
        result, obs = invert(noisy, cfg, z_star, clean, truth_points(cfg), threads)
    except Exception as exc:
        records = getattr(exc, "records", [])
        if records:
            paths.trajectory.write_text("".join(r.to_json() + "\n" for r in records))
            report.update(trajectory=str(paths.trajectory), aborted_at=len(records), last_d_H=records[-1].d_H)
        report["error"] = str(exc)
        _write_report(paths, report)
        raise StageError("invert", exc) from exc
    write_inversion(result, paths)
    report.update(trajectory=str(paths.trajectory), boundary=str(paths.boundary),
                  d_H=result.d_H, final_d_H=result.d_H[-1] if result.d_H else result.records[0].d_H,
                  covariance_source=obs.cov_source, estimate=result.estimate.tolist())
    _write_report(paths, report)
    return report


def _write_report(paths: RunPaths, report: dict):
    paths.report.write_text(json.dumps(report, indent=2, sort_keys=True))
