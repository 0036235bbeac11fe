"""Far-field measurement matrices and their JSON serialization."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .forward import ElasticScatterer, IncidentWave, Medium
from .geometry import BoundaryCurve

CHANNELS = ("P", "S", "FULL")


def check_channel(channel: str) -> str:
    ch = str(channel).upper()
    if ch not in CHANNELS:
        raise ValueError(f"channel must be one of {CHANNELS}, got {channel!r}")
    return ch


@dataclass
class FarFieldData:
    """Far-field samples indexed by (observation direction, incident direction).

    For the FULL channel ``values`` stacks the compressional block over the
    shear block, so it has 2 * len(obs_angles) rows.
    """

    channel: str
    obs_angles: np.ndarray
    inc_angles: np.ndarray
    values: np.ndarray
    medium: Medium = field(default_factory=Medium)
    noise_level: float = 0.0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.channel = check_channel(self.channel)
        self.obs_angles = np.atleast_1d(np.asarray(self.obs_angles, dtype=float))
        self.inc_angles = np.atleast_1d(np.asarray(self.inc_angles, dtype=float))
        self.values = np.asarray(self.values, dtype=complex)
        rows = self.obs_angles.size * (2 if self.channel == "FULL" else 1)
        if self.values.shape != (rows, self.inc_angles.size):
            raise ValueError(
                f"{self.channel} data needs shape {(rows, self.inc_angles.size)}, got {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("far-field data contain non-finite entries")

    @property
    def n_obs(self) -> int:
        return self.obs_angles.size

    @property
    def n_inc(self) -> int:
        return self.inc_angles.size

    def blocks(self):
        """(P block, S block) for FULL data."""
        if self.channel != "FULL":
            raise ValueError("blocks() is only defined for FULL data")
        return self.values[: self.n_obs], self.values[self.n_obs :]

    def with_values(self, values, noise_level=None) -> "FarFieldData":
        return FarFieldData(
            self.channel,
            self.obs_angles,
            self.inc_angles,
            values,
            self.medium,
            self.noise_level if noise_level is None else noise_level,
            dict(self.extra),
        )

    def sha256(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.values).tobytes()).hexdigest()

    def to_dict(self) -> dict:
        out = {
            "channel": self.channel,
            "obs_dirs": self.obs_angles.tolist(),
            "inc_dirs": self.inc_angles.tolist(),
            "re": self.values.real.tolist(),
            "im": self.values.imag.tolist(),
            "medium": {"omega": self.medium.omega, "lambda": self.medium.lam, "mu": self.medium.mu},
            "noise_level": self.noise_level,
        }
        out.update(self.extra)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "FarFieldData":
        known = {"channel", "obs_dirs", "inc_dirs", "re", "im", "medium", "noise_level"}
        med = d.get("medium", {})
        values = np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)
        return cls(
            d["channel"],
            d["obs_dirs"],
            d["inc_dirs"],
            values.reshape(len(d["re"]), -1),
            Medium(med.get("omega", np.pi), med.get("lambda", 2.0), med.get("mu", 1.0)),
            float(d.get("noise_level", 0.0)),
            {k: v for k, v in d.items() if k not in known},
        )

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict()))
        return path

    @classmethod
    def load(cls, path) -> "FarFieldData":
        return cls.from_dict(json.loads(Path(path).read_text()))


def simulate(curve: BoundaryCurve, med: Medium, inc_angles, obs_angles, channel: str,
             alpha=(1.0, 0.0)) -> np.ndarray:
    """Far-field matrix of one obstacle for plane waves from each incident angle."""
    channel = check_channel(channel)
    waves = [IncidentWave(float(a), *alpha) for a in np.atleast_1d(inc_angles)]
    up, us = ElasticScatterer(curve, med).solve(waves).potentials(obs_angles)
    up = 1j * med.kp * up
    us = 1j * med.ks * us
    if channel == "P":
        return up
    if channel == "S":
        return us
    return np.vstack([up, us])


def simulate_data(curve: BoundaryCurve, med: Medium, inc_angles, obs_angles, channel: str) -> FarFieldData:
    vals = simulate(curve, med, inc_angles, obs_angles, channel)
    return FarFieldData(channel, obs_angles, inc_angles, vals, med)
