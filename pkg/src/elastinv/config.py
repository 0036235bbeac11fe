"""Experiment configuration: an INI file with one section per component.

Example::

    [experiment]
    channel = P
    noise_level = 0.03
    seed = 0
    obs_aperture = gamma1
    inc_aperture = gamma1

    [obstacle]
    kind = kite
    center = -2.0, 3.0

Any key left out takes its default.  ``canonical()`` always writes every
key in a fixed order, so parse/serialize is idempotent on its output.
"""
from __future__ import annotations

import configparser
import hashlib
import io
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .dataset import check_channel
from .forward import Medium
from .geometry import DEFAULT_CENTER, DEFAULT_R_MAX, DEFAULT_SMOOTHING, PRESETS, ShapeState

DEFAULT_SPACING = math.pi / 32
TWO_PI = 2 * math.pi

OBS_PRESETS = {
    "gamma1": ((0.0, TWO_PI),),
    "gamma2": ((0.0, math.pi),),
    "gamma3": ((0.0, math.pi / 2),),
    "gamma4": ((0.0, math.pi / 2), (math.pi, 1.5 * math.pi)),
    "gamma5": ((0.0, math.pi / 4), (math.pi, 1.25 * math.pi)),
}
INC_PRESETS = {
    "gamma1": (math.pi / 3,),
    "gamma2": tuple(k * math.pi / 8 for k in range(5)),
}


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


def arc_directions(arcs, spacing: float = DEFAULT_SPACING, count: int | None = None) -> np.ndarray:
    """Equally spaced directions on a union of arcs.

    A full circle is sampled without repeating its endpoint; a proper arc
    includes both ends.  ``count`` overrides the spacing and is shared
    between arcs in proportion to their lengths.
    """
    arcs = [(float(a), float(b)) for a, b in arcs]
    if not arcs:
        raise ConfigError("aperture has no arcs")
    lengths = [b - a for a, b in arcs]
    if any(L <= 0 or L > TWO_PI + 1e-12 for L in lengths):
        raise ConfigError(f"arcs must have length in (0, 2pi]: {arcs}")
    closed = [L >= TWO_PI - 1e-12 for L in lengths]
    if count is None:
        if not spacing > 0:
            raise ConfigError("aperture spacing must be positive")
        counts = [int(round(L / spacing)) + (0 if c else 1) for L, c in zip(lengths, closed)]
    else:
        if count < len(arcs):
            raise ConfigError("fewer directions than arcs")
        total = sum(lengths)
        counts = [max(1, int(round(count * L / total))) for L in lengths]
        counts[-1] += count - sum(counts)
    out = []
    for (a, b), n, c in zip(arcs, counts, closed):
        if c:
            out.append(a + (b - a) * np.arange(n) / n)
        elif n == 1:
            out.append(np.array([0.5 * (a + b)]))
        else:
            out.append(np.linspace(a, b, n))
    return np.concatenate(out)


def _floats(text: str) -> list:
    text = text.strip()
    if not text:
        return []
    try:
        return [float(_eval_angle(t)) for t in text.replace(";", ",").split(",")]
    except ValueError as exc:
        raise ConfigError(f"cannot parse number list {text!r}") from exc


def _eval_angle(token: str) -> float:
    """Plain float, optionally written with ``pi`` (e.g. ``3pi/2``, ``pi/4``)."""
    t = token.strip().replace(" ", "")
    if "pi" not in t:
        return float(t)
    num, _, den = t.partition("/")
    coef = num.replace("*", "").replace("pi", "")
    coef = 1.0 if coef in ("", "+") else -1.0 if coef == "-" else float(coef)
    return coef * math.pi / (float(den) if den else 1.0)


@dataclass(frozen=True)
class ObsAperture:
    """Named preset or explicit arcs; ``count`` fixes the number of directions."""

    name: str = "gamma1"
    arcs: tuple = ()
    count: int | None = None
    spacing: float = DEFAULT_SPACING

    def __post_init__(self):
        if self.name != "custom" and self.name not in OBS_PRESETS:
            raise ConfigError(f"unknown observation aperture {self.name!r}")
        if self.name == "custom" and not self.arcs:
            raise ConfigError("custom observation aperture needs arcs")

    @property
    def resolved_arcs(self):
        return OBS_PRESETS[self.name] if self.name != "custom" else self.arcs

    def directions(self) -> np.ndarray:
        return arc_directions(self.resolved_arcs, self.spacing, self.count)

    @classmethod
    def parse(cls, text: str, count=None, spacing=DEFAULT_SPACING):
        text = text.strip()
        if text in OBS_PRESETS:
            return cls(text, (), count, spacing)
        arcs = []
        for part in text.split(";"):
            lo, sep, hi = part.partition(":")
            if not sep:
                raise ConfigError(f"arc {part!r} must be written lo:hi")
            arcs.append((_eval_angle(lo), _eval_angle(hi)))
        return cls("custom", tuple(arcs), count, spacing)

    def text(self) -> str:
        if self.name != "custom":
            return self.name
        return "; ".join(f"{a!r}:{b!r}" for a, b in self.arcs)


@dataclass(frozen=True)
class IncAperture:
    name: str = "gamma1"
    angles: tuple = ()

    def __post_init__(self):
        if self.name != "custom" and self.name not in INC_PRESETS:
            raise ConfigError(f"unknown incident aperture {self.name!r}")
        if self.name == "custom" and not self.angles:
            raise ConfigError("custom incident aperture needs at least one angle")

    def directions(self) -> np.ndarray:
        return np.array(INC_PRESETS[self.name] if self.name != "custom" else self.angles, dtype=float)

    @classmethod
    def parse(cls, text: str):
        text = text.strip()
        if text in INC_PRESETS:
            return cls(text)
        return cls("custom", tuple(_floats(text)))

    def text(self) -> str:
        return self.name if self.name != "custom" else ", ".join(repr(a) for a in self.angles)


@dataclass(frozen=True)
class Obstacle:
    """Preset curve around ``center``, or a starlike shape given by coefficients."""

    kind: str = "kite"
    center: tuple = DEFAULT_CENTER
    radius: float = 1.0
    a0: float = 0.0
    a: tuple = ()
    b: tuple = ()

    def __post_init__(self):
        if self.kind not in PRESETS + ("starlike",):
            raise ConfigError(f"unknown obstacle kind {self.kind!r}")
        if self.kind == "starlike" and len(self.a) != len(self.b):
            raise ConfigError("starlike obstacle needs equally many a and b coefficients")

    def shape(self, s: float = DEFAULT_SMOOTHING, r_max: float = DEFAULT_R_MAX) -> ShapeState:
        return ShapeState(self.a0, np.array(self.a, dtype=float), np.array(self.b, dtype=float),
                          np.array(self.center, dtype=float), s, r_max)


@dataclass(frozen=True)
class ESMSettings:
    box: tuple = (-5.0, 5.0, -5.0, 5.0)
    step: float = 0.1
    radius: float = 1.0
    eps: float = 1e-5
    n_dirs: int = 64


@dataclass(frozen=True)
class EnKFSettings:
    J: int = 500
    M: int = 6
    s: float = DEFAULT_SMOOTHING
    n_iter: int = 30
    mode: str = "blocked"
    perturb: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    medium: Medium = field(default_factory=Medium)
    obstacle: Obstacle = field(default_factory=Obstacle)
    channel: str = "P"
    obs_aperture: ObsAperture = field(default_factory=ObsAperture)
    inc_aperture: IncAperture = field(default_factory=IncAperture)
    noise_level: float = 0.03
    data_nodes: int = 128
    inversion_nodes: int = 64
    esm: ESMSettings = field(default_factory=ESMSettings)
    enkf: EnKFSettings = field(default_factory=EnKFSettings)
    seed: int = 0

    def __post_init__(self):
        try:
            object.__setattr__(self, "channel", check_channel(self.channel))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.data_nodes <= self.inversion_nodes:
            raise ConfigError("data_nodes must exceed inversion_nodes (finer data mesh)")
        if self.inversion_nodes < 8 or self.inversion_nodes % 2 or self.data_nodes % 2:
            raise ConfigError("mesh sizes must be even and at least 8")
        if not 0 <= self.noise_level < 1:
            raise ConfigError("noise_level must lie in [0, 1)")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        e = self.enkf
        if e.J < 2 or e.M < 0 or e.n_iter < 0 or e.mode not in ("joint", "blocked"):
            raise ConfigError(f"invalid enkf settings {e}")
        x0, x1, y0, y1 = self.esm.box
        if not (x1 > x0 and y1 > y0 and self.esm.step > 0):
            raise ConfigError("invalid esm sampling box or step")
        if self.esm.n_dirs < 32 or self.esm.n_dirs % 2 or self.esm.eps <= 0 or self.esm.radius <= 0:
            raise ConfigError("invalid esm settings")

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=int(seed))

    # serialization

    def canonical(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str  # keep J and M upper case; parsing is case-insensitive
        m, o, e, k = self.medium, self.obstacle, self.esm, self.enkf
        cp["experiment"] = {
            "channel": self.channel,
            "noise_level": repr(float(self.noise_level)),
            "seed": str(self.seed),
            "obs_aperture": self.obs_aperture.text(),
            "obs_count": "" if self.obs_aperture.count is None else str(self.obs_aperture.count),
            "obs_spacing": repr(float(self.obs_aperture.spacing)),
            "inc_aperture": self.inc_aperture.text(),
        }
        cp["medium"] = {"omega": repr(float(m.omega)), "lambda": repr(float(m.lam)), "mu": repr(float(m.mu))}
        cp["obstacle"] = {
            "kind": o.kind,
            "center": _join(o.center),
            "radius": repr(float(o.radius)),
            "a0": repr(float(o.a0)),
            "a": _join(o.a),
            "b": _join(o.b),
        }
        cp["meshes"] = {"data_nodes": str(self.data_nodes), "inversion_nodes": str(self.inversion_nodes)}
        cp["esm"] = {"box": _join(e.box), "step": repr(float(e.step)), "radius": repr(float(e.radius)),
                     "eps": repr(float(e.eps)), "n_dirs": str(e.n_dirs)}
        cp["enkf"] = {"J": str(k.J), "M": str(k.M), "s": repr(float(k.s)), "n_iter": str(k.n_iter),
                      "mode": k.mode, "perturb": "true" if k.perturb else "false"}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def digest(self) -> str:
        """Hash of everything except the seed; names the run directory together with the seed."""
        return hashlib.sha256(replace(self, seed=0).canonical().encode()).hexdigest()[:12]

    def run_name(self) -> str:
        return f"{self.digest()}-s{self.seed}"

    @classmethod
    def parse(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser(interpolation=None)
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        known = {"experiment", "medium", "obstacle", "meshes", "esm", "enkf"}
        extra = set(cp.sections()) - known
        if extra:
            raise ConfigError(f"unknown config sections {sorted(extra)}")
        g = lambda sec, key, default: cp.get(sec, key, fallback=default) if cp.has_section(sec) else default
        try:
            ex = "experiment"
            count = g(ex, "obs_count", "").strip()
            obs = ObsAperture.parse(g(ex, "obs_aperture", "gamma1"), int(count) if count else None,
                                    _eval_angle(g(ex, "obs_spacing", repr(DEFAULT_SPACING))))
            inc = IncAperture.parse(g(ex, "inc_aperture", "gamma1"))
            d = Medium()
            med = Medium(float(g("medium", "omega", d.omega)), float(g("medium", "lambda", d.lam)),
                         float(g("medium", "mu", d.mu)))
            od = Obstacle()
            center = _floats(g("obstacle", "center", _join(od.center)))
            if len(center) != 2:
                raise ConfigError("obstacle center needs two coordinates")
            obst = Obstacle(g("obstacle", "kind", od.kind).strip().lower(), tuple(center),
                            float(g("obstacle", "radius", od.radius)), float(g("obstacle", "a0", od.a0)),
                            tuple(_floats(g("obstacle", "a", ""))), tuple(_floats(g("obstacle", "b", ""))))
            es = ESMSettings()
            box = tuple(_floats(g("esm", "box", _join(es.box))))
            if len(box) != 4:
                raise ConfigError("esm box needs x0, x1, y0, y1")
            esm = ESMSettings(box, float(g("esm", "step", es.step)), float(g("esm", "radius", es.radius)),
                              float(g("esm", "eps", es.eps)), int(g("esm", "n_dirs", es.n_dirs)))
            ek = EnKFSettings()
            perturb = g("enkf", "perturb", "true").strip().lower()
            if perturb not in ("true", "false", "1", "0", "yes", "no", "on", "off"):
                raise ConfigError(f"perturb must be a boolean, got {perturb!r}")
            enkf = EnKFSettings(int(g("enkf", "J", ek.J)), int(g("enkf", "M", ek.M)), float(g("enkf", "s", ek.s)),
                                int(g("enkf", "n_iter", ek.n_iter)), g("enkf", "mode", ek.mode).strip(),
                                perturb in ("true", "1", "yes", "on"))
            return cls(med, obst, g(ex, "channel", "P").strip(), obs, inc, float(g(ex, "noise_level", 0.03)),
                       int(g("meshes", "data_nodes", 128)), int(g("meshes", "inversion_nodes", 64)), esm, enkf,
                       int(g(ex, "seed", 0)))
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.parse(text)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        for key in ("medium", "obstacle", "obs_aperture", "inc_aperture", "esm", "enkf"):
            out[key] = asdict(out[key])
        return out


def _join(vals) -> str:
    return ", ".join(repr(float(v)) for v in vals)
