"""Closed parametric boundaries, starlike Fourier shapes and the Hausdorff distance."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

DEFAULT_CENTER = (-2.0, 3.0)
DEFAULT_SMOOTHING = 1.2
DEFAULT_R_MAX = 10.0

PRESETS = ("kite", "peanut", "pear", "circle")

# sampler(theta) -> (x, dx, ddx), each of shape (len(theta), 2)
Sampler = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]]


class ShapeError(ValueError):
    """Shape parameters that do not describe an admissible boundary."""


def parameter_nodes(n_nodes: int) -> np.ndarray:
    """theta_k = 2 pi k / n for k = 1..n."""
    return 2.0 * np.pi * np.arange(1, n_nodes + 1) / n_nodes


@dataclass(frozen=True)
class BoundaryCurve:
    """A closed, counterclockwise C^2 curve sampled at equidistant parameter nodes.

    ``points``, ``deriv`` and ``deriv2`` hold x(theta_k), x'(theta_k) and
    x''(theta_k).  Normals point outward, tangents follow the orientation,
    with tau = (-nu_2, nu_1).
    """

    sampler: Sampler = field(repr=False)
    n_nodes: int
    nodes: np.ndarray = field(init=False, repr=False)
    points: np.ndarray = field(init=False, repr=False)
    deriv: np.ndarray = field(init=False, repr=False)
    deriv2: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_nodes <= 0 or self.n_nodes % 2:
            raise ValueError(f"n_nodes must be a positive even integer, got {self.n_nodes}")
        theta = parameter_nodes(self.n_nodes)
        x, dx, ddx = self.sampler(theta)
        if np.any(np.hypot(dx[:, 0], dx[:, 1]) == 0.0):
            raise ShapeError("degenerate parameterization: x'(theta) vanishes at a node")
        for name, val in (("nodes", theta), ("points", x), ("deriv", dx), ("deriv2", ddx)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def speed(self) -> np.ndarray:
        """|x'(theta_k)|, the Jacobian of the parameterization."""
        return np.hypot(self.deriv[:, 0], self.deriv[:, 1])

    @property
    def tangents(self) -> np.ndarray:
        return self.deriv / self.speed[:, None]

    @property
    def normals(self) -> np.ndarray:
        t = self.tangents
        return np.column_stack([t[:, 1], -t[:, 0]])

    def with_nodes(self, n_nodes: int) -> "BoundaryCurve":
        return BoundaryCurve(self.sampler, n_nodes)

    def sample(self, n: int) -> np.ndarray:
        """n boundary points at equidistant parameter values (for plotting/scoring)."""
        return self.sampler(parameter_nodes(n))[0]

    def translated(self, shift) -> "BoundaryCurve":
        shift = np.asarray(shift, dtype=float)
        base = self.sampler

        def moved(theta):
            x, dx, ddx = base(theta)
            return x + shift, dx, ddx

        return BoundaryCurve(moved, self.n_nodes)


def radial_sampler(radius: Callable, center) -> Sampler:
    """Sampler for x = r(theta) (cos theta, sin theta) + center.

    ``radius(theta)`` must return (r, r', r'').
    """
    center = np.asarray(center, dtype=float)

    def sampler(theta):
        theta = np.asarray(theta, dtype=float)
        r, dr, ddr = radius(theta)
        e = np.column_stack([np.cos(theta), np.sin(theta)])
        et = np.column_stack([-np.sin(theta), np.cos(theta)])
        x = r[:, None] * e + center
        dx = dr[:, None] * e + r[:, None] * et
        ddx = (ddr - r)[:, None] * e + 2.0 * dr[:, None] * et
        return x, dx, ddx

    return sampler


def circle_sampler(radius: float = 1.0, center=(0.0, 0.0)) -> Sampler:
    def rad(theta):
        one = np.full_like(theta, radius)
        return one, np.zeros_like(theta), np.zeros_like(theta)

    return radial_sampler(rad, center)


def _kite(center):
    c = np.asarray(center, dtype=float)

    def sampler(theta):
        theta = np.asarray(theta, dtype=float)
        ct, st = np.cos(theta), np.sin(theta)
        c2, s2 = np.cos(2 * theta), np.sin(2 * theta)
        x = np.column_stack([ct + 0.65 * c2 - 0.65, 1.5 * st]) + c
        dx = np.column_stack([-st - 1.3 * s2, 1.5 * ct])
        ddx = np.column_stack([-ct - 2.6 * c2, -1.5 * st])
        return x, dx, ddx

    return sampler


def _peanut_radius(theta):
    f = 2.5 + 1.5 * np.cos(2 * theta)
    df = -3.0 * np.sin(2 * theta)
    ddf = -6.0 * np.cos(2 * theta)
    sf = np.sqrt(f)
    r = 0.4 * sf
    dr = 0.4 * df / (2 * sf)
    ddr = 0.4 * (ddf / (2 * sf) - df * df / (4 * f * sf))
    return r, dr, ddr


def _pear_radius(theta):
    return (5 + np.sin(3 * theta)) / 6, 0.5 * np.cos(3 * theta), -1.5 * np.sin(3 * theta)


def preset_sampler(kind: str, center=DEFAULT_CENTER) -> Sampler:
    if kind == "kite":
        return _kite(center)
    if kind == "peanut":
        return radial_sampler(_peanut_radius, center)
    if kind == "pear":
        return radial_sampler(_pear_radius, center)
    if kind == "circle":
        return circle_sampler(1.0, center)
    raise ValueError(f"unknown preset {kind!r}; expected one of {PRESETS}")


def preset_boundary(kind: str, theta, center=DEFAULT_CENTER) -> np.ndarray:
    """Point(s) of a preset obstacle boundary at parameter ``theta``."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    pts = preset_sampler(kind, center)(theta)[0]
    return pts[0] if pts.shape[0] == 1 else pts


def preset_curve(kind: str, n_nodes: int, center=DEFAULT_CENTER) -> BoundaryCurve:
    return BoundaryCurve(preset_sampler(kind, center), n_nodes)


@dataclass(frozen=True)
class ShapeState:
    """Starlike shape: log-radius Fourier coefficients plus center.

    The boundary is exp(p(theta)) (cos theta, sin theta) + z with
    p = a0/sqrt(2 pi) + sum_m (a_m cos m theta + b_m sin m theta) / (m^s sqrt(pi)).
    """

    a0: float
    a: np.ndarray
    b: np.ndarray
    z: np.ndarray
    s: float = DEFAULT_SMOOTHING
    r_max: float = DEFAULT_R_MAX

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).ravel()
        b = np.asarray(self.b, dtype=float).ravel()
        z = np.asarray(self.z, dtype=float).ravel()
        if a.size != b.size or a.size < 1:
            raise ShapeError("need M >= 1 cosine and sine coefficients of equal count")
        if z.size != 2:
            raise ShapeError("center must have two components")
        if not self.s > 0:
            raise ShapeError("smoothing exponent s must be positive")
        object.__setattr__(self, "a0", float(self.a0))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "z", z)

    @property
    def M(self) -> int:
        return self.a.size

    @property
    def dim(self) -> int:
        return 2 * self.M + 3

    def to_vector(self) -> np.ndarray:
        """xi = (a0, a_1..a_M, b_1..b_M, z1, z2)."""
        return np.concatenate([[self.a0], self.a, self.b, self.z])

    @classmethod
    def from_vector(cls, xi, s: float = DEFAULT_SMOOTHING, r_max: float = DEFAULT_R_MAX):
        xi = np.asarray(xi, dtype=float).ravel()
        if xi.size < 5 or (xi.size - 3) % 2:
            raise ShapeError(f"state vector length {xi.size} is not 2M+3")
        M = (xi.size - 3) // 2
        return cls(xi[0], xi[1 : M + 1], xi[M + 1 : 2 * M + 1], xi[2 * M + 1 :], s, r_max)

    def log_radius(self, theta):
        """(p, p', p'') at theta."""
        theta = np.asarray(theta, dtype=float)
        m = np.arange(1, self.M + 1)
        wa = self.a / (m**self.s * math.sqrt(math.pi))
        wb = self.b / (m**self.s * math.sqrt(math.pi))
        mt = np.outer(theta, m)
        c, s_ = np.cos(mt), np.sin(mt)
        p = self.a0 / math.sqrt(2 * math.pi) + c @ wa + s_ @ wb
        dp = s_ @ (-m * wa) + c @ (m * wb)
        ddp = -(c @ (m * m * wa) + s_ @ (m * m * wb))
        return p, dp, ddp

    def radius(self, theta):
        p, dp, ddp = self.log_radius(theta)
        r = np.exp(p)
        return r, r * dp, r * (ddp + dp * dp)


def starlike_sampler(shape: ShapeState) -> Sampler:
    return radial_sampler(shape.radius, shape.z)


def starlike_boundary(shape: ShapeState, n_nodes: int = 64) -> BoundaryCurve:
    """Boundary of a starlike shape; raises ShapeError if r >= r_max at a node."""
    r = shape.radius(parameter_nodes(n_nodes))[0]
    if not np.all(np.isfinite(r)) or np.max(r) >= shape.r_max:
        raise ShapeError(f"radius {np.max(r):.3g} reaches r_max={shape.r_max}")
    return BoundaryCurve(starlike_sampler(shape), n_nodes)


def fit_starlike(points, center, M: int, s: float = DEFAULT_SMOOTHING, n_fit: int = 1024) -> ShapeState:
    """Least-squares projection of ln r(theta) of a starlike point cloud onto the shape basis.

    ``points`` must be ordered counterclockwise around ``center`` and
    starlike with respect to it.
    """
    pts = np.asarray(points, dtype=float) - np.asarray(center, dtype=float)
    ang = np.unwrap(np.arctan2(pts[:, 1], pts[:, 0]))
    rad = np.hypot(pts[:, 0], pts[:, 1])
    if np.any(np.diff(ang) <= 0):
        raise ShapeError("points are not starlike with respect to the given center")
    ang0 = ang[0]
    per_ang = np.concatenate([ang - ang0, [2 * np.pi]])
    per_rad = np.concatenate([np.log(rad), [np.log(rad[0])]])
    grid = 2 * np.pi * np.arange(n_fit) / n_fit
    logr = np.interp(grid, per_ang, per_rad)
    theta = grid + ang0
    m = np.arange(1, M + 1)
    a0 = math.sqrt(2 * math.pi) * logr.mean()
    a = math.sqrt(math.pi) * m**s * (2.0 / n_fit) * (np.cos(np.outer(m, theta)) @ logr)
    b = math.sqrt(math.pi) * m**s * (2.0 / n_fit) * (np.sin(np.outer(m, theta)) @ logr)
    return ShapeState(a0, a, b, center, s)


def hausdorff(A, B, chunk: int = 2048) -> float:
    """Discrete Hausdorff distance between two finite point sets in the plane."""
    A = np.asarray(A, dtype=float).reshape(-1, 2)
    B = np.asarray(B, dtype=float).reshape(-1, 2)
    if A.shape[0] == 0 or B.shape[0] == 0:
        raise ValueError("Hausdorff distance of an empty point set is undefined")
    min_ab = np.empty(A.shape[0])
    min_ba = np.full(B.shape[0], np.inf)
    for lo in range(0, A.shape[0], chunk):
        blk = A[lo : lo + chunk]
        d2 = ((blk[:, None, :] - B[None, :, :]) ** 2).sum(axis=-1)
        min_ab[lo : lo + chunk] = d2.min(axis=1)
        np.minimum(min_ba, d2.min(axis=0), out=min_ba)
    return float(math.sqrt(max(min_ab.max(), min_ba.max())))


def write_points_csv(path, points) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y"])
        for x, y in np.asarray(points, dtype=float):
            w.writerow([repr(float(x)), repr(float(y))])
    return path


def read_points_csv(path) -> np.ndarray:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(x), float(y)] for x, y in rows[1:]])
