"""Cylindrical Bessel and Hankel functions of integer order, real argument.

Small arguments (x < 8) use the ascending power series for J_n and the
logarithmic series for Y_0 and Y_1.  Larger arguments use Miller's backward
recurrence normalised by ``J_0 + 2 sum J_2k = 1``; Y_0 and Y_1 then follow
from their Neumann series in the even/odd J_k.  Y_n for n >= 2 comes from
forward recurrence, which is stable for Y.

Everything is vectorised over the argument.  ``jy01`` is the fast path used
by the boundary-integral assembly, which only ever needs orders 0 and 1.
"""
from __future__ import annotations

import math

import numpy as np

EULER_GAMMA = 0.57721566490153286060651209
MAX_ORDER = 60
SERIES_CUTOFF = 8.0

_TWO_OVER_PI = 2.0 / math.pi
_RESCALE_AT = 1e250


class BesselDomainError(ValueError):
    """Argument or order outside the supported domain."""


def _check_order(n: int) -> int:
    if int(n) != n:
        raise BesselDomainError(f"integer order required, got {n!r}")
    n = int(n)
    if abs(n) > MAX_ORDER:
        raise BesselDomainError(f"|order| {abs(n)} exceeds cap {MAX_ORDER}")
    return n


def _j_series(order: int, x: np.ndarray) -> np.ndarray:
    half = 0.5 * x
    q = -half * half
    term = half**order / math.factorial(order)
    total = term.copy()
    for m in range(1, 80):
        term = term * q / (m * (m + order))
        total += term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    return total


def _miller_table(nmax: int, x: np.ndarray) -> np.ndarray:
    """Normalised J_0..J_top by backward recurrence, shape (top+1, len(x))."""
    xmax = float(np.max(x))
    top = max(nmax + 30, int(xmax + 12.0 * xmax ** (1.0 / 3.0) + 30))
    top += top % 2
    out = np.zeros((top + 2, x.size))
    out[top] = 1e-30
    for k in range(top, 0, -1):
        out[k - 1] = (2.0 * k / x) * out[k] - out[k + 1]
        if k % 8 == 0:
            big = np.abs(out[k - 1]) > _RESCALE_AT
            if np.any(big):
                out[k - 1 :, big] /= _RESCALE_AT
    norm = out[0] + 2.0 * out[2 : top + 1 : 2].sum(axis=0)
    return out[: top + 1] / norm


def _y01_logseries(x: np.ndarray, j0: np.ndarray, j1: np.ndarray):
    half = 0.5 * x
    q = -half * half
    lg = np.log(half) + EULER_GAMMA
    # Y0: sum_{k>=1} H_k q^k / (k!)^2
    s0 = np.zeros_like(x)
    term = np.ones_like(x)
    harm = 0.0
    # Y1: sum_{k>=0} [psi(k+1) + psi(k+2)] q^k / (k! (k+1)!)
    t1 = np.ones_like(x)
    s1 = (-2.0 * EULER_GAMMA + 1.0) * t1
    for k in range(1, 60):
        harm += 1.0 / k
        term = term * q / (k * k)
        s0 += harm * term
        t1 = t1 * q / (k * (k + 1))
        s1 += (2.0 * (harm - EULER_GAMMA) + 1.0 / (k + 1)) * t1
        if np.all(np.abs(term) * harm <= 1e-17 * np.abs(s0)) and np.all(
            np.abs(t1) <= 1e-18
        ):
            break
    y0 = _TWO_OVER_PI * (lg * j0 - s0)
    y1 = -_TWO_OVER_PI / x + _TWO_OVER_PI * (lg - EULER_GAMMA) * j1 - half * s1 / math.pi
    return y0, y1


def _y01_neumann(x: np.ndarray, tab: np.ndarray):
    lg = np.log(0.5 * x) + EULER_GAMMA
    top = tab.shape[0] - 1
    kk = np.arange(1, top // 2)
    sign = np.where(kk % 2 == 0, 1.0, -1.0)[:, None]
    even = tab[2 * kk]
    odd_diff = tab[2 * kk - 1] - tab[2 * kk + 1]
    y0 = _TWO_OVER_PI * (lg * tab[0] - 2.0 * (sign * even / kk[:, None]).sum(axis=0))
    y1 = _TWO_OVER_PI * (
        lg * tab[1] - tab[0] / x + (sign * odd_diff / kk[:, None]).sum(axis=0)
    )
    return y0, y1


def _jy_table(nmax: int, x: np.ndarray, want_y: bool):
    """J_0..J_nmax (and Y_0..Y_nmax) on a flat positive/zero array."""
    jt = np.empty((nmax + 1, x.size))
    yt = np.empty((nmax + 1, x.size)) if want_y else None
    small = x < SERIES_CUTOFF
    if np.any(small):
        xs = x[small]
        for n in range(nmax + 1):
            jt[n, small] = _j_series(n, xs)
        if want_y:
            j1 = jt[1, small] if nmax >= 1 else _j_series(1, xs)
            y0, y1 = _y01_logseries(xs, jt[0, small], j1)
            _fill_y(yt, small, xs, y0, y1, nmax)
    large = ~small
    if np.any(large):
        xl = x[large]
        tab = _miller_table(nmax, xl)
        jt[:, large] = tab[: nmax + 1]
        if want_y:
            y0, y1 = _y01_neumann(xl, tab)
            _fill_y(yt, large, xl, y0, y1, nmax)
    return jt, yt


def _fill_y(yt, mask, x, y0, y1, nmax):
    yt[0, mask] = y0
    if nmax == 0:
        return
    yt[1, mask] = y1
    prev, cur = y0, y1
    for n in range(1, nmax):
        prev, cur = cur, (2.0 * n / x) * cur - prev
        yt[n + 1, mask] = cur


def _as_positive(x, allow_zero: bool) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    bad = arr < 0 if allow_zero else arr <= 0
    if np.any(bad) or not np.all(np.isfinite(arr)):
        kind = "x >= 0" if allow_zero else "x > 0"
        raise BesselDomainError(f"argument must satisfy {kind}")
    return arr


def _sym(n: int) -> float:
    return -1.0 if (n < 0 and n % 2) else 1.0


def bessel_j_table(nmax: int, x):
    """J_0(x)..J_nmax(x) stacked along a new leading axis."""
    nmax = _check_order(nmax)
    arr = _as_positive(x, allow_zero=True)
    flat = arr.ravel()
    out = np.zeros((nmax + 1, flat.size))
    pos = flat > 0
    out[0, ~pos] = 1.0
    if np.any(pos):
        out[:, pos] = _jy_table(nmax, flat[pos], want_y=False)[0]
    return out.reshape((nmax + 1,) + arr.shape)


def hankel1_table(nmax: int, x):
    """H^(1)_0(x)..H^(1)_nmax(x) stacked along a new leading axis."""
    nmax = _check_order(nmax)
    arr = _as_positive(x, allow_zero=False)
    jt, yt = _jy_table(nmax, arr.ravel(), want_y=True)
    return (jt + 1j * yt).reshape((nmax + 1,) + arr.shape)


def bessel_j(n: int, x):
    """Bessel function of the first kind J_n(x) for x >= 0."""
    n = _check_order(n)
    val = bessel_j_table(abs(n), x)[abs(n)] * _sym(n)
    return float(val) if val.ndim == 0 else val


def bessel_y(n: int, x):
    """Bessel function of the second kind Y_n(x) for x > 0."""
    n = _check_order(n)
    arr = _as_positive(x, allow_zero=False)
    _, yt = _jy_table(abs(n), arr.ravel(), want_y=True)
    val = yt[abs(n)].reshape(arr.shape) * _sym(n)
    return float(val) if val.ndim == 0 else val


def hankel1(n: int, x):
    """Hankel function of the first kind H^(1)_n(x) = J_n(x) + i Y_n(x), x > 0."""
    n = _check_order(n)
    val = hankel1_table(abs(n), x)[abs(n)] * _sym(n)
    return complex(val) if val.ndim == 0 else val


def derivative_from_table(table: np.ndarray) -> np.ndarray:
    """C_n'(x) for n = 0..nmax-1 of a J/Y/H table using C_n' = (C_{n-1} - C_{n+1}) / 2."""
    d = np.empty_like(table[:-1])
    d[0] = -table[1]
    d[1:] = 0.5 * (table[:-2] - table[2:])
    return d


def _jy01_small(x):
    half = 0.5 * x
    q = -half * half
    j0 = np.ones_like(x)
    acc1 = np.ones_like(x)
    s0 = np.zeros_like(x)
    s1 = np.full_like(x, 1.0 - 2.0 * EULER_GAMMA)
    t0 = np.ones_like(x)
    t1 = np.ones_like(x)
    harm = 0.0
    for k in range(1, 27):
        harm += 1.0 / k
        t0 *= q
        t0 *= 1.0 / (k * k)
        j0 += t0
        s0 += harm * t0
        t1 *= q
        t1 *= 1.0 / (k * (k + 1))
        acc1 += t1
        s1 += (2.0 * (harm - EULER_GAMMA) + 1.0 / (k + 1)) * t1
    j1 = half * acc1
    lg = np.log(half)
    y0 = _TWO_OVER_PI * ((lg + EULER_GAMMA) * j0 - s0)
    y1 = -_TWO_OVER_PI / x + _TWO_OVER_PI * lg * j1 - half * s1 / math.pi
    return j0, j1, y0, y1


def _jy01_large(x):
    tab = _miller_table(1, x)
    y0, y1 = _y01_neumann(x, tab)
    return tab[0], tab[1], y0, y1


def jy01(x):
    """(J0, J1, Y0, Y1) at x > 0, same shape as ``x``."""
    arr = _as_positive(x, allow_zero=False)
    flat = arr.ravel()
    out = np.empty((4, flat.size))
    small = flat < SERIES_CUTOFF
    if small.all():
        out[:] = _jy01_small(flat)
    elif not small.any():
        out[:] = _jy01_large(flat)
    else:
        out[:, small] = _jy01_small(flat[small])
        out[:, ~small] = _jy01_large(flat[~small])
    shp = arr.shape
    return tuple(row.reshape(shp) for row in out)
