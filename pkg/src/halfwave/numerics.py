"""Small scalar solvers shared across modules: bracketed bisection,
golden-section extremum search, and least-squares slope fits."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


class BracketError(ValueError):
    """The supplied interval does not bracket a sign change."""


def bisect_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    rtol: float = 1e-15,
    max_iter: int = 200,
) -> float:
    """Root of f on [lo, hi] by bisection; endpoints must bracket a sign change."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise BracketError(f"no sign change on [{lo:g}, {hi:g}]: f={flo:g}, {fhi:g}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
        if hi - lo <= rtol * max(abs(lo), abs(hi)):
            break
    return 0.5 * (lo + hi)


def expand_bracket_up(
    f: Callable[[float], float],
    start: float,
    *,
    factor: float = 2.0,
    max_doublings: int = 200,
) -> tuple[float, float]:
    """Grow [start, start*factor^k] until f changes sign relative to f(start)."""
    f0 = f(start)
    hi = start
    for _ in range(max_doublings):
        lo, hi = hi, hi * factor
        if np.sign(f(hi)) != np.sign(f0):
            return lo, hi
    raise BracketError(f"no sign change found above {start:g}")


def golden_section_max(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    xtol: float = 1e-8,
    max_iter: int = 400,
) -> tuple[float, float]:
    """Locate the maximum of a unimodal f on [lo, hi]; returns (argmax, max)."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= xtol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log|y| against log x."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.abs(np.asarray(y, dtype=float)))
    slope, _ = np.polyfit(lx, ly, 1)
    return float(slope)


def fit_residual(x: Sequence[float], y: Sequence[float]) -> float:
    """RMS residual of the best single-coefficient fit y ~ c*x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c = float(np.dot(x, y) / np.dot(x, x))
    return float(np.sqrt(np.mean((y - c * x) ** 2)))
