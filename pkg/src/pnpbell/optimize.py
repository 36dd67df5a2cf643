"""Deterministic one-dimensional minimization: dense grid, then golden section."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

INV_PHI = (np.sqrt(5.0) - 1) / 2


@dataclass(frozen=True)
class Minimum:
    x: float
    fx: float
    boundary: bool  # True when the minimum sits on an endpoint of the interval


def golden_section(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10,
                   max_iter: int = 500) -> tuple[float, float]:
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def grid_golden_minimize(f: Callable, lo: float, hi: float, points: int = 10_000,
                         tol: float = 1e-10) -> Minimum:
    """Minimize ``f`` on ``[lo, hi]``.

    ``f`` must accept a numpy array (for the grid pass) and a float. The grid
    minimum is refined by golden section inside its neighbouring cells, and
    the endpoints are compared explicitly so a boundary infimum is reported
    at the endpoint itself.
    """
    xs = np.linspace(lo, hi, points)
    with np.errstate(divide="ignore", invalid="ignore"):
        fs = np.asarray(f(xs), dtype=float)
    fs = np.where(np.isnan(fs), np.inf, fs)
    i = int(np.argmin(fs))
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, points - 1)]
    x, fx = golden_section(lambda t: float(f(t)), a, b, tol)
    for end in (lo, hi):
        fe = float(f(end))
        if fe <= fx:
            x, fx = end, fe
    return Minimum(float(x), float(fx), x in (lo, hi))
