"""Lossy detectors: PNP value, required and critical efficiency, curve generators.

With click probability eta per party the N-copy value is
``eta^2 Q^N + eta (1 - eta)(A^N + B^N) + (1 - eta)^2 C^N``. Along the optimal
CHSH family (parameter q) the differences Q - C and C - A vanish as q -> 0,
so they are evaluated in cancellation-free closed forms and raised to the
N-th power through ``x^N - y^N = (x - y) sum_k x^(N-1-k) y^k``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .bell import make_chsh
from .optimize import grid_golden_minimize
from .pnp import kappa_sufficient
from .quantum import apply_visibility, compute_QAB, optimal_strategy

log = logging.getLogger(__name__)

Q_GRID_MIN = 1e-4
VIS_TOL = 1e-8
_CHSH = make_chsh()
C_CHSH = float(_CHSH.lhv_bound)


class NoViolation(ValueError):
    """The quantum value does not exceed the LHV bound, so no threshold exists."""


@dataclass(frozen=True)
class EfficiencyQuery:
    Q: float
    A: float
    B: float
    N: int
    C: float
    eta: float
    epsilon: float = 0.0
    kappa: float = 0.0

    def __post_init__(self):
        if not 0 <= self.eta <= 1:
            raise ValueError("eta must lie in [0, 1]")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.N < 1:
            raise ValueError("N must be positive")


@dataclass(frozen=True)
class CurvePoint:
    N: int
    value: float
    q_opt: float
    boundary: bool = False
    attainable: bool = True


def pnp_value_with_efficiency(query: EfficiencyQuery) -> float:
    e, N = query.eta, query.N
    return (e * e * query.Q**N + e * (1 - e) * (query.A**N + query.B**N)
            + (1 - e) ** 2 * query.C**N - query.kappa * query.epsilon)


def required_eta(Q: float, A: float, B: float, N: int, C: float) -> float:
    """Efficiency at which the value equals ``C^N`` (no penalty)."""
    QN, CN = float(Q) ** N, float(C) ** N
    if QN <= CN:
        raise NoViolation(f"Q^N = {QN} does not exceed C^N = {CN}")
    num = 2 * CN - float(A) ** N - float(B) ** N
    if num == 0:
        warnings.warn("assignments alone reach the LHV bound; threshold degenerates to 0", stacklevel=2)
        return 0.0
    return num / (QN + CN - float(A) ** N - float(B) ** N)


def asymptotic_eta(C: float, Q: float, delta: float, N: int) -> float:
    if Q <= C:
        raise NoViolation("Q must exceed C")
    return 2 * (C / Q) ** N * (1 - delta**N)


def _power_gap(x, y, dxy, N):
    """``x^N - y^N`` given ``dxy = x - y`` computed accurately."""
    total = np.zeros_like(np.asarray(x, dtype=float))
    for k in range(N):
        total = total + x ** (N - 1 - k) * y**k
    return dxy * total


def _noise_levels():
    # values of Q and A for the maximally mixed state
    Q0, A0, _ = compute_QAB(apply_visibility(optimal_strategy(1.0), 0.0), _CHSH)
    return Q0, A0


Q_NOISE, A_NOISE = _noise_levels()


def frontier_gaps(q, N: int, v: float = 1.0):
    """``(Q_v^N - C^N, C^N - A_v^N)`` along the optimal family with visibility v."""
    q = np.asarray(q, dtype=float)
    C = C_CHSH
    root = np.sqrt(1 + q * q)
    dQ = q * q / (4 * (root + 1))
    s = q / root
    one_minus_r = q * s + q**3 / (root * (root + 1))
    r = 1 - one_minus_r
    dA = one_minus_r / (1 + np.sqrt(r)) / 4
    dQv = v * dQ - (1 - v) * (C - Q_NOISE)
    dAv = v * dA + (1 - v) * (C - A_NOISE)
    Qv, Av = C + dQv, C - dAv
    return _power_gap(Qv, C, dQv, N), _power_gap(C, Av, dAv, N)


def frontier_eta(q, N: int, v: float = 1.0, K: float = 0.0):
    """Smallest eta giving a value above ``C^N + K`` at parameter q (inf if none)."""
    gQ, gA = frontier_gaps(q, N, v)
    num = 2 * gA
    den = gQ + num
    with np.errstate(divide="ignore", invalid="ignore"):
        if K == 0:
            eta = num / den
        else:
            eta = (num + np.sqrt(num * num + 4 * den * K)) / (2 * den)
    return np.where(gQ > 0, eta, np.inf)


def critical_eta(N: int, q_min: float = Q_GRID_MIN) -> CurvePoint:
    if N < 1:
        raise ValueError("N must be positive")
    m = grid_golden_minimize(lambda q: frontier_eta(q, N), q_min, 1.0)
    return CurvePoint(N, m.fx, m.x, boundary=m.boundary and m.x == q_min)


def eta_with_penalty_and_visibility(v: float, N: int, epsilon: float, kappa=None, sigma_override=None,
                                    q_min: float = Q_GRID_MIN) -> CurvePoint:
    """Smallest eta with ``value - kappa * epsilon > C^N`` optimized over q."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    if kappa is None:
        kappa = kappa_sufficient(_CHSH, N, sigma_override)
    K = float(Fraction(kappa)) * epsilon
    m = grid_golden_minimize(lambda q: frontier_eta(q, N, v, K), q_min, 1.0)
    if not m.fx <= 1:
        return CurvePoint(N, float("nan"), m.x, m.boundary, attainable=False)
    return CurvePoint(N, m.fx, m.x, boundary=m.boundary and m.x == q_min)


def min_visibility(eta: float, N: int, tol: float = VIS_TOL, q_min: float = Q_GRID_MIN) -> CurvePoint:
    """Smallest v for which some q gives a violation at efficiency eta (bisection)."""
    if not 0 < eta <= 1:
        raise ValueError("eta must lie in (0, 1]")

    def best(v):
        return grid_golden_minimize(lambda q: frontier_eta(q, N, v), q_min, 1.0)

    top = best(1.0)
    if not top.fx < eta:
        return CurvePoint(N, float("nan"), top.x, top.boundary, attainable=False)
    lo, hi, q_hi = 0.0, 1.0, top.x
    while hi - lo > tol:
        mid = (lo + hi) / 2
        m = best(mid)
        if m.fx < eta:
            hi, q_hi = mid, m.x
        else:
            lo = mid
    return CurvePoint(N, hi, q_hi)


def eta_crit_curve(max_n: int) -> list[CurvePoint]:
    return [critical_eta(N) for N in range(1, max_n + 1)]


def visibility_curve(eta: float, max_n: int) -> list[CurvePoint]:
    return [min_visibility(eta, N) for N in range(1, max_n + 1)]


def fig2_curves(epsilon: float, visibilities, max_n: int) -> dict[float, list[CurvePoint]]:
    return {v: [eta_with_penalty_and_visibility(v, N, epsilon) for N in range(1, max_n + 1)]
            for v in visibilities}
