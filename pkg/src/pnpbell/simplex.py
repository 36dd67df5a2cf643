"""Dense revised simplex over exact rationals.

Solves ``max c.x  s.t.  A x = b, x >= 0`` with a two-phase method. Columns are
given sparsely as ``{row: value}`` dicts. Pivoting uses the largest reduced
cost and falls back to Bland's rule after a run of degenerate pivots.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

ZERO = Fraction(0)
ONE = Fraction(1)
_DEGENERATE_RUN = 30


class LPError(RuntimeError):
    pass


class Infeasible(LPError):
    pass


class Unbounded(LPError):
    pass


@dataclass
class LPResult:
    value: Fraction
    x: list[Fraction]
    duals: list[Fraction]
    basis: list[int]
    pivots: int


class _Tableau:
    def __init__(self, columns, rhs):
        self.m = len(rhs)
        self.columns = columns
        self.B_inv = [[ONE if i == j else ZERO for j in range(self.m)] for i in range(self.m)]
        self.x_B = list(rhs)
        self.pivots = 0

    def duals(self, costs_B):
        m, B_inv = self.m, self.B_inv
        y = [ZERO] * m
        for i in range(m):
            c = costs_B[i]
            if c:
                row = B_inv[i]
                for j in range(m):
                    if row[j]:
                        y[j] += c * row[j]
        return y

    def direction(self, j):
        col = self.columns[j]
        d = [ZERO] * self.m
        for i, row in enumerate(self.B_inv):
            s = ZERO
            for r, v in col.items():
                if row[r]:
                    s += row[r] * v
            d[i] = s
        return d

    def pivot(self, r, d):
        piv = d[r]
        B_inv, m = self.B_inv, self.m
        row_r = [v / piv for v in B_inv[r]]
        B_inv[r] = row_r
        xr = self.x_B[r] / piv
        self.x_B[r] = xr
        for i in range(m):
            if i != r and d[i]:
                f = d[i]
                row_i = B_inv[i]
                for j in range(m):
                    if row_r[j]:
                        row_i[j] -= f * row_r[j]
                self.x_B[i] -= f * xr
        self.pivots += 1


def _reduced_cost(col: Mapping[int, Fraction], cost, y) -> Fraction:
    s = cost
    for r, v in col.items():
        if y[r]:
            s -= y[r] * v
    return s


def _run(tab: _Tableau, basis, costs, allowed, max_pivots):
    """Optimize from the current basis. ``costs`` indexes all columns."""
    in_basis = set(basis)
    degenerate_run = 0
    bland = False
    while True:
        if tab.pivots > max_pivots:
            raise LPError(f"pivot limit {max_pivots} exceeded")
        y = tab.duals([costs[b] for b in basis])
        entering, best = None, ZERO
        for j in allowed:
            if j in in_basis:
                continue
            rc = _reduced_cost(tab.columns[j], costs[j], y)
            if rc > 0:
                if bland:
                    entering = j
                    break
                if rc > best:
                    entering, best = j, rc
        if entering is None:
            return y
        d = tab.direction(entering)
        leave, ratio = None, None
        for i in range(tab.m):
            if d[i] > 0:
                t = tab.x_B[i] / d[i]
                if ratio is None or t < ratio or (t == ratio and basis[i] < basis[leave]):
                    leave, ratio = i, t
        if leave is None:
            raise Unbounded("objective unbounded")
        if ratio == 0:
            degenerate_run += 1
            if degenerate_run >= _DEGENERATE_RUN:
                bland = True
        else:
            degenerate_run = 0
        tab.pivot(leave, d)
        in_basis.discard(basis[leave])
        basis[leave] = entering
        in_basis.add(entering)


def solve(
    columns: Sequence[Mapping[int, Fraction]],
    costs: Sequence[Fraction],
    rhs: Sequence[Fraction],
    max_pivots: int = 100_000,
) -> LPResult:
    """Maximize ``costs . x`` subject to ``sum_j x_j columns[j] = rhs``, ``x >= 0``."""
    m, n = len(rhs), len(columns)
    sign = [ONE if Fraction(b) >= 0 else -ONE for b in rhs]
    cols = [{r: sign[r] * Fraction(v) for r, v in c.items() if v} for c in columns]
    cols += [{i: ONE} for i in range(m)]  # artificials n .. n+m-1
    b = [sign[i] * Fraction(rhs[i]) for i in range(m)]
    tab = _Tableau(cols, b)
    basis = list(range(n, n + m))

    phase1 = [ZERO] * n + [-ONE] * m
    _run(tab, basis, phase1, range(n + m), max_pivots)
    if sum(tab.x_B[i] for i in range(m) if basis[i] >= n) != 0:
        raise Infeasible("no feasible point")
    # drive zero-level artificials out where possible; rows left behind are redundant
    for r in range(m):
        if basis[r] >= n:
            in_basis = set(basis)
            for j in range(n):
                if j in in_basis:
                    continue
                d = tab.direction(j)
                if d[r] != 0:
                    tab.pivot(r, d)
                    basis[r] = j
                    break

    phase2 = [Fraction(c) for c in costs] + [ZERO] * m
    y = _run(tab, basis, phase2, range(n), max_pivots)
    x = [ZERO] * n
    for i, j in enumerate(basis):
        if j < n:
            x[j] = tab.x_B[i]
    value = sum((phase2[j] * x[j] for j in range(n) if x[j]), ZERO)
    duals = [sign[i] * y[i] for i in range(m)]
    return LPResult(value, x, duals, basis, tab.pivots)
