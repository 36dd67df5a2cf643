from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import linprog

from pnpbell.simplex import Infeasible, Unbounded, solve

F = Fraction


def _cols(A):
    return [{i: F(int(A[i, j])) for i in range(A.shape[0]) if A[i, j]} for j in range(A.shape[1])]


def test_small_lp():
    # max x + y  s.t.  x + 2y + s1 = 4, 3x + y + s2 = 6
    A = np.array([[1, 2, 1, 0], [3, 1, 0, 1]])
    res = solve(_cols(A), [F(1), F(1), F(0), F(0)], [F(4), F(6)])
    assert res.value == F(14, 5)
    assert res.x[:2] == [F(8, 5), F(6, 5)]
    # strong duality
    assert sum(y * b for y, b in zip(res.duals, [4, 6])) == res.value


def test_infeasible():
    with pytest.raises(Infeasible):
        solve([{0: F(1)}, {0: F(1)}], [F(0), F(0)], [F(-1)])


def test_unbounded():
    with pytest.raises(Unbounded):
        solve([{0: F(1)}, {0: F(-1)}], [F(1), F(0)], [F(1)])


def test_redundant_rows():
    # the second row repeats the first
    res = solve([{0: F(1), 1: F(1)}, {0: F(1), 1: F(1)}], [F(1), F(2)], [F(3), F(3)])
    assert res.value == 6


@pytest.mark.parametrize("seed", range(10))
def test_matches_highs_on_random_lps(seed):
    rng = np.random.default_rng(seed)
    m, n = 4, 9
    A = rng.integers(-3, 4, size=(m, n))
    x0 = rng.integers(0, 3, size=n)
    b = A @ x0  # feasible by construction
    c = rng.integers(-5, 6, size=n)
    ref = linprog(-c, A_eq=A, b_eq=b, bounds=(0, 50), method="highs")
    # bound the variables so both problems stay bounded
    cols = _cols(np.vstack([A, np.eye(n, dtype=int)]))
    cols += [{m + j: F(1)} for j in range(n)]
    res = solve(cols, [F(int(v)) for v in c] + [F(0)] * n, [F(int(v)) for v in b] + [F(50)] * n)
    assert float(res.value) == pytest.approx(-ref.fun, abs=1e-7)
