"""Exact vertex enumeration of one party's marginal polytope.

Coordinates follow the Collins-Gisin convention: for every setting tuple x and
every nonempty subset S of copies, the probability that all outcomes in S are
zero. Equalities identify single-copy marginals across setting tuples that
agree on that copy. Vertices are found by a depth-first scan over facet
subsets with incremental exact row reduction; a branch is cut as soon as the
chosen rows become dependent.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .bell import tuple_digits
from .pnp import LocalPolytopeLP, marginal_pairs

MAX_AMBIENT_DIM = 12


def _subsets(N: int) -> list[tuple[int, ...]]:
    return [s for k in range(1, N + 1) for s in combinations(range(N), k)]


def marginal_constraints(N: int, n: int) -> list[tuple[int, int, int]]:
    """All marginal nonsignaling equalities ``(i, x, x2)`` over ordered pairs."""
    return marginal_pairs(N, n, ordered=True)


@dataclass(frozen=True)
class MarginalPolytope:
    N: int
    n: int
    dim: int
    facets: tuple[tuple[tuple[Fraction, ...], Fraction], ...]  # row . p <= rhs
    equalities: tuple[tuple[Fraction, ...], ...]  # row . p == 0
    constraints: tuple[tuple[int, int, int], ...]
    rank: int

    @property
    def enum_dim(self) -> int:
        return self.dim - self.rank

    def coord(self, x: int, subset: tuple[int, ...]) -> int:
        return x * (2**self.N - 1) + _subsets(self.N).index(subset)

    def single_marginal(self, point: Sequence[Fraction], x: int, i: int) -> Fraction:
        """``P(a_i = 0 | x)`` at a point."""
        return point[self.coord(x, (i,))]

    def contains(self, point: Sequence[Fraction]) -> bool:
        ok = all(_dot(row, point) <= rhs for row, rhs in self.facets)
        return ok and all(_dot(row, point) == 0 for row in self.equalities)

    def to_probabilities(self, point: Sequence[Fraction]) -> np.ndarray:
        """Full table ``P(a | x)`` of shape ``(n**N, 2**N)``."""
        X, A = self.n**self.N, 2**self.N
        out = np.empty((X, A), dtype=object)
        digits = tuple_digits(2, self.N)
        for x in range(X):
            for a in range(A):
                zeros = tuple(i for i in range(self.N) if digits[a, i] == 0)
                ones = [i for i in range(self.N) if digits[a, i] == 1]
                total = Fraction(0)
                for k in range(len(ones) + 1):
                    for T in combinations(ones, k):
                        S = tuple(sorted(zeros + T))
                        term = Fraction(1) if not S else point[self.coord(x, S)]
                        total += (-1) ** k * term
                out[x, a] = total
        return out


@dataclass(frozen=True)
class RationalVertex:
    coordinates: tuple[Fraction, ...]
    active: frozenset[int]


def _dot(row, point) -> Fraction:
    return sum((r * p for r, p in zip(row, point) if r), Fraction(0))


def build_marginal_polytope(N: int, n: int, constraints: Iterable = ()) -> MarginalPolytope:
    """Alice's N-copy marginal polytope with the chosen marginal equalities.

    ``constraints`` holds ``(i, x, x2)`` triples or indices into
    :func:`marginal_constraints`.
    """
    subsets = _subsets(N)
    S = len(subsets)
    dim = S * n**N
    if dim > MAX_AMBIENT_DIM:
        raise ValueError(f"ambient dimension {dim} exceeds {MAX_AMBIENT_DIM}")
    X = n**N
    digits = tuple_digits(2, N)
    facets = []
    for x in range(X):
        for a in range(2**N):
            zeros = tuple(i for i in range(N) if digits[a, i] == 0)
            ones = [i for i in range(N) if digits[a, i] == 1]
            row = [Fraction(0)] * dim
            const = Fraction(0)
            for k in range(len(ones) + 1):
                for T in combinations(ones, k):
                    sub = tuple(sorted(zeros + T))
                    if sub:
                        row[x * S + subsets.index(sub)] -= (-1) ** k
                    else:
                        const += (-1) ** k
            facets.append((tuple(row), const))
    all_pairs = marginal_constraints(N, n)
    chosen = []
    for c in constraints:
        triple = all_pairs[c] if isinstance(c, (int, np.integer)) else tuple(c)
        if triple not in all_pairs:
            raise ValueError(f"{triple} is not a marginal nonsignaling constraint")
        chosen.append(triple)
    equalities = []
    for i, x, x2 in chosen:
        row = [Fraction(0)] * dim
        row[x * S + subsets.index((i,))] += 1
        row[x2 * S + subsets.index((i,))] -= 1
        equalities.append(tuple(row))
    rank = len(_independent_rows(equalities, dim))
    return MarginalPolytope(N, n, dim, tuple(facets), tuple(equalities), tuple(chosen), rank)


class _Echelon:
    """Reduced row echelon form over the rationals, extended one row at a time."""

    __slots__ = ("rows", "pivots")

    def __init__(self, rows=(), pivots=()):
        self.rows = list(rows)  # (coeff list, rhs)
        self.pivots = list(pivots)

    def add(self, row, rhs) -> "_Echelon | None":
        row = list(row)
        for (prow, prhs), pc in zip(self.rows, self.pivots):
            f = row[pc]
            if f:
                row = [a - f * b for a, b in zip(row, prow)]
                rhs -= f * prhs
        pc = next((j for j, v in enumerate(row) if v), None)
        if pc is None:
            return None
        piv = row[pc]
        row = [v / piv for v in row]
        rhs /= piv
        rows = []
        for prow, prhs in self.rows:
            f = prow[pc]
            if f:
                prow = [a - f * b for a, b in zip(prow, row)]
                prhs -= f * rhs
            rows.append((prow, prhs))
        rows.append((row, rhs))
        return _Echelon(rows, self.pivots + [pc])

    def solution(self, dim):
        x = [Fraction(0)] * dim
        for (row, rhs), pc in zip(self.rows, self.pivots):
            x[pc] = rhs
        return x


def _independent_rows(rows, dim):
    ech = _Echelon()
    kept = []
    for row in rows:
        nxt = ech.add(row, Fraction(0))
        if nxt is not None:
            ech = nxt
            kept.append(row)
    return kept


def enumerate_vertices(poly: MarginalPolytope) -> list[RationalVertex]:
    """All vertices, each the unique solution of a full-rank set of tight rows."""
    base = _Echelon()
    for row in _independent_rows(poly.equalities, poly.dim):
        base = base.add(row, Fraction(0))
    need = poly.enum_dim
    facets = poly.facets
    F = len(facets)
    found: dict[tuple, RationalVertex] = {}

    def dfs(start, ech, depth):
        if depth == need:
            point = ech.solution(poly.dim)
            if all(_dot(row, point) <= rhs for row, rhs in facets):
                key = tuple(point)
                if key not in found:
                    active = frozenset(k for k, (row, rhs) in enumerate(facets) if _dot(row, point) == rhs)
                    found[key] = RationalVertex(key, active)
            return
        for k in range(start, F - (need - depth) + 1):
            nxt = ech.add(*facets[k])
            if nxt is not None:
                dfs(k + 1, nxt, depth + 1)

    dfs(0, base, 0)
    return sorted(found.values(), key=lambda v: v.coordinates)


def min_nonzero_marginal(vertices: Sequence[RationalVertex], poly: MarginalPolytope) -> Fraction:
    """Smallest strictly positive single-copy marginal ``P(a_i | x)`` over both outcomes."""
    best = None
    X = poly.n**poly.N
    for v in vertices:
        for x in range(X):
            for i in range(poly.N):
                p0 = poly.single_marginal(v.coordinates, x, i)
                for p in (p0, 1 - p0):
                    if p > 0 and (best is None or p < best):
                        best = p
    if best is None:
        raise ValueError("degenerate vertex set: every marginal is zero")
    return best


def min_nonzero_marginal_difference(vertices: Sequence[RationalVertex], poly: MarginalPolytope):
    """Smallest nonzero ``|P(a_i|x) - P(a_i|x2)|`` over pairs agreeing on copy i, or None."""
    best = None
    for v in vertices:
        for i, x, x2 in marginal_constraints(poly.N, poly.n):
            d = abs(poly.single_marginal(v.coordinates, x, i) - poly.single_marginal(v.coordinates, x2, i))
            if d and (best is None or d < best):
                best = d
    return best


def _canonical(poly_constraints) -> frozenset:
    return frozenset((i, min(x, x2), max(x, x2)) for i, x, x2 in poly_constraints)


def lemma2_report(N: int = 2, n: int = 2) -> dict:
    """Check the minimum nonzero marginal bound ``1/n**(N-1)`` over every constraint subset."""
    constraints = marginal_constraints(N, n)
    bound = Fraction(1, n ** (N - 1))
    cache: dict[frozenset, tuple[Fraction, object]] = {}
    overall, overall_diff, failures = None, None, []
    for mask in range(2 ** len(constraints)):
        chosen = [c for k, c in enumerate(constraints) if mask >> k & 1]
        key = _canonical(chosen)
        if key not in cache:
            poly = build_marginal_polytope(N, n, chosen)
            verts = enumerate_vertices(poly)
            cache[key] = (min_nonzero_marginal(verts, poly), min_nonzero_marginal_difference(verts, poly))
        value, diff = cache[key]
        if value < bound:
            failures.append(mask)
        overall = value if overall is None or value < overall else overall
        if diff is not None and (overall_diff is None or diff < overall_diff):
            overall_diff = diff
    return {
        "num_subsets": 2 ** len(constraints),
        "distinct_polytopes": len(cache),
        "min_nonzero_marginal": overall,
        "min_nonzero_difference": overall_diff,
        "bound": bound,
        "failures": failures,
        "pass": not failures,
    }


def random_objective(N: int, n: int, rng: np.random.Generator, max_num: int = 10, max_den: int = 10) -> np.ndarray:
    """Random rational coefficients on ``P(a, b | x, y)``, shape ``[x, a, y, b]``."""
    X, A = n**N, 2**N
    nums = rng.integers(-max_num, max_num + 1, size=(X, A, X, A))
    dens = rng.integers(1, max_den + 1, size=(X, A, X, A))
    out = np.empty((X, A, X, A), dtype=object)
    for idx in np.ndindex(out.shape):
        out[idx] = Fraction(int(nums[idx]), int(dens[idx]))
    return out


def product_vertices_max(objective: np.ndarray, alice: np.ndarray, bob: np.ndarray) -> Fraction:
    """Exact max of the objective over products of listed Alice and Bob behaviors.

    ``alice`` and ``bob`` are object arrays ``[vertex, x, a]`` of exact
    probabilities.
    """
    V_a = alice.reshape(len(alice), -1)
    V_b = bob.reshape(len(bob), -1)
    O = objective.reshape(V_a.shape[1], V_b.shape[1])
    scores = V_a.dot(O).dot(V_b.T)
    return max(scores.flat)


def verify_lemma1(N: int = 2, n: int = 2, trials: int = 100, seed: int = 42, objectives=None) -> dict:
    """Compare the joint maximum over the constrained local polytope with the
    maximum over products of constrained marginal vertices, per objective."""
    if (N, n) != (2, 2):
        raise ValueError("verification is implemented for N = 2, n = 2")
    poly = build_marginal_polytope(N, n, marginal_constraints(N, n))
    verts = enumerate_vertices(poly)
    probs = np.stack([poly.to_probabilities(v.coordinates) for v in verts])
    rng = np.random.default_rng(seed)
    if objectives is None:
        objectives = [random_objective(N, n, rng) for _ in range(trials)]
    rows = []
    for t, obj in enumerate(objectives):
        lp = LocalPolytopeLP(obj, N, n, 2, kappa=None, seed=seed + t).solve()
        prod = product_vertices_max(obj, probs, probs)
        rows.append({"trial": t, "lp": lp.bound, "product": prod, "equal": lp.bound == prod})
    return {
        "trials": len(rows),
        "vertices_per_party": len(verts),
        "equal": sum(r["equal"] for r in rows),
        "violations": sum(not r["equal"] for r in rows),
        "rows": rows,
    }
