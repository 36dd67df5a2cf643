"""Penalized N-product expressions and exact certification of their local bound.

The penalized objective is a linear functional minus ``kappa`` times a sum of
absolute values of linear forms, hence concave. Its maximum over the local
polytope is the optimum of a linear program over convex combinations of
deterministic strategy pairs, where each absolute value ``|L|`` is split as
``L = u - w`` with ``u, w >= 0`` and penalized by ``kappa * (u + w)``.

The LP is solved by column generation. A floating-point master problem picks
the working set of vertex columns; the exact rational simplex then re-solves
it, and a full exact pricing sweep over every deterministic pair either finds
an improving column or certifies optimality.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm

import numpy as np
from scipy.optimize import linprog

from . import simplex
from .bell import (
    ALICE,
    BOB,
    Behavior,
    BellExpression,
    DeterministicStrategy,
    evaluate_product_bell,
    objective_tensor,
    to_fraction,
    tuple_digits,
)
from .lhv import CapExceeded, product_strategy_bound

log = logging.getLogger(__name__)

DEFAULT_STRATEGY_CAP = 100_000
FLOAT_TOL = 1e-9


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class PenaltyValue:
    A_pen: object
    B_pen: object

    @property
    def total(self):
        return self.A_pen + self.B_pen


@dataclass(frozen=True)
class PnpConfig:
    expr: BellExpression
    N: int
    kappa: Fraction

    def __post_init__(self):
        kappa = to_fraction(self.kappa)
        if kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if self.N < 1:
            raise ValueError("N must be positive")
        object.__setattr__(self, "kappa", kappa)


def marginal_pairs(N: int, n: int, ordered: bool = True) -> list[tuple[int, int, int]]:
    """Triples ``(i, x, x2)``: copy index and two distinct setting tuples agreeing on copy i."""
    digits = tuple_digits(n, N)
    X = n**N
    pairs = []
    for i in range(N):
        for x in range(X):
            for x2 in range(X):
                if x != x2 and digits[x, i] == digits[x2, i] and (ordered or x < x2):
                    pairs.append((i, x, x2))
    return pairs


def _party_penalty(marg: np.ndarray, N: int, n: int, m: int):
    # marg[x, i, v] = P(a_i = v | x)
    total = None
    for i, x, x2 in marginal_pairs(N, n):
        for v in range(m - 1):
            term = abs(marg[x, i, v] - marg[x2, i, v])
            total = term if total is None else total + term
    if total is None:
        return Fraction(0) if marg.dtype == object else 0.0
    return total


def _marginal_table(probs_xa: np.ndarray, n_other: int, m: int, N: int) -> np.ndarray:
    digits = tuple_digits(m, N)
    out = np.empty(probs_xa.shape[:1] + (N, m), dtype=probs_xa.dtype)
    for i in range(N):
        for v in range(m):
            out[:, i, v] = probs_xa[:, digits[:, i] == v].sum(axis=1)
    if probs_xa.dtype == object:
        return out / Fraction(n_other)
    return out / n_other


def penalty_terms(behavior: Behavior) -> PenaltyValue:
    """Alice's and Bob's penalties: summed absolute differences of per-copy marginals."""
    N, n, m = behavior.N, behavior.n, behavior.m
    X = n**N
    alice = _marginal_table(behavior.probs.sum(axis=3).sum(axis=1), X, m, N)
    bob = _marginal_table(behavior.probs.sum(axis=2).sum(axis=0), X, m, N)
    return PenaltyValue(_party_penalty(alice, N, n, m), _party_penalty(bob, N, n, m))


def kappa_sufficient(expr: BellExpression, N: int, sigma_override=None) -> Fraction:
    """Penalty constant ``n**(N-1) * (Sigma_N - C**N)`` that restores the bound ``C**N``.

    ``sigma_override`` replaces the algebraic bound by any known upper bound
    on the unpenalized N-product local bound.
    """
    if expr.m != 2:
        raise ValueError("sufficient kappa is established for binary outcomes only")
    CN = product_strategy_bound(expr, N)
    sigma_N = expr.algebraic_bound(N) if sigma_override is None else to_fraction(sigma_override)
    if sigma_N < CN:
        raise ValueError(f"bound override {sigma_N} is below C^N = {CN}")
    return expr.n ** (N - 1) * (sigma_N - CN)


def pnp_value(config: PnpConfig, behavior: Behavior):
    value = evaluate_product_bell(config.expr, config.N, behavior)
    pen = penalty_terms(behavior)
    kappa = config.kappa if behavior.exact else float(config.kappa)
    return value - kappa * pen.total


@dataclass
class Certificate:
    bound: Fraction
    kappa: Fraction | None
    iterations: int
    support: list[tuple[DeterministicStrategy, DeterministicStrategy, Fraction]]
    max_reduced_cost: Fraction
    columns: int
    duals: list[Fraction] = field(repr=False)

    @property
    def support_size(self) -> int:
        return len(self.support)

    def to_json(self) -> dict:
        return {
            "bound": f"{self.bound.numerator}/{self.bound.denominator}",
            "kappa": None if self.kappa is None else f"{self.kappa.numerator}/{self.kappa.denominator}",
            "iterations": self.iterations,
            "support_size": self.support_size,
            "columns": self.columns,
            "max_reduced_cost": f"{self.max_reduced_cost.numerator}/{self.max_reduced_cost.denominator}",
        }


class LocalPolytopeLP:
    """Maximize a linear objective over the N-copy local polytope.

    ``objective[x, a, y, b]`` holds exact coefficients on ``P(a, b | x, y)``.
    With ``kappa`` set, marginal differences are penalized; with
    ``kappa=None`` they are imposed as hard equalities.
    """

    def __init__(self, objective: np.ndarray, N: int, n: int, m: int = 2, kappa=None,
                 cap: int = DEFAULT_STRATEGY_CAP, seed: int = 0, random_columns: int = 64):
        X, A = n**N, m**N
        if objective.shape != (X, A, X, A):
            raise ValueError("objective has the wrong shape")
        n_strats = A**X
        if n_strats > cap:
            raise CapExceeded(f"{n_strats} strategies per party exceed the LP cap of {cap}")
        self.N, self.n, self.m, self.X, self.A = N, n, m, X, A
        self.kappa = None if kappa is None else to_fraction(kappa)
        self.rng = np.random.default_rng(seed)
        self.random_columns = random_columns

        self.scale = 1
        for v in objective.flat:
            self.scale = lcm(self.scale, Fraction(v).denominator)
        W = np.array([int(Fraction(v) * self.scale) for v in objective.flat], dtype=object).reshape(objective.shape)
        self.tables = tuple_digits(A, X)  # [strategy, x] -> encoded outcome tuple
        # G[s, y, b] = sum_x W[x, s(x), y, b]
        G = W[np.arange(X)[None, :], self.tables].sum(axis=1)
        self.G_int = G
        self.G_float = G.astype(float) / self.scale

        zero = tuple_digits(m, N) == 0  # [outcome tuple, i]
        self.pairs = marginal_pairs(N, n, ordered=self.kappa is not None)
        K = len(self.pairs)
        self.K = K
        Z = zero[self.tables]  # [s, x, i]
        D = np.zeros((n_strats, K), dtype=np.int64)
        for k, (i, x, x2) in enumerate(self.pairs):
            D[:, k] = Z[:, x, i].astype(np.int64) - Z[:, x2, i]
        self.D = D  # same for both parties
        # row layout: 0 normalization, 1..K Alice terms, K+1..2K Bob terms
        self.n_rows = 1 + 2 * K
        # Bob pricing: per term, the (y, i) pairs it reads with sign +1 / -1
        self.zero = zero

    # -- columns -------------------------------------------------------------

    def vertex_value(self, s: int, t: int) -> Fraction:
        b = tuple_digits(self.A, self.X)[t]
        return Fraction(int(self.G_int[s, np.arange(self.X), b].sum()), self.scale)

    def vertex_column(self, s: int, t: int) -> dict:
        col = {0: Fraction(1)}
        for k in range(self.K):
            if self.D[s, k]:
                col[1 + k] = Fraction(int(self.D[s, k]))
            if self.D[t, k]:
                col[1 + self.K + k] = Fraction(int(self.D[t, k]))
        return col

    def _slack_columns(self):
        cols, costs = [], []
        if self.kappa is None:
            return cols, costs
        for r in range(1, self.n_rows):
            cols += [{r: Fraction(-1)}, {r: Fraction(1)}]
            costs += [-self.kappa, -self.kappa]
        return cols, costs

    # -- pricing -------------------------------------------------------------

    def _bob_adjust(self, y_bob):
        # h[y, b] = sum_k pi_k ([y == y_k] - [y == y2_k]) [b_i == 0]
        dtype = object if isinstance(y_bob[0], Fraction) else float
        h = np.zeros((self.X, self.A), dtype=dtype)
        if dtype is object:
            h[:] = Fraction(0)
        for k, (i, y1, y2) in enumerate(self.pairs):
            pi = y_bob[k]
            if pi:
                z = self.zero[:, i]
                h[y1, z] = h[y1, z] + pi
                h[y2, z] = h[y2, z] - pi
        return h

    def price(self, duals, exact: bool, top: int = 1):
        """Best reduced costs over all deterministic pairs.

        Returns a list of ``(reduced_cost, s, t)`` for the ``top`` best Alice
        strategies, each paired with its best Bob response.
        """
        y0, yA, yB = duals[0], duals[1:1 + self.K], duals[1 + self.K:]
        if exact:
            L = self.scale
            for v in duals:
                L = lcm(L, Fraction(v).denominator)
            G = self.G_int * (L // self.scale)
            h = np.array([int(v * L) for v in self._bob_adjust(list(yB)).flat], dtype=object).reshape(self.X, self.A) if self.K else np.zeros((self.X, self.A), dtype=object)
            f = self.D.astype(object) @ np.array([int(Fraction(v) * L) for v in yA], dtype=object) if self.K else np.zeros(len(G), dtype=object)
            net = G - h[None, :, :]
            scores = net.max(axis=2).sum(axis=1) - f - int(y0 * L)
        else:
            L = 1
            h = self._bob_adjust([float(v) for v in yB]) if self.K else np.zeros((self.X, self.A))
            f = self.D @ np.asarray(yA, dtype=float) if self.K else 0.0
            net = self.G_float - h[None, :, :]
            scores = net.max(axis=2).sum(axis=1) - f - float(y0)
        order = np.argsort(-scores.astype(float), kind="stable")[:top]
        out = []
        for s in order:
            best_b = np.argmax(net[s].astype(float), axis=1) if not exact else [max(range(self.A), key=lambda b: (net[s, y, b], -b)) for y in range(self.X)]
            t = 0
            for b in best_b:
                t = t * self.A + int(b)
            rc = Fraction(scores[s], L) if exact else float(scores[s])
            out.append((rc, int(s), t))
        return out

    # -- initial pool --------------------------------------------------------

    def _product_tables(self):
        per_copy = tuple_digits(self.m, self.n)  # alpha tables
        digits_in = tuple_digits(self.n, self.N)
        strategies = []
        for combo in np.ndindex(*(len(per_copy),) * self.N):
            table = 0
            for x in range(self.X):
                code = 0
                for i in range(self.N):
                    code = code * self.m + int(per_copy[combo[i]][digits_in[x, i]])
                table = table * self.A + code
            strategies.append(table)
        return strategies

    def initial_pool(self):
        prods = self._product_tables()
        best = max(((self.vertex_value(s, t), s, t) for s in prods for t in prods))
        pool = {(best[1], best[2])}
        n_strats = len(self.tables)
        for _ in range(self.random_columns):
            pool.add((int(self.rng.integers(n_strats)), int(self.rng.integers(n_strats))))
        return sorted(pool)

    # -- solving -------------------------------------------------------------

    def _float_master(self, pool):
        slack_cols, slack_costs = self._slack_columns()
        n_cols = len(pool) + len(slack_cols)
        A_eq = np.zeros((self.n_rows, n_cols))
        c = np.zeros(n_cols)
        for j, (s, t) in enumerate(pool):
            for r, v in self.vertex_column(s, t).items():
                A_eq[r, j] = float(v)
            c[j] = float(self.vertex_value(s, t))
        for j, (col, cost) in enumerate(zip(slack_cols, slack_costs), start=len(pool)):
            for r, v in col.items():
                A_eq[r, j] = float(v)
            c[j] = float(cost)
        b_eq = np.zeros(self.n_rows)
        b_eq[0] = 1.0
        res = linprog(-c, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
        if res.status != 0:
            return None
        return -res.fun, -np.asarray(res.eqlin.marginals)

    def _exact_master(self, pool):
        slack_cols, slack_costs = self._slack_columns()
        cols = [self.vertex_column(s, t) for s, t in pool] + slack_cols
        costs = [self.vertex_value(s, t) for s, t in pool] + slack_costs
        rhs = [Fraction(1)] + [Fraction(0)] * (self.n_rows - 1)
        return simplex.solve(cols, costs, rhs)

    def solve(self, max_iterations: int = 200, columns_per_round: int = 8) -> Certificate:
        pool = self.initial_pool()
        seen = set(pool)
        iterations = 0
        # floating-point column generation
        for _ in range(max_iterations):
            iterations += 1
            master = self._float_master(pool)
            if master is None:
                break
            _, duals = master
            added = False
            for rc, s, t in self.price(duals, exact=False, top=columns_per_round):
                if rc > FLOAT_TOL and (s, t) not in seen:
                    pool.append((s, t))
                    seen.add((s, t))
                    added = True
            if not added:
                break
        # exact re-solve and certification
        for _ in range(max_iterations):
            iterations += 1
            result = self._exact_master(pool)
            priced = self.price(result.duals, exact=True, top=columns_per_round)
            new = [(s, t) for rc, s, t in priced if rc > 0 and (s, t) not in seen]
            if not new:
                max_rc = priced[0][0]
                support = [
                    (DeterministicStrategy.from_index(ALICE, self.N, self.n, self.m, s),
                     DeterministicStrategy.from_index(BOB, self.N, self.n, self.m, t), w)
                    for (s, t), w in zip(pool, result.x) if w
                ]
                return Certificate(result.value, self.kappa, iterations, support, max_rc,
                                   len(pool), result.duals)
            for col in new:
                pool.append(col)
                seen.add(col)
        raise ConvergenceError(f"column generation did not converge in {max_iterations} rounds")


def certify_pnp_lhv_bound(config: PnpConfig, seed: int = 0, max_iterations: int = 200,
                          cap: int = DEFAULT_STRATEGY_CAP) -> Certificate:
    """Exact maximum of the penalized N-product expression over local models."""
    expr = config.expr
    if expr.m != 2:
        raise ValueError("certification supports binary outcomes only")
    W = objective_tensor(expr, config.N)
    lp = LocalPolytopeLP(W, config.N, expr.n, expr.m, kappa=config.kappa, cap=cap, seed=seed)
    return lp.solve(max_iterations=max_iterations)


def min_sufficient_kappa_scan(expr: BellExpression, N: int, grid, seed: int = 0) -> dict:
    """Certified bound for each kappa in ``grid`` (keys are exact rationals)."""
    return {
        to_fraction(k): certify_pnp_lhv_bound(PnpConfig(expr, N, to_fraction(k)), seed=seed).bound
        for k in grid
    }
