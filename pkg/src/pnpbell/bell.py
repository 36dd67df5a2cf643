"""Bell expressions, behaviors and deterministic strategies.

Tuples of settings or outcomes over ``N`` copies are encoded row-major, copy 1
being the most significant digit: ``(t_1, ..., t_N) -> sum_i t_i * base**(N-i)``.
Behavior tables are indexed ``probs[x, y, a, b]`` with encoded tuples.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

MAX_BEHAVIOR_ENTRIES = 16**4
ALICE = "alice"
BOB = "bob"


def to_fraction(value) -> Fraction:
    """Parse ints, Fractions and ``"p/q"`` strings. Floats are rejected."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"expected an exact rational, got {type(value).__name__}")


def format_fraction(value: Fraction) -> str:
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


@lru_cache(maxsize=None)
def tuple_digits(base: int, length: int) -> np.ndarray:
    """Array of shape ``(base**length, length)``; row k holds the digits of k."""
    k = np.arange(base**length)
    powers = base ** np.arange(length - 1, -1, -1)
    out = (k[:, None] // powers[None, :]) % base
    out.setflags(write=False)
    return out


def encode(digits: Sequence[int], base: int) -> int:
    code = 0
    for d in digits:
        if not 0 <= d < base:
            raise ValueError(f"digit {d} out of range for base {base}")
        code = code * base + int(d)
    return code


def decode(code: int, base: int, length: int) -> tuple[int, ...]:
    if not 0 <= code < base**length:
        raise ValueError(f"code {code} out of range")
    digits = []
    for _ in range(length):
        code, d = divmod(code, base)
        digits.append(d)
    return tuple(reversed(digits))


def _as_exact_array(values, shape) -> np.ndarray:
    arr = np.empty(shape, dtype=object)
    flat = np.asarray(values, dtype=object).reshape(-1)
    if flat.size != arr.size:
        raise ValueError(f"expected {arr.size} coefficients, got {flat.size}")
    arr.reshape(-1)[:] = [to_fraction(v) for v in flat]
    return arr


@dataclass(frozen=True, eq=False)
class BellExpression:
    """Coefficients ``coeffs[a, b, x, y]`` of a two-party Bell expression.

    Coefficients are exact and nonnegative. ``lhv_bound`` may be left unset
    and filled in later from :func:`pnpbell.lhv.lhv_bound`.
    """

    n: int
    m: int
    coeffs: np.ndarray
    lhv_bound: Fraction | None = None
    sigma: Fraction | None = None

    def __post_init__(self):
        if self.n < 1 or self.m < 2:
            raise ValueError("need n >= 1 settings and m >= 2 outcomes")
        coeffs = _as_exact_array(self.coeffs, (self.m, self.m, self.n, self.n))
        if any(c < 0 for c in coeffs.flat):
            raise ValueError("Bell coefficients must be nonnegative; shift the expression first")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        sigma = algebraic_bound(coeffs)
        if self.sigma is not None and to_fraction(self.sigma) != sigma:
            raise ValueError(f"stored algebraic bound {self.sigma} != recomputed {sigma}")
        object.__setattr__(self, "sigma", sigma)
        if self.lhv_bound is not None:
            object.__setattr__(self, "lhv_bound", to_fraction(self.lhv_bound))

    @property
    def float_coeffs(self) -> np.ndarray:
        return self.coeffs.astype(float)

    def with_lhv_bound(self, value) -> "BellExpression":
        return BellExpression(self.n, self.m, self.coeffs, to_fraction(value), self.sigma)

    def algebraic_bound(self, n_copies: int = 1) -> Fraction:
        """Algebraic maximum of the N-product expression; it factorizes as sigma**N."""
        return self.sigma**n_copies

    def is_flip_symmetric(self) -> bool:
        """True if flipping both parties' outputs of one copy leaves the coefficients unchanged."""
        if self.m != 2:
            return False
        return bool(np.all(self.coeffs == self.coeffs[::-1, ::-1]))

    def to_json(self) -> str:
        doc = {
            "n": self.n,
            "m": self.m,
            "coeffs": [
                [[[format_fraction(self.coeffs[a, b, x, y]) for y in range(self.n)]
                  for x in range(self.n)] for b in range(self.m)] for a in range(self.m)
            ],
            "C": None if self.lhv_bound is None else format_fraction(self.lhv_bound),
            "sigma": format_fraction(self.sigma),
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "BellExpression":
        doc = json.loads(text)
        n, m = int(doc["n"]), int(doc["m"])
        return cls(n, m, np.array(doc["coeffs"], dtype=object), doc.get("C"), doc.get("sigma"))


def algebraic_bound(coeffs: np.ndarray) -> Fraction:
    """Sum over setting pairs of the largest coefficient among outcome pairs."""
    m, _, n, _ = coeffs.shape
    return sum((max(coeffs[:, :, x, y].flat) for x in range(n) for y in range(n)), Fraction(0))


def make_chsh() -> BellExpression:
    """CHSH in nonlocal-game form, c = 1/4 [a xor b == x*y]."""
    coeffs = np.empty((2, 2, 2, 2), dtype=object)
    for a, b, x, y in np.ndindex(2, 2, 2, 2):
        coeffs[a, b, x, y] = Fraction(1, 4) if (a ^ b) == x * y else Fraction(0)
    return BellExpression(2, 2, coeffs, lhv_bound=Fraction(3, 4), sigma=Fraction(1))


@dataclass(frozen=True, eq=False)
class Behavior:
    """Conditional probability table ``P(a, b | x, y)`` over N copies.

    ``probs`` has shape ``(n**N, n**N, m**N, m**N)`` indexed ``[x, y, a, b]``.
    An object-dtype table holds exact rationals; a float table is checked to
    ``atol``.
    """

    N: int
    n: int
    m: int
    probs: np.ndarray
    atol: float = 1e-12

    def __post_init__(self):
        X, A = self.n**self.N, self.m**self.N
        shape = (X, X, A, A)
        if X * X * A * A > MAX_BEHAVIOR_ENTRIES:
            raise ValueError(
                f"behavior table with {X * X * A * A} entries exceeds the {MAX_BEHAVIOR_ENTRIES} cap"
            )
        probs = np.asarray(self.probs)
        if probs.dtype == object:
            probs = _as_exact_array(probs, shape)
            if any(p < 0 for p in probs.flat):
                raise ValueError("negative probability")
            sums = probs.sum(axis=(2, 3))
            if any(s != 1 for s in sums.flat):
                raise ValueError("behavior not normalized")
        else:
            probs = np.array(probs, dtype=float).reshape(shape)
            if np.any(probs < -self.atol):
                raise ValueError("negative probability")
            if not np.allclose(probs.sum(axis=(2, 3)), 1.0, atol=self.atol, rtol=0):
                raise ValueError("behavior not normalized")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def exact(self) -> bool:
        return self.probs.dtype == object

    def alice_marginals(self) -> np.ndarray:
        """``P(a_i = 0 | x)`` as an array of shape ``(n**N, N)``.

        Bob's settings are averaged uniformly; for behaviors without
        signalling between the parties the average is redundant.
        """
        return _copy_marginals(self.probs.sum(axis=3).sum(axis=1), self.n**self.N, self.m, self.N)

    def bob_marginals(self) -> np.ndarray:
        return _copy_marginals(self.probs.sum(axis=2).sum(axis=0), self.n**self.N, self.m, self.N)

    def mix(self, other: "Behavior", weight) -> "Behavior":
        """``weight * self + (1 - weight) * other``."""
        if (self.N, self.n, self.m) != (other.N, other.n, other.m):
            raise ValueError("dimension mismatch")
        return Behavior(self.N, self.n, self.m, weight * self.probs + (1 - weight) * other.probs)


def _copy_marginals(summed: np.ndarray, n_other: int, m: int, N: int) -> np.ndarray:
    # summed[x, a] is the party's table summed over the other party's settings
    digits = tuple_digits(m, N)
    out = np.stack([summed[:, digits[:, i] == 0].sum(axis=1) for i in range(N)], axis=1)
    if summed.dtype == object:
        return out / Fraction(n_other)
    return out / n_other


def uniform_behavior(N: int, n: int, m: int, exact: bool = True) -> Behavior:
    X, A = n**N, m**N
    if exact:
        probs = np.full((X, X, A, A), Fraction(1, A * A), dtype=object)
    else:
        probs = np.full((X, X, A, A), 1.0 / (A * A))
    return Behavior(N, n, m, probs)


def product_behavior(copies: Sequence[Behavior]) -> Behavior:
    """Independent copies: ``P(a, b | x, y) = prod_i P_i(a_i, b_i | x_i, y_i)``."""
    if not copies:
        raise ValueError("need at least one copy")
    n, m = copies[0].n, copies[0].m
    if any(c.N != 1 or c.n != n or c.m != m for c in copies):
        raise ValueError("copies must be single-copy behaviors of equal dimensions")
    probs = copies[0].probs
    for c in copies[1:]:
        # (x, y, a, b) x (X, Y, A, B) -> (x, X, y, Y, a, A, b, B)
        joined = np.multiply.outer(probs, c.probs).transpose(0, 4, 1, 5, 2, 6, 3, 7)
        s = joined.shape
        probs = joined.reshape(s[0] * s[1], s[2] * s[3], s[4] * s[5], s[6] * s[7])
    return Behavior(len(copies), n, m, probs)


def behavior_from_table(probs_abxy: np.ndarray) -> Behavior:
    """Single-copy behavior from a table indexed ``[a, b, x, y]``."""
    arr = np.asarray(probs_abxy)
    m, _, n, _ = arr.shape
    return Behavior(1, n, m, arr.transpose(2, 3, 0, 1))


@dataclass(frozen=True)
class DeterministicStrategy:
    """One party's map from encoded setting tuples to encoded outcome tuples."""

    party: str
    N: int
    n: int
    m: int
    table: tuple[int, ...]

    def __post_init__(self):
        if self.party not in (ALICE, BOB):
            raise ValueError(f"unknown party {self.party!r}")
        table = tuple(int(t) for t in self.table)
        if len(table) != self.n**self.N:
            raise ValueError("strategy table must cover every setting tuple")
        if any(not 0 <= t < self.m**self.N for t in table):
            raise ValueError("outcome code out of range")
        object.__setattr__(self, "table", table)

    def __call__(self, settings: Sequence[int]) -> tuple[int, ...]:
        return decode(self.table[encode(settings, self.n)], self.m, self.N)

    @property
    def index(self) -> int:
        """Lexicographic position among all strategies (first setting tuple most significant)."""
        return encode(self.table, self.m**self.N)

    @classmethod
    def from_index(cls, party: str, N: int, n: int, m: int, index: int) -> "DeterministicStrategy":
        return cls(party, N, n, m, decode(index, m**N, n**N))

    @classmethod
    def from_function(cls, party: str, N: int, n: int, m: int, fn) -> "DeterministicStrategy":
        """Build from ``fn(settings_tuple) -> outcomes_tuple``."""
        table = [encode(fn(tuple(x)), m) for x in tuple_digits(n, N)]
        return cls(party, N, n, m, tuple(table))

    @classmethod
    def product(cls, maps: Sequence["AssignmentStrategy"]) -> "DeterministicStrategy":
        """Per-copy maps applied componentwise."""
        first = maps[0]
        return cls.from_function(
            first.party, len(maps), first.n, first.m,
            lambda x: tuple(mp.values[xi] for mp, xi in zip(maps, x)),
        )

    def is_product(self) -> bool:
        digits_in = tuple_digits(self.n, self.N)
        digits_out = tuple_digits(self.m, self.N)[list(self.table)]
        for i in range(self.N):
            for s in range(self.n):
                if len(set(digits_out[digits_in[:, i] == s, i])) > 1:
                    return False
        return True

    def to_json(self) -> dict:
        return {"party": self.party, "N": self.N, "n": self.n, "m": self.m,
                "table": list(self.table), "index": self.index}


@dataclass(frozen=True)
class AssignmentStrategy:
    """Single-copy deterministic map ``alpha: [n] -> [m]``."""

    party: str
    values: tuple[int, ...]
    m: int = 2

    def __post_init__(self):
        if self.party not in (ALICE, BOB):
            raise ValueError(f"unknown party {self.party!r}")
        values = tuple(int(v) for v in self.values)
        if not values or any(not 0 <= v < self.m for v in values):
            raise ValueError("assignment must map every setting to a valid outcome")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return len(self.values)

    def __call__(self, setting: int) -> int:
        return self.values[setting]

    def to_deterministic(self, N: int = 1) -> DeterministicStrategy:
        return DeterministicStrategy.product([self] * N)


def all_assignments(party: str, n: int, m: int = 2) -> list[AssignmentStrategy]:
    return [AssignmentStrategy(party, tuple(v), m) for v in tuple_digits(m, n)]


def behavior_from_strategies(sa: DeterministicStrategy, sb: DeterministicStrategy) -> Behavior:
    if sa.party != ALICE or sb.party != BOB:
        raise ValueError("expected an Alice strategy and a Bob strategy")
    if (sa.N, sa.n, sa.m) != (sb.N, sb.n, sb.m):
        raise ValueError("strategy dimensions differ")
    X, A = sa.n**sa.N, sa.m**sa.N
    probs = np.full((X, X, A, A), Fraction(0), dtype=object)
    for x in range(X):
        for y in range(X):
            probs[x, y, sa.table[x], sb.table[y]] = Fraction(1)
    return Behavior(sa.N, sa.n, sa.m, probs)


def _check_dims(expr: BellExpression, behavior: Behavior, N: int):
    if (behavior.N, behavior.n, behavior.m) != (N, expr.n, expr.m):
        raise ValueError(
            f"dimension mismatch: behavior (N={behavior.N}, n={behavior.n}, m={behavior.m}) "
            f"vs expression (N={N}, n={expr.n}, m={expr.m})"
        )


def evaluate_bell(expr: BellExpression, behavior: Behavior):
    """``sum_{a,b,x,y} P(a, b | x, y) c[a, b, x, y]`` for a single-copy behavior."""
    _check_dims(expr, behavior, 1)
    return evaluate_product_bell(expr, 1, behavior)


def evaluate_product_bell(expr: BellExpression, N: int, behavior: Behavior):
    """Value of the N-product expression.

    The product coefficient tensor is never formed; the behavior is contracted
    against one copy of the coefficients at a time.
    """
    _check_dims(expr, behavior, N)
    n, m = expr.n, expr.m
    coeffs = expr.coeffs if behavior.exact else expr.float_coeffs
    probs = behavior.probs.reshape((n,) * N + (n,) * N + (m,) * N + (m,) * N)
    letters = iter(string.ascii_letters)
    xs, ys, as_, bs = ([next(letters) for _ in range(N)] for _ in range(4))
    operands = ["".join(xs + ys + as_ + bs)] + [as_[i] + bs[i] + xs[i] + ys[i] for i in range(N)]
    spec = ",".join(operands) + "->"
    value = np.einsum(spec, probs, *([coeffs] * N), optimize="greedy")
    return value if behavior.exact else float(value)


def product_coefficients_int(expr: BellExpression, N: int) -> tuple[np.ndarray, int]:
    """Integer-scaled product coefficients ``W[x, a, y, b]`` and the scale ``D**N``.

    ``W / scale`` equals ``prod_i c[a_i, b_i, x_i, y_i]`` exactly. Used by the
    bound enumerators, which need the tensor explicitly.
    """
    den = 1
    for c in expr.coeffs.flat:
        den = np.lcm(den, c.denominator)
    per_copy = np.array([[[[int(expr.coeffs[a, b, x, y] * den) for b in range(expr.m)]
                           for y in range(expr.n)] for a in range(expr.m)]
                         for x in range(expr.n)], dtype=object)
    return tensor_power(per_copy, N), int(den) ** N


def tensor_power(per_copy: np.ndarray, N: int) -> np.ndarray:
    """N-fold product of a ``[x, a, y, b]`` tensor with copy 1 most significant."""
    W = per_copy
    for _ in range(N - 1):
        joined = np.multiply.outer(W, per_copy).transpose(0, 4, 1, 5, 2, 6, 3, 7)
        s = joined.shape
        W = joined.reshape(s[0] * s[1], s[2] * s[3], s[4] * s[5], s[6] * s[7])
    return W


def objective_tensor(expr: BellExpression, N: int) -> np.ndarray:
    """Exact product coefficients as a Fraction tensor ``[x, a, y, b]``."""
    W, scale = product_coefficients_int(expr, N)
    return np.vectorize(lambda v: Fraction(int(v), scale), otypes=[object])(W)



