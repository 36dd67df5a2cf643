"""Exact local-hidden-variable bounds by exhaustive strategy enumeration.

For a fixed Alice strategy Bob's best response is chosen independently for
each of his setting tuples, so only Alice's strategies are enumerated. Alice's
table is split into a high half and a low half whose partial sums are
precomputed; every (high, low) pair is then scored with one vectorized
add-max-sum.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .bell import (
    ALICE,
    BOB,
    BellExpression,
    DeterministicStrategy,
    behavior_from_strategies,
    evaluate_product_bell,
    product_coefficients_int,
)

log = logging.getLogger(__name__)

DEFAULT_CAP = 20_000_000
PROGRESS_EVERY = 2**20
_CHUNK_ELEMENTS = 2**22


class CapExceeded(ValueError):
    """Raised when an exhaustive scan would exceed its configured size cap."""


@dataclass(frozen=True)
class BoundResult:
    value: Fraction
    witness_alice: DeterministicStrategy
    witness_bob: DeterministicStrategy
    strategies_scanned: int
    pruned: bool = False

    def verify(self, expr: BellExpression) -> bool:
        """Re-evaluate the witness pair exactly."""
        behavior = behavior_from_strategies(self.witness_alice, self.witness_bob)
        return evaluate_product_bell(expr, self.witness_alice.N, behavior) == self.value

    def to_json(self) -> dict:
        return {
            "value": f"{self.value.numerator}/{self.value.denominator}",
            "witness_alice": self.witness_alice.to_json(),
            "witness_bob": self.witness_bob.to_json(),
            "scanned": self.strategies_scanned,
            "pruned": self.pruned,
        }


def _smallest_int_dtype(bound: int):
    for dt in (np.int16, np.int32, np.int64):
        if bound < np.iinfo(dt).max:
            return dt
    raise CapExceeded("coefficient magnitudes too large for integer enumeration")


def _partial_sums(W: np.ndarray, positions: range) -> np.ndarray:
    """Sums of ``W[x, s(x)]`` over ``positions`` for every assignment s, lexicographic."""
    _, A, YB = W.shape
    acc = np.zeros((1, YB), dtype=W.dtype)
    for x in positions:
        acc = (acc[:, None, :] + W[x][None, :, :]).reshape(-1, YB)
    return acc


def product_lhv_bound(
    expr: BellExpression,
    N: int,
    cap: int = DEFAULT_CAP,
    prune_symmetry: bool = False,
    threads: int = 1,
) -> BoundResult:
    """Exact maximum of the N-product expression over deterministic strategy pairs.

    With ``prune_symmetry`` Alice's outcome on the first setting tuple is fixed
    to all zeros; this is only valid (and only applied) when flipping one
    copy's outputs for both parties leaves the coefficients invariant.
    """
    if expr.m != 2:
        raise ValueError("bound machinery supports binary outcomes only")
    if N < 1:
        raise ValueError("N must be positive")
    X, A = expr.n**N, expr.m**N
    n_alice = A**X
    if n_alice > cap:
        raise CapExceeded(f"{n_alice} Alice strategies exceed the cap of {cap}")

    W_obj, scale = product_coefficients_int(expr, N)
    dtype = _smallest_int_dtype(int(np.max(W_obj)) * X + 1)
    W = W_obj.astype(dtype)  # [x, a, y, b]
    Y, B = W.shape[2], W.shape[3]
    Wf = W.reshape(X, A, Y * B)

    pruned = bool(prune_symmetry and expr.is_flip_symmetric())
    h = X // 2
    hi = _partial_sums(Wf, range(h))
    lo = _partial_sums(Wf, range(h, X))
    n_lo = lo.shape[0]
    if pruned:
        # first digit of the high half is Alice's output on setting tuple 0
        hi = hi[: hi.shape[0] // A] if h > 0 else hi
        if h == 0:
            lo = lo[: n_lo // A]
            n_lo = lo.shape[0]
    rows_per_chunk = max(1, _CHUNK_ELEMENTS // (n_lo * Y * B))
    chunks = [(s, min(s + rows_per_chunk, hi.shape[0])) for s in range(0, hi.shape[0], rows_per_chunk)]
    lo3 = lo.reshape(1, n_lo, Y, B)

    def scan(bounds):
        start, stop = bounds
        block = hi[start:stop].reshape(-1, 1, Y, B) + lo3
        scores = block.max(axis=3).sum(axis=2, dtype=np.int64)
        flat = int(np.argmax(scores))
        return int(scores.flat[flat]), start * n_lo + flat

    best_val, best_idx, scanned = None, None, 0
    next_report = PROGRESS_EVERY
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        for (start, stop), (val, idx) in zip(chunks, pool.map(scan, chunks)):
            scanned += (stop - start) * n_lo
            if best_val is None or val > best_val:
                best_val, best_idx = val, idx
            if scanned >= next_report:
                log.info("scanned %d of %d Alice strategies", scanned, hi.shape[0] * n_lo)
                next_report = (scanned // PROGRESS_EVERY + 1) * PROGRESS_EVERY

    hi_idx, lo_idx = divmod(best_idx, n_lo)
    if pruned and h == 0:
        alice_index = lo_idx
    else:
        alice_index = hi_idx * (A ** (X - h)) + lo_idx
    witness_alice = DeterministicStrategy.from_index(ALICE, N, expr.n, expr.m, alice_index)
    table = np.array(witness_alice.table)
    bob_scores = W[np.arange(X), table].sum(axis=0, dtype=np.int64)  # [y, b]
    witness_bob = DeterministicStrategy(BOB, N, expr.n, expr.m, tuple(int(b) for b in bob_scores.argmax(axis=1)))
    return BoundResult(Fraction(best_val, scale), witness_alice, witness_bob, scanned, pruned)


def lhv_bound(expr: BellExpression, cap: int = DEFAULT_CAP) -> BoundResult:
    """Exact LHV bound C of a single-copy expression (m = 2, n <= 4)."""
    if expr.n > 4:
        raise CapExceeded("single-copy enumeration supports at most 4 settings")
    return product_lhv_bound(expr, 1, cap=cap)


def product_strategy_bound(expr: BellExpression, N: int) -> Fraction:
    """Bound ``C**N`` reached by product strategies."""
    C = expr.lhv_bound if expr.lhv_bound is not None else lhv_bound(expr).value
    return C**N
