"""Monte Carlo simulation of the lossy N-copy Bell experiment.

Random stream contract: trial t consumes a fixed block of ``D`` raw 64-bit
words from a Philox-4x64 generator keyed by the seed, where
``D = 3N + 2`` rounded up to a multiple of 4. Word ``t * D + k`` is turned
into a uniform double as ``(w >> 11) * 2**-53``. Within a block the order is:
Alice's N settings, Bob's N settings, Alice's click, Bob's click, then one
word per copy selecting the joint outcome ``(a_i, b_i)`` by inverse CDF over
the order (0,0), (0,1), (1,0), (1,1). Any partition of the trial range into
chunks therefore yields identical draws.
"""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .bell import BellExpression, Behavior, evaluate_product_bell, make_chsh, objective_tensor
from .pnp import penalty_terms
from .quantum import QubitPairStrategy, apply_visibility

log = logging.getLogger(__name__)

CHUNK_TRIALS = 1 << 16
_TO_UNIT = 2.0**-53


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    strategy: QubitPairStrategy
    N: int
    eta: float
    v: float
    trials: int
    seed: int
    expr: BellExpression = field(default_factory=make_chsh)

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if self.N < 1:
            raise ValueError("N must be positive")
        if not 0 <= self.eta <= 1 or not 0 <= self.v <= 1:
            raise ValueError("eta and v must lie in [0, 1]")
        if self.expr.n != self.strategy.n or self.expr.m != 2:
            raise ValueError("strategy does not match the expression")

    @property
    def block(self) -> int:
        return -(-(3 * self.N + 2) // 4) * 4


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    empirical_behavior: Behavior
    pnp_estimate: float
    penalty_estimate: tuple[float, float]
    product_value_estimate: float
    std_error: float
    counts: np.ndarray  # [x, y, a, b] over tuple codes
    kappa: Fraction
    unobserved_settings: int

    @property
    def setting_counts(self) -> np.ndarray:
        return self.counts.sum(axis=(2, 3))

    def to_json(self) -> dict:
        return {
            "trials": int(self.counts.sum()),
            "product_value_estimate": self.product_value_estimate,
            "std_error": self.std_error,
            "penalty_alice": self.penalty_estimate[0],
            "penalty_bob": self.penalty_estimate[1],
            "kappa": f"{self.kappa.numerator}/{self.kappa.denominator}",
            "pnp_estimate": self.pnp_estimate,
            "unobserved_settings": self.unobserved_settings,
        }

    def counts_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "a", "b", "count"])
        for idx in zip(*np.nonzero(self.counts)):
            w.writerow([*map(int, idx), int(self.counts[idx])])
        return buf.getvalue()


def _outcome_tables(config: ExperimentConfig) -> np.ndarray:
    """Cumulative outcome distributions ``[case, x, y, 4]``; case = 2*clickA + clickB."""
    s = apply_visibility(config.strategy, config.v)
    n = s.n
    joint = s.joint_table()  # [a, b, x, y]
    pa, pb = s.alice_local(), s.bob_local()  # [a, x], [b, y]
    alpha, beta = s.alice_assign.values, s.bob_assign.values
    T = np.zeros((4, n, n, 2, 2))
    for x in range(n):
        for y in range(n):
            T[0, x, y, alpha[x], beta[y]] = 1.0
            T[1, x, y, alpha[x], :] = pb[:, y]
            T[2, x, y, :, beta[y]] = pa[:, x]
            T[3, x, y] = joint[:, :, x, y]
    T = np.clip(T.reshape(4, n, n, 4), 0.0, None)
    cdf = np.cumsum(T, axis=-1)
    cdf /= cdf[..., -1:]
    return cdf


def _simulate_chunk(config: ExperimentConfig, cdf: np.ndarray, start: int, stop: int) -> np.ndarray:
    N, n, D = config.N, config.strategy.n, config.block
    bg = np.random.Philox(key=config.seed)
    bg.advance(start * D // 4)
    raw = bg.random_raw((stop - start) * D).reshape(stop - start, D)
    u = (raw >> np.uint64(11)).astype(np.float64) * _TO_UNIT
    xs = np.minimum((u[:, :N] * n).astype(np.int64), n - 1)
    ys = np.minimum((u[:, N:2 * N] * n).astype(np.int64), n - 1)
    click_a = u[:, 2 * N] < config.eta
    click_b = u[:, 2 * N + 1] < config.eta
    case = 2 * click_a + click_b
    rows = cdf[case[:, None], xs, ys]  # [trial, copy, 4]
    ab = (u[:, 2 * N + 2:3 * N + 2, None] >= rows[..., :3]).sum(axis=-1)
    a, b = ab >> 1, ab & 1
    pw_n = n ** np.arange(N - 1, -1, -1)
    pw_2 = 2 ** np.arange(N - 1, -1, -1)
    X, A = n**N, 2**N
    flat = (((xs @ pw_n) * X + ys @ pw_n) * A + a @ pw_2) * A + b @ pw_2
    return np.bincount(flat, minlength=X * X * A * A)


def simulate_counts(config: ExperimentConfig, threads: int = 1) -> np.ndarray:
    cdf = _outcome_tables(config)
    chunks = [(s, min(s + CHUNK_TRIALS, config.trials)) for s in range(0, config.trials, CHUNK_TRIALS)]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        parts = pool.map(lambda c: _simulate_chunk(config, cdf, *c), chunks)
        total = sum(parts)
    X, A = config.strategy.n**config.N, 2**config.N
    return np.asarray(total, dtype=np.int64).reshape(X, X, A, A)


def empirical_behavior(counts: np.ndarray, N: int, n: int) -> tuple[Behavior, int]:
    """Per-setting normalized frequencies; unobserved settings are filled uniformly."""
    per = counts.sum(axis=(2, 3), keepdims=True)
    A = counts.shape[2]
    missing = int(np.sum(per == 0))
    with np.errstate(invalid="ignore", divide="ignore"):
        probs = np.where(per > 0, counts / np.maximum(per, 1), 1.0 / (A * A))
    return Behavior(N, n, 2, probs, atol=1e-9), missing


def stratified_estimate(expr: BellExpression, N: int, counts: np.ndarray) -> tuple[float, float]:
    """Plug-in N-copy value and its standard error from per-setting sums."""
    W = objective_tensor(expr, N).astype(float)  # [x, a, y, b]
    W = W.transpose(0, 2, 1, 3)  # [x, y, a, b]
    n_s = counts.sum(axis=(2, 3))
    seen = n_s > 0
    S = n_s.size
    f = W * S  # the estimate is the mean over settings of E_s[f]
    safe = np.maximum(n_s, 1)
    m1 = (counts * f).sum(axis=(2, 3)) / safe
    m2 = (counts * f * f).sum(axis=(2, 3)) / safe
    var = np.where(seen, (m2 - m1 * m1) / safe, 0.0)
    se = float(np.sqrt(np.clip(var, 0, None).sum()) / S)
    return float(m1[seen].sum() / S), se


def run_experiment(config: ExperimentConfig, kappa=Fraction(0), threads: int = 1) -> ExperimentResult:
    kappa = Fraction(kappa)
    counts = simulate_counts(config, threads)
    behavior, missing = empirical_behavior(counts, config.N, config.strategy.n)
    if missing:
        log.warning("%d of %d setting pairs unobserved; filled with uniform frequencies",
                    missing, counts.shape[0] * counts.shape[1])
    product = float(evaluate_product_bell(config.expr, config.N, behavior))
    _, se = stratified_estimate(config.expr, config.N, counts)
    pen = penalty_terms(behavior)
    A_pen, B_pen = float(pen.A_pen), float(pen.B_pen)
    pnp = product - float(kappa) * (A_pen + B_pen)
    return ExperimentResult(behavior, pnp, (A_pen, B_pen), product, se, counts, kappa, missing)


def repeat_seed(seed: int, r: int) -> int:
    return int(np.random.SeedSequence([seed, r]).generate_state(1, dtype=np.uint64)[0])


def penalty_bias_probe(config: ExperimentConfig, repeats: int, threads: int = 1) -> dict:
    """Mean and spread of the empirical penalty ``A_pen + B_pen`` across seeded repeats."""
    values = []
    for r in range(repeats):
        cfg = ExperimentConfig(config.strategy, config.N, config.eta, config.v, config.trials,
                               repeat_seed(config.seed, r), config.expr)
        res = run_experiment(cfg, threads=threads)
        values.append(sum(res.penalty_estimate))
    if not values:
        return {"repeats": 0, "trials": config.trials, "mean": None, "std": None, "values": []}
    arr = np.array(values)
    return {
        "repeats": repeats,
        "trials": config.trials,
        "mean": float(arr.mean()),
        "std": float(arr.std(ddof=1)) if repeats > 1 else 0.0,
        "values": values,
    }
