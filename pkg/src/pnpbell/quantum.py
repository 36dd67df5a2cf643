"""Two-qubit strategies and the quantities Q, A, B.

Q is the Bell value of the joint state. A is the value obtained when Alice
measures her reduced state while Bob's outcome is replaced by his assignment
beta(y); B is the mirror image. The analytic frontier below is the optimal
family along which A = B.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .bell import (
    ALICE,
    BOB,
    AssignmentStrategy,
    BellExpression,
    Behavior,
    all_assignments,
    make_chsh,
    product_behavior,
)

log = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

Q_MIN = 0.75
Q_MAX = 0.5 + 0.5 / np.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        rho = np.array(self.matrix, dtype=complex)
        if rho.shape != (4, 4):
            raise ValueError("two-qubit state must be 4x4")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
            raise ValueError("state is not Hermitian")
        if abs(np.trace(rho) - 1) > HERMITIAN_TOL:
            raise ValueError("state trace differs from 1")
        if np.linalg.eigvalsh(rho).min() < -PSD_TOL:
            raise ValueError("state has a negative eigenvalue")
        rho.setflags(write=False)
        object.__setattr__(self, "matrix", rho)

    def reduced_alice(self) -> np.ndarray:
        return np.einsum("ikjk->ij", self.matrix.reshape(2, 2, 2, 2))

    def reduced_bob(self) -> np.ndarray:
        return np.einsum("kikj->ij", self.matrix.reshape(2, 2, 2, 2))

    def with_visibility(self, v: float) -> "DensityMatrix":
        if not 0 <= v <= 1:
            raise ValueError("visibility must lie in [0, 1]")
        return DensityMatrix(v * self.matrix + (1 - v) * np.eye(4) / 4)


@dataclass(frozen=True, eq=False)
class BinaryMeasurement:
    """Effects ``(M0, M1)`` of a two-outcome qubit measurement."""

    effects: np.ndarray

    def __post_init__(self):
        eff = np.array(self.effects, dtype=complex)
        if eff.shape != (2, 2, 2):
            raise ValueError("expected two 2x2 effects")
        if np.max(np.abs(eff[0] + eff[1] - IDENTITY)) > HERMITIAN_TOL:
            raise ValueError("effects do not sum to the identity")
        for M in eff:
            if np.max(np.abs(M - M.conj().T)) > HERMITIAN_TOL or np.linalg.eigvalsh(M).min() < -PSD_TOL:
                raise ValueError("effect is not positive semidefinite")
        eff.setflags(write=False)
        object.__setattr__(self, "effects", eff)

    @classmethod
    def from_observable(cls, O: np.ndarray) -> "BinaryMeasurement":
        """``M_a = (I + (-1)^a O) / 2``."""
        O = np.asarray(O, dtype=complex)
        return cls(np.stack([(IDENTITY + O) / 2, (IDENTITY - O) / 2]))

    @classmethod
    def from_bloch(cls, vec: Sequence[float]) -> "BinaryMeasurement":
        x, y, z = vec
        return cls.from_observable(x * SIGMA_X + y * SIGMA_Y + z * SIGMA_Z)

    @property
    def observable(self) -> np.ndarray:
        return self.effects[0] - self.effects[1]


@dataclass(frozen=True, eq=False)
class QubitPairStrategy:
    state: DensityMatrix
    alice: tuple[BinaryMeasurement, ...]
    bob: tuple[BinaryMeasurement, ...]
    alice_assign: AssignmentStrategy
    bob_assign: AssignmentStrategy

    def __post_init__(self):
        object.__setattr__(self, "alice", tuple(self.alice))
        object.__setattr__(self, "bob", tuple(self.bob))
        n = len(self.alice)
        if len(self.bob) != n or self.alice_assign.n != n or self.bob_assign.n != n:
            raise ValueError("measurement and assignment counts must agree")
        if self.alice_assign.party != ALICE or self.bob_assign.party != BOB:
            raise ValueError("assignment parties are swapped")

    @property
    def n(self) -> int:
        return len(self.alice)

    def joint_table(self) -> np.ndarray:
        """``P(a, b | x, y)`` indexed ``[a, b, x, y]``."""
        return _joint(self.state.matrix, _effects(self.alice), _effects(self.bob))

    def alice_local(self) -> np.ndarray:
        """``P(a | x)`` from Alice's reduced state, indexed ``[a, x]``."""
        return _local(self.state.reduced_alice(), _effects(self.alice))

    def bob_local(self) -> np.ndarray:
        return _local(self.state.reduced_bob(), _effects(self.bob))


@dataclass(frozen=True)
class TradeoffPoint:
    q: float
    Q: float
    A: float
    B: float


def _effects(meas: Sequence[BinaryMeasurement]) -> np.ndarray:
    return np.stack([m.effects for m in meas])  # [x, a, i, j]


def _joint(rho: np.ndarray, EA: np.ndarray, EB: np.ndarray) -> np.ndarray:
    # tr((M (x) N) rho) = sum M[i,j] N[k,l] rho[(j,l),(i,k)]
    r = rho.reshape(2, 2, 2, 2)
    return np.einsum("xaij,ybkl,jlik->abxy", EA, EB, r).real


def _local(rho1: np.ndarray, E: np.ndarray) -> np.ndarray:
    return np.einsum("xaij,ji->ax", E, rho1).real


def _check_q(q: float):
    if not 0 <= q <= 1:
        raise ValueError(f"q = {q} lies outside [0, 1]")


def optimal_state(q: float) -> DensityMatrix:
    """Pure state with Schmidt weights ``(1 +- sqrt(1 - q^2)) / 2``."""
    _check_q(q)
    t = np.sqrt(1 - q * q)
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = (1 + t) / 2
    rho[3, 3] = (1 - t) / 2
    rho[0, 3] = rho[3, 0] = q / 2
    return DensityMatrix(rho)


def _observable(q: float, s: int, sx_sign: int) -> np.ndarray:
    r = np.sqrt(1 + q * q)
    cz = np.sqrt((1 + s * q / r) / (1 + q))
    cx = np.sqrt(q / (1 + q) * (1 - s / r))
    return cz * SIGMA_Z + sx_sign * cx * SIGMA_X


def optimal_observables(q: float) -> tuple[list[BinaryMeasurement], list[BinaryMeasurement]]:
    """Sharp measurements in the z-x plane paired with :func:`optimal_state`."""
    _check_q(q)
    alice = [BinaryMeasurement.from_observable(_observable(q, (-1) ** x, (-1) ** x)) for x in range(2)]
    bob = [BinaryMeasurement.from_observable(_observable(q, (-1) ** y, -((-1) ** y))) for y in range(2)]
    return alice, bob


def frontier_Q(q):
    return 0.5 + 0.25 * np.sqrt(1 + np.square(q))


def frontier_A(q):
    q = np.asarray(q, dtype=float)
    return 0.5 + 0.25 * np.sqrt((1 - q) * (1 + q / np.sqrt(1 + q * q)))


def q_of_Q(Q: float) -> float:
    if not Q_MIN - 1e-15 <= Q <= Q_MAX + 1e-15:
        raise ValueError(f"Q = {Q} lies outside [3/4, 1/2 + 1/(2 sqrt 2)]")
    return float(np.sqrt(max(0.0, min(1.0, (4 * Q - 2) ** 2 - 1))))


def tradeoff_A_of_Q(Q: float) -> TradeoffPoint:
    q = q_of_Q(Q)
    A = float(frontier_A(q))
    return TradeoffPoint(q, Q, A, A)


def compute_QAB(strategy: QubitPairStrategy, expr: BellExpression) -> tuple[float, float, float]:
    if expr.n != strategy.n or expr.m != 2:
        raise ValueError("expression and strategy dimensions differ")
    c = expr.float_coeffs  # [a, b, x, y]
    return _qab(c, strategy.joint_table(), strategy.alice_local(), strategy.bob_local(),
                strategy.alice_assign.values, strategy.bob_assign.values)


def _qab(c, joint, pa, pb, alpha, beta):
    n = c.shape[2]
    ys = np.arange(n)
    Q = float(np.sum(c * joint))
    # A: Bob's outcome fixed to beta(y)
    cA = c[:, np.asarray(beta), :, ys]  # [y, a, x]
    A = float(np.einsum("yax,ax->", cA, pa))
    cB = c[np.asarray(alpha), :, ys, :]  # [x, b, y]
    B = float(np.einsum("xby,by->", cB, pb))
    return Q, A, B


def _assignment_value(c: np.ndarray, alpha, beta) -> float:
    n = c.shape[2]
    return float(sum(c[alpha[x], beta[y], x, y] for x in range(n) for y in range(n)))


def best_assignments(state, alice, bob, expr: BellExpression):
    """Among assignment pairs reproducing C, the one maximizing A + B (first on ties)."""
    c = expr.float_coeffs
    C = float(expr.lhv_bound)
    joint = _joint(state.matrix, _effects(alice), _effects(bob))
    pa, pb = _local(state.reduced_alice(), _effects(alice)), _local(state.reduced_bob(), _effects(bob))
    best, best_sum = None, -np.inf
    for al in all_assignments(ALICE, expr.n):
        for be in all_assignments(BOB, expr.n):
            if abs(_assignment_value(c, al.values, be.values) - C) > 1e-12:
                continue
            _, A, B = _qab(c, joint, pa, pb, al.values, be.values)
            if A + B > best_sum + 1e-13:
                best, best_sum = (al, be), A + B
    return best


def optimal_strategy(q: float, expr: BellExpression | None = None) -> QubitPairStrategy:
    expr = expr or make_chsh()
    state = optimal_state(q)
    alice, bob = optimal_observables(q)
    al, be = best_assignments(state, alice, bob, expr)
    return QubitPairStrategy(state, alice, bob, al, be)


def apply_visibility(strategy: QubitPairStrategy, v: float) -> QubitPairStrategy:
    return QubitPairStrategy(strategy.state.with_visibility(v), strategy.alice, strategy.bob,
                             strategy.alice_assign, strategy.bob_assign)


def single_copy_behavior(strategy: QubitPairStrategy) -> Behavior:
    return Behavior(1, strategy.n, 2, strategy.joint_table().transpose(2, 3, 0, 1))


def iid_behavior(strategy: QubitPairStrategy, N: int) -> Behavior:
    """Behavior of N independent copies of the strategy, all detectors clicking."""
    return product_behavior([single_copy_behavior(strategy)] * N)


def random_strategy(rng: np.random.Generator, n: int = 2) -> QubitPairStrategy:
    """Haar-random pure state and uniformly random sharp measurements."""
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    psi /= np.linalg.norm(psi)
    rho = np.outer(psi, psi.conj())
    rho = (rho + rho.conj().T) / 2

    def meas():
        v = rng.normal(size=3)
        return BinaryMeasurement.from_bloch(v / np.linalg.norm(v))

    alice = [meas() for _ in range(n)]
    bob = [meas() for _ in range(n)]
    al = AssignmentStrategy(ALICE, tuple(rng.integers(0, 2, n)))
    be = AssignmentStrategy(BOB, tuple(rng.integers(0, 2, n)))
    return QubitPairStrategy(DensityMatrix(rho), alice, bob, al, be)


# seesaw-style oracle over pure states and sharp measurements

@dataclass(frozen=True)
class SeesawResult:
    value: float  # best A + B
    Q: float
    A: float
    B: float
    alice_assign: tuple[int, ...]
    bob_assign: tuple[int, ...]
    params: tuple[float, ...]


def _params_to_arrays(p: np.ndarray, n: int):
    th = p[0]
    psi = np.zeros(4)
    psi[0], psi[3] = np.cos(th), np.sin(th)
    rho = np.outer(psi, psi).astype(complex)
    angles = p[1:].reshape(2 * n, 2)
    st, ct = np.sin(angles[:, 0]), np.cos(angles[:, 0])
    O = (st * np.cos(angles[:, 1]))[:, None, None] * SIGMA_X + (st * np.sin(angles[:, 1]))[:, None, None] * SIGMA_Y \
        + ct[:, None, None] * SIGMA_Z
    E = np.stack([(IDENTITY + O) / 2, (IDENTITY - O) / 2], axis=1)  # [k, a, i, j]
    return rho, E[:n], E[n:]


def _seesaw_restart(args):
    c, n, Q_target, alpha, beta, seed = args
    rng = np.random.default_rng(seed)
    rA_cache = {}

    def qab(p):
        key = p.tobytes()
        if key not in rA_cache:
            rho, EA, EB = _params_to_arrays(p, n)
            r4 = rho.reshape(2, 2, 2, 2)
            rA = np.einsum("ikjk->ij", r4)
            rB = np.einsum("kikj->ij", r4)
            rA_cache.clear()
            rA_cache[key] = _qab(c, _joint(rho, EA, EB), _local(rA, EA), _local(rB, EB), alpha, beta)
        return rA_cache[key]

    x0 = np.concatenate([[rng.uniform(0, np.pi / 2)], rng.uniform(0, 2 * np.pi, 4 * n)])
    res = minimize(lambda p: -(qab(p)[1] + qab(p)[2]), x0, method="SLSQP",
                   constraints=[{"type": "ineq", "fun": lambda p: qab(p)[0] - Q_target}],
                   options={"ftol": 1e-14, "maxiter": 500})
    Q, A, B = qab(res.x)
    return Q, A, B, tuple(float(v) for v in res.x)


def seesaw_tradeoff_oracle(Q_target: float, restarts: int = 200, seed: int = 0, threads: int = 1,
                           expr: BellExpression | None = None, feas_tol: float = 1e-9) -> SeesawResult:
    """Best ``A + B`` found subject to ``Q >= Q_target``.

    Each restart runs a constrained local optimization over the Schmidt angle
    and the measurement Bloch angles for one assignment pair; pairs are cycled
    over restarts. Heuristic: reports the best feasible point seen.
    """
    expr = expr or make_chsh()
    c = expr.float_coeffs
    n = expr.n
    pairs = [(al.values, be.values) for al in all_assignments(ALICE, n) for be in all_assignments(BOB, n)]
    seeds = np.random.SeedSequence(seed).generate_state(max(restarts, 1), dtype=np.uint64)
    jobs = [(c, n, Q_target, *pairs[k % len(pairs)], int(seeds[k])) for k in range(restarts)]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        outcomes = list(pool.map(_seesaw_restart, jobs))
    best = None
    for job, (Q, A, B, params) in zip(jobs, outcomes):
        if Q < Q_target - feas_tol:
            continue
        if best is None or A + B > best.value:
            best = SeesawResult(A + B, Q, A, B, job[3], job[4], params)
    if best is None:
        log.warning("no feasible point found for Q >= %g", Q_target)
        return SeesawResult(float("nan"), float("nan"), float("nan"), float("nan"), (), (), ())
    return best
