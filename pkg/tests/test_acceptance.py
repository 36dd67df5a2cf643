"""Exit criteria, one test per criterion; each records a pass/fail line."""

import time
from fractions import Fraction

import numpy as np
import pytest

from pnpbell.efficiency import (
    asymptotic_eta,
    critical_eta,
    eta_crit_curve,
    fig2_curves,
    required_eta,
    visibility_curve,
)
from pnpbell.lhv import lhv_bound, product_lhv_bound
from pnpbell.pnp import PnpConfig, certify_pnp_lhv_bound, min_sufficient_kappa_scan, penalty_terms
from pnpbell.polytope import lemma2_report, verify_lemma1
from pnpbell.quantum import (
    Q_MAX,
    compute_QAB,
    frontier_A,
    frontier_Q,
    optimal_strategy,
    random_strategy,
)
from pnpbell.simulator import ExperimentConfig, repeat_seed, run_experiment
from pnpbell.efficiency import EfficiencyQuery, pnp_value_with_efficiency

F = Fraction


@pytest.mark.slow
def test_criterion_01_lhv_bounds(chsh, report):
    c1 = lhv_bound(chsh).value
    t = time.perf_counter()
    c2 = product_lhv_bound(chsh, 2).value
    t2 = time.perf_counter() - t
    c3 = product_lhv_bound(chsh, 3).value
    ok = c1 == F(3, 4) and c2 == F(10, 16) and c3 == F(31, 64) and t2 < 1
    report(1, ok, f"C={c1}, C_2={c2} ({t2:.2f}s), C_3={c3}")


def test_criterion_02_result1_certification(chsh, report):
    t = time.perf_counter()
    at_kappa = certify_pnp_lhv_bound(PnpConfig(chsh, 2, F(7, 8))).bound
    at_zero = certify_pnp_lhv_bound(PnpConfig(chsh, 2, F(0))).bound
    grid = [F(k, 8) for k in range(0, 17, 2)]
    scan = min_sufficient_kappa_scan(chsh, 2, grid)
    values = [scan[k] for k in grid]
    monotone = all(a >= b for a, b in zip(values, values[1:]))
    elapsed = time.perf_counter() - t
    ok = at_kappa == F(9, 16) and at_zero == F(10, 16) and monotone and elapsed < 60
    report(2, ok, f"kappa=7/8 -> {at_kappa} (target 9/16), kappa=0 -> {at_zero}, "
                  f"monotone={monotone}, {elapsed:.1f}s")


def test_criterion_03_lemma2(report):
    t = time.perf_counter()
    rep = lemma2_report(2, 2)
    elapsed = time.perf_counter() - t
    ok = rep["num_subsets"] == 256 and rep["pass"] and rep["min_nonzero_marginal"] >= F(1, 2) and elapsed < 300
    report(3, ok, f"{rep['num_subsets']} subsets ({rep['distinct_polytopes']} distinct), "
                  f"min nonzero marginal {rep['min_nonzero_marginal']}, {elapsed:.1f}s")


def test_criterion_04_lemma1(report):
    rep = verify_lemma1(2, 2, trials=100, seed=42)
    report(4, rep["violations"] == 0, f"{rep['equal']}/{rep['trials']} equal, {rep['violations']} violations")


def test_criterion_05_frontier(chsh, report):
    t = time.perf_counter()
    worst = 0.0
    for q in np.linspace(0, 1, 101):
        Q, A, B = compute_QAB(optimal_strategy(q, chsh), chsh)
        worst = max(worst, abs(Q - frontier_Q(q)), abs(A - frontier_A(q)), abs(B - frontier_A(q)))
    elapsed = time.perf_counter() - t
    report(5, worst < 1e-10 and elapsed < 1, f"max deviation {worst:.2e}, {elapsed:.2f}s")


def test_criterion_06_efficiency_anchors(report):
    eta1 = required_eta(Q_MAX, 0.5, 0.5, 1, 0.75)
    plateau = [critical_eta(N) for N in range(1, 5)]
    five = critical_eta(5)
    ok = (abs(eta1 - 0.8284) <= 1e-4
          and all(abs(p.value - 2 / 3) <= 1e-3 and p.boundary for p in plateau)
          and five.value < 2 / 3 - 1e-3)
    report(6, ok, f"eta(q=1,N=1)={eta1:.6f}, eta_crit(1..4)={[round(p.value, 6) for p in plateau]}, "
                  f"eta_crit(5)={five.value:.6f}")


def test_criterion_07_exponential_decay(report):
    vals = np.array([p.value for p in eta_crit_curve(14)])
    second = np.abs(np.diff(np.log(vals[7:14]), 2)).max()
    C, Q, delta = 0.75, 0.85, 2 / 3
    ratios = []
    for N in range(5, 21):
        A = delta * C
        ratios.append(abs(required_eta(Q, A, A, N, C) - asymptotic_eta(C, Q, delta, N)) / (C / Q) ** (2 * N))
    ok = second < 1e-2 and max(ratios) < 10
    report(7, ok, f"max |second difference| {second:.2e}, max remainder ratio {max(ratios):.3f}")


def test_criterion_08_figures(report):
    crit = [p.value for p in eta_crit_curve(14)]
    vis = [p.value for p in visibility_curve(0.75, 14)]
    mono = all(a >= b for a, b in zip(crit, crit[1:])) and all(a >= b for a, b in zip(vis, vis[1:]))
    levels = [1, 0.99, 0.97, 0.95, 0.9, 0.85]
    curves = fig2_curves(1e-5, levels, 14)
    ordered = True
    for N in range(14):
        col = [curves[v][N].value if curves[v][N].attainable else np.inf for v in levels]
        ordered &= all(a <= b for a, b in zip(col, col[1:]))
    base = fig2_curves(0.0, [1.0], 14)[1.0]
    gap = max(abs(p.value - c) for p, c in zip(base, crit))
    report(8, mono and ordered and gap < 1e-9, f"monotone={mono}, fig2 ordered={ordered}, eps=0 gap {gap:.1e}")


def test_criterion_09_simulator(chsh, report):
    s = optimal_strategy(1.0, chsh)
    Q, A, B = compute_QAB(s, chsh)
    expected = pnp_value_with_efficiency(EfficiencyQuery(Q, A, B, 2, 0.75, 0.8))
    hits, slowest = 0, 0.0
    for r in range(20):
        cfg = ExperimentConfig(s, 2, 0.8, 1.0, 10**6, repeat_seed(2024, r))
        t = time.perf_counter()
        res = run_experiment(cfg)
        slowest = max(slowest, time.perf_counter() - t)
        hits += abs(res.product_value_estimate - expected) <= 3 * res.std_error
    again = run_experiment(ExperimentConfig(s, 2, 0.8, 1.0, 10**6, repeat_seed(2024, 0)))
    first = run_experiment(ExperimentConfig(s, 2, 0.8, 1.0, 10**6, repeat_seed(2024, 0)))
    reproducible = np.array_equal(again.counts, first.counts) and again.to_json() == first.to_json()
    ok = hits >= 19 and reproducible and slowest < 60
    report(9, ok, f"{hits}/20 within 3 sigma, reproducible={reproducible}, slowest run {slowest:.2f}s")


def test_criterion_10_behavior_invariants(chsh, report):
    rng = np.random.default_rng(10)
    from pnpbell.quantum import iid_behavior
    from pnpbell.bell import product_behavior
    from tests.test_pnp import _random_exact_single

    zero_pen = True
    for N in (1, 2, 3):
        beh = product_behavior([_random_exact_single(rng) for _ in range(N)])
        pen = penalty_terms(beh)
        zero_pen &= pen.A_pen == 0 and pen.B_pen == 0
        zero_pen &= all(s == 1 for s in beh.probs.sum(axis=(2, 3)).flat)
    qbeh = iid_behavior(optimal_strategy(0.7), 2)
    normalized = np.allclose(qbeh.probs.sum(axis=(2, 3)), 1, atol=1e-12)
    qmax = max(compute_QAB(random_strategy(rng), chsh)[0] for _ in range(10_000))
    ok = zero_pen and normalized and qmax <= Q_MAX + 1e-9
    report(10, ok, f"exact product penalties zero={zero_pen}, normalized={normalized}, max random Q {qmax:.6f}")
