import logging
from fractions import Fraction

import numpy as np
import pytest

from pnpbell.bell import ALICE, BOB, AssignmentStrategy, evaluate_product_bell
from pnpbell.efficiency import EfficiencyQuery, pnp_value_with_efficiency
from pnpbell.pnp import penalty_terms
from pnpbell.quantum import (
    Q_MAX,
    SIGMA_Z,
    BinaryMeasurement,
    DensityMatrix,
    QubitPairStrategy,
    compute_QAB,
    optimal_strategy,
)
from pnpbell.simulator import ExperimentConfig, penalty_bias_probe, run_experiment, simulate_counts


@pytest.fixture(scope="module")
def bell_strategy():
    return optimal_strategy(1.0)


def _expected(strategy, chsh, N, eta, v=1.0):
    from pnpbell.quantum import apply_visibility
    Q, A, B = compute_QAB(apply_visibility(strategy, v), chsh)
    return pnp_value_with_efficiency(EfficiencyQuery(Q, A, B, N, 0.75, eta))


def test_config_validation(bell_strategy):
    with pytest.raises(ValueError):
        ExperimentConfig(bell_strategy, 2, 1.2, 1.0, 10, 0)
    with pytest.raises(ValueError):
        ExperimentConfig(bell_strategy, 2, 0.5, 1.0, 0, 0)


def test_reproducible_and_partition_invariant(bell_strategy):
    cfg = ExperimentConfig(bell_strategy, 2, 0.8, 0.97, 150_000, 11)
    r1 = run_experiment(cfg, Fraction(7, 8))
    r2 = run_experiment(cfg, Fraction(7, 8), threads=4)
    assert np.array_equal(r1.counts, r2.counts)
    assert r1.to_json() == r2.to_json()
    other = run_experiment(ExperimentConfig(bell_strategy, 2, 0.8, 0.97, 150_000, 12))
    assert not np.array_equal(r1.counts, other.counts)


def test_prefix_consistency(bell_strategy):
    # the first trials do not depend on how many trials follow
    a = simulate_counts(ExperimentConfig(bell_strategy, 1, 0.9, 1.0, 1, 5))
    b = simulate_counts(ExperimentConfig(bell_strategy, 1, 0.9, 1.0, 1 << 17, 5))
    assert np.all(a <= b)


def test_internal_estimates_match_recomputation(bell_strategy, chsh):
    res = run_experiment(ExperimentConfig(bell_strategy, 2, 0.8, 1.0, 50_000, 3), Fraction(7, 8))
    assert res.product_value_estimate == evaluate_product_bell(chsh, 2, res.empirical_behavior)
    pen = penalty_terms(res.empirical_behavior)
    assert res.penalty_estimate == (pen.A_pen, pen.B_pen)
    assert res.pnp_estimate == res.product_value_estimate - 7 / 8 * (pen.A_pen + pen.B_pen)


def test_no_clicks_reproduce_assignments(bell_strategy):
    res = run_experiment(ExperimentConfig(bell_strategy, 3, 0.0, 1.0, 20_000, 1))
    assert res.product_value_estimate == pytest.approx(0.75**3, abs=1e-12)
    assert res.penalty_estimate == (0.0, 0.0)


def test_deterministic_product_strategy_has_zero_penalty():
    rho = np.zeros((4, 4))
    rho[0, 0] = 1
    z = BinaryMeasurement.from_observable(SIGMA_Z)
    s = QubitPairStrategy(DensityMatrix(rho), [z, z], [z, z], AssignmentStrategy(ALICE, (0, 0)),
                          AssignmentStrategy(BOB, (0, 0)))
    res = run_experiment(ExperimentConfig(s, 2, 0.7, 1.0, 20_000, 4))
    assert res.penalty_estimate == (0.0, 0.0)


def test_tsirelson_single_copy(bell_strategy):
    res = run_experiment(ExperimentConfig(bell_strategy, 1, 1.0, 1.0, 10**6, 7))
    assert abs(res.product_value_estimate - Q_MAX) < 3 * res.std_error


def test_random_configs_consistent(chsh):
    rng = np.random.default_rng(99)
    hits = 0
    for k in range(20):
        q, eta, v = rng.uniform(0.2, 1), rng.uniform(0.5, 1), rng.uniform(0.8, 1)
        N = int(rng.integers(1, 4))
        s = optimal_strategy(q)
        res = run_experiment(ExperimentConfig(s, N, eta, v, 100_000, k))
        hits += abs(res.product_value_estimate - _expected(s, chsh, N, eta, v)) <= 4 * res.std_error
    assert hits >= 19


def test_penalty_bias_shrinks(bell_strategy):
    small = penalty_bias_probe(ExperimentConfig(bell_strategy, 2, 1.0, 1.0, 1_000, 3), 8)
    large = penalty_bias_probe(ExperimentConfig(bell_strategy, 2, 1.0, 1.0, 100_000, 3), 8)
    assert 5 <= small["mean"] / large["mean"] <= 20


def test_zero_repeats(bell_strategy):
    rep = penalty_bias_probe(ExperimentConfig(bell_strategy, 2, 1.0, 1.0, 100, 3), 0)
    assert rep["repeats"] == 0 and rep["values"] == []


def test_sparse_coverage_warning(bell_strategy, caplog):
    with caplog.at_level(logging.WARNING):
        res = run_experiment(ExperimentConfig(bell_strategy, 4, 1.0, 1.0, 500, 2))
    assert res.unobserved_settings > 0
    assert "unobserved" in caplog.text


def test_counts_csv(bell_strategy):
    res = run_experiment(ExperimentConfig(bell_strategy, 1, 1.0, 1.0, 1000, 2))
    lines = res.counts_csv().splitlines()
    assert lines[0] == "x,y,a,b,count"
    assert sum(int(l.split(",")[-1]) for l in lines[1:]) == 1000
