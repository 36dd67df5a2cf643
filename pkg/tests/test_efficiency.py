import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pnpbell.efficiency import (
    EfficiencyQuery,
    NoViolation,
    asymptotic_eta,
    critical_eta,
    eta_crit_curve,
    eta_with_penalty_and_visibility,
    fig2_curves,
    frontier_eta,
    min_visibility,
    pnp_value_with_efficiency,
    required_eta,
)
from pnpbell.optimize import golden_section, grid_golden_minimize
from pnpbell.quantum import Q_MAX, compute_QAB, frontier_A, frontier_Q, optimal_strategy

C = 0.75


@pytest.fixture(scope="module")
def crit():
    return eta_crit_curve(14)


def test_golden_section():
    x, fx = golden_section(lambda t: (t - 0.3) ** 2, 0, 1)
    assert x == pytest.approx(0.3, abs=1e-9)
    m = grid_golden_minimize(lambda t: np.asarray(t) * 2, 0.1, 1.0)
    assert m.boundary and m.x == 0.1


def test_value_limits():
    q = EfficiencyQuery(0.8, 0.7, 0.7, 3, C, 1.0)
    assert pnp_value_with_efficiency(q) == pytest.approx(0.8**3)
    q = EfficiencyQuery(0.8, 0.7, 0.7, 3, C, 0.0)
    assert pnp_value_with_efficiency(q) == pytest.approx(C**3)
    q = EfficiencyQuery(Q_MAX, 0.5, 0.5, 1, C, 0.8284)
    assert pnp_value_with_efficiency(q) == pytest.approx(C, abs=5e-4)
    with pytest.raises(ValueError):
        EfficiencyQuery(0.8, 0.7, 0.7, 1, C, 1.5)


def test_required_eta_anchors():
    assert required_eta(Q_MAX, 0.5, 0.5, 1, C) == pytest.approx(2 * np.sqrt(2) - 2, abs=1e-12)
    assert required_eta(Q_MAX, 0.5, 0.5, 2, C) == pytest.approx(0.625 / 0.79105, abs=1e-4)
    with pytest.raises(NoViolation):
        required_eta(0.7, 0.5, 0.5, 1, C)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        assert required_eta(0.8, C, C, 2, C) == 0.0
    assert w


@settings(max_examples=50, deadline=None)
@given(st.floats(0.76, 0.85), st.floats(0.3, 0.74), st.floats(0.3, 0.74), st.integers(1, 12))
def test_threshold_brackets_bound(Q, A, B, N):
    eta = required_eta(Q, A, B, N, C)
    lo = pnp_value_with_efficiency(EfficiencyQuery(Q, A, B, N, C, eta - 1e-6))
    hi = pnp_value_with_efficiency(EfficiencyQuery(Q, A, B, N, C, min(eta + 1e-6, 1.0)))
    assert lo < C**N < hi


def test_frontier_eta_matches_quantum_module(chsh):
    for q in (0.1, 0.5, 0.9, 1.0):
        Q, A, B = compute_QAB(optimal_strategy(q, chsh), chsh)
        for N in (1, 3, 7):
            direct = required_eta(Q, A, B, N, C)
            analytic = required_eta(frontier_Q(q), frontier_A(q), frontier_A(q), N, C)
            assert direct == pytest.approx(analytic, abs=1e-9)
            assert float(frontier_eta(q, N)) == pytest.approx(analytic, abs=1e-9)


def test_plateau_then_descent(crit):
    for p in crit[:4]:
        assert p.boundary and abs(p.value - 2 / 3) < 1e-3
    assert not crit[4].boundary and crit[4].value < 2 / 3 - 1e-3
    assert crit[4].value == pytest.approx(0.645375160045, abs=1e-9)
    assert crit[13].value == pytest.approx(0.280402002142, abs=1e-9)


def test_critical_eta_nonincreasing(crit):
    vals = [p.value for p in crit]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("q_min", [1e-2, 1e-3, 1e-4])
def test_boundary_infimum_approach(q_min):
    # the threshold tends to 2/3 linearly, with slope 1/9
    p = critical_eta(1, q_min=q_min)
    assert p.boundary and p.q_opt == q_min
    assert (p.value - 2 / 3) / q_min == pytest.approx(1 / 9, rel=2e-2)


def test_asymptotic_formula():
    Q, delta = 0.85, 2 / 3
    assert asymptotic_eta(C, Q, 0.0, 4) == pytest.approx(2 * (C / Q) ** 4)
    for N in range(5, 21):
        A = delta * C
        diff = abs(required_eta(Q, A, A, N, C) - asymptotic_eta(C, Q, delta, N))
        assert diff < 10 * (C / Q) ** (2 * N)


def test_min_visibility_properties():
    assert min_visibility(1.0, 3).value < 1
    pts = [min_visibility(0.75, N) for N in range(1, 11)]
    assert all(p.attainable for p in pts)
    vals = [p.value for p in pts]
    assert vals[0] < 1
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_min_visibility_unattainable():
    assert not min_visibility(0.6, 1).attainable


def test_fig2_reduces_to_critical_eta(crit):
    pts = fig2_curves(0.0, [1.0], 14)[1.0]
    assert max(abs(a.value - b.value) for a, b in zip(pts, crit)) < 1e-9


def test_fig2_ordering():
    curves = fig2_curves(1e-5, [1, 0.99, 0.97, 0.95, 0.9, 0.85], 14)
    levels = list(curves.values())
    for N in range(14):
        col = [pts[N].value if pts[N].attainable else np.inf for pts in levels]
        assert all(a <= b for a, b in zip(col, col[1:]))


def test_noisy_small_n_then_attainable():
    pts = [eta_with_penalty_and_visibility(0.85, N, 1e-5) for N in range(1, 11)]
    assert pts[0].value > 0.85
    assert min(p.value for p in pts if p.attainable) < pts[0].value - 0.1
