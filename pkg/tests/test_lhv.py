from fractions import Fraction

import pytest

from pnpbell.lhv import CapExceeded, lhv_bound, product_lhv_bound, product_strategy_bound


def test_single_copy(chsh):
    res = lhv_bound(chsh)
    assert res.value == Fraction(3, 4)
    assert res.verify(chsh)


def test_two_copies_exceed_product_strategies(chsh):
    res = product_lhv_bound(chsh, 2)
    assert res.value == Fraction(10, 16)
    assert res.value > product_strategy_bound(chsh, 2)
    assert res.verify(chsh)
    assert not res.witness_alice.is_product()


def test_pruning_agrees(chsh):
    full = product_lhv_bound(chsh, 2)
    pruned = product_lhv_bound(chsh, 2, prune_symmetry=True)
    assert pruned.pruned and pruned.value == full.value
    assert pruned.strategies_scanned < full.strategies_scanned
    assert pruned.verify(chsh)


@pytest.mark.slow
def test_three_copies(chsh):
    res = product_lhv_bound(chsh, 3, prune_symmetry=True, threads=2)
    assert res.value == Fraction(31, 64)
    assert res.verify(chsh)


def test_cap(chsh):
    with pytest.raises(CapExceeded):
        product_lhv_bound(chsh, 3, cap=1000)


def test_product_strategy_bound(chsh):
    assert product_strategy_bound(chsh, 3) == Fraction(27, 64)
