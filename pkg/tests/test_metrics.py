import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ppnfolio.backtest import ActionSequence, run_backtest
from ppnfolio.cost_model import CostSpec
from ppnfolio.metrics import (apv, avg_turnover, calmar, compute_metrics, max_drawdown,
                              max_drawdown_bruteforce, sharpe)
from ppnfolio.synthetic import gbm_market, panel_from_closes

positive_paths = arrays(np.float64, st.integers(1, 40), elements=st.floats(0.05, 20.0))


def flat_panel(n=6, m=2):
    return panel_from_closes(np.ones((m, n)))


def test_all_cash_block():
    panel = flat_panel()
    ledger = run_backtest(panel, ActionSequence([[1.0, 0.0, 0.0]] * 5), CostSpec(), k=1)
    block = compute_metrics(ledger)
    assert block.apv == 1.0 and block.sr == 0.0 and not block.sr_infinite
    assert block.cr_infinite and math.isinf(block.cr) and block.mdd == 0.0
    assert block.to == 0.0
    assert block.to_dict()["cr"] == "inf"


def test_doubling_asset_apv():
    panel = panel_from_closes(np.array([[1.0, 2.0, 4.0]]))
    ledger = run_backtest(panel, ActionSequence([[0, 1.0]] * 2), CostSpec(), k=1, a0=[0, 1.0])
    assert apv(ledger) == 4.0
    assert avg_turnover(ledger) == 0.0


def test_sharpe_hand_case():
    ratio, flag = sharpe([0.1, 0.3])
    assert ratio == pytest.approx(2.0, rel=1e-14) and not flag


def test_sharpe_constant_nonzero_is_flagged():
    ratio, flag = sharpe([0.01] * 5)
    assert flag and ratio == math.inf
    ratio, flag = sharpe([-0.01] * 5)
    assert flag and ratio == -math.inf


def test_sharpe_needs_two_periods():
    with pytest.raises(ValueError):
        sharpe([0.1])


def test_drawdown_examples():
    assert max_drawdown([1, 1.2, 0.9, 1.1]) == pytest.approx(0.25, abs=1e-15)
    assert max_drawdown([1, 1.1, 1.2, 1.5]) == 0.0
    assert max_drawdown([1, 0.5]) == 0.5


def test_drawdown_counts_the_starting_wealth():
    assert max_drawdown([1.0, 0.8, 0.9]) == pytest.approx(0.2)


def test_calmar_examples():
    cr, flag = calmar([1, 1.2, 0.9, 1.1])
    assert cr == pytest.approx(4.4, rel=1e-14) and not flag
    cr, flag = calmar([1, 2, 3])
    assert flag and math.isinf(cr)


def test_alternating_full_swap_turnover_is_one():
    panel = flat_panel(n=7)
    swaps = [[0, 1.0, 0], [0, 0, 1.0]] * 3
    ledger = run_backtest(panel, ActionSequence(swaps), CostSpec(0, 0), k=1, a0=[0, 0, 1.0])
    assert avg_turnover(ledger) == 1.0


@given(positive_paths)
@settings(max_examples=300, deadline=None)
def test_running_peak_matches_pair_scan(path):
    assert max_drawdown(path) == pytest.approx(max_drawdown_bruteforce(path), abs=1e-15)


@given(positive_paths, st.floats(0.01, 100.0))
@settings(max_examples=200, deadline=None)
def test_drawdown_scale_invariance(path, scale):
    assert max_drawdown(path * scale) == pytest.approx(max_drawdown(path), abs=1e-12)
    assert 0.0 <= max_drawdown(path) <= 1.0


@given(arrays(np.float64, st.integers(2, 30), elements=st.floats(-0.2, 0.2)), st.floats(0.01, 100.0))
@settings(max_examples=200, deadline=None)
def test_sharpe_scale_invariant_under_wealth_scaling(r, scale):
    # scaling every wealth value by a constant leaves per-period log-returns unchanged
    assume(np.std(r) > 1e-6)
    s = np.exp(np.concatenate([[0.0], np.cumsum(r)]))
    a, _ = sharpe(np.diff(np.log(s)))
    b, _ = sharpe(np.diff(np.log(s * scale)))
    assert a == pytest.approx(b, rel=1e-7, abs=1e-9)


@pytest.mark.parametrize("seed", range(3))
def test_ledger_metric_invariants(seed):
    panel = gbm_market(m=3, n=200, sigma=0.02, seed=seed)
    rng = np.random.default_rng(seed)
    actions = rng.dirichlet(np.ones(4), size=199)
    ledger = run_backtest(panel, ActionSequence(actions), CostSpec.uniform(0.01), k=1)
    block = compute_metrics(ledger)
    assert block.apv == pytest.approx(math.exp(ledger.log_returns.sum()), rel=1e-10)
    assert 0.0 <= block.to <= 1.0
    assert 0.0 <= block.mdd <= 1.0
    if block.mdd > 0:
        assert block.cr == pytest.approx(block.apv / block.mdd, rel=1e-15)
    assert block.std == pytest.approx(ledger.log_returns.std(), rel=1e-15)
    assert block.sr_pct == pytest.approx(100 * block.sr)
