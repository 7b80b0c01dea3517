import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ppnfolio import autodiff as ad
from ppnfolio import checkpoint
from ppnfolio.backtest import run_backtest
from ppnfolio.cost_model import CostSpec
from ppnfolio.errors import ConfigError, ContractError, DataError
from ppnfolio.ppn import (PolicyParameters, PpnConfig, _block, as_strategy, forward, parameter_count,
                          receptive_field)
from ppnfolio.synthetic import gbm_market


def random_window(rng, m, k, batch=None):
    shape = (m, k, 4) if batch is None else (batch, m, k, 4)
    w = np.exp(0.02 * rng.standard_normal(shape))
    w[..., -1, 3] = 1.0
    return w


@pytest.fixture
def small():
    cfg = PpnConfig(m=3, k=30)
    return cfg, PolicyParameters.initialize(cfg, seed=1)


def test_zero_decision_weights_give_uniform_output(rng):
    cfg = PpnConfig(m=4, k=30)
    params = PolicyParameters.initialize(cfg, seed=0, zero_decision=True)
    out = forward(random_window(rng, 4, 30), rng.dirichlet(np.ones(5))[1:], params).data
    np.testing.assert_allclose(out, np.full(5, 0.2), rtol=1e-15)


def test_eleven_asset_shape(rng):
    cfg = PpnConfig(m=11, k=30)
    out = forward(random_window(rng, 11, 30), np.full(11, 1 / 12), PolicyParameters.initialize(cfg)).data
    assert out.shape == (12,)
    assert abs(out.sum() - 1) < 1e-12


def test_eval_mode_is_deterministic(small, rng):
    cfg, params = small
    w, prev = random_window(rng, 3, 30), np.full(3, 0.25)
    np.testing.assert_array_equal(forward(w, prev, params).data, forward(w, prev, params).data)


def test_train_mode_dropout_is_seeded(small, rng):
    cfg, params = small
    w, prev = random_window(rng, 3, 30), np.full(3, 0.25)
    a = forward(w, prev, params, train=True, rng=np.random.default_rng(5)).data
    b = forward(w, prev, params, train=True, rng=np.random.default_rng(5)).data
    c = forward(w, prev, params, train=True, rng=np.random.default_rng(6)).data
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_batched_forward_matches_single(small, rng):
    cfg, params = small
    w = random_window(rng, 3, 30, batch=4)
    prev = rng.dirichlet(np.ones(4), size=4)[:, 1:]
    batched = forward(w, prev, params).data
    for i in range(4):
        np.testing.assert_allclose(batched[i], forward(w[i], prev[i], params).data, rtol=1e-13)


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_output_on_simplex(seed):
    rng = np.random.default_rng(seed)
    cfg = PpnConfig(m=3, k=8)
    params = PolicyParameters.initialize(cfg, seed=seed)
    params.theta[:] *= rng.uniform(0.1, 20.0)
    out = forward(random_window(rng, 3, 8), rng.dirichlet(np.ones(4))[1:], params).data
    assert np.all(out >= 0) and abs(out.sum() - 1) < 1e-12


def test_shape_errors_name_the_stage(small):
    cfg, params = small
    with pytest.raises(ContractError, match="input stage: window"):
        forward(np.ones((3, 20, 4)), np.ones(3) / 4, params)
    with pytest.raises(ContractError, match="previous action"):
        forward(np.ones((3, 30, 4)), np.ones(4) / 4, params)


# ---- configuration and receptive field --------------------------------------

def test_receptive_field_values():
    assert receptive_field(PpnConfig(m=2)) == 29
    assert receptive_field(dilations=(1,)) == 5
    assert receptive_field(dilations=()) == 1


def test_receptive_field_by_impulse():
    cfg = PpnConfig(m=2, k=40, correlation=False, dropout=0.0)
    params = PolicyParameters.initialize(cfg, seed=0)
    params.theta[:] = np.abs(params.theta)  # positive weights: no ReLU cancels a path
    x = ad.Tensor(np.ones((1, 2, 40, 4)), requires_grad=True)
    with ad.Tape() as tape:
        z = x
        for b, d in enumerate(cfg.dilations, start=1):
            z = _block(z, params, b, d, cfg, False, None)
        (g,) = tape.backward(ad.tsum(ad.index(z, (0, 0, -1))), [x])
    reach = np.flatnonzero(np.abs(g[0, 0]).sum(axis=1) > 0)
    assert reach.min() == 40 - 29 and reach.max() == 39
    assert np.all(g[0, 1] == 0.0)  # no cross-asset path without the correlational conv


def test_window_must_cover_the_widest_kernel():
    PpnConfig(m=2, k=8)
    with pytest.raises(ConfigError):
        PpnConfig(m=2, k=7)


def test_parameter_count_reference():
    # hand count for m=3, k=30 with the default layer sizes
    assert parameter_count(PpnConfig(m=3, k=30)) == 13897
    assert parameter_count(PpnConfig(m=3, k=30, correlation=False)) == 13897 - 200 - 784 - 784


def test_config_round_trip():
    cfg = PpnConfig(m=5, k=12, dilations=(1, 2, 3), dropout=0.1)
    assert PpnConfig.from_dict(cfg.to_dict()) == cfg


# ---- structure ---------------------------------------------------------------

def test_correlation_features_ignore_periods_beyond_the_receptive_field(rng):
    cfg = PpnConfig(m=3, k=30, dropout=0.0)
    params = PolicyParameters.initialize(cfg, seed=3)
    w = random_window(rng, 3, 30)
    w2 = w.copy()
    w2[:, 0] *= 1.3  # period 0 is outside the last step's 29-period reach

    def last_step_features(win):
        z = ad.Tensor(win[None])
        for b, d in enumerate(cfg.dilations, start=1):
            z = _block(z, params, b, d, cfg, False, None)
        return z.data[0, :, -1]

    np.testing.assert_array_equal(last_step_features(w), last_step_features(w2))
    lstm_out = lambda win: ad.lstm(win, *(params.tensors[n] for n in ("lstm.w_input", "lstm.w_hidden", "lstm.bias"))).data  # noqa: E731
    assert not np.array_equal(lstm_out(w), lstm_out(w2))
    prev = np.full(3, 0.2)
    seq_only = lambda win: forward(win, prev, params, streams=("sequential",)).data  # noqa: E731
    assert not np.array_equal(seq_only(w), seq_only(w2))


def test_asset_permutation_is_not_an_equivariance(rng):
    cfg = PpnConfig(m=3, k=30, dropout=0.0)
    params = PolicyParameters.initialize(cfg, seed=4)
    w = random_window(rng, 3, 30)
    prev = np.array([0.5, 0.2, 0.1])
    perm = np.array([2, 0, 1])
    out = forward(w, prev, params).data
    permuted = forward(w[perm], prev[perm], params).data
    assert np.max(np.abs(permuted[1:] - out[1:][perm])) > 1e-6


# ---- strategy and checkpoints ------------------------------------------------

def test_zero_decision_policy_is_uniform_crp():
    panel = gbm_market(m=3, n=80, sigma=0.02, seed=0)
    params = PolicyParameters.initialize(PpnConfig(m=3, k=30), zero_decision=True)
    ledger = run_backtest(panel, as_strategy(params), CostSpec(), k=30)
    np.testing.assert_allclose(ledger.actions, 0.25, rtol=1e-15)


def test_strategy_replay_is_identical():
    panel = gbm_market(m=3, n=80, sigma=0.02, seed=0)
    params = PolicyParameters.initialize(PpnConfig(m=3, k=30), seed=2)
    a = run_backtest(panel, as_strategy(params), CostSpec(), k=30)
    b = run_backtest(panel, as_strategy(params), CostSpec(), k=30)
    assert a.to_csv() == b.to_csv()


def test_strategy_rejects_wrong_asset_count():
    params = PolicyParameters.initialize(PpnConfig(m=2, k=30))
    with pytest.raises(ContractError):
        run_backtest(gbm_market(m=3, n=60), as_strategy(params), CostSpec(), k=30)


def test_checkpoint_round_trip_gives_identical_actions(tmp_path):
    panel = gbm_market(m=3, n=80, sigma=0.02, seed=1)
    params = PolicyParameters.initialize(PpnConfig(m=3, k=30), seed=9)
    params.adam_m[:] = 0.5
    params.step = 17
    path = tmp_path / "policy.bin"
    params.save(path)
    loaded = PolicyParameters.load(path)
    np.testing.assert_array_equal(loaded.theta, params.theta)
    np.testing.assert_array_equal(loaded.adam_m, params.adam_m)
    assert loaded.step == 17 and loaded.cfg == params.cfg
    a = run_backtest(panel, as_strategy(params), CostSpec(), k=30).actions
    b = run_backtest(panel, as_strategy(loaded), CostSpec(), k=30).actions
    assert np.max(np.abs(a - b)) <= 1e-15
    assert loaded.to_bytes() == params.to_bytes()


@given(st.dictionaries(st.text(min_size=1, max_size=8),
                       arrays(np.float64, st.tuples(st.integers(0, 3), st.integers(1, 3)),
                              elements=st.floats(allow_nan=False)), max_size=4))
@settings(max_examples=60, deadline=None)
def test_checkpoint_format_is_bit_exact(named):
    blob = checkpoint.dumps(named, {"note": "x"})
    back, meta = checkpoint.loads(blob)
    assert meta == {"note": "x"}
    assert list(back) == list(named)
    for name in named:
        assert back[name].tobytes() == np.ascontiguousarray(named[name]).tobytes()
    assert checkpoint.dumps(back, meta) == blob


def test_checkpoint_rejects_garbage():
    blob = checkpoint.dumps({"a": np.arange(4.0)})
    with pytest.raises(DataError):
        checkpoint.loads(b"NOTACKPT" + blob[8:])
    with pytest.raises(DataError):
        checkpoint.loads(blob[:-8])
