import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ppnfolio import autodiff as ad
from ppnfolio.errors import ContractError
from ppnfolio.gradcheck import TOLERANCE, check, op_suite


def conv(x, w, d=1, b=None):
    return ad.dilated_causal_conv(ad.Tensor(x), ad.Tensor(w), None if b is None else ad.Tensor(b), dilation=d).data


# ---- dilated causal convolution --------------------------------------------

def test_lag_zero_delta_copies_input():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(2, 7, 3))
    w = np.zeros((3, 3, 3))
    w[:, :, -1] = np.eye(3)  # last tap reads the current step
    np.testing.assert_array_equal(conv(x, w), x)


def test_all_ones_kernel_with_zero_padding():
    out = conv(np.ones((1, 6, 1)), np.ones((1, 1, 3)))
    np.testing.assert_array_equal(out[0, :, 0], [1, 2, 3, 3, 3, 3])


def test_dilation_four_impulse_response():
    x = np.zeros((1, 20, 1))
    x[0, 2, 0] = 1.0
    out = conv(x, np.ones((1, 1, 3)), d=4)[0, :, 0]
    assert set(np.flatnonzero(out)) == {2, 6, 10}


@given(st.integers(1, 4), st.integers(0, 11), st.integers(0, 1000))
@settings(max_examples=60, deadline=None)
def test_causality(dilation, tau, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(3, 12, 2))
    w = rng.normal(size=(4, 2, 3))
    cut = x.copy()
    cut[:, tau + 1:] = 0.0
    np.testing.assert_array_equal(conv(x, w, dilation)[:, : tau + 1], conv(cut, w, dilation)[:, : tau + 1])


def test_conv_shape_mismatch():
    with pytest.raises(ContractError):
        conv(np.ones((2, 5, 3)), np.ones((4, 2, 3)))


# ---- correlational convolution ----------------------------------------------

def test_single_asset_is_channel_mixing():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(1, 5, 3))
    w = rng.normal(size=(4, 3, 1))
    out = ad.correlational_conv(ad.Tensor(x), ad.Tensor(w)).data
    np.testing.assert_allclose(out, x @ w[:, :, 0].T, rtol=1e-14)


def test_averaging_kernel_over_three_assets():
    x = np.array([1.0, 2.0, 3.0])[:, None, None] * np.ones((3, 4, 1))
    out = ad.correlational_conv(ad.Tensor(x), ad.Tensor(np.full((1, 1, 3), 1 / 3))).data
    np.testing.assert_allclose(out[:, :, 0], np.array([1.0, 2.0, 5 / 3])[:, None] * np.ones((1, 4)), rtol=1e-15)


def test_palindromic_kernel_commutes_with_reversal():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(3, 4, 2))
    w = rng.normal(size=(2, 2, 3))
    w[:, :, 2] = w[:, :, 0]
    out = ad.correlational_conv(ad.Tensor(x), ad.Tensor(w)).data
    flipped = ad.correlational_conv(ad.Tensor(x[::-1].copy()), ad.Tensor(w)).data
    np.testing.assert_allclose(flipped, out[::-1], rtol=1e-13)


def test_correlational_shape_preserved_and_checked():
    out = ad.correlational_conv(ad.Tensor(np.ones((5, 6, 3))), ad.Tensor(np.ones((3, 3, 5))))
    assert out.shape == (5, 6, 3)
    with pytest.raises(ContractError):
        ad.correlational_conv(ad.Tensor(np.ones((4, 6, 3))), ad.Tensor(np.ones((3, 3, 5))))


# ---- lstm --------------------------------------------------------------------

def run_lstm(x, wi, wh, b):
    return ad.lstm(ad.Tensor(x), ad.Tensor(wi), ad.Tensor(wh), ad.Tensor(b)).data


def test_zero_weights_give_zero_output():
    out = run_lstm(np.random.default_rng(0).normal(size=(3, 6, 4)), np.zeros((4, 64)), np.zeros((16, 64)), np.zeros(64))
    assert out.shape == (3, 16) and np.all(out == 0.0)


def test_single_step_hand_trace():
    x = 0.7
    wi = np.array([[0.5, -0.3, 0.8, 1.1]])
    b = np.array([0.1, 0.2, -0.4, 0.05])
    sig = lambda z: 1 / (1 + math.exp(-z))  # noqa: E731
    i = sig(0.5 * x + 0.1)
    o = sig(0.8 * x - 0.4)
    g = math.tanh(1.1 * x + 0.05)
    expected = o * math.tanh(i * g)  # the forget gate multiplies a zero cell
    out = run_lstm(np.array([[x]]), wi, np.full((1, 4), 0.9), b)
    assert abs(out[0] - expected) < 1e-12


def test_saturated_gates_keep_only_the_last_candidate():
    rng = np.random.default_rng(3)
    H, D = 4, 2
    x = rng.normal(size=(5, D))
    wi = rng.normal(scale=0.3, size=(D, 4 * H))
    wi[:, : 3 * H] = 0.0
    wh = np.zeros((H, 4 * H))
    b = np.zeros(4 * H)
    b[:H], b[H:2 * H], b[2 * H:3 * H] = 50.0, -50.0, 50.0
    out = run_lstm(x, wi, wh, b)
    cand = np.tanh(x[-1] @ wi[:, 3 * H:])
    np.testing.assert_allclose(out, np.tanh(cand), atol=1e-12)


# ---- pointwise ---------------------------------------------------------------

def test_pointwise_examples():
    np.testing.assert_allclose(ad.softmax(ad.Tensor(np.zeros(3))).data, [1 / 3] * 3, rtol=1e-15)
    assert np.all(ad.relu(ad.Tensor(-np.array([0.5, 2.0]))).data == 0.0)
    x = np.random.default_rng(0).normal(size=(3, 4))
    for train in (True, False):
        np.testing.assert_array_equal(ad.dropout(ad.Tensor(x), 0.0, train, np.random.default_rng(0)).data, x)
    np.testing.assert_array_equal(ad.dropout(ad.Tensor(x), 0.5, False).data, x)
    with pytest.raises(ContractError):
        ad.softmax(ad.Tensor(np.zeros((2, 0))))


def test_dropout_scales_kept_units_and_is_seeded():
    x = np.ones((50, 40))
    a = ad.dropout(ad.Tensor(x), 0.2, True, np.random.default_rng(7)).data
    b = ad.dropout(ad.Tensor(x), 0.2, True, np.random.default_rng(7)).data
    np.testing.assert_array_equal(a, b)
    assert set(np.unique(a)) == {0.0, 1.25}
    assert abs((a == 0).mean() - 0.2) < 0.03


def test_concat_and_conv1x1_shapes():
    out = ad.concat([ad.Tensor(np.ones((3, 16))), ad.Tensor(np.ones((3, 16))), ad.Tensor(np.ones((3, 1)))], axis=1)
    assert out.shape == (3, 33)
    assert ad.conv_1x1(out, ad.Tensor(np.ones((1, 33)))).shape == (3, 1)


@given(arrays(np.float64, (4, 5), elements=st.floats(-30, 30)))
@settings(max_examples=100, deadline=None)
def test_softmax_lands_on_the_simplex(z):
    p = ad.softmax(ad.Tensor(z), axis=-1).data
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=-1), 1.0, atol=1e-12)


# ---- backward ----------------------------------------------------------------

def test_linear_composition_gradient():
    rng = np.random.default_rng(4)
    W = ad.Tensor(rng.normal(size=(3, 5)), requires_grad=True)
    x = ad.Tensor(rng.normal(size=(5, 2)), requires_grad=True)
    v = rng.normal(size=(3, 2))
    with ad.Tape() as tape:
        loss = ad.tsum(ad.mul(ad.matmul(W, x), v))
        gW, gx = tape.backward(loss, [W, x])
    np.testing.assert_allclose(gW, v @ x.data.T, rtol=1e-14)
    np.testing.assert_allclose(gx, W.data.T @ v, rtol=1e-14)


def test_disconnected_parameter_gets_exact_zero():
    a = ad.Tensor(np.ones(3), requires_grad=True)
    b = ad.Tensor(np.ones(4), requires_grad=True)
    with ad.Tape() as tape:
        loss = ad.tsum(ad.square(a))
        ga, gb = tape.backward(loss, [a, b])
    np.testing.assert_array_equal(ga, [2.0, 2.0, 2.0])
    assert gb.shape == (4,) and np.all(gb == 0.0)


def test_non_scalar_root_rejected():
    a = ad.Tensor(np.ones(3), requires_grad=True)
    with ad.Tape() as tape:
        out = ad.square(a)
        with pytest.raises(ContractError):
            tape.backward(out, [a])


def test_reused_node_accumulates():
    a = ad.Tensor(np.array([1.5, -2.0]), requires_grad=True)
    with ad.Tape() as tape:
        s = ad.square(a)
        loss = ad.tsum(ad.add(s, s))
        (g,) = tape.backward(loss, [a])
    np.testing.assert_allclose(g, 4 * a.data)


def test_dropout_backward_is_deterministic():
    x = np.random.default_rng(0).normal(size=(4, 6))
    grads = []
    for _ in range(2):
        t = ad.Tensor(x, requires_grad=True)
        with ad.Tape() as tape:
            loss = ad.tsum(ad.square(ad.dropout(t, 0.3, True, np.random.default_rng(11))))
            grads.append(tape.backward(loss, [t])[0])
    np.testing.assert_array_equal(grads[0], grads[1])


@pytest.mark.parametrize("result", op_suite(m=3, k=8), ids=lambda r: r.name)
def test_finite_difference_per_op(result):
    assert result.max_rel_error < TOLERANCE, f"{result.name}: {result.max_rel_error:.2e}"


def test_finite_difference_on_a_batched_layer_stack():
    rng = np.random.default_rng(5)

    def build(x, w1, w2, wl):
        h = ad.relu(ad.dilated_causal_conv(x, w1, dilation=2))
        h = ad.correlational_conv(h, w2)
        return ad.tsum(ad.tanh(ad.temporal_valid_conv(h, wl)))

    res = check("stack", build, [rng.normal(size=(2, 3, 8, 2)), rng.normal(scale=0.5, size=(3, 2, 3)),
                                 rng.normal(scale=0.5, size=(3, 3, 3)), rng.normal(scale=0.3, size=(2, 3, 8))])
    assert res.passed, res.max_rel_error
