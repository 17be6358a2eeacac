import numpy as np
import pytest

from pdm_rl.net import (
    AdamState,
    NetConfig,
    NumericalError,
    TrainingMode,
    adam_step,
    backprop_full,
    clip_by_global_norm,
    depth_scaled_rates,
    init,
    load_checkpoint,
    save_checkpoint,
)


def small_net(mode=TrainingMode.BP_FULL, value=True, seed=0, **kw):
    return init(NetConfig(4, 2, (8, 6), value_head=value, mode=mode, **kw), seed)


def test_init_bounds_and_zero_bias():
    net = init(NetConfig(16, 3, (32, 8)), 0)
    assert np.abs(net.hidden[0].weights).max() <= 1 / 4
    assert np.abs(net.hidden[1].weights).max() <= 1 / np.sqrt(32)
    for name in net.layer_names():
        assert not net.layer(name).bias.any()


def test_init_deterministic():
    a, b = small_net(seed=3), small_net(seed=3)
    for k, v in a.state_arrays().items():
        np.testing.assert_array_equal(v, b.state_arrays()[k])


def test_forward_shapes_and_width_check():
    net = small_net()
    acts = net.forward(np.zeros((5, 4)))
    assert [a.shape for a in acts] == [(5, 4), (5, 8), (5, 6)]
    with pytest.raises(ValueError):
        net.forward(np.zeros((5, 3)))


def test_adam_first_step_moves_by_rate():
    st = AdamState(rate=0.01, grad_clip=None)
    (p,) = adam_step(st, [np.zeros(3)], [np.array([0.5, -2.0, 0.0])])
    np.testing.assert_allclose(p, [-0.01, 0.01, 0.0], atol=1e-9)


def test_adam_does_not_mutate_inputs():
    st = AdamState(rate=0.1)
    w = np.ones(2)
    adam_step(st, [w], [np.ones(2)])
    np.testing.assert_array_equal(w, np.ones(2))


def test_adam_rejects_bad_inputs():
    with pytest.raises(ValueError):
        AdamState(rate=0.0)
    with pytest.raises(ValueError):
        adam_step(AdamState(), [np.zeros(2)], [np.zeros(3)])
    with pytest.raises(NumericalError):
        adam_step(AdamState(), [np.zeros(2)], [np.array([np.nan, 0.0])])


def test_global_norm_clip():
    g = clip_by_global_norm([np.array([3.0]), np.array([4.0])], 1.0)
    np.testing.assert_allclose(np.concatenate(g), [0.6, 0.8])
    same = clip_by_global_norm([np.array([0.3])], 1.0)
    np.testing.assert_array_equal(same[0], [0.3])


def test_depth_scaled_rates():
    assert depth_scaled_rates(1e-3, 2) == pytest.approx((3e-3, 2e-3))


def test_frozen_layers_never_change():
    net = small_net(TrainingMode.FROZEN_RANDOM)
    before = [layer.weights.copy() for layer in net.hidden]
    for i in range(len(net.hidden)):
        net.update(f"hidden{i}", np.ones_like(net.hidden[i].weights), np.ones_like(net.hidden[i].bias))
    for layer, w in zip(net.hidden, before):
        np.testing.assert_array_equal(layer.weights, w)


def test_update_one_layer_leaves_others_untouched():
    net = small_net()
    snap = {k: v.copy() for k, v in net.state_arrays().items()}
    net.update("policy", np.ones((6, 2)), np.ones(2))
    for k, v in net.state_arrays().items():
        changed = not np.array_equal(v, snap[k])
        assert changed == (k == "policy.weights" or k == "policy.bias")


def test_backprop_value_branch_weighted():
    net = small_net()
    x = np.random.default_rng(0).normal(size=(3, 4))
    gp = np.zeros((3, 2))
    gv = np.ones(3)
    half = backprop_full(net, x, gp, gv, w_val=0.5)
    one = backprop_full(net, x, gp, gv, w_val=1.0)
    np.testing.assert_allclose(half["hidden0"][0] * 2, one["hidden0"][0], rtol=1e-14)


def test_backprop_requires_value_head_for_value_grad():
    net = small_net(value=False)
    with pytest.raises(ValueError):
        backprop_full(net, np.zeros((2, 4)), np.zeros((2, 2)), np.zeros(2))


def test_checkpoint_round_trip(tmp_path):
    net = small_net(TrainingMode.LOCAL_G, hidden_rates=(1e-3, 2e-3))
    for i in range(3):
        net.update("hidden0", np.full((4, 8), 0.1 * i), np.ones(8))
        net.update("value", np.ones((6, 1)), np.ones(1))
    path = tmp_path / "net.npz"
    save_checkpoint(net, path)
    back = load_checkpoint(path)
    assert back.mode is TrainingMode.LOCAL_G
    assert back.layer_names() == net.layer_names()
    for k, v in net.state_arrays().items():
        np.testing.assert_array_equal(back.state_arrays()[k], v)
    for name in net.layer_names():
        a, b = net.optimizers[name], back.optimizers[name]
        assert (a.rate, a.step_count) == (b.rate, b.step_count)
        for x, y in zip(a.first_moment + a.second_moment, b.first_moment + b.second_moment):
            np.testing.assert_array_equal(x, y)
    # continuing training from the checkpoint matches continuing the original
    g = np.full((4, 8), 0.3)
    net.update("hidden0", g, np.zeros(8))
    back.update("hidden0", g, np.zeros(8))
    np.testing.assert_array_equal(net.hidden[0].weights, back.hidden[0].weights)


def test_checkpoint_version_checked(tmp_path):
    import json

    path = tmp_path / "bad.npz"
    np.savez(path, __meta__=np.frombuffer(json.dumps({"version": 99}).encode(), dtype=np.uint8))
    with pytest.raises(ValueError):
        load_checkpoint(path)
