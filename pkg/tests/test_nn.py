"""Dueling network forward/backward correctness and the Adam optimizer."""

import numpy as np
import pytest

from camduty.nn import Adam, QNetwork, gradient_check


def naive_forward(net, states):
    """Independent re-derivation of the dueling forward pass from raw weights."""
    x = np.asarray(states, dtype=float)
    for layer in net.trunk:
        x = np.maximum(x @ layer.w + layer.b, 0.0)
    value = x @ net.value_head.w + net.value_head.b
    adv = x @ net.advantage_head.w + net.advantage_head.b
    return value + adv - adv.mean(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# Forward pass
# ---------------------------------------------------------------------------

def test_forward_matches_independent_path(rng):
    for trial in range(10):
        net = QNetwork(state_size=24, n_actions=2, hidden=(32, 16), seed=trial)
        states = rng.normal(size=(7, 24))
        np.testing.assert_allclose(net.forward(states), naive_forward(net, states),
                                   rtol=0, atol=1e-12)


@pytest.mark.parametrize("hidden", [(8, 4), (8,), (8, 4, 2)])
def test_q_values_matches_forward(rng, hidden):
    net = QNetwork(state_size=10, n_actions=2, hidden=hidden, seed=3)
    for _ in range(20):
        s = rng.normal(size=10)
        np.testing.assert_allclose(net.q_values(s), net.forward(s[None, :])[0],
                                   rtol=0, atol=1e-12)


def test_forward_rejects_wrong_shape():
    net = QNetwork(state_size=6, n_actions=2, hidden=(4,), seed=0)
    with pytest.raises(ValueError):
        net.forward(np.zeros((3, 5)))


def test_dueling_identifiability(rng):
    """A constant added to every advantage output cancels in the combined Q."""
    net = QNetwork(state_size=12, n_actions=2, hidden=(16, 8), seed=1)
    states = rng.normal(size=(5, 12))
    before = net.forward(states)
    net.advantage_head.b += 3.7
    after = net.forward(states)
    np.testing.assert_allclose(after, before, rtol=0, atol=1e-9)


def test_positive_homogeneity_without_biases(rng):
    """Bias-free ReLU networks scale linearly with positive input scaling."""
    net = QNetwork(state_size=8, n_actions=2, hidden=(6, 6), seed=2)
    for layer in [*net.trunk, net.value_head, net.advantage_head]:
        layer.b[:] = 0.0
    states = rng.normal(size=(4, 8))
    scale = 2.5
    np.testing.assert_allclose(net.forward(scale * states), scale * net.forward(states),
                               rtol=1e-10, atol=1e-10)


# ---------------------------------------------------------------------------
# Gradients
# ---------------------------------------------------------------------------

def test_gradient_check_random_networks(rng):
    for trial in range(5):
        net = QNetwork(state_size=14, n_actions=2, hidden=(12, 8), seed=100 + trial)
        states = rng.normal(size=(6, 14))
        actions = rng.integers(0, 2, size=6)
        targets = rng.normal(size=6)
        weights = rng.uniform(0.2, 1.0, size=6)
        err = gradient_check(net, states, actions, targets, weights, seed=trial)
        assert err < 1e-4, f"trial {trial}: max relative error {err:.3e}"


def test_fault_injection_detects_doubled_gradient(rng):
    """Corrupting one analytic gradient entry must blow past the tolerance."""
    net = QNetwork(state_size=10, n_actions=2, hidden=(8,), seed=5)
    states = rng.normal(size=(4, 10))
    actions = rng.integers(0, 2, size=4)
    targets = rng.normal(size=4)

    def loss_at(flat):
        saved = net.flat.copy()
        net.flat[:] = flat
        loss, _, _ = net.loss_and_grads(states, actions, targets)
        net.flat[:] = saved
        return loss

    net.loss_and_grads(states, actions, targets)
    analytic = net.grad_flat.copy()
    idx = int(np.argmax(np.abs(analytic)))
    analytic[idx] *= 2.0  # injected fault

    h = 1e-5
    bumped = net.flat.copy()
    bumped[idx] += h
    dipped = net.flat.copy()
    dipped[idx] -= h
    numeric = (loss_at(bumped) - loss_at(dipped)) / (2 * h)
    rel = abs(analytic[idx] - numeric) / max(abs(analytic[idx]), abs(numeric), 1.0)
    assert rel > 0.1


def test_loss_weights_scale_gradients(rng):
    net = QNetwork(state_size=6, n_actions=2, hidden=(5,), seed=9)
    states = rng.normal(size=(3, 6))
    actions = np.array([0, 1, 0])
    targets = rng.normal(size=3)
    net.loss_and_grads(states, actions, targets, np.ones(3))
    unit_mag = np.abs(net.grad_flat).max()  # views alias the live buffer, so snapshot
    net.loss_and_grads(states, actions, targets, np.zeros(3))
    zero_mag = np.abs(net.grad_flat).max()
    assert unit_mag > 0.0
    assert zero_mag == 0.0


def test_loss_rejects_non_finite(rng):
    net = QNetwork(state_size=4, n_actions=2, hidden=(3,), seed=0)
    states = rng.normal(size=(2, 4))
    states[0, 0] = np.nan
    with pytest.raises(FloatingPointError):
        net.loss_and_grads(states, np.array([0, 1]), np.zeros(2))


def test_td_errors_are_pre_weighting(rng):
    net = QNetwork(state_size=5, n_actions=2, hidden=(4,), seed=2)
    states = rng.normal(size=(3, 5))
    actions = np.array([0, 0, 1])
    targets = np.zeros(3)
    _, _, td_a = net.loss_and_grads(states, actions, targets, np.full(3, 0.1))
    _, _, td_b = net.loss_and_grads(states, actions, targets, np.ones(3))
    np.testing.assert_allclose(td_a, td_b, rtol=0, atol=0)


# ---------------------------------------------------------------------------
# Parameter plumbing
# ---------------------------------------------------------------------------

def test_copy_is_independent(rng):
    net = QNetwork(state_size=6, n_actions=2, hidden=(5,), seed=4)
    clone = net.copy()
    states = rng.normal(size=(2, 6))
    np.testing.assert_array_equal(net.forward(states), clone.forward(states))
    net.flat += 1.0
    assert not np.array_equal(net.forward(states), clone.forward(states))


def test_copy_weights_from_syncs(rng):
    a = QNetwork(state_size=6, n_actions=2, hidden=(5,), seed=1)
    b = QNetwork(state_size=6, n_actions=2, hidden=(5,), seed=2)
    b.copy_weights_from(a)
    states = rng.normal(size=(3, 6))
    np.testing.assert_array_equal(a.forward(states), b.forward(states))


def test_parameter_count():
    net = QNetwork(state_size=24, n_actions=2, hidden=(32, 16), seed=0)
    expected = (24 * 32 + 32) + (32 * 16 + 16) + (16 * 1 + 1) + (16 * 2 + 2)
    assert net.parameter_count() == expected
    assert net.flat.size == expected


def test_set_parameters_round_trip(rng):
    net = QNetwork(state_size=6, n_actions=2, hidden=(5,), seed=7)
    saved = [p.copy() for p in net.parameters()]
    net.flat[:] = rng.normal(size=net.flat.size)
    net.set_parameters(saved)
    for got, want in zip(net.parameters(), saved):
        np.testing.assert_array_equal(got, want)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

def test_adam_first_step_is_lr_sized():
    param = np.array([1.0, -2.0, 3.0])
    opt = Adam([param], lr=0.01)
    grad = np.array([10.0, -0.5, 2.0])
    before = param.copy()
    opt.step([grad])
    # Bias-corrected first step moves each entry by ~lr against the gradient sign.
    np.testing.assert_allclose(np.abs(param - before), 0.01, rtol=1e-6)
    assert np.all(np.sign(before - param) == np.sign(grad))


def test_adam_strided_params_match_contiguous(rng):
    """Non-contiguous parameters take the plain numpy branch; it must produce
    bit-identical updates to the compiled path used for flat buffers."""
    base = np.zeros((4, 6))
    base[:, ::2] = rng.normal(size=(4, 3))
    p_view = base[:, ::2]
    p_dense = np.ascontiguousarray(p_view)
    opt_view = Adam([p_view], lr=0.01)
    opt_dense = Adam([p_dense], lr=0.01)
    for step in range(5):
        grad = np.sin(np.arange(12, dtype=np.float64) + step).reshape(4, 3)
        opt_view.step([grad])
        opt_dense.step([grad])
    np.testing.assert_array_equal(p_view, p_dense)


def test_adam_shape_mismatch_rejected():
    param = np.zeros(3)
    opt = Adam([param], lr=0.01)
    with pytest.raises(ValueError):
        opt.step([np.zeros(4)])


def test_tiny_regression_converges(rng):
    """2000 Adam steps drive a small supervised fit below 1e-4 loss."""
    net = QNetwork(state_size=3, n_actions=2, hidden=(16, 16), seed=0)
    states = rng.normal(size=(20, 3))
    actions = rng.integers(0, 2, size=20)
    targets = np.sin(states.sum(axis=1)) * 0.5
    opt = Adam(net.parameters(), lr=3e-3)
    loss = np.inf
    for _ in range(2000):
        loss, grads, _ = net.loss_and_grads(states, actions, targets)
        opt.step(grads)
        if loss < 1e-5:
            break
    assert loss < 1e-4
