import json

import numpy as np
import pytest

from manifold_ae.geometry import interlaced_circles, sample_per_component
from manifold_ae.neural import (
    AdamState,
    Mlp,
    NeuralAutoencoder,
    TrainConfig,
    adam_step,
    backward,
    default_activations,
    forward,
    grad_check,
    init_mlp,
    load_checkpoint,
    loss_and_grads,
    mlp_from_dict,
    mlp_to_dict,
    save_checkpoint,
    stack,
    train,
)


def identity_net(n):
    return Mlp([n, n], ["linear"], [np.eye(n)], [np.zeros(n)])


def fd_gradient(mlp, X, T, h=1e-6):
    """Central differences over every parameter; independent of backward()."""
    out = []
    for p in mlp.params():
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up = np.mean((forward(mlp, X)[0] - T) ** 2)
            p[idx] = old - h
            down = np.mean((forward(mlp, X)[0] - T) ** 2)
            p[idx] = old
            g[idx] = (up - down) / (2 * h)
        out.append(g)
    return out


# -- construction -------------------------------------------------------------

def test_parameter_count():
    widths = [3, 128, 128, 128, 1]
    expected = sum(a * b + b for a, b in zip(widths[:-1], widths[1:]))
    assert expected == 33_665
    assert init_mlp(widths, default_activations(4), 0).n_params == expected


def test_init_deterministic():
    a = init_mlp([3, 16, 2], ["relu", "linear"], 7)
    b = init_mlp([3, 16, 2], ["relu", "linear"], 7)
    for x, y in zip(a.params(), b.params()):
        assert np.array_equal(x, y)
    c = init_mlp([3, 16, 2], ["relu", "linear"], 8)
    assert not np.array_equal(a.weights[0], c.weights[0])


def test_init_scales():
    net = init_mlp([200, 400, 300], ["relu", "linear"], 0)
    assert np.std(net.weights[0]) == pytest.approx(np.sqrt(2 / 200), rel=0.02)
    lim = np.sqrt(6 / 700)
    assert np.abs(net.weights[1]).max() <= lim
    assert np.std(net.weights[1]) == pytest.approx(lim / np.sqrt(3), rel=0.02)
    assert all((b == 0).all() for b in net.biases)


@pytest.mark.parametrize("widths,acts", [([3], []), ([3, 0, 1], ["relu", "linear"]),
                                         ([3, 2], ["relu", "linear"])])
def test_init_errors(widths, acts):
    with pytest.raises(ValueError):
        init_mlp(widths, acts, 0)


# -- forward ------------------------------------------------------------------

def test_forward_identity():
    X = np.random.default_rng(0).normal(size=(7, 3))
    out, _ = forward(identity_net(3), X)
    assert np.array_equal(out, X)


def test_forward_zero_params():
    net = init_mlp([3, 8, 8, 2], ["relu", "relu", "linear"], 0)
    for p in net.params():
        p[...] = 0
    assert np.array_equal(forward(net, np.ones((4, 3)))[0], np.zeros((4, 2)))


def test_relu_of_negative_is_zero():
    net = Mlp([1, 1], ["relu"], [np.ones((1, 1))], [np.zeros(1)])
    assert forward(net, [[-1.0]])[0][0, 0] == 0.0
    assert forward(net, [[2.5]])[0][0, 0] == 2.5


def test_forward_dimension_mismatch():
    with pytest.raises(ValueError):
        forward(identity_net(3), np.zeros((2, 4)))


# -- gradients ----------------------------------------------------------------

def test_zero_loss_zero_grads():
    net = init_mlp([3, 5, 2], ["relu", "linear"], 1)
    X = np.random.default_rng(1).normal(size=(6, 3))
    T = forward(net, X)[0]
    loss, grads = loss_and_grads(net, X, T)
    assert loss == 0.0
    assert all(np.all(g == 0) for g in grads)


def test_single_linear_layer_closed_form():
    rng = np.random.default_rng(2)
    W = rng.normal(size=(3, 4))
    net = Mlp([3, 4], ["linear"], [W], [np.zeros(4)])
    x, t = rng.normal(size=3), rng.normal(size=4)
    _, grads = loss_and_grads(net, x[None], t[None])
    # y = W^T x in the row-major layout, so dL/dW = x (2 (y - t) / out_dim)^T
    expected = np.outer(x, 2 * (W.T @ x - t) / 4)
    assert np.allclose(grads[0], expected, atol=1e-15)
    assert np.allclose(grads[1], 2 * (W.T @ x - t) / 4, atol=1e-15)


def test_backprop_matches_full_finite_differences():
    rng = np.random.default_rng(3)
    net = init_mlp([3, 6, 1, 6, 3], ["relu", "linear", "relu", "linear"], 4)
    for b in net.biases:
        b[...] = rng.normal(scale=0.1, size=b.shape)
    X, T = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
    _, grads = loss_and_grads(net, X, T)
    for a, n in zip(grads, fd_gradient(net, X, T)):
        assert np.allclose(a, n, rtol=1e-5, atol=1e-8)


def test_relu_subgradient_at_zero_is_zero():
    net = Mlp([1, 1, 1], ["relu", "linear"], [np.ones((1, 1)), np.ones((1, 1))],
              [np.zeros(1), np.zeros(1)])
    out, cache = forward(net, [[0.0]])
    gW, gb, gx = backward(net, cache, np.ones((1, 1)))
    assert gb[0][0] == 0.0 and gx[0, 0] == 0.0


def test_loss_shape_mismatch():
    with pytest.raises(ValueError):
        loss_and_grads(identity_net(3), np.zeros((2, 3)), np.zeros((2, 2)))


def test_grad_check_linear_exact():
    net = init_mlp([4, 3], ["linear"], 5)
    assert grad_check(net, n_probes=20, h=1e-5, seed=1) < 1e-8


def test_grad_check_relu_net():
    net = init_mlp([3, 64, 1, 64, 3], ["relu", "linear", "relu", "linear"], 6)
    assert grad_check(net, n_probes=10, h=1e-5, seed=2) < 1e-4


def test_grad_check_rejects_zero_step():
    with pytest.raises(ValueError):
        grad_check(identity_net(2), h=0.0)


def test_grad_check_random_architectures():
    rng = np.random.default_rng(11)
    for i in range(10):
        depth = int(rng.integers(1, 5))
        widths = [3] + [int(w) for w in rng.integers(1, 40, size=depth)] + [3]
        acts = [str(a) for a in rng.choice(["relu", "linear"], size=len(widths) - 2)] + ["linear"]
        net = init_mlp(widths, acts, int(rng.integers(1 << 30)))
        assert grad_check(net, n_probes=10, h=1e-5, seed=i) < 1e-4, widths


# -- Adam ---------------------------------------------------------------------

def test_adam_zero_gradient():
    net = init_mlp([2, 3], ["linear"], 0)
    before = [p.copy() for p in net.params()]
    state = AdamState.zeros_like(net)
    adam_step(state, net, [np.zeros_like(p) for p in net.params()], TrainConfig())
    assert state.t == 1
    assert all(np.array_equal(a, b) for a, b in zip(before, net.params()))


@pytest.mark.parametrize("g", [3.0, -0.02, 1e-4])
def test_adam_first_step_is_learning_rate(g):
    net = Mlp([1, 1], ["linear"], [np.zeros((1, 1))], [np.zeros(1)])
    state = AdamState.zeros_like(net)
    cfg = TrainConfig(learning_rate=1e-3)
    adam_step(state, net, [np.full((1, 1), g), np.zeros(1)], cfg)
    # m_hat = g, v_hat = g^2 at t=1
    expected = -1e-3 * g / (abs(g) + 1e-8)
    assert net.weights[0][0, 0] == pytest.approx(expected, rel=1e-12)


def test_adam_matches_textbook_recursion():
    rng = np.random.default_rng(0)
    net = Mlp([1, 1], ["linear"], [np.zeros((1, 1))], [np.zeros(1)])
    state = AdamState.zeros_like(net)
    cfg = TrainConfig(learning_rate=0.01)
    p = m = v = 0.0
    for t in range(1, 30):
        g = rng.normal()
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        p -= 0.01 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
        adam_step(state, net, [np.full((1, 1), g), np.zeros(1)], cfg)
    assert net.weights[0][0, 0] == pytest.approx(p, rel=1e-9)


# -- training -----------------------------------------------------------------

@pytest.fixture(scope="module")
def circles():
    return sample_per_component(interlaced_circles(), 50, 0)


def small_pair(seed=0):
    enc = init_mlp([3, 16, 16, 1], default_activations(3), [seed, 0])
    dec = init_mlp([1, 16, 16, 3], default_activations(3), [seed, 1])
    return enc, dec


def test_zero_epochs(circles):
    enc, dec = small_pair()
    e2, d2, hist = train(enc, dec, circles, TrainConfig(epochs=0))
    assert hist == []
    for a, b in zip(stack(enc, dec).params(), stack(e2, d2).params()):
        assert np.array_equal(a, b)


def test_training_is_deterministic(circles):
    cfg = TrainConfig(epochs=5, batch_size=7, seed=3)
    e1, d1, h1 = train(*small_pair(), circles, cfg)
    e2, d2, h2 = train(*small_pair(), circles, cfg)
    assert h1 == h2
    for a, b in zip(stack(e1, d1).params(), stack(e2, d2).params()):
        assert np.array_equal(a, b)


def test_zero_learning_rate_leaves_parameters(circles):
    enc, dec = small_pair()
    e2, d2, hist = train(enc, dec, circles, TrainConfig(epochs=3, learning_rate=0.0))
    assert len(hist) == 3
    for a, b in zip(stack(enc, dec).params(), stack(e2, d2).params()):
        assert np.array_equal(a, b)


def test_training_reduces_loss(circles):
    _, _, hist = train(*small_pair(), circles, TrainConfig(epochs=60, batch_size=10))
    assert hist[-1] < 0.5 * hist[0]


def test_short_last_batch_is_used():
    X = np.random.default_rng(0).normal(size=(7, 3))
    enc = init_mlp([3, 2], ["linear"], 0)
    dec = init_mlp([2, 3], ["linear"], 1)
    cfg = TrainConfig(epochs=1, batch_size=5, shuffle=False)
    _, _, hist = train(enc, dec, X, cfg)
    # recompute the epoch by hand: one batch of 5 then one of 2
    net = stack(enc.copy(), dec.copy())
    state = AdamState.zeros_like(net)
    total = 0.0
    for sl in (slice(0, 5), slice(5, 7)):
        loss, grads = loss_and_grads(net, X[sl], X[sl])
        adam_step(state, net, grads, cfg)
        total += loss * (sl.stop - sl.start)
    assert state.t == 2
    assert hist[0] == pytest.approx(total / 7, rel=1e-15)


def test_train_errors(circles):
    enc, dec = small_pair()
    with pytest.raises(ValueError, match="empty"):
        train(enc, dec, np.zeros((0, 3)), TrainConfig(epochs=1))
    bad = init_mlp([2, 3], ["linear"], 0)
    with pytest.raises(ValueError):
        train(enc, bad, circles, TrainConfig(epochs=1))


def test_composition_shape_contract():
    enc, dec = small_pair()
    ae = NeuralAutoencoder(enc, dec)
    X = np.zeros((5, 3))
    assert ae.encode(X).shape == (5, 1)
    assert ae.reconstruct(X).shape == (5, 3)


# -- checkpoints --------------------------------------------------------------

def test_checkpoint_round_trip(tmp_path):
    net = init_mlp([3, 12, 1], ["relu", "linear"], 9)
    net.biases[0][:] = np.random.default_rng(0).normal(size=12) / 3
    path = tmp_path / "enc.json"
    save_checkpoint(net, path)
    back = load_checkpoint(path)
    assert back.widths == net.widths and back.activations == net.activations
    for a, b in zip(net.params(), back.params()):
        assert np.array_equal(a, b)
    doc = json.loads(path.read_text())
    assert len(doc["weights"][0]) == 3 * 12
    # row-major: consecutive entries run along the output axis
    assert doc["weights"][0][:12] == net.weights[0][0].tolist()


def test_checkpoint_dict_validates():
    d = mlp_to_dict(init_mlp([3, 4, 1], ["relu", "linear"], 0))
    d["activations"] = ["relu"]
    with pytest.raises(ValueError):
        mlp_from_dict(d)
