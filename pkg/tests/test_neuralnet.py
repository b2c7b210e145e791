import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fppshape.errors import DataFormatError, UsageError
from fppshape.neuralnet import (
    AdamState,
    InputTransform,
    Loss,
    Model,
    NetworkParams,
    TrainConfig,
    adam_step,
    forward,
    gradient,
    init,
    loss,
    relative_features,
    train,
)


def net(*layers):
    return NetworkParams([(np.array(W, dtype=float), np.array(b, dtype=float)) for W, b in layers])


def numeric_gradient(params, X, y, kind, h=1e-5):
    out = []
    for W, b in params.layers:
        gs = []
        for arr in (W, b):
            g = np.zeros_like(arr)
            for idx in np.ndindex(arr.shape):
                old = arr[idx]
                arr[idx] = old + h
                up = loss(forward(params, X), y, kind)
                arr[idx] = old - h
                down = loss(forward(params, X), y, kind)
                arr[idx] = old
                g[idx] = (up - down) / (2 * h)
            gs.append(g)
        out.append(tuple(gs))
    return out


def max_rel_error(analytic, numeric):
    worst = 0.0
    for (aW, ab), (nW, nb) in zip(analytic, numeric):
        for a, n in ((aW, nW), (ab, nb)):
            mask = np.abs(n) > 1e-8
            if mask.any():
                rel = np.abs(a[mask] - n[mask]) / np.maximum(np.abs(a[mask]), np.abs(n[mask]))
                worst = max(worst, float(rel.max()))
    return worst


def test_init_bounds_and_determinism():
    cfg = TrainConfig(layers=3, hidden_units=1, input_width=1)
    p = init(cfg, 0)
    for W, b in p.layers:
        assert W.shape == (1, 1) and abs(W[0, 0]) <= math.sqrt(6) and b[0] == 0
    q = init(cfg, 0)
    assert all(np.array_equal(a[0], c[0]) for a, c in zip(p.layers, q.layers))


def test_init_weights_centred():
    cfg = TrainConfig(layers=1, hidden_units=100, input_width=100)
    W = init(cfg, 1).layers[0][0]
    limit = math.sqrt(6 / 100)
    assert W.size == 10**4 and np.abs(W).max() <= limit
    assert abs(W.mean()) <= 3 * limit / math.sqrt(3 * W.size)


def test_forward_examples():
    zero = net(([[0, 0], [0, 0]], [0, 0]), ([[0, 0]], [3.5]))
    assert forward(zero, [7, -2]) == 3.5
    hand = net(([[1, -1], [2, 0]], [0, -1]), ([[1, 1]], [0]))
    assert forward(hand, [1, 2]) == 1.0
    affine = net(([[2.0]], [1.0]), ([[3.0]], [-1.0]))
    assert forward(affine, [4.0]) == 3 * (2 * 4 + 1) - 1
    assert forward(hand, np.array([[1, 2], [1, 2]])).tolist() == [1.0, 1.0]
    with pytest.raises(UsageError):
        forward(hand, [1, 2, 3])


def test_loss_examples():
    for kind in Loss:
        assert loss([1, 2], [1, 2], kind) == 0
    assert loss([97], [100], "mape") == pytest.approx(3.0)
    assert loss([97], [100], "mae") == 3.0
    assert loss([97], [100], "mse") == 9.0
    assert loss([1, 6], [2, 4], "mape") == pytest.approx(50.0)
    with pytest.raises(UsageError):
        loss([1], [0], "mape")
    with pytest.raises(UsageError):
        loss([1, 2], [1], "mae")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.1, 100), min_size=1, max_size=20), st.floats(0.01, 100),
       st.integers(0, 2**31))
def test_mape_scale_invariant(targets, c, seed):
    y = np.array(targets)
    yhat = y * np.random.default_rng(seed).uniform(0.5, 1.5, len(y))
    assert loss(c * yhat, c * y, "mape") == pytest.approx(loss(yhat, y, "mape"), rel=1e-9)


def test_gradient_of_zero_net():
    p = net(([[0, 0, 0]], [0]), ([[0]], [0.7]))
    X = np.random.default_rng(0).normal(size=(5, 3))
    y = np.arange(5.0)
    _, g = gradient(p, X, y, "mse")
    assert g[1][1][0] == pytest.approx(2 * np.mean(0.7 - y))
    assert not g[0][0].any() and not g[0][1].any() and not g[1][0].any()


def test_gradient_zero_at_perfect_fit():
    p = net(([[1.0]], [0.0]), ([[2.0]], [1.0]))
    X = np.array([[1.0], [2.0]])
    y = forward(p, X)
    _, g = gradient(p, X, y, "mse")
    assert all(not a.any() and not b.any() for a, b in g)


@pytest.mark.parametrize("kind", list(Loss))
def test_gradient_matches_finite_differences_3441(kind):
    rng = np.random.default_rng(3)
    cfg = TrainConfig(layers=2, hidden_units=4, input_width=3)
    p = init(cfg, rng)
    for W, b in p.layers:
        b += rng.normal(scale=0.1, size=b.shape)
    X = rng.normal(size=(8, 3))
    y = rng.uniform(0.5, 2.0, 8)
    _, g = gradient(p, X, y, kind)
    assert max_rel_error(g, numeric_gradient(p, X, y, kind)) <= 1e-4


def test_adam_first_step_closed_form():
    cfg = TrainConfig(learning_rate=0.01)
    for g in (0.3, -2.5, 1e-4):
        p = net(([[1.0]], [0.0]))
        state = AdamState.zeros_like(p)
        adam_step(p, state, [(np.array([[g]]), np.array([0.0]))], cfg)
        expected = 1.0 - 0.01 * g / (abs(g) + 1e-7)
        assert abs(p.layers[0][0][0, 0] - expected) <= 1e-12


def test_adam_zero_gradient_keeps_params():
    p = net(([[1.5]], [0.25]))
    state = AdamState.zeros_like(p)
    for _ in range(5):
        adam_step(p, state, [(np.zeros((1, 1)), np.zeros(1))], TrainConfig())
    assert p.layers[0][0][0, 0] == 1.5 and p.layers[0][1][0] == 0.25


def test_adam_three_steps_recursion():
    lr, b1, b2, eps = 0.001, 0.9, 0.999, 1e-7
    theta, m, v = 0.0, 0.0, 0.0
    table = []
    for t in (1, 2, 3):
        m = b1 * m + (1 - b1) * 1.0
        v = b2 * v + (1 - b2) * 1.0
        theta -= lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
        table.append(theta)
    p = net(([[0.0]], [0.0]))
    state = AdamState.zeros_like(p)
    for t in range(3):
        adam_step(p, state, [(np.ones((1, 1)), np.zeros(1))], TrainConfig())
        assert p.layers[0][0][0, 0] == pytest.approx(table[t], abs=1e-15)
    assert state.tstep == 3


def linear_data(n=400, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, size=(n, 3))
    return X, X @ np.array([0.5, -1.0, 2.0]) + 3.0


def test_train_on_linear_data():
    X, y = linear_data()
    cfg = TrainConfig(layers=1, hidden_units=8, loss="mse", epochs=50, batch_size=16,
                      learning_rate=0.01, input_transform="none")
    _, hist = train(X, y, cfg)
    assert hist[-1][2] <= 1e-3
    assert hist[9][1] < hist[0][1]


def test_train_is_deterministic():
    X, y = linear_data(100)
    cfg = TrainConfig(layers=2, hidden_units=5, epochs=3, input_transform="zscore")
    m1, h1 = train(X, y, cfg)
    m2, h2 = train(X, y, cfg)
    assert h1 == h2
    assert np.array_equal(m1.predict(X), m2.predict(X))


def test_train_config_validation():
    for kw in ({"epochs": 0}, {"batch_size": 0}, {"layers": 0}, {"validation_split": 1.0},
               {"loss": "huber"}, {"input_transform": "minmax"}):
        with pytest.raises(UsageError):
            TrainConfig(**kw)
    with pytest.raises(UsageError):
        train(np.ones((1, 3)), np.ones(1), TrainConfig(validation_split=0.9, input_transform="none"))


@pytest.mark.parametrize("layers", [4, 6, 8, 10])
@pytest.mark.parametrize("units", [40, 60, 80])
def test_grid_architectures_run(layers, units):
    p = init(TrainConfig(layers=layers, hidden_units=units), 0)
    assert p.widths == [units] * layers and p.input_width == 102
    assert np.isfinite(forward(p, np.ones(102)))


def test_relative_features():
    row = np.concatenate(([0.3, 4.0, 2.0], np.linspace(1, 8, 99)))
    out = relative_features(row)
    assert out[0] == 0.3 and out[1] == pytest.approx(math.log(4.0))
    assert np.allclose(out[2:], row[2:] / 4.0)
    with pytest.raises(UsageError):
        relative_features(np.ones(5))


def test_model_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    X = np.column_stack((rng.uniform(0, 1, 60), rng.uniform(1, 5, 60), rng.uniform(0, 2, (60, 100))))
    X[:, 3:] = np.sort(X[:, 3:], axis=1) + 0.1
    y = rng.uniform(1, 2, 60)
    model, _ = train(X, y, TrainConfig(layers=2, hidden_units=6, epochs=2))
    assert model.config.input_transform is InputTransform.RELATIVE
    path = tmp_path / "m.json"
    model.save(path)
    back = Model.load(path)
    assert np.array_equal(back.predict(X), model.predict(X))
    path.write_text(path.read_text().replace('"dims": [\n  102', '"dims": [\n  103'))
    with pytest.raises(DataFormatError):
        Model.load(path)
    path.write_text("{}")
    with pytest.raises(DataFormatError):
        Model.load(path)
