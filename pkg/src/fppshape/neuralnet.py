"""Feed-forward ReLU regression networks, written out in numpy.

A network with ``l`` hidden layers has ``l + 1`` affine maps. Hidden
layers use ReLU, the output layer is linear with a single unit. Weights
are stored as ``W`` of shape ``(n_out, n_in)`` so a batch of row vectors
``X`` maps to ``X @ W.T + b``.
"""
from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DataFormatError, UsageError

INPUT_WIDTH = 102
MODEL_FORMAT = "fppshape-model"
MODEL_VERSION = 1


class InputTransform(str, enum.Enum):
    """Preprocessing applied to model inputs before the first layer.

    ``none`` feeds raw values. ``zscore`` standardizes every column with
    training-set statistics. ``relative`` expects the ``(x, mu, sigma,
    q01..q99)`` layout, replaces ``mu`` by ``log mu`` and divides ``sigma``
    and the percentiles by ``mu`` so the features describe the shape of the
    law rather than its scale, then z-scores.
    """

    NONE = "none"
    ZSCORE = "zscore"
    RELATIVE = "relative"

    @classmethod
    def parse(cls, value) -> InputTransform:
        try:
            return cls(str(getattr(value, "value", value)).lower())
        except ValueError:
            raise UsageError(
                f"unknown input transform {value!r}; expected none, zscore or relative"
            ) from None


def relative_features(X) -> np.ndarray:
    """``(x, mu, sigma, q...) -> (x, log mu, sigma/mu, q/mu)``."""
    X = np.asarray(X, dtype=np.float64)
    X2 = np.atleast_2d(X)
    if X2.shape[1] != INPUT_WIDTH:
        raise UsageError(f"relative inputs need {INPUT_WIDTH} columns, got {X2.shape[1]}")
    mu = X2[:, 1:2]
    if np.any(~(mu > 0)):
        raise UsageError("relative inputs need a positive mean")
    out = np.hstack((X2[:, :1], np.log(mu), X2[:, 2:] / mu))
    return out[0] if X.ndim == 1 else out


class Loss(str, enum.Enum):
    MAPE = "mape"
    MAE = "mae"
    MSE = "mse"

    @classmethod
    def parse(cls, value) -> Loss:
        try:
            return cls(str(getattr(value, "value", value)).lower())
        except ValueError:
            raise UsageError(f"unknown loss {value!r}; expected mape, mae or mse") from None


@dataclass
class NetworkParams:
    layers: list[tuple[np.ndarray, np.ndarray]]

    def __post_init__(self):
        if not self.layers:
            raise UsageError("network needs at least one layer")
        for i, (W, b) in enumerate(self.layers):
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise UsageError(f"layer {i}: W {W.shape} and b {b.shape} do not match")
            if i and W.shape[1] != self.layers[i - 1][0].shape[0]:
                raise UsageError(f"layer {i} input width {W.shape[1]} != previous output")
        if self.layers[-1][0].shape[0] != 1:
            raise UsageError("output layer must have exactly one unit")

    @property
    def input_width(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def widths(self) -> list[int]:
        return [W.shape[0] for W, _ in self.layers[:-1]]

    def copy(self) -> NetworkParams:
        return NetworkParams([(W.copy(), b.copy()) for W, b in self.layers])

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate((W.ravel(), b)) for W, b in self.layers])


@dataclass
class TrainConfig:
    layers: int = 10
    hidden_units: int = 60
    loss: Loss = Loss.MAPE
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon_hat: float = 1e-7
    batch_size: int = 64
    epochs: int = 2
    validation_split: float = 0.1
    seed: int = 0
    input_transform: InputTransform = InputTransform.RELATIVE
    input_width: int = INPUT_WIDTH

    def __post_init__(self):
        self.loss = Loss.parse(self.loss)
        self.input_transform = InputTransform.parse(self.input_transform)
        if self.layers < 1 or self.hidden_units < 1:
            raise UsageError("layers and hidden_units must be >= 1")
        if self.batch_size < 1:
            raise UsageError("batch_size must be >= 1")
        if self.epochs < 1:
            raise UsageError("epochs must be >= 1")
        if not 0.0 <= self.validation_split < 1.0:
            raise UsageError("validation_split must lie in [0, 1)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["loss"] = self.loss.value
        d["input_transform"] = self.input_transform.value
        return d


@dataclass
class AdamState:
    m: list[tuple[np.ndarray, np.ndarray]]
    v: list[tuple[np.ndarray, np.ndarray]]
    tstep: int = 0

    @classmethod
    def zeros_like(cls, params: NetworkParams) -> AdamState:
        z = lambda: [(np.zeros_like(W), np.zeros_like(b)) for W, b in params.layers]
        return cls(z(), z(), 0)


def init(config: TrainConfig, rng: np.random.Generator | int | None = None) -> NetworkParams:
    """He-uniform weights, zero biases."""
    rng = np.random.default_rng(config.seed if rng is None else rng)
    dims = [config.input_width] + [config.hidden_units] * config.layers + [1]
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / fan_in)
        layers.append((rng.uniform(-limit, limit, (fan_out, fan_in)), np.zeros(fan_out)))
    return NetworkParams(layers)


def _check_inputs(params, X):
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    X2 = X[None, :] if single else X
    if X2.ndim != 2 or X2.shape[1] != params.input_width:
        raise UsageError(f"input width {X2.shape[-1]} != network input width {params.input_width}")
    return X2, single


def forward(params: NetworkParams, X):
    """Network output for one input vector (returns a float) or a batch."""
    h, single = _check_inputs(params, X)
    for W, b in params.layers[:-1]:
        h = np.maximum(h @ W.T + b, 0.0)
    W, b = params.layers[-1]
    out = (h @ W.T + b)[:, 0]
    return float(out[0]) if single else out


def loss(predictions, targets, kind: Loss | str = Loss.MAPE) -> float:
    kind = Loss.parse(kind)
    yhat = np.asarray(predictions, dtype=np.float64).ravel()
    y = np.asarray(targets, dtype=np.float64).ravel()
    if yhat.shape != y.shape or y.size == 0:
        raise UsageError("predictions and targets must be non-empty and equally long")
    r = y - yhat
    if kind is Loss.MSE:
        return float(np.mean(r * r))
    if kind is Loss.MAE:
        return float(np.mean(np.abs(r)))
    if np.any(y == 0):
        raise UsageError("MAPE is undefined for a zero target")
    return float(100.0 * np.mean(np.abs(r) / y))


def _dloss(yhat, y, kind):
    n = y.size
    r = yhat - y
    if kind is Loss.MSE:
        return 2.0 * r / n
    if kind is Loss.MAE:
        return np.sign(r) / n
    return 100.0 * np.sign(r) / (y * n)


def gradient(params: NetworkParams, X, y, kind: Loss | str = Loss.MAPE):
    """Batch loss and its exact gradient, as ``(loss, [(dW, db), ...])``.

    ReLU and the absolute value use subgradient 0 at 0.
    """
    kind = Loss.parse(kind)
    X, _ = _check_inputs(params, X)
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size == 0 or y.size != X.shape[0]:
        raise UsageError("gradient needs a non-empty batch with one target per row")

    acts = [X]
    pre = []
    h = X
    for W, b in params.layers[:-1]:
        z = h @ W.T + b
        pre.append(z)
        h = np.maximum(z, 0.0)
        acts.append(h)
    W, b = params.layers[-1]
    yhat = (h @ W.T + b)[:, 0]
    value = loss(yhat, y, kind)

    delta = _dloss(yhat, y, kind)[:, None]
    grads = [None] * len(params.layers)
    for i in range(len(params.layers) - 1, -1, -1):
        W, _ = params.layers[i]
        grads[i] = (delta.T @ acts[i], delta.sum(axis=0))
        if i:
            delta = (delta @ W) * (pre[i - 1] > 0.0)
    return value, grads


def adam_step(params: NetworkParams, state: AdamState, grads, config: TrainConfig):
    """One bias-corrected Adam update, in place. Returns ``(params, state)``."""
    b1, b2 = config.beta1, config.beta2
    state.tstep += 1
    c1 = 1.0 - b1**state.tstep
    c2 = 1.0 - b2**state.tstep
    lr, eps = config.learning_rate, config.epsilon_hat
    for i, ((W, b), (gW, gb)) in enumerate(zip(params.layers, grads)):
        (mW, mb), (vW, vb) = state.m[i], state.v[i]
        for p, g, m, v in ((W, gW, mW, vW), (b, gb, mb, vb)):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


@dataclass
class Model:
    """Trained network plus everything needed to query it."""

    params: NetworkParams
    config: TrainConfig
    variant: str = "mean_transformed"
    input_mean: np.ndarray | None = None
    input_scale: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        if self.config.input_transform is InputTransform.RELATIVE:
            X = relative_features(X)
        if self.input_mean is None:
            return X
        return (X - self.input_mean) / self.input_scale

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return forward(self.params, self.transform(X))

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "variant": self.variant,
            "config": self.config.to_dict(),
            "dims": [self.params.input_width] + self.params.widths + [1],
            "layers": [{"W": W.tolist(), "b": b.tolist()} for W, b in self.params.layers],
            "input_mean": None if self.input_mean is None else self.input_mean.tolist(),
            "input_scale": None if self.input_scale is None else self.input_scale.tolist(),
            "meta": self.meta,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def from_dict(cls, d: dict) -> Model:
        if d.get("format") != MODEL_FORMAT or d.get("version") != MODEL_VERSION:
            raise DataFormatError("not a fppshape model file (format/version mismatch)")
        try:
            layers = [
                (np.asarray(l["W"], dtype=np.float64), np.asarray(l["b"], dtype=np.float64))
                for l in d["layers"]
            ]
            dims = [layers[0][0].shape[1]] + [W.shape[0] for W, _ in layers]
            if dims != list(d["dims"]):
                raise DataFormatError(f"layer shapes {dims} disagree with declared dims {d['dims']}")
            params = NetworkParams(layers)
            cfg = dict(d["config"])
            config = TrainConfig(**cfg)
        except DataFormatError:
            raise
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise DataFormatError(f"malformed model file: {exc}") from exc
        mean = d.get("input_mean")
        scale = d.get("input_scale")
        return cls(
            params,
            config,
            d.get("variant", "mean_transformed"),
            None if mean is None else np.asarray(mean, dtype=np.float64),
            None if scale is None else np.asarray(scale, dtype=np.float64),
            d.get("meta", {}),
        )

    @classmethod
    def load(cls, path: str | Path) -> Model:
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_dict(d)


def _split(n, config, rng):
    order = rng.permutation(n)
    n_val = int(round(n * config.validation_split))
    n_train = n - n_val
    if n_train < 1:
        raise UsageError(
            f"validation_split={config.validation_split} leaves no training rows out of {n}"
        )
    return order[:n_train], order[n_train:]


def train(X, y, config: TrainConfig, *, log=None):
    """Fit a network with mini-batch Adam.

    Rows are shuffled (seeded), the last ``validation_split`` fraction is
    held out, and each epoch visits the rest in fresh random mini-batches.
    Returns ``(model, history)`` where ``history`` is a list of
    ``(epoch, train_loss, validation_loss)``; validation loss is NaN when
    nothing is held out.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or len(X) == 0 or len(X) != len(y):
        raise UsageError("train needs a non-empty (n, k) input matrix and n targets")
    config = replace(config, input_width=X.shape[1])
    rng = np.random.default_rng(config.seed)
    train_idx, val_idx = _split(len(X), config, rng)

    model = Model(init(config, rng), config)
    if config.input_transform is not InputTransform.NONE:
        pre = model.transform(X)[train_idx]
        model.input_mean = pre.mean(axis=0)
        model.input_scale = pre.std(axis=0)
        model.input_scale[model.input_scale == 0] = 1.0
    Xt = model.transform(X)

    params = model.params
    state = AdamState.zeros_like(params)
    history = []
    bs = config.batch_size
    for epoch in range(1, config.epochs + 1):
        order = train_idx[rng.permutation(len(train_idx))]
        for start in range(0, len(order), bs):
            batch = order[start : start + bs]
            _, grads = gradient(params, Xt[batch], y[batch], config.loss)
            adam_step(params, state, grads, config)
        tr = loss(forward(params, Xt[train_idx]), y[train_idx], config.loss)
        va = loss(forward(params, Xt[val_idx]), y[val_idx], config.loss) if len(val_idx) else float("nan")
        history.append((epoch, tr, va))
        if log is not None:
            log(f"epoch {epoch}/{config.epochs}: train {config.loss.value} {tr:.4f}, val {va:.4f}")
    return model, history
