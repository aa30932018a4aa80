"""Model assembly, optimizers, the training loop, and model persistence."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .layers import Conv1D, Dense, Flatten, GRU, LSTM, ReLU, softmax_cross_entropy

ARCHIVE_VERSION = 1


class ModelFamily(Enum):
    DENSE = "dense"
    CONV1D = "conv1d"
    LSTM = "lstm"
    GRU = "gru"


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description.

    ``hidden_sizes`` is interpreted per family: dense widths for DENSE,
    (channels, dense width) for CONV1D, (state size,) for LSTM/GRU.
    ``input_stride`` subsamples the trajectory before the network sees it.
    """

    family: ModelFamily
    hidden_sizes: tuple[int, ...]
    input_stride: int = 1
    num_classes: int = 3

    def __post_init__(self):
        if self.input_stride < 1:
            raise ValueError("input_stride must be >= 1")
        if not self.hidden_sizes or any(h < 1 for h in self.hidden_sizes):
            raise ValueError("hidden_sizes must be positive")
        if self.family == ModelFamily.CONV1D and len(self.hidden_sizes) != 2:
            raise ValueError("conv1d needs hidden_sizes=(channels, dense_width)")
        if self.family in (ModelFamily.LSTM, ModelFamily.GRU) \
                and len(self.hidden_sizes) != 1:
            raise ValueError(f"{self.family.value} needs hidden_sizes=(state_size,)")


# Long-memory gate biases: recurrence over 100-1200 strided steps needs the
# state to persist far longer than the usual bias of 1 allows.
LSTM_FORGET_BIAS = 2.0
GRU_UPDATE_BIAS = -3.0


def default_spec(family: ModelFamily) -> ModelSpec:
    """Per-family defaults sized for the desk-scale experiment grid."""
    if family == ModelFamily.DENSE:
        return ModelSpec(family, hidden_sizes=(256, 64), input_stride=10)
    if family == ModelFamily.CONV1D:
        return ModelSpec(family, hidden_sizes=(16, 32), input_stride=5)
    if family == ModelFamily.LSTM:
        return ModelSpec(family, hidden_sizes=(32,), input_stride=60)
    return ModelSpec(family, hidden_sizes=(48,), input_stride=40)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 60
    learning_rate: float = 1e-3
    batch_size: int = 32
    optimizer: str = "adam"          # "adam" or "sgd"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    # Redraw a fresh rotation angle per trajectory each epoch (training
    # inputs only); used for the rotated-condition experiments.
    rotation_augment: bool = False

    def __post_init__(self):
        if self.epochs < 0 or self.learning_rate <= 0 or self.batch_size < 1:
            raise ValueError("epochs/learning_rate/batch_size out of range")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


class TrainingDiverged(RuntimeError):
    pass


class SGD:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: dict, grads: dict) -> None:
        for name in sorted(params):
            params[name] -= self.lr * grads[name]


class Adam:
    def __init__(self, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for name in sorted(params):
            g = grads[name]
            m = self.m.setdefault(name, np.zeros_like(g))
            v = self.v.setdefault(name, np.zeros_like(g))
            m += (1.0 - b1) * (g - m)
            v += (1.0 - b2) * (g * g - v)
            params[name] -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def _make_optimizer(config: TrainConfig):
    if config.optimizer == "sgd":
        return SGD(config.learning_rate)
    return Adam(config.learning_rate, config.beta1, config.beta2, config.eps)


def _glorot(rng: np.random.Generator, shape) -> np.ndarray:
    fan_in, fan_out = shape[-1], shape[0]
    if len(shape) == 2:
        fan_in, fan_out = shape[0], shape[1]
    elif len(shape) == 3:   # conv kernels (C_out, 2, C_in)
        fan_in, fan_out = shape[1] * shape[2], shape[0]
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _orthogonal(rng: np.random.Generator, size: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((size, size)))
    return q * np.sign(np.diag(r))


class Classifier:
    """A layer pipeline for fixed-length trajectory prefixes.

    ``forward`` expects (B, timesteps, 2) coordinates (already normalized);
    the configured input stride is applied internally.
    """

    def __init__(self, spec: ModelSpec, timesteps: int):
        if timesteps < 2 * spec.input_stride:
            raise ValueError(f"timesteps {timesteps} too short for stride "
                             f"{spec.input_stride}")
        self.spec = spec
        self.timesteps = timesteps
        self.seq_len = len(range(0, timesteps, spec.input_stride))
        self.layers = self._build_layers()

    def _build_layers(self):
        spec, L = self.spec, self.seq_len
        if spec.family == ModelFamily.DENSE:
            widths = [2 * L, *spec.hidden_sizes]
            layers = [Flatten()]
            for a, b in zip(widths, widths[1:]):
                layers += [Dense(a, b), ReLU()]
            layers.append(Dense(widths[-1], spec.num_classes))
            return layers
        if spec.family == ModelFamily.CONV1D:
            channels, width = spec.hidden_sizes
            return [Conv1D(2, channels), ReLU(), Flatten(),
                    Dense((L - 1) * channels, width), ReLU(),
                    Dense(width, spec.num_classes)]
        cell = LSTM if spec.family == ModelFamily.LSTM else GRU
        hidden = spec.hidden_sizes[0]
        return [cell(2, hidden), Dense(hidden, spec.num_classes)]

    def initialize(self, rng: np.random.Generator) -> "Classifier":
        """Glorot-uniform weights, zero biases, then recurrent-specific fixes:
        per-gate orthogonal state-to-state matrices and gate biases that
        start the cells in a long-memory regime."""
        for layer in self.layers:
            for name in sorted(layer.params):
                if name.startswith("b"):
                    layer.params[name][...] = 0.0
                else:
                    layer.params[name][...] = _glorot(rng, layer.params[name].shape)
        for layer in self.layers:
            if isinstance(layer, LSTM):
                h = layer.hidden
                for gate in range(4):
                    layer.params["Wh"][:, gate * h:(gate + 1) * h] = \
                        _orthogonal(rng, h)
                layer.params["b"][h:2 * h] = LSTM_FORGET_BIAS
            elif isinstance(layer, GRU):
                h = layer.hidden
                for gate in range(2):
                    layer.params["Uzr"][:, gate * h:(gate + 1) * h] = \
                        _orthogonal(rng, h)
                layer.params["Un"][...] = _orthogonal(rng, h)
                layer.params["bzr"][:h] = GRU_UPDATE_BIAS
        return self

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[1] != self.timesteps or x.shape[2] != 2:
            raise ValueError(
                f"expected (B, {self.timesteps}, 2) input, got {x.shape}")
        return x[:, ::self.spec.input_stride, :]

    def forward(self, x: np.ndarray) -> np.ndarray:
        out = self._check_input(x)
        for layer in self.layers:
            out = layer.forward(out)
        return out

    def backward(self, dlogits: np.ndarray) -> None:
        grad = dlogits
        for layer in reversed(self.layers):
            grad = layer.backward(grad)

    def train_step(self, x: np.ndarray, y: np.ndarray) -> float:
        loss, dlogits = softmax_cross_entropy(self.forward(x), y)
        self.backward(dlogits)
        return loss

    def parameters(self) -> dict[str, np.ndarray]:
        return {f"{i}.{k}": v for i, layer in enumerate(self.layers)
                for k, v in layer.params.items()}

    def gradients(self) -> dict[str, np.ndarray]:
        return {f"{i}.{k}": v for i, layer in enumerate(self.layers)
                for k, v in layer.grads.items()}


def build_model(spec: ModelSpec, timesteps: int,
                rng: np.random.Generator) -> Classifier:
    return Classifier(spec, timesteps).initialize(rng)


def predict(model: Classifier, x: np.ndarray) -> np.ndarray | int:
    """Predicted labels; a single (T, 2) prefix gives a scalar label.

    Ties resolve to the lowest label index (argmax takes the first max).
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    labels = np.argmax(model.forward(x), axis=1)
    return int(labels[0]) if single else labels


def accuracy(model: Classifier, x: np.ndarray, y: np.ndarray,
             batch_size: int = 256) -> float:
    hits = 0
    for s in range(0, len(x), batch_size):
        hits += int(np.sum(predict(model, x[s:s + batch_size]) == y[s:s + batch_size]))
    return hits / len(x)


def _rotate_batch(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Rotate every trajectory by its own uniform angle about the origin."""
    theta = rng.uniform(0.0, 2.0 * np.pi, size=len(x))
    c, s = np.cos(theta), np.sin(theta)
    rot = np.empty((len(x), 2, 2))
    rot[:, 0, 0] = c
    rot[:, 0, 1] = -s
    rot[:, 1, 0] = s
    rot[:, 1, 1] = c
    return np.einsum("btj,bij->bti", x, rot)


def train(model: Classifier, train_xy, val_xy, config: TrainConfig,
          rng: np.random.Generator) -> list[tuple[float, float]]:
    """Mini-batch training; returns per-epoch (train_loss, val_accuracy).

    The final parameters are simply those of the last epoch.  Non-finite
    loss aborts with TrainingDiverged.
    """
    x, y = train_xy
    opt = _make_optimizer(config)
    history = []
    n = len(x)
    for epoch in range(config.epochs):
        epoch_x = _rotate_batch(x, rng) if config.rotation_augment else x
        order = rng.permutation(n)
        losses = []
        for s in range(0, n, config.batch_size):
            idx = order[s:s + config.batch_size]
            loss = model.train_step(epoch_x[idx], y[idx])
            if not math.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss {loss} at epoch {epoch}, batch {s}")
            opt.step(model.parameters(), model.gradients())
            losses.append(loss)
        history.append((float(np.mean(losses)), accuracy(model, *val_xy)))
    return history


def save_model(model: Classifier, path) -> None:
    """Write parameters as an .npz archive with a JSON manifest entry.

    Arrays are stored row-major under their pipeline names; the manifest
    records the archive version, architecture, and expected input length.
    """
    manifest = {
        "version": ARCHIVE_VERSION,
        "family": model.spec.family.value,
        "hidden_sizes": list(model.spec.hidden_sizes),
        "input_stride": model.spec.input_stride,
        "num_classes": model.spec.num_classes,
        "timesteps": model.timesteps,
    }
    arrays = {name.replace(".", "/"): arr for name, arr in model.parameters().items()}
    np.savez(path, __manifest__=np.frombuffer(
        json.dumps(manifest).encode(), dtype=np.uint8), **arrays)


def load_model(path) -> Classifier:
    with np.load(path) as archive:
        manifest = json.loads(archive["__manifest__"].tobytes().decode())
        if manifest["version"] != ARCHIVE_VERSION:
            raise ValueError(f"unsupported archive version {manifest['version']}")
        spec = ModelSpec(family=ModelFamily(manifest["family"]),
                         hidden_sizes=tuple(manifest["hidden_sizes"]),
                         input_stride=manifest["input_stride"],
                         num_classes=manifest["num_classes"])
        model = Classifier(spec, manifest["timesteps"])
        params = model.parameters()
        for name, arr in params.items():
            arr[...] = archive[name.replace(".", "/")]
    return model
