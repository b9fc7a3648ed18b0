"""Dense arithmetic, the MLP classifier and the retain/forget losses.

Tensors are plain ``float64`` numpy arrays. Model parameters live in a single
flat :class:`ParamVector` so all gradient algebra works on one vector type.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, ShapeError

ACTIVATIONS = ("tanh", "relu")


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, stream)``.

    Separate streams let independent consumers (batch order, inner batches,
    initialisation) draw without perturbing one another.
    """
    return np.random.Generator(np.random.Philox(key=[int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream)]))


@dataclass(frozen=True)
class Segment:
    name: str
    shape: tuple[int, ...]
    offset: int

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))


class ParamVector:
    """Flat parameter vector with a named segment layout."""

    __slots__ = ("data", "layout")

    def __init__(self, data, layout: Sequence[Segment] | None = None):
        data = np.array(data, dtype=np.float64).reshape(-1)
        if layout is None:
            layout = (Segment("theta", (data.size,), 0),)
        layout = tuple(layout)
        if sum(s.size for s in layout) != data.size:
            raise ShapeError(
                f"layout covers {sum(s.size for s in layout)} entries, data has {data.size}"
            )
        self.data = data
        self.layout = layout

    # construction helpers
    @classmethod
    def from_arrays(cls, named: Sequence[tuple[str, np.ndarray]]) -> "ParamVector":
        layout, chunks, offset = [], [], 0
        for name, arr in named:
            arr = np.asarray(arr, dtype=np.float64)
            layout.append(Segment(name, tuple(arr.shape), offset))
            chunks.append(arr.reshape(-1))
            offset += arr.size
        data = np.concatenate(chunks) if chunks else np.zeros(0)
        return cls(data, layout)

    def zeros_like(self) -> "ParamVector":
        return ParamVector(np.zeros_like(self.data), self.layout)

    def with_data(self, data) -> "ParamVector":
        return ParamVector(data, self.layout)

    def copy(self) -> "ParamVector":
        return ParamVector(self.data.copy(), self.layout)

    # layout access
    def __len__(self) -> int:
        return self.data.size

    def segment(self, name: str) -> np.ndarray:
        for s in self.layout:
            if s.name == name:
                return self.data[s.offset:s.offset + s.size].reshape(s.shape)
        raise KeyError(name)

    def arrays(self) -> list[np.ndarray]:
        return [self.data[s.offset:s.offset + s.size].reshape(s.shape) for s in self.layout]

    def names(self) -> list[str]:
        return [s.name for s in self.layout]

    def compatible(self, other: "ParamVector") -> bool:
        return self.layout == other.layout

    def _check(self, other: "ParamVector") -> None:
        if not isinstance(other, ParamVector):
            raise TypeError(f"expected ParamVector, got {type(other).__name__}")
        if self.layout != other.layout:
            raise ShapeError("ParamVector layouts differ")

    # algebra
    def __add__(self, other):
        self._check(other)
        return ParamVector(self.data + other.data, self.layout)

    def __sub__(self, other):
        self._check(other)
        return ParamVector(self.data - other.data, self.layout)

    def __mul__(self, scalar):
        if isinstance(scalar, ParamVector):
            self._check(scalar)
            return ParamVector(self.data * scalar.data, self.layout)
        return ParamVector(self.data * float(scalar), self.layout)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return ParamVector(self.data / float(scalar), self.layout)

    def __neg__(self):
        return ParamVector(-self.data, self.layout)

    def dot(self, other: "ParamVector") -> float:
        self._check(other)
        return float(self.data @ other.data)

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def isfinite(self) -> bool:
        return bool(np.all(np.isfinite(self.data)))

    def __eq__(self, other):
        if not isinstance(other, ParamVector):
            return NotImplemented
        return self.layout == other.layout and np.array_equal(self.data, other.data)

    __hash__ = None

    def __repr__(self):
        return f"ParamVector(size={self.data.size}, segments={self.names()})"


def mlp_layout(layer_dims: Sequence[int]) -> tuple[Segment, ...]:
    layout, offset = [], 0
    for i, (fan_in, fan_out) in enumerate(zip(layer_dims[:-1], layer_dims[1:])):
        layout.append(Segment(f"W{i}", (fan_in, fan_out), offset))
        offset += fan_in * fan_out
        layout.append(Segment(f"b{i}", (fan_out,), offset))
        offset += fan_out
    return tuple(layout)


@dataclass(frozen=True)
class LabeledBatch:
    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(1, -1)
        y = np.asarray(self.labels)
        if y.size and not np.issubdtype(y.dtype, np.integer):
            if not np.all(np.equal(np.mod(y, 1), 0)):
                raise DomainError("labels must be integers")
        y = y.astype(np.int64).reshape(-1)
        if x.ndim != 2:
            raise ShapeError(f"inputs must be 2-D, got shape {x.shape}")
        if x.shape[0] != y.size:
            raise ShapeError(f"{x.shape[0]} inputs but {y.size} labels")
        if np.any(y < 0):
            raise DomainError("labels must be non-negative")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return self.labels.size

    def subset(self, index) -> "LabeledBatch":
        index = np.asarray(index, dtype=np.int64)
        return LabeledBatch(self.inputs[index], self.labels[index])

    @staticmethod
    def concat(batches: Sequence["LabeledBatch"]) -> "LabeledBatch":
        return LabeledBatch(
            np.concatenate([b.inputs for b in batches]),
            np.concatenate([b.labels for b in batches]),
        )


@dataclass(frozen=True)
class MlpModel:
    layer_dims: tuple[int, ...]
    activation: str = "tanh"
    params: ParamVector = field(default=None, repr=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        if len(dims) < 2 or min(dims) < 1:
            raise DomainError(f"invalid layer_dims {dims}")
        if self.activation not in ACTIVATIONS:
            raise DomainError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "layer_dims", dims)
        layout = mlp_layout(dims)
        params = self.params
        if params is None:
            params = ParamVector(np.zeros(sum(s.size for s in layout)), layout)
        elif params.layout != layout:
            raise ShapeError("params layout does not match layer_dims")
        object.__setattr__(self, "params", params)

    @property
    def n_classes(self) -> int:
        return self.layer_dims[-1]

    @property
    def n_layers(self) -> int:
        return len(self.layer_dims) - 1

    def with_params(self, params: ParamVector) -> "MlpModel":
        return MlpModel(self.layer_dims, self.activation, params)

    def weights(self, params: ParamVector | None = None):
        """Yield ``(W, b)`` per layer, viewing into ``params``."""
        arrays = (params or self.params).arrays()
        return list(zip(arrays[0::2], arrays[1::2]))


def init_params(layer_dims: Sequence[int], activation: str = "tanh", seed: int = 0) -> MlpModel:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    model = MlpModel(tuple(layer_dims), activation)
    rng = make_rng(seed, stream=0)
    named = []
    for i, (fan_in, fan_out) in enumerate(zip(model.layer_dims[:-1], model.layer_dims[1:])):
        bound = 1.0 / np.sqrt(fan_in)
        named.append((f"W{i}", rng.uniform(-bound, bound, size=(fan_in, fan_out))))
        named.append((f"b{i}", np.zeros(fan_out)))
    return model.with_params(ParamVector.from_arrays(named))


def activate(kind: str, z: np.ndarray):
    """Return ``(act(z), act'(z), act''(z))``."""
    if kind == "tanh":
        t = np.tanh(z)
        d1 = 1.0 - t * t
        return t, d1, -2.0 * t * d1
    if kind == "relu":
        on = (z > 0).astype(np.float64)
        return z * on, on, np.zeros_like(z)
    raise DomainError(f"unknown activation {kind!r}")


def _check_batch(model: MlpModel, batch: LabeledBatch) -> None:
    if batch.inputs.shape[1] != model.layer_dims[0]:
        raise ShapeError(
            f"input width {batch.inputs.shape[1]} != layer_dims[0]={model.layer_dims[0]}"
        )
    if len(batch) and batch.labels.max() >= model.n_classes:
        raise DomainError(f"label {batch.labels.max()} outside [0, {model.n_classes})")


def forward(model: MlpModel, batch: LabeledBatch | np.ndarray) -> np.ndarray:
    """Logits of shape ``[n, classes]``."""
    if not isinstance(batch, LabeledBatch):
        x = np.atleast_2d(np.asarray(batch, dtype=np.float64))
        batch = LabeledBatch(x, np.zeros(x.shape[0], dtype=np.int64))
    _check_batch(model, batch)
    a = batch.inputs
    layers = model.weights()
    for i, (w, b) in enumerate(layers):
        z = a @ w + b
        a = z if i == len(layers) - 1 else activate(model.activation, z)[0]
    return a


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def per_sample_ce(model: MlpModel, batch: LabeledBatch) -> np.ndarray:
    """Cross-entropy of every sample, used by the membership attacker."""
    logp = log_softmax(forward(model, batch))
    return -logp[np.arange(len(batch)), batch.labels]


def loss_ce(model: MlpModel, batch: LabeledBatch) -> float:
    """Mean softmax cross-entropy; the retain loss."""
    if len(batch) == 0:
        raise DomainError("empty batch")
    return float(per_sample_ce(model, batch).mean())


def loss_neg_ce(model: MlpModel, batch: LabeledBatch) -> float:
    """Negated mean cross-entropy; the forget loss."""
    return -loss_ce(model, batch)


def predict(model: MlpModel, batch: LabeledBatch | np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. the lowest class index on ties.
    return np.argmax(forward(model, batch), axis=1)
