"""Layer descriptors, shape inference and parameter bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from ..errors import ShapeMismatch


@dataclass(frozen=True)
class Conv2D:
    out_channels: int
    kernel_h: int = 3
    kernel_w: int = 3
    stride: int = 1
    padding: str = "same"

    def __post_init__(self):
        if self.padding != "same" or self.stride != 1:
            raise ValueError("only stride-1 'same' convolutions are supported")
        if self.kernel_h % 2 == 0 or self.kernel_w % 2 == 0:
            raise ValueError("'same' padding needs odd kernel sizes")


@dataclass(frozen=True)
class BatchNorm:
    channels: int | None = None
    epsilon: float = 1e-5


@dataclass(frozen=True)
class ReLU:
    pass


@dataclass(frozen=True)
class MaxPool2D:
    pool_h: int = 2
    pool_w: int = 2


@dataclass(frozen=True)
class GlobalAvgPool:
    pass


@dataclass(frozen=True)
class Dense:
    out_features: int


@dataclass(frozen=True)
class Softmax:
    pass


Layer = Union[Conv2D, BatchNorm, ReLU, MaxPool2D, GlobalAvgPool, Dense, Softmax]

_PREFIX = {Conv2D: "conv", BatchNorm: "bn", Dense: "dense"}


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple
    input_channels: int = 1

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if len(self.layers) < 2 or not isinstance(self.layers[-1], Softmax) or not isinstance(self.layers[-2], Dense):
            raise ValueError("network must end with Dense followed by Softmax")

    @property
    def n_classes(self) -> int:
        return self.layers[-2].out_features

    def layer_names(self) -> list:
        """Stable name per layer, e.g. conv1, bn1, relu, pool, dense1."""
        counters: dict = {}
        names = []
        for layer in self.layers:
            prefix = _PREFIX.get(type(layer), type(layer).__name__.lower())
            counters[prefix] = counters.get(prefix, 0) + 1
            names.append(f"{prefix}{counters[prefix]}")
        return names

    def without_batchnorm(self) -> "NetworkSpec":
        return NetworkSpec(tuple(l for l in self.layers if not isinstance(l, BatchNorm)), self.input_channels)

    def output_shapes(self, input_shape: tuple) -> list:
        """Shape after each layer for an [H, W, C] input."""
        shape = tuple(input_shape)
        if len(shape) != 3 or shape[2] != self.input_channels:
            raise ShapeMismatch(f"expected [H, W, {self.input_channels}] input, got {list(shape)}")
        shapes = []
        for layer in self.layers:
            if isinstance(layer, Conv2D):
                if len(shape) != 3:
                    raise ShapeMismatch("Conv2D needs a spatial input")
                shape = (shape[0], shape[1], layer.out_channels)
            elif isinstance(layer, MaxPool2D):
                if len(shape) != 3:
                    raise ShapeMismatch("MaxPool2D needs a spatial input")
                shape = (shape[0] // layer.pool_h, shape[1] // layer.pool_w, shape[2])
                if shape[0] == 0 or shape[1] == 0:
                    raise ShapeMismatch("pooling reduced a spatial dimension to zero")
            elif isinstance(layer, GlobalAvgPool):
                shape = (shape[-1],)
            elif isinstance(layer, Dense):
                if len(shape) == 3 and shape[:2] != (1, 1):
                    raise ShapeMismatch("Dense on a spatial input needs 1x1 spatial dims")
                shape = (layer.out_features,)
            elif isinstance(layer, BatchNorm):
                if layer.channels is not None and layer.channels != shape[-1]:
                    raise ShapeMismatch(f"BatchNorm expects {layer.channels} channels, got {shape[-1]}")
            shapes.append(shape)
        return shapes

    def tensor_shapes(self) -> dict:
        """Name -> shape of every weight tensor (independent of spatial input size)."""
        out = {}
        channels = self.input_channels
        features = None  # flat width once spatial dims are gone
        for name, layer in zip(self.layer_names(), self.layers):
            if isinstance(layer, Conv2D):
                out[f"{name}.kernel"] = (layer.kernel_h, layer.kernel_w, channels, layer.out_channels)
                out[f"{name}.bias"] = (layer.out_channels,)
                channels = layer.out_channels
            elif isinstance(layer, BatchNorm):
                width = features if features is not None else channels
                for p in ("gamma", "beta", "running_mean", "running_var"):
                    out[f"{name}.{p}"] = (width,)
            elif isinstance(layer, GlobalAvgPool):
                features = channels
            elif isinstance(layer, Dense):
                if features is None:
                    features = channels  # flat input, e.g. [1, 1, C]
                out[f"{name}.weight"] = (features, layer.out_features)
                out[f"{name}.bias"] = (layer.out_features,)
                features = layer.out_features
        return out


def default_spec(n_classes: int = 4, input_channels: int = 1) -> NetworkSpec:
    """Three conv blocks (32/64/128), global average pool, dense classifier."""
    return NetworkSpec(
        (
            Conv2D(32), BatchNorm(32), ReLU(), MaxPool2D(2, 2),
            Conv2D(64), BatchNorm(64), ReLU(), MaxPool2D(2, 2),
            Conv2D(128), BatchNorm(128), ReLU(),
            GlobalAvgPool(), Dense(n_classes), Softmax(),
        ),
        input_channels,
    )


def tiny_spec(n_classes: int = 4) -> NetworkSpec:
    """Reduced network used for gradient checks (expects 8x8x1 input)."""
    return NetworkSpec(
        (
            Conv2D(4), BatchNorm(4), ReLU(), MaxPool2D(2, 2),
            Conv2D(8), BatchNorm(8), ReLU(),
            GlobalAvgPool(), Dense(n_classes), Softmax(),
        )
    )


def param_count(spec: NetworkSpec, mode: str = "table") -> dict:
    """Per-layer parameter counts and their total.

    ``table`` counts conv kernels + biases and dense weights only (the usual
    architecture-table convention). ``full`` adds dense biases and the four
    per-channel BatchNorm tensors.
    """
    if mode not in ("table", "full"):
        raise ValueError(f"unknown mode {mode!r}")
    shapes = spec.tensor_shapes()
    layers = []
    for name, layer in zip(spec.layer_names(), spec.layers):
        n = 0
        if isinstance(layer, Conv2D):
            kh, kw, cin, cout = shapes[f"{name}.kernel"]
            n = kh * kw * cin * cout + cout
        elif isinstance(layer, Dense):
            fin, fout = shapes[f"{name}.weight"]
            n = fin * fout + (fout if mode == "full" else 0)
        elif isinstance(layer, BatchNorm) and mode == "full":
            n = 4 * shapes[f"{name}.gamma"][0]
        else:
            continue
        layers.append((name, n))
    return {"layers": layers, "total": sum(n for _, n in layers)}
