"""Single-sample inference with a preallocated scratch arena.

An ``InferenceSession`` is compiled for one (spec, weights, input shape)
triple. Every intermediate buffer, and every strided view into one, is
created up front so ``run`` only writes into existing memory. Sessions are
not shareable across threads; ``forward`` keeps one per thread.
"""

from __future__ import annotations

import threading
import weakref

import numpy as np

from ..errors import NonFiniteActivation, ShapeMismatch
from .spec import BatchNorm, Conv2D, Dense, GlobalAvgPool, MaxPool2D, NetworkSpec, ReLU, Softmax
from .weights import WeightSet


def effective_params(spec: NetworkSpec, weights: WeightSet) -> tuple:
    """(spec actually executed, float32 tensors): int8 sets run BN-folded and dequantized."""
    weights.check(spec)
    if weights.folded:
        return spec.without_batchnorm(), weights.dequantized()
    return spec, weights.dequantized()


class InferenceSession:
    def __init__(self, spec: NetworkSpec, weights: WeightSet, input_shape: tuple):
        run_spec, params = effective_params(spec, weights)
        shapes = run_spec.output_shapes(tuple(input_shape))
        self.spec = spec
        self.input_shape = tuple(input_shape)
        self._input = np.zeros(self.input_shape, dtype=np.float32)
        self._steps = []
        cur = self._input
        for name, layer, shape in zip(run_spec.layer_names(), run_spec.layers, shapes):
            cur = self._compile(name, layer, cur, shape, params)
        self._probs = cur

    def _compile(self, name, layer, x, shape, params):
        steps = self._steps
        if isinstance(layer, Conv2D):
            H, W, C = x.shape
            kh, kw = layer.kernel_h, layer.kernel_w
            ph, pw = kh // 2, kw // 2
            padded = np.zeros((H + kh - 1, W + kw - 1, C), dtype=np.float32)
            interior = padded[ph:ph + H, pw:pw + W]
            cols = np.empty((H * W, kh * kw * C), dtype=np.float32)
            cols5 = cols.reshape(H, W, kh, kw, C)
            pairs = [(cols5[:, :, i, j, :], padded[i:i + H, j:j + W, :]) for i in range(kh) for j in range(kw)]
            kernel = np.ascontiguousarray(params[f"{name}.kernel"].reshape(kh * kw * C, layer.out_channels))
            bias = params[f"{name}.bias"].astype(np.float32)
            out = np.empty((H * W, layer.out_channels), dtype=np.float32)

            def conv():
                np.copyto(interior, x)
                for dst, src in pairs:
                    np.copyto(dst, src)
                np.matmul(cols, kernel, out=out)
                np.add(out, bias, out=out)

            steps.append(conv)
            return out.reshape(H, W, layer.out_channels)
        if isinstance(layer, BatchNorm):
            scale = (params[f"{name}.gamma"] / np.sqrt(params[f"{name}.running_var"] + layer.epsilon)).astype(np.float32)
            shift = (params[f"{name}.beta"] - params[f"{name}.running_mean"] * scale).astype(np.float32)

            def bn():
                np.multiply(x, scale, out=x)
                np.add(x, shift, out=x)

            steps.append(bn)
            return x
        if isinstance(layer, ReLU):
            steps.append(lambda: np.maximum(x, 0.0, out=x))
            return x
        if isinstance(layer, MaxPool2D):
            H2, W2, _ = shape
            p, q = layer.pool_h, layer.pool_w
            out = np.empty(shape, dtype=np.float32)
            views = [x[a:H2 * p:p, b:W2 * q:q] for a in range(p) for b in range(q)]
            first, rest = views[0], views[1:]

            def pool():
                np.copyto(out, first)
                for v in rest:
                    np.maximum(out, v, out=out)

            steps.append(pool)
            return out
        if isinstance(layer, GlobalAvgPool):
            out = np.empty(shape, dtype=np.float32)
            inv = np.float32(1.0 / (x.shape[0] * x.shape[1]))

            def gap():
                np.sum(x, axis=(0, 1), out=out)
                np.multiply(out, inv, out=out)

            steps.append(gap)
            return out
        if isinstance(layer, Dense):
            w = np.ascontiguousarray(params[f"{name}.weight"], dtype=np.float32)
            b = params[f"{name}.bias"].astype(np.float32)
            out = np.empty(shape, dtype=np.float32)
            flat = x.reshape(-1)

            def dense():
                np.matmul(flat, w, out=out)
                np.add(out, b, out=out)

            steps.append(dense)
            return out
        if isinstance(layer, Softmax):
            out = np.empty(shape, dtype=np.float64)

            def softmax():
                np.copyto(out, x)
                if not np.isfinite(out).all():
                    raise NonFiniteActivation("non-finite logits")
                np.subtract(out, out.max(), out=out)
                np.exp(out, out=out)
                np.divide(out, out.sum(), out=out)

            steps.append(softmax)
            return out
        raise TypeError(f"unsupported layer {layer!r}")

    def run(self, x: np.ndarray) -> np.ndarray:
        """Probabilities for one [H, W, C] input; returns a view into the arena (copy to keep)."""
        if x.shape != self.input_shape:
            raise ShapeMismatch(f"session compiled for {self.input_shape}, got {x.shape}")
        np.copyto(self._input, x)
        for step in self._steps:
            step()
        return self._probs


_local = threading.local()


def _session_cache() -> weakref.WeakKeyDictionary:
    cache = getattr(_local, "cache", None)
    if cache is None:
        cache = _local.cache = weakref.WeakKeyDictionary()
    return cache


def get_session(spec: NetworkSpec, weights: WeightSet, input_shape: tuple) -> InferenceSession:
    per_weights = _session_cache().setdefault(weights, {})
    key = (spec, tuple(input_shape))
    sess = per_weights.get(key)
    if sess is None:
        sess = per_weights[key] = InferenceSession(spec, weights, input_shape)
    return sess


def forward(spec: NetworkSpec, weights: WeightSet, x) -> np.ndarray:
    """Class probabilities for a FeatureTensor or [H, W, C] array (BN in inference mode)."""
    data = getattr(x, "data", x)
    data = np.asarray(data)
    if data.ndim != 3:
        raise ShapeMismatch(f"expected [H, W, C] input, got shape {data.shape}")
    return get_session(spec, weights, data.shape).run(data).copy()
