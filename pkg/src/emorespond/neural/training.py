"""Batched NHWC forward/backward passes, optimizers and the training loop."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DivergedLoss, EmptyDataset, NonFiniteActivation, ShapeMismatch
from .inference import effective_params
from .spec import BatchNorm, Conv2D, Dense, GlobalAvgPool, MaxPool2D, NetworkSpec, ReLU, Softmax
from .weights import WeightSet

log = logging.getLogger(__name__)

BN_MOMENTUM = 0.1


# --- layer primitives -------------------------------------------------------

# Convolutions with at least this many input channels use shifted matmuls over
# a flattened padded buffer; thinner inputs (the first layer) use im2col.
_SHIFT_MIN_CHANNELS = 4


def _conv_forward(x, kernel, bias):
    if x.shape[-1] >= _SHIFT_MIN_CHANNELS:
        return _shift_conv_forward(x, kernel, bias)
    N, H, W, C = x.shape
    kh, kw, _, cout = kernel.shape
    ph, pw = kh // 2, kw // 2
    padded = np.zeros((N, H + kh - 1, W + kw - 1, C), dtype=x.dtype)
    padded[:, ph:ph + H, pw:pw + W] = x
    cols = np.empty((N, H, W, kh, kw, C), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, :, i, j, :] = padded[:, i:i + H, j:j + W, :]
    cols = cols.reshape(N * H * W, kh * kw * C)
    y = cols @ kernel.reshape(kh * kw * C, cout) + bias
    return y.reshape(N, H, W, cout), ("im2col", cols)


def _shift_conv_forward(x, kernel, bias):
    """'same' conv as a sum of kh*kw matmuls on contiguous slices of the row-flattened padded input.

    Output rows are computed at the padded width; the kw-1 wrap-around
    columns per row are discarded.
    """
    N, H, W, C = x.shape
    kh, kw, _, cout = kernel.shape
    ph, pw = kh // 2, kw // 2
    Wp = W + kw - 1
    padded = np.zeros((N, H + kh, Wp, C), dtype=x.dtype)  # one spare row keeps every slice in bounds
    padded[:, ph:ph + H, pw:pw + W] = x
    flat = padded.reshape(N, -1, C)
    L = H * Wp
    acc = np.zeros((N, L, cout), dtype=x.dtype)
    tmp = np.empty_like(acc)
    for i in range(kh):
        for j in range(kw):
            off = i * Wp + j
            np.matmul(flat[:, off:off + L], kernel[i, j], out=tmp)
            acc += tmp
    y = acc.reshape(N, H, Wp, cout)[:, :, :W] + bias
    return y, ("shift", flat)


def _conv_backward(dy, cache, x_shape, kernel, need_dx):
    kind, saved = cache
    if kind == "shift":
        return _shift_conv_backward(dy, saved, x_shape, kernel, need_dx)
    cols = saved
    N, H, W, C = x_shape
    kh, kw, _, cout = kernel.shape
    dy2 = dy.reshape(-1, cout)
    dk = (cols.T @ dy2).reshape(kernel.shape)
    db = dy2.sum(axis=0)
    if not need_dx:
        return None, dk, db
    dcols = (dy2 @ kernel.reshape(-1, cout).T).reshape(N, H, W, kh, kw, C)
    dpad = np.zeros((N, H + kh - 1, W + kw - 1, C), dtype=dy.dtype)
    for i in range(kh):
        for j in range(kw):
            dpad[:, i:i + H, j:j + W, :] += dcols[:, :, :, i, j, :]
    ph, pw = kh // 2, kw // 2
    return dpad[:, ph:ph + H, pw:pw + W, :], dk, db


def _shift_conv_backward(dy, flat, x_shape, kernel, need_dx):
    N, H, W, C = x_shape
    kh, kw, _, cout = kernel.shape
    Wp = W + kw - 1
    L = H * Wp
    dyf = np.zeros((N, H, Wp, cout), dtype=dy.dtype)  # zero at discarded columns
    dyf[:, :, :W] = dy
    dyf = dyf.reshape(N, L, cout)
    db = dy.sum(axis=(0, 1, 2))
    dk = np.empty_like(kernel)
    for i in range(kh):
        for j in range(kw):
            off = i * Wp + j
            dk[i, j] = np.matmul(flat[:, off:off + L].transpose(0, 2, 1), dyf).sum(axis=0)
    if not need_dx:
        return None, dk, db
    dflat = np.zeros_like(flat)
    tmp = np.empty((N, L, C), dtype=dy.dtype)
    for i in range(kh):
        for j in range(kw):
            off = i * Wp + j
            np.matmul(dyf, kernel[i, j].T, out=tmp)
            dflat[:, off:off + L] += tmp
    ph, pw = kh // 2, kw // 2
    dx = dflat.reshape(N, H + kh, Wp, C)[:, ph:ph + H, pw:pw + W]
    return dx, dk, db


def _pool_views(x, p, q):
    H2, W2 = x.shape[1] // p, x.shape[2] // q
    return [x[:, a:H2 * p:p, b:W2 * q:q] for a in range(p) for b in range(q)]


def _pool_forward(x, p, q):
    """Max over each window plus the offset of its first maximum (int8, row-major within the window)."""
    views = _pool_views(x, p, q)
    y = views[0].copy()
    for v in views[1:]:
        np.maximum(y, v, out=y)
    winner = np.full(y.shape, len(views) - 1, dtype=np.int8)
    for k in range(len(views) - 2, -1, -1):  # descending, so the lowest matching offset wins
        np.copyto(winner, np.int8(k), where=views[k] == y)
    return y, winner


def _pool_backward(dy, winner, x_shape, p, q):
    dx = np.zeros(x_shape, dtype=dy.dtype)
    zero = dy.dtype.type(0)
    for k, v in enumerate(_pool_views(dx, p, q)):
        np.copyto(v, np.where(winner == k, dy, zero))
    return dx


def _softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


# --- whole-network passes ---------------------------------------------------

def run_network(spec: NetworkSpec, params: dict, x: np.ndarray, train: bool):
    """Forward pass over a batch [N, H, W, C].

    Returns (probabilities, logits, caches, batch_stats); caches/batch_stats
    are only populated when ``train`` is true (BN uses batch statistics).
    """
    caches = []
    stats = {}
    for name, layer in zip(spec.layer_names(), spec.layers):
        if isinstance(layer, Conv2D):
            y, conv_cache = _conv_forward(x, params[f"{name}.kernel"], params[f"{name}.bias"])
            caches.append((x.shape, conv_cache) if train else None)
            x = y
        elif isinstance(layer, BatchNorm):
            axes = tuple(range(x.ndim - 1))
            gamma, beta = params[f"{name}.gamma"], params[f"{name}.beta"]
            if train:
                mean = x.mean(axis=axes)
                xhat = x - mean
                var = np.mean(np.square(xhat), axis=axes)
                inv_std = 1.0 / np.sqrt(var + layer.epsilon)
                xhat *= inv_std
                caches.append((xhat, inv_std))
                count = x.size // x.shape[-1]
                stats[name] = (mean, var * count / max(count - 1, 1))
                x = gamma * xhat + beta
            else:
                inv_std = 1.0 / np.sqrt(params[f"{name}.running_var"] + layer.epsilon)
                x = gamma * (x - params[f"{name}.running_mean"]) * inv_std + beta
                caches.append(None)
        elif isinstance(layer, ReLU):
            caches.append(x > 0 if train else None)
            x = np.maximum(x, 0)
        elif isinstance(layer, MaxPool2D):
            y, idx = _pool_forward(x, layer.pool_h, layer.pool_w)
            caches.append((x.shape, idx) if train else None)
            x = y
        elif isinstance(layer, GlobalAvgPool):
            caches.append(x.shape)
            x = x.mean(axis=(1, 2))
        elif isinstance(layer, Dense):
            x = x.reshape(x.shape[0], -1)
            caches.append(x if train else None)
            x = x @ params[f"{name}.weight"] + params[f"{name}.bias"]
        elif isinstance(layer, Softmax):
            logits = x
            if not np.isfinite(logits).all():
                raise NonFiniteActivation("non-finite logits")
            x = _softmax(logits)
            caches.append(None)
    return x, logits, caches, stats


def backprop(spec: NetworkSpec, params: dict, caches: list, dlogits: np.ndarray) -> dict:
    """Gradients of every trainable tensor given d(loss)/d(logits)."""
    grads = {}
    names = spec.layer_names()
    first_param = next(i for i, l in enumerate(spec.layers) if isinstance(l, (Conv2D, Dense, BatchNorm)))
    d = dlogits
    for i in range(len(spec.layers) - 2, -1, -1):  # Softmax handled by dlogits
        name, layer, cache = names[i], spec.layers[i], caches[i]
        if isinstance(layer, Dense):
            xin = cache
            grads[f"{name}.weight"] = xin.T @ d
            grads[f"{name}.bias"] = d.sum(axis=0)
            d = d @ params[f"{name}.weight"].T
        elif isinstance(layer, GlobalAvgPool):
            shape = cache
            d = np.broadcast_to(d[:, None, None, :] / (shape[1] * shape[2]), shape).copy()
        elif isinstance(layer, ReLU):
            d = d * cache
        elif isinstance(layer, MaxPool2D):
            shape, idx = cache
            d = _pool_backward(d, idx, shape, layer.pool_h, layer.pool_w)
        elif isinstance(layer, BatchNorm):
            xhat, inv_std = cache
            axes = tuple(range(d.ndim - 1))
            gamma = params[f"{name}.gamma"]
            m = d.size // d.shape[-1]
            dgamma = np.sum(d * xhat, axis=axes)
            dbeta = d.sum(axis=axes)
            grads[f"{name}.gamma"], grads[f"{name}.beta"] = dgamma, dbeta
            # dxhat = d * gamma, so its sums follow from dbeta and dgamma
            out = xhat * (gamma * dgamma / m)
            out += gamma * dbeta / m
            np.subtract(d * gamma, out, out=out)
            out *= inv_std
            d = out
        elif isinstance(layer, Conv2D):
            shape, conv_cache = cache
            d, grads[f"{name}.kernel"], grads[f"{name}.bias"] = _conv_backward(
                d, conv_cache, shape, params[f"{name}.kernel"], need_dx=i > first_param
            )
    return grads


def _as_batch(x) -> np.ndarray:
    data = np.asarray(getattr(x, "data", x))
    return data[None] if data.ndim == 3 else data


def loss_and_grads(spec: NetworkSpec, weights: WeightSet, x, targets) -> tuple:
    """Mean cross-entropy over a batch and its gradients (BN in training mode)."""
    if weights.folded:
        raise ValueError("cannot train quantized weights")
    weights.check(spec)
    xb = _as_batch(x)
    dtype = next(iter(weights.tensors.values())).dtype
    xb = xb.astype(dtype, copy=False)
    spec.output_shapes(xb.shape[1:])
    targets = np.atleast_1d(np.asarray(targets))
    if targets.shape[0] != xb.shape[0]:
        raise ShapeMismatch("one target per input required")
    if targets.min() < 0 or targets.max() >= spec.n_classes:
        raise ValueError(f"target class outside [0, {spec.n_classes})")
    probs, logits, caches, stats = run_network(spec, weights.tensors, xb, train=True)
    n = xb.shape[0]
    picked = probs[np.arange(n), targets]
    loss = float(-np.mean(np.log(np.maximum(picked, np.finfo(probs.dtype).tiny))))
    dlogits = probs.copy()
    dlogits[np.arange(n), targets] -= 1.0
    dlogits /= n
    grads = backprop(spec, weights.tensors, caches, dlogits)
    return loss, grads, stats, probs


def backward(spec: NetworkSpec, weights: WeightSet, x, target_class: int) -> tuple:
    """(gradient WeightSet, loss) of -log p[target] for one input.

    Running BN statistics are not gradients; they come back as zeros.
    """
    loss, grads, _, _ = loss_and_grads(spec, weights, x, [target_class])
    full = {k: grads.get(k, np.zeros_like(v)).astype(v.dtype) for k, v in weights.tensors.items()}
    return WeightSet(full), loss


def train_loss(spec: NetworkSpec, weights: WeightSet, x, target_class: int) -> float:
    """Training-mode loss for one input, no gradients (finite-difference probe)."""
    xb = _as_batch(x).astype(next(iter(weights.tensors.values())).dtype, copy=False)
    probs, _, _, _ = run_network(spec, weights.tensors, xb, train=True)
    return float(-np.log(probs[0, target_class]))


def predict_batch(spec: NetworkSpec, weights: WeightSet, x, chunk: int = 32) -> np.ndarray:
    """Inference-mode probabilities for [N, H, W, C] inputs."""
    run_spec, params = effective_params(spec, weights)
    xb = _as_batch(x)
    out = []
    for s in range(0, xb.shape[0], chunk):
        probs, _, _, _ = run_network(run_spec, params, xb[s:s + chunk].astype(np.float32), train=False)
        out.append(probs)
    return np.concatenate(out, axis=0)


# --- optimizers -------------------------------------------------------------

class SGD:
    def __init__(self, lr: float, momentum: float = 0.9):
        self.lr, self.momentum = lr, momentum
        self.velocity = {}

    def step(self, params: dict, grads: dict) -> None:
        for k, g in grads.items():
            v = self.velocity.get(k)
            v = g if v is None else self.momentum * v + g
            self.velocity[k] = v
            params[k] -= (self.lr * v).astype(params[k].dtype)


class AdamW:
    def __init__(self, lr: float, betas=(0.9, 0.999), eps: float = 1e-8, weight_decay: float = 0.01):
        self.lr, self.betas, self.eps, self.wd = lr, betas, eps, weight_decay
        self.m, self.v, self.t = {}, {}, 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.betas
        c1, c2 = 1 - b1 ** self.t, 1 - b2 ** self.t
        for k, g in grads.items():
            m = self.m[k] = b1 * self.m.get(k, 0.0) + (1 - b1) * g
            v = self.v[k] = b2 * self.v.get(k, 0.0) + (1 - b2) * g * g
            p = params[k]
            if k.endswith((".kernel", ".weight")):
                p -= (self.lr * self.wd * p).astype(p.dtype)
            p -= (self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(p.dtype)


@dataclass
class TrainOptions:
    optimizer: str = "adamw"
    lr: float = 1e-4
    epochs: int = 100
    batch: int = 32
    seed: int = 0
    patience: int = 10
    weight_decay: float = 0.01
    target_accuracy: float | None = None


@dataclass
class TrainTrace:
    loss: list = field(default_factory=list)
    accuracy: list = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False


def _stack(dataset):
    xs = np.stack([np.asarray(getattr(x, "data", x), dtype=np.float32) for x, _ in dataset])
    ys = np.array([int(y) for _, y in dataset])
    return xs, ys


def accuracy(spec: NetworkSpec, weights: WeightSet, xs: np.ndarray, ys: np.ndarray) -> float:
    return float(np.mean(predict_batch(spec, weights, xs).argmax(axis=1) == ys))


def train(spec: NetworkSpec, dataset, opts: TrainOptions = TrainOptions(), validation=None, init: WeightSet | None = None):
    """Mini-batch training; returns the best-accuracy weights and a per-epoch trace.

    Accuracy is measured in inference mode on ``validation`` when given,
    otherwise on the training set. Stops after ``opts.patience`` epochs
    without improvement.
    """
    from .weights import init_weights

    if not dataset:
        raise EmptyDataset("training set is empty")
    xs, ys = _stack(dataset)
    spec.output_shapes(xs.shape[1:])
    vx, vy = _stack(validation) if validation else (xs, ys)
    rng = np.random.default_rng(opts.seed)
    weights = init.copy() if init is not None else init_weights(spec, seed=int(rng.integers(2**31)))
    params = weights.tensors
    if opts.optimizer == "adamw":
        optim = AdamW(opts.lr, weight_decay=opts.weight_decay)
    elif opts.optimizer == "sgd":
        optim = SGD(opts.lr)
    else:
        raise ValueError(f"unknown optimizer {opts.optimizer!r}")

    trace = TrainTrace()
    best, best_acc, stale = weights.copy(), -1.0, 0
    for epoch in range(opts.epochs):
        order = rng.permutation(len(xs))
        total, count = 0.0, 0
        for s in range(0, len(order), opts.batch):
            idx = order[s:s + opts.batch]
            loss, grads, stats, _ = loss_and_grads(spec, weights, xs[idx], ys[idx])
            if not math.isfinite(loss):
                raise DivergedLoss(f"loss became {loss} at epoch {epoch}")
            optim.step(params, grads)
            for name, (mean, var) in stats.items():
                rm, rv = params[f"{name}.running_mean"], params[f"{name}.running_var"]
                rm += (BN_MOMENTUM * (mean - rm)).astype(rm.dtype)
                rv += (BN_MOMENTUM * (var - rv)).astype(rv.dtype)
            total += loss * len(idx)
            count += len(idx)
        acc = accuracy(spec, weights, vx, vy)
        trace.loss.append(total / count)
        trace.accuracy.append(acc)
        log.info("epoch %d loss %.4f acc %.4f", epoch + 1, total / count, acc)
        if acc > best_acc:
            best, best_acc, stale = weights.copy(), acc, 0
            trace.best_epoch = epoch
        else:
            stale += 1
            if stale >= opts.patience:
                trace.stopped_early = True
                break
        if opts.target_accuracy is not None and best_acc >= opts.target_accuracy:
            break
    return best, trace
