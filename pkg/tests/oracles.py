"""Slow, obviously-correct reference implementations the fast paths are checked against.

Nothing here imports the code under test's numerics.
"""

import math

import numpy as np


def naive_dft_power(frame, n_fft):
    x = list(frame) + [0.0] * (n_fft - len(frame))
    out = []
    for k in range(n_fft // 2 + 1):
        re = im = 0.0
        for n, v in enumerate(x):
            ang = -2.0 * math.pi * k * n / n_fft
            re += v * math.cos(ang)
            im += v * math.sin(ang)
        out.append(re * re + im * im)
    return np.array(out)


def naive_dft_power_matrix(frame, n_fft):
    """Same O(N^2) sum as ``naive_dft_power`` but with an explicit DFT matrix (faster for many frames)."""
    n = np.arange(n_fft)
    k = np.arange(n_fft // 2 + 1)[:, None]
    basis = np.exp(-2j * np.pi * k * n / n_fft)
    x = np.zeros(n_fft)
    x[: len(frame)] = frame
    return np.abs(basis @ x) ** 2


def naive_dct2_ortho(x):
    N = len(x)
    out = np.zeros(N)
    for k in range(N):
        s = 0.0
        for n in range(N):
            s += x[n] * math.cos(math.pi * k * (2 * n + 1) / (2 * N))
        scale = math.sqrt(1.0 / N) if k == 0 else math.sqrt(2.0 / N)
        out[k] = scale * s
    return out


def hann_periodic(n):
    return [0.5 - 0.5 * math.cos(2 * math.pi * i / n) for i in range(n)]


def linear_interp(src, src_rate, dst_rate, n_out):
    """Hand-rolled piecewise-linear resampler (clamps past the last sample)."""
    out = []
    for j in range(n_out):
        pos = j * src_rate / dst_rate
        i = int(math.floor(pos))
        if i >= len(src) - 1:
            out.append(src[-1])
            continue
        frac = pos - i
        out.append(src[i] * (1 - frac) + src[i + 1] * frac)
    return np.array(out)


def count_sign_changes(frame):
    count = 0
    for a, b in zip(frame[:-1], frame[1:]):
        if (a < 0) != (b < 0):
            count += 1
    return count


# --- neural reference --------------------------------------------------------

def ref_conv_same(x, k, b):
    H, W, C = x.shape
    kh, kw, _, O = k.shape
    ph, pw = kh // 2, kw // 2
    y = np.zeros((H, W, O))
    for i in range(H):
        for j in range(W):
            for o in range(O):
                s = b[o]
                for di in range(kh):
                    for dj in range(kw):
                        ii, jj = i + di - ph, j + dj - pw
                        if 0 <= ii < H and 0 <= jj < W:
                            for c in range(C):
                                s += x[ii, jj, c] * k[di, dj, c, o]
                y[i, j, o] = s
    return y


def ref_maxpool(x, p, q):
    H, W, C = x.shape
    H2, W2 = H // p, W // q
    y = np.zeros((H2, W2, C))
    for i in range(H2):
        for j in range(W2):
            for c in range(C):
                y[i, j, c] = max(x[i * p + a, j * q + b, c] for a in range(p) for b in range(q))
    return y


def ref_forward(spec, tensors, x):
    """Inference-mode forward pass with explicit loops; layer kinds matched by class name."""
    x = np.asarray(x, dtype=np.float64)
    names = spec.layer_names()
    for name, layer in zip(names, spec.layers):
        kind = type(layer).__name__
        t = lambda s: np.asarray(tensors[f"{name}.{s}"], dtype=np.float64)  # noqa: E731
        if kind == "Conv2D":
            x = ref_conv_same(x, t("kernel"), t("bias"))
        elif kind == "BatchNorm":
            out = np.empty_like(x)
            for c in range(x.shape[-1]):
                out[..., c] = t("gamma")[c] * (x[..., c] - t("running_mean")[c]) / math.sqrt(
                    t("running_var")[c] + layer.epsilon
                ) + t("beta")[c]
            x = out
        elif kind == "ReLU":
            x = np.where(x > 0, x, 0.0)
        elif kind == "MaxPool2D":
            x = ref_maxpool(x, layer.pool_h, layer.pool_w)
        elif kind == "GlobalAvgPool":
            x = np.array([x[:, :, c].sum() / (x.shape[0] * x.shape[1]) for c in range(x.shape[2])])
        elif kind == "Dense":
            W, b = t("weight"), t("bias")
            x = np.array([sum(x[i] * W[i, o] for i in range(W.shape[0])) + b[o] for o in range(W.shape[1])])
        elif kind == "Softmax":
            m = max(x)
            e = [math.exp(v - m) for v in x]
            x = np.array(e) / sum(e)
    return x


# --- safety reference ----------------------------------------------------------

def brute_force_verify(params, rule_dicts, profile, templates):
    """Product of per-rule indicators, re-derived from plain dict rules."""
    mask = []
    for r in rule_dicts:
        if r["profile"] not in (profile, "all"):
            mask.append(0)
            continue
        tpl = templates.get(params["template_id"]) if params["template_id"] else None
        if r["kind"] == "blocklist":
            ok = tpl is None or not (set(tpl["words"]) & set(r["words"]))
        else:
            if r["parameter"] == "age_rating":
                value = tpl["age_rating"] if tpl else 0.0
            else:
                value = params[r["parameter"]]
            ok = value <= r["bound"] if r["kind"] == "upper_threshold" else value >= r["bound"]
        mask.append(0 if ok else 1)
    passed = 1
    for m in mask:
        passed *= 1 - m
    return bool(passed), mask
