"""Weight containers, the ERNW binary format, and INT8 post-training quantization.

File layout (little-endian)::

    "ERNW" | version u32 | tensor_count u32
    per tensor: name_len u16 | name | dtype u8 (0=f32, 1=i8) | scale f32 | rank u8 | dims u32*rank | payload
    CRC32 (u32) of every preceding byte
"""

from __future__ import annotations

import os
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from ..errors import BadMagic, ChecksumMismatch, ShapeMismatch, VersionMismatch, WeightFileError
from .spec import BatchNorm, Conv2D, NetworkSpec

MAGIC = b"ERNW"
VERSION = 1
FLOAT32 = "float32"
INT8 = "int8_sym"


@dataclass(eq=False)
class WeightSet:
    """Named tensors for one network. int8 sets carry per-tensor scales and have BN folded away."""

    tensors: dict
    dtype: str = FLOAT32
    scales: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def names(self) -> list:
        return list(self.tensors)

    @property
    def folded(self) -> bool:
        return self.dtype == INT8

    def payload_bytes(self) -> int:
        return sum(t.nbytes for t in self.tensors.values())

    def copy(self) -> "WeightSet":
        return WeightSet({k: v.copy() for k, v in self.tensors.items()}, self.dtype, dict(self.scales))

    def dequantized(self) -> dict:
        """float32 tensors; identity for float sets."""
        if self.dtype == FLOAT32:
            return {k: v.astype(np.float32, copy=False) for k, v in self.tensors.items()}
        return {k: (v.astype(np.float32) * np.float32(self.scales[k])) for k, v in self.tensors.items()}

    def check(self, spec: NetworkSpec) -> None:
        expected = (spec.without_batchnorm() if self.folded else spec).tensor_shapes()
        if set(expected) != set(self.tensors):
            missing = sorted(set(expected) - set(self.tensors))
            extra = sorted(set(self.tensors) - set(expected))
            raise ShapeMismatch(f"weight names differ from spec (missing {missing}, unexpected {extra})")
        for name, shape in expected.items():
            if tuple(self.tensors[name].shape) != tuple(shape):
                raise ShapeMismatch(f"{name}: expected {shape}, got {self.tensors[name].shape}")
            if name.endswith(".running_var") and np.any(self.tensors[name] < 0):
                raise ShapeMismatch(f"{name}: negative running variance")
        if self.folded and any(s <= 0 for s in self.scales.values()):
            raise ShapeMismatch("quantisation scales must be positive")


def init_weights(spec: NetworkSpec, seed: int = 0, dtype=np.float32) -> WeightSet:
    """He-normal conv/dense kernels, zero biases, identity BatchNorm."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in spec.tensor_shapes().items():
        kind = name.split(".")[1]
        if kind == "kernel":
            fan_in = shape[0] * shape[1] * shape[2]
            t = rng.normal(0.0, np.sqrt(2.0 / fan_in), shape)
        elif kind == "weight":
            t = rng.normal(0.0, np.sqrt(2.0 / shape[0]), shape)
        elif kind in ("gamma", "running_var"):
            t = np.ones(shape)
        else:
            t = np.zeros(shape)
        tensors[name] = t.astype(dtype)
    return WeightSet(tensors)


def zero_weights(spec: NetworkSpec, dtype=np.float32) -> WeightSet:
    """All-zero kernels and biases (BN left as identity so shapes/variances stay valid)."""
    ws = init_weights(spec, 0, dtype)
    for name, t in ws.tensors.items():
        if not name.endswith(("gamma", "running_var")):
            t[...] = 0
    return ws


def fold_batchnorm(spec: NetworkSpec, weights: WeightSet) -> dict:
    """Absorb each Conv2D->BatchNorm pair into the conv kernel and bias."""
    names = spec.layer_names()
    t = {k: v.astype(np.float64) for k, v in weights.tensors.items()}
    out = {}
    for i, (name, layer) in enumerate(zip(names, spec.layers)):
        if isinstance(layer, BatchNorm):
            continue
        if isinstance(layer, Conv2D):
            k, b = t[f"{name}.kernel"], t[f"{name}.bias"]
            if i + 1 < len(spec.layers) and isinstance(spec.layers[i + 1], BatchNorm):
                bn = names[i + 1]
                eps = spec.layers[i + 1].epsilon
                scale = t[f"{bn}.gamma"] / np.sqrt(t[f"{bn}.running_var"] + eps)
                k = k * scale
                b = (b - t[f"{bn}.running_mean"]) * scale + t[f"{bn}.beta"]
            out[f"{name}.kernel"], out[f"{name}.bias"] = k, b
        for suffix in ("weight", "bias"):
            key = f"{name}.{suffix}"
            if key in t and key not in out:
                out[key] = t[key]
    for i, layer in enumerate(spec.layers):
        if isinstance(layer, BatchNorm) and (i == 0 or not isinstance(spec.layers[i - 1], Conv2D)):
            raise ValueError("BatchNorm folding requires every BatchNorm to follow a Conv2D")
    return out


def quantize_tensor(w: np.ndarray) -> tuple:
    """Symmetric per-tensor INT8: scale = max|w|/127 (1 for all-zero tensors)."""
    peak = float(np.max(np.abs(w))) if w.size else 0.0
    scale = peak / 127.0 if peak > 0 else 1.0
    q = np.clip(np.round(np.asarray(w, dtype=np.float64) / scale), -127, 127).astype(np.int8)
    return q, scale


def quantize_int8(spec: NetworkSpec, weights: WeightSet) -> WeightSet:
    if weights.dtype != FLOAT32:
        raise ValueError("weights are already quantized")
    folded = fold_batchnorm(spec, weights)
    tensors, scales = {}, {}
    for name, w in folded.items():
        tensors[name], scales[name] = quantize_tensor(w)
    return WeightSet(tensors, INT8, scales)


def _encode(weights: WeightSet) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(weights.tensors))]
    for name, t in weights.tensors.items():
        raw_name = name.encode("utf-8")
        if weights.dtype == INT8:
            code, scale, arr = 1, weights.scales[name], np.ascontiguousarray(t, dtype=np.int8)
        else:
            code, scale, arr = 0, 1.0, np.ascontiguousarray(t, dtype="<f4")
        parts.append(struct.pack("<H", len(raw_name)) + raw_name)
        parts.append(struct.pack("<BfB", code, scale, arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def save_weights(weights: WeightSet, path: str | os.PathLike) -> None:
    data = _encode(weights)
    with open(path, "wb") as fh:
        fh.write(data)


def load_weights(path: str | os.PathLike, spec: NetworkSpec | None = None) -> WeightSet:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except FileNotFoundError:
        raise WeightFileError(f"no such weight file: {path}") from None
    if data[:4] != MAGIC:
        raise BadMagic(f"expected magic {MAGIC!r}, found {data[:4]!r}")
    if len(data) < 16:
        raise ChecksumMismatch("file too short to hold a checksum")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise ChecksumMismatch("CRC32 does not match file contents")
    version, count = struct.unpack_from("<II", body, 4)
    if version != VERSION:
        raise VersionMismatch(f"unsupported weight file version {version}")
    pos = 12
    tensors, scales, codes = {}, {}, set()
    try:
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", body, pos)
            name = body[pos + 2:pos + 2 + nlen].decode("utf-8")
            pos += 2 + nlen
            code, scale, rank = struct.unpack_from("<BfB", body, pos)
            pos += 6
            dims = struct.unpack_from(f"<{rank}I", body, pos)
            pos += 4 * rank
            dtype = np.dtype(np.int8) if code == 1 else np.dtype("<f4")
            size = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
            if pos + size > len(body):
                raise WeightFileError(f"tensor {name} runs past end of file")
            arr = np.frombuffer(body, dtype=dtype, count=size // dtype.itemsize, offset=pos).reshape(dims)
            pos += size
            tensors[name] = arr.astype(np.int8 if code == 1 else np.float32)
            scales[name] = float(scale)
            codes.add(code)
    except struct.error as exc:
        raise WeightFileError(f"malformed tensor record: {exc}") from None
    if len(codes) > 1:
        raise WeightFileError("mixed float/int8 tensors are not supported")
    ws = WeightSet(tensors, INT8 if codes == {1} else FLOAT32, scales if codes == {1} else {})
    if spec is not None:
        ws.check(spec)
    return ws
