"""WAV ingestion, canonicalisation to 16 kHz mono float, and fixed-length segmentation."""

from __future__ import annotations

import os
import struct
import wave
from dataclasses import dataclass

import numpy as np

from .errors import CorruptHeader, EmptyInput, NotFound, UnsupportedEncoding

CANONICAL_RATE = 16000
DEFAULT_SEGMENT_SECONDS = 3.0

_FORMAT_PCM = 0x0001
_FORMAT_FLOAT = 0x0003
_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass
class AudioSegment:
    """Mono sample buffer in [-1, 1] with its position in the source stream."""

    samples: np.ndarray
    sample_rate: int = CANONICAL_RATE
    start_offset: float = 0.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("AudioSegment samples must be one-dimensional")

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


def _parse_chunks(data: bytes) -> tuple[dict, bytes]:
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise CorruptHeader("missing RIFF/WAVE signature")
    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + size]
        if cid == b"fmt ":
            if len(body) < 16:
                raise CorruptHeader("fmt chunk too short")
            tag, channels, rate, _, block_align, bits = struct.unpack_from("<HHIIHH", body)
            if tag == _FORMAT_EXTENSIBLE:
                if len(body) < 40:
                    raise CorruptHeader("extensible fmt chunk too short")
                (tag,) = struct.unpack_from("<H", body, 24)
            fmt = dict(tag=tag, channels=channels, rate=rate, block_align=block_align, bits=bits)
        elif cid == b"data":
            payload = body
        pos += 8 + size + (size & 1)
    if fmt is None or payload is None:
        raise CorruptHeader("missing fmt or data chunk")
    if fmt["channels"] < 1 or fmt["rate"] < 1:
        raise CorruptHeader("invalid channel count or sample rate")
    return fmt, payload


def _decode(fmt: dict, payload: bytes) -> np.ndarray:
    tag, bits, channels = fmt["tag"], fmt["bits"], fmt["channels"]
    width = bits // 8
    if tag == _FORMAT_FLOAT:
        if bits != 32:
            raise UnsupportedEncoding(f"{bits}-bit float WAV")
        x = np.frombuffer(payload[: len(payload) // 4 * 4], dtype="<f4").astype(np.float64)
        x = np.clip(np.nan_to_num(x, nan=0.0), -1.0, 1.0)
    elif tag == _FORMAT_PCM:
        if bits == 8:
            x = (np.frombuffer(payload, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
        elif bits == 16:
            x = np.frombuffer(payload[: len(payload) // 2 * 2], dtype="<i2") / 32768.0
        elif bits == 24:
            raw = np.frombuffer(payload[: len(payload) // 3 * 3], dtype=np.uint8).reshape(-1, 3)
            ints = raw[:, 0].astype(np.int32) | (raw[:, 1].astype(np.int32) << 8) | (raw[:, 2].astype(np.int32) << 16)
            ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
            x = ints / float(1 << 23)
        elif bits == 32:
            x = np.frombuffer(payload[: len(payload) // 4 * 4], dtype="<i4") / float(1 << 31)
        else:
            raise UnsupportedEncoding(f"{bits}-bit integer PCM")
    else:
        raise UnsupportedEncoding(f"WAV format tag 0x{tag:04x}")
    frames = x.shape[0] // channels
    x = x[: frames * channels].reshape(frames, channels)
    return x.mean(axis=1)


def resample_linear(samples: np.ndarray, src_rate: int, dst_rate: int = CANONICAL_RATE) -> np.ndarray:
    """Piecewise-linear resampling; output sample j sits at source time j/dst_rate."""
    samples = np.asarray(samples, dtype=np.float64)
    if src_rate == dst_rate or samples.size == 0:
        return samples.copy()
    n_out = int(round(samples.shape[0] * dst_rate / src_rate))
    positions = np.arange(n_out) * (src_rate / dst_rate)
    return np.interp(positions, np.arange(samples.shape[0]), samples)


def read_wav(path: str | os.PathLike) -> AudioSegment:
    """Read a PCM/float WAV file as a canonical 16 kHz mono segment."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except FileNotFoundError:
        raise NotFound(f"no such file: {path}") from None
    except IsADirectoryError:
        raise NotFound(f"not a file: {path}") from None
    fmt, payload = _parse_chunks(data)
    mono = _decode(fmt, payload)
    mono = resample_linear(mono, fmt["rate"], CANONICAL_RATE)
    return AudioSegment(np.clip(mono, -1.0, 1.0), CANONICAL_RATE, 0.0)


def write_wav(path: str | os.PathLike, samples: np.ndarray, sample_rate: int = CANONICAL_RATE) -> None:
    """Write mono 16-bit PCM."""
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    ints = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(os.fspath(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(sample_rate)
        wf.writeframes(ints.tobytes())


def segment_stream(
    samples: np.ndarray,
    segment_seconds: float = DEFAULT_SEGMENT_SECONDS,
    hop_seconds: float = DEFAULT_SEGMENT_SECONDS,
    sample_rate: int = CANONICAL_RATE,
) -> list[AudioSegment]:
    """Cut a stream into fixed-length windows; the tail is zero-padded, never dropped."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise EmptyInput("cannot segment an empty stream")
    if segment_seconds <= 0 or hop_seconds <= 0:
        raise ValueError("segment and hop durations must be positive")
    if hop_seconds > segment_seconds:
        raise ValueError("hop_seconds must not exceed segment_seconds")
    seg = int(round(segment_seconds * sample_rate))
    hop = int(round(hop_seconds * sample_rate))
    n = x.shape[0]
    if n <= seg:
        count = 1
    else:
        count = (n - seg) // hop + 1
        if (n - seg) % hop:
            count += 1
    out = []
    for k in range(count):
        start = k * hop
        chunk = x[start:start + seg]
        if chunk.shape[0] < seg:
            chunk = np.concatenate([chunk, np.zeros(seg - chunk.shape[0])])
        out.append(AudioSegment(chunk, sample_rate, start / sample_rate))
    return out
