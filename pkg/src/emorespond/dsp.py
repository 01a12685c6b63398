"""Spectral features: STFT power, HTK log-mel, MFCC, spectral centroid, ZCR."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.fft import dct
from scipy.signal import get_window

from .audio_io import AudioSegment
from .errors import SegmentTooShort, TooManyCoefficients

N_MFCC = 13
_DEGENERATE_POWER = 1e-12


@dataclass(frozen=True)
class StftConfig:
    window_ms: float = 25.0
    hop_ms: float = 10.0
    fft_size: int = 512
    window_fn: str = "hann"

    def window_samples(self, rate: int) -> int:
        return int(round(self.window_ms * rate / 1000.0))

    def hop_samples(self, rate: int) -> int:
        return int(round(self.hop_ms * rate / 1000.0))

    def validate(self, rate: int) -> None:
        n = self.fft_size
        if n < 1 or n & (n - 1):
            raise ValueError(f"fft_size must be a power of two, got {n}")
        if n < self.window_samples(rate):
            raise ValueError("fft_size is smaller than the analysis window")
        if self.window_fn != "hann":
            raise ValueError(f"unsupported window {self.window_fn!r}")


@dataclass(frozen=True)
class MelConfig:
    n_mels: int = 64
    f_min: float = 0.0
    f_max: float = 8000.0
    mel_scale: str = "htk"
    log_floor: float = 1e-10


@dataclass
class FeatureTensor:
    """[n_mels, n_frames, n_channels] feature map plus frame centre times."""

    data: np.ndarray
    frame_times: np.ndarray

    @property
    def shape(self) -> tuple:
        return self.data.shape


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_center_frequencies(mel: MelConfig) -> np.ndarray:
    """Centre frequency (Hz) of each triangular filter."""
    pts = np.linspace(hz_to_mel(mel.f_min), hz_to_mel(mel.f_max), mel.n_mels + 2)
    return mel_to_hz(pts)[1:-1]


@lru_cache(maxsize=16)
def mel_filterbank(mel: MelConfig, rate: int, fft_size: int) -> np.ndarray:
    """Triangular HTK filterbank [n_mels, fft_size//2 + 1], no area normalisation."""
    if mel.n_mels < 1:
        raise ValueError("n_mels must be >= 1")
    if not (mel.f_min < mel.f_max <= rate / 2):
        raise ValueError("need f_min < f_max <= rate/2")
    if mel.mel_scale != "htk":
        raise ValueError(f"unsupported mel scale {mel.mel_scale!r}")
    edges = mel_to_hz(np.linspace(hz_to_mel(mel.f_min), hz_to_mel(mel.f_max), mel.n_mels + 2))
    freqs = np.arange(fft_size // 2 + 1) * rate / fft_size
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs[None, :] - lo) / (mid - lo)
    falling = (hi - freqs[None, :]) / (hi - mid)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    fb.setflags(write=False)
    return fb


@lru_cache(maxsize=8)
def _window(kind: str, n: int) -> np.ndarray:
    w = get_window(kind, n, fftbins=True)
    w.setflags(write=False)
    return w


def frame_signal(x: np.ndarray, win: int, hop: int) -> np.ndarray:
    """Frames fully inside the signal, no padding: [n_frames, win] view."""
    if x.shape[0] < win:
        raise SegmentTooShort(f"segment has {x.shape[0]} samples, window needs {win}")
    return np.lib.stride_tricks.sliding_window_view(x, win)[::hop]


def n_frames(n_samples: int, win: int, hop: int) -> int:
    return (n_samples - win) // hop + 1


def stft_power(segment: AudioSegment, cfg: StftConfig = StftConfig()) -> np.ndarray:
    """|rFFT(hann * frame)|^2 per frame, shape [fft_size//2 + 1, n_frames]."""
    rate = segment.sample_rate
    cfg.validate(rate)
    win = cfg.window_samples(rate)
    frames = frame_signal(segment.samples, win, cfg.hop_samples(rate))
    spec = np.fft.rfft(frames * _window(cfg.window_fn, win), n=cfg.fft_size, axis=1)
    return (spec.real ** 2 + spec.imag ** 2).T


def _frame_times(count: int, cfg: StftConfig, rate: int) -> np.ndarray:
    win = cfg.window_samples(rate)
    hop = cfg.hop_samples(rate)
    return (np.arange(count) * hop + win / 2.0) / rate


def log_mel_from_power(power: np.ndarray, mel: MelConfig, rate: int, fft_size: int) -> np.ndarray:
    fb = mel_filterbank(mel, rate, fft_size)
    return np.log(np.maximum(fb @ power, mel.log_floor))


def mel_spectrogram(
    segment: AudioSegment, stft: StftConfig = StftConfig(), mel: MelConfig = MelConfig()
) -> FeatureTensor:
    power = stft_power(segment, stft)
    logmel = log_mel_from_power(power, mel, segment.sample_rate, stft.fft_size)
    return FeatureTensor(logmel[:, :, None], _frame_times(power.shape[1], stft, segment.sample_rate))


def mfcc(mel_tensor: FeatureTensor, n_coeffs: int = N_MFCC) -> np.ndarray:
    """Orthonormal DCT-II over the mel axis of channel 0; [n_coeffs, n_frames]."""
    logmel = mel_tensor.data[:, :, 0]
    if n_coeffs > logmel.shape[0]:
        raise TooManyCoefficients(f"{n_coeffs} coefficients requested from {logmel.shape[0]} mel bins")
    return dct(logmel, type=2, norm="ortho", axis=0)[:n_coeffs]


def spectral_centroid(power: np.ndarray, rate: int, fft_size: int) -> np.ndarray:
    freqs = np.arange(power.shape[0]) * rate / fft_size
    total = power.sum(axis=0)
    weighted = freqs @ power
    out = np.zeros(power.shape[1])
    ok = total >= _DEGENERATE_POWER
    out[ok] = weighted[ok] / total[ok]
    return out


def zero_crossing_rate(segment: AudioSegment, cfg: StftConfig = StftConfig()) -> np.ndarray:
    """Fraction of adjacent-sample sign changes per frame; exact zeros count as positive."""
    rate = segment.sample_rate
    win = cfg.window_samples(rate)
    frames = frame_signal(segment.samples, win, cfg.hop_samples(rate))
    negative = frames < 0
    changes = np.count_nonzero(negative[:, 1:] != negative[:, :-1], axis=1)
    return changes / (win - 1)


def _minmax(v: np.ndarray) -> np.ndarray:
    span = v.max() - v.min()
    if span <= 0:
        return np.zeros_like(v)
    return (v - v.min()) / span


def build_input_tensor(
    segment: AudioSegment,
    mode: str = "mel_only",
    stft: StftConfig = StftConfig(),
    mel: MelConfig = MelConfig(),
) -> FeatureTensor:
    """CNN input: log-mel alone, or log-mel / padded MFCC / centroid+ZCR stacked as 3 channels."""
    if mode not in ("mel_only", "stacked"):
        raise ValueError(f"unknown input mode {mode!r}")
    rate = segment.sample_rate
    power = stft_power(segment, stft)
    logmel = log_mel_from_power(power, mel, rate, stft.fft_size)
    times = _frame_times(power.shape[1], stft, rate)
    if mode == "mel_only":
        return FeatureTensor(logmel[:, :, None], times)

    F, T = logmel.shape
    out = np.zeros((F, T, 3))
    out[:, :, 0] = logmel
    coeffs = dct(logmel, type=2, norm="ortho", axis=0)[: min(N_MFCC, F)]
    out[: coeffs.shape[0], :, 1] = coeffs
    half = F // 2
    out[:half, :, 2] = _minmax(spectral_centroid(power, rate, stft.fft_size))[None, :]
    out[half:, :, 2] = zero_crossing_rate(segment, stft)[None, :]
    return FeatureTensor(out, times)


def center_log_mel(tensor: FeatureTensor) -> FeatureTensor:
    """Subtract the segment's mean log-mel energy from channel 0.

    Removes the overall level (a pure offset in log space) so the classifier
    sees spectral shape rather than loudness; arousal is estimated separately.
    """
    data = np.array(tensor.data, dtype=np.float64, copy=True)
    data[:, :, 0] -= data[:, :, 0].mean()
    return FeatureTensor(data, tensor.frame_times)


def feature_table(segment: AudioSegment, stft: StftConfig = StftConfig(), mel: MelConfig = MelConfig()):
    """Per-frame rows of (mel_0..mel_{F-1}, mfcc_0..mfcc_12, centroid, zcr) with column names."""
    rate = segment.sample_rate
    power = stft_power(segment, stft)
    logmel = log_mel_from_power(power, mel, rate, stft.fft_size)
    coeffs = dct(logmel, type=2, norm="ortho", axis=0)[:N_MFCC]
    cent = spectral_centroid(power, rate, stft.fft_size)
    zcr = zero_crossing_rate(segment, stft)
    columns = (
        [f"mel_{i}" for i in range(logmel.shape[0])]
        + [f"mfcc_{i}" for i in range(coeffs.shape[0])]
        + ["centroid", "zcr"]
    )
    rows = np.column_stack([logmel.T, coeffs.T, cent, zcr])
    return columns, rows
