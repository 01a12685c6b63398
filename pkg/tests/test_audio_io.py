import struct
import wave

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emorespond.audio_io import (
    AudioSegment,
    read_wav,
    resample_linear,
    segment_stream,
    write_wav,
)
from emorespond.errors import CorruptHeader, EmptyInput, NotFound, UnsupportedEncoding

from oracles import linear_interp


def _write_pcm(path, ints, rate, channels=1, width=2):
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(channels)
        wf.setsampwidth(width)
        wf.setframerate(rate)
        wf.writeframes(ints.tobytes())


def _write_raw(path, tag, bits, channels, rate, payload, extensible=False):
    block = channels * bits // 8
    if extensible:
        fmt = struct.pack("<HHIIHH", 0xFFFE, channels, rate, rate * block, block, bits)
        fmt += struct.pack("<HHI", 22, bits, 0) + struct.pack("<H", tag) + b"\x00\x00\x00\x00\x10\x00\x80\x00\x00\xaa\x00\x38\x9b\x71"
    else:
        fmt = struct.pack("<HHIIHH", tag, channels, rate, rate * block, block, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", len(payload)) + payload
    path.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)


def test_16bit_scaling(tmp_path):
    p = tmp_path / "a.wav"
    _write_pcm(p, np.array([0, 32767, -32768, 16384], dtype="<i2"), 16000)
    seg = read_wav(p)
    assert seg.sample_rate == 16000
    assert len(seg) == 4
    np.testing.assert_allclose(seg.samples, [0.0, 32767 / 32768, -1.0, 0.5])
    assert seg.samples[1] == pytest.approx(0.99997, abs=1e-5)


def test_stereo_opposite_channels_cancel(tmp_path):
    p = tmp_path / "s.wav"
    frames = np.tile(np.array([16384, -16384], dtype="<i2"), 100)
    _write_pcm(p, frames, 16000, channels=2)
    seg = read_wav(p)
    assert len(seg) == 100
    assert np.all(seg.samples == 0.0)


def test_8k_upsampled_linearly(tmp_path):
    src = np.array([0, 1000, -2000, 3000, 500, -500, 0, 12000, -32768, 32767], dtype="<i2")
    p = tmp_path / "8k.wav"
    _write_pcm(p, src, 8000)
    seg = read_wav(p)
    assert len(seg) == 20
    expected = linear_interp(list(src / 32768.0), 8000, 16000, 20)
    np.testing.assert_allclose(seg.samples, expected, atol=1e-12)


def test_8k_one_second_becomes_16000_samples(tmp_path):
    p = tmp_path / "8k1s.wav"
    _write_pcm(p, np.zeros(8000, dtype="<i2"), 8000)
    assert len(read_wav(p)) == 16000


@pytest.mark.parametrize("bits", [8, 24, 32])
def test_integer_widths(tmp_path, bits):
    values = np.array([0.0, 0.5, -0.5, 0.25])
    if bits == 8:
        payload = (np.round(values * 128) + 128).astype(np.uint8).tobytes()
    elif bits == 24:
        ints = np.round(values * (1 << 23)).astype(np.int32)
        payload = b"".join(int(v).to_bytes(3, "little", signed=True) for v in ints)
    else:
        payload = np.round(values * (1 << 31)).astype("<i4").tobytes()
    p = tmp_path / f"w{bits}.wav"
    _write_raw(p, 1, bits, 1, 16000, payload)
    np.testing.assert_allclose(read_wav(p).samples, values, atol=1e-9)


def test_float32_and_extensible(tmp_path):
    values = np.array([0.1, -0.75, 1.5], dtype="<f4")
    p = tmp_path / "f.wav"
    _write_raw(p, 3, 32, 1, 16000, values.tobytes(), extensible=True)
    np.testing.assert_allclose(read_wav(p).samples, [0.1, -0.75, 1.0], atol=1e-7)


def test_errors(tmp_path):
    with pytest.raises(NotFound):
        read_wav(tmp_path / "missing.wav")
    bad = tmp_path / "bad.wav"
    bad.write_bytes(b"not a wav file at all")
    with pytest.raises(CorruptHeader):
        read_wav(bad)
    comp = tmp_path / "adpcm.wav"
    _write_raw(comp, 0x0011, 4, 1, 16000, b"\x00" * 16)
    with pytest.raises(UnsupportedEncoding):
        read_wav(comp)


def test_write_read_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    x = rng.uniform(-1, 1, 4000)
    p = tmp_path / "rt.wav"
    write_wav(p, x)
    back = read_wav(p).samples
    assert np.max(np.abs(back - x)) <= 1 / 32768


@given(st.floats(-1, 1), st.sampled_from([8000, 11025, 22050, 44100, 48000]))
def test_resampling_constant_is_constant(c, rate):
    out = resample_linear(np.full(300, c), rate, 16000)
    np.testing.assert_allclose(out, c, atol=1e-12)


def test_segment_counts_and_padding():
    rate = 16000
    segs = segment_stream(np.ones(6 * rate))
    assert [s.start_offset for s in segs] == [0.0, 3.0]

    segs = segment_stream(np.ones(7 * rate))
    assert len(segs) == 3
    assert all(len(s) == 3 * rate for s in segs)
    tail = segs[2].samples
    assert np.all(tail[: rate] == 1.0) and np.all(tail[rate:] == 0.0)

    segs = segment_stream(np.ones(4 * rate), 3.0, 1.0)
    assert [s.start_offset for s in segs] == [0.0, 1.0]


def _enumerate_windows(n, seg, hop):
    """Oracle: slide a window start by hop until it has seen every sample."""
    starts, s = [], 0
    while True:
        starts.append(s)
        if s + seg >= n:
            return starts
        s += hop


@settings(max_examples=60)
@given(st.integers(1, 9000), st.integers(1, 40), st.integers(1, 40))
def test_segment_count_matches_enumeration(n, seg_ms, hop_ms):
    seg_ms, hop_ms = max(seg_ms, hop_ms), min(seg_ms, hop_ms)
    rate = 1000
    segs = segment_stream(np.arange(n, dtype=float) / n, seg_ms / 100, hop_ms / 100, sample_rate=rate)
    starts = _enumerate_windows(n, seg_ms * 10, hop_ms * 10)
    assert [round(s.start_offset * rate) for s in segs] == starts


@settings(max_examples=40)
@given(st.integers(1, 20000))
def test_non_overlapping_segments_conserve_samples(n):
    x = np.random.default_rng(n).uniform(-1, 1, n)
    segs = segment_stream(x, 0.25, 0.25)
    joined = np.concatenate([s.samples for s in segs])
    np.testing.assert_array_equal(joined[:n], x)
    assert np.all(joined[n:] == 0.0)


def test_empty_stream_rejected():
    with pytest.raises(EmptyInput):
        segment_stream(np.array([]))


def test_segment_duration():
    assert AudioSegment(np.zeros(48000)).duration == 3.0
