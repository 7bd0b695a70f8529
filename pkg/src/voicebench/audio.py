"""WAV file I/O and the AudioBuffer carrier type.

Only RIFF/WAVE little-endian files are handled: PCM 16/24/32-bit integer
and IEEE float 32/64-bit encodings. Integer samples are scaled to
[-1, 1) with the symmetric-negative convention (divisor 2^(bits-1)),
so a 16-bit value of -32768 maps exactly to -1.0. Samples are stored
planar (channel-major) so metric code can index one channel contiguously.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ChannelOutOfRange, MalformedWav, NotMono, UnsupportedEncoding

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True)
class AudioBuffer:
    """Planar sampled waveform: samples[channel][frame], values nominally in [-1, 1]."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[np.newaxis, :]
        if arr.ndim != 2:
            raise ValueError(f"samples must be 1-D or 2-D planar, got ndim={arr.ndim}")
        if arr.shape[0] < 1:
            raise ValueError("channel_count must be >= 1")
        if int(self.sample_rate_hz) <= 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples contain NaN or Inf")
        arr = np.ascontiguousarray(arr)
        if arr.flags.writeable:
            # freeze a private copy, never the caller's array
            if arr.base is not None or np.shares_memory(arr, self.samples):
                arr = arr.copy()
            arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    @property
    def channel_count(self) -> int:
        return self.samples.shape[0]

    @property
    def n_frames(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.sample_rate_hz

    def channel(self, i: int) -> np.ndarray:
        if not 0 <= i < self.channel_count:
            raise ChannelOutOfRange(f"channel {i} out of range [0, {self.channel_count})")
        return self.samples[i]

    def require_mono(self) -> np.ndarray:
        """Return the single channel as a 1-D array, or raise NotMono."""
        if self.channel_count != 1:
            raise NotMono(f"expected mono buffer, got {self.channel_count} channels")
        return self.samples[0]


@dataclass(frozen=True)
class WavInfo:
    """Header-level facts about a WAV file (no sample data decoded)."""

    sample_rate_hz: int
    channel_count: int
    n_frames: int
    encoding: str
    duration_s: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "duration_s", self.n_frames / self.sample_rate_hz)


_ENCODINGS = {
    # encoding -> (format tag, bits)
    "pcm16": (_WAVE_FORMAT_PCM, 16),
    "pcm24": (_WAVE_FORMAT_PCM, 24),
    "pcm32": (_WAVE_FORMAT_PCM, 32),
    "float32": (_WAVE_FORMAT_IEEE_FLOAT, 32),
    "float64": (_WAVE_FORMAT_IEEE_FLOAT, 64),
}


def _parse_chunks(raw: bytes, path) -> tuple[dict, bytes]:
    """Walk the RIFF chunk list; return fmt fields and the data payload."""
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise MalformedWav(f"{path}: not a RIFF/WAVE file")
    riff_size = struct.unpack_from("<I", raw, 4)[0]
    if riff_size + 8 != len(raw):
        warnings.warn(f"{path}: RIFF size field disagrees with file size; using actual data")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        chunk_size = struct.unpack_from("<I", raw, pos + 4)[0]
        body = raw[pos + 8 : pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise MalformedWav(f"{path}: fmt chunk too short ({len(body)} bytes)")
            tag, channels, rate, _byte_rate, block_align, bits = struct.unpack_from(
                "<HHIIHH", body, 0
            )
            if tag == _WAVE_FORMAT_EXTENSIBLE:
                if len(body) < 40:
                    raise MalformedWav(f"{path}: extensible fmt chunk too short")
                # the sub-format GUID starts with the effective format tag
                tag = struct.unpack_from("<H", body, 24)[0]
            fmt = {
                "tag": tag,
                "channels": channels,
                "rate": rate,
                "bits": bits,
                "block_align": block_align,
            }
        elif chunk_id == b"data":
            actual = raw[pos + 8 :]
            if chunk_size > len(actual):
                warnings.warn(
                    f"{path}: data chunk declares {chunk_size} bytes but only "
                    f"{len(actual)} present; using actual data"
                )
                data = actual
            else:
                data = body
        # all other chunks ignored
        pos += 8 + chunk_size + (chunk_size & 1)

    if fmt is None:
        raise MalformedWav(f"{path}: missing fmt chunk")
    if data is None:
        raise MalformedWav(f"{path}: missing data chunk")
    if fmt["channels"] < 1 or fmt["rate"] <= 0:
        raise MalformedWav(f"{path}: invalid fmt fields {fmt}")
    return fmt, data


def _check_encoding(fmt: dict, path) -> str:
    tag, bits = fmt["tag"], fmt["bits"]
    if tag == _WAVE_FORMAT_PCM and bits in (16, 24, 32):
        return f"pcm{bits}"
    if tag == _WAVE_FORMAT_IEEE_FLOAT and bits in (32, 64):
        return f"float{bits}"
    raise UnsupportedEncoding(f"{path}: format tag {tag:#06x} with {bits} bits not supported")


def read_wav_info(path) -> WavInfo:
    """Header scan: sample rate, channels, frame count. Cheap; used by corpus indexing."""
    raw = Path(path).read_bytes()
    fmt, data = _parse_chunks(raw, path)
    encoding = _check_encoding(fmt, path)
    bytes_per_sample = fmt["bits"] // 8
    frame_bytes = bytes_per_sample * fmt["channels"]
    return WavInfo(
        sample_rate_hz=fmt["rate"],
        channel_count=fmt["channels"],
        n_frames=len(data) // frame_bytes,
        encoding=encoding,
    )


def read_wav(path) -> AudioBuffer:
    """Decode a WAV file to a planar float64 AudioBuffer.

    Integer PCM is scaled by 2^(bits-1); float data passes through unchanged.
    """
    raw = Path(path).read_bytes()
    fmt, data = _parse_chunks(raw, path)
    encoding = _check_encoding(fmt, path)
    channels = fmt["channels"]
    bits = fmt["bits"]
    bytes_per_sample = bits // 8
    frame_bytes = bytes_per_sample * channels

    usable = len(data) - len(data) % frame_bytes
    if usable == 0:
        raise MalformedWav(f"{path}: data chunk holds no complete frame")
    data = data[:usable]

    if encoding == "pcm16":
        flat = np.frombuffer(data, dtype="<i2").astype(np.float64) / 2**15
    elif encoding == "pcm24":
        b = np.frombuffer(data, dtype=np.uint8).reshape(-1, 3)
        raw24 = (
            b[:, 0].astype(np.int32)
            | (b[:, 1].astype(np.int32) << 8)
            | (b[:, 2].astype(np.int32) << 16)
        )
        raw24 = np.where(raw24 >= 1 << 23, raw24 - (1 << 24), raw24)
        flat = raw24.astype(np.float64) / 2**23
    elif encoding == "pcm32":
        flat = np.frombuffer(data, dtype="<i4").astype(np.float64) / 2**31
    elif encoding == "float32":
        flat = np.frombuffer(data, dtype="<f4").astype(np.float64)
    else:  # float64
        flat = np.frombuffer(data, dtype="<f8").astype(np.float64)

    planar = flat.reshape(-1, channels).T
    if not np.all(np.isfinite(planar)):
        raise MalformedWav(f"{path}: non-finite sample values")
    return AudioBuffer(planar, fmt["rate"])


def write_wav(buffer: AudioBuffer, path, encoding: str = "float32") -> int:
    """Write a WAV file; returns the number of samples clamped into [-1, 1].

    Integer encodings clamp out-of-range values; float32/float64 write
    values verbatim (clip count is always 0 for float encodings).
    """
    if encoding not in _ENCODINGS:
        raise ValueError(f"unknown encoding {encoding!r}, expected one of {sorted(_ENCODINGS)}")
    tag, bits = _ENCODINGS[encoding]
    interleaved = buffer.samples.T  # (frames, channels)
    clipped = 0

    if tag == _WAVE_FORMAT_PCM:
        full = float(2 ** (bits - 1))
        lo, hi = -1.0, (full - 1.0) / full
        clipped = int(np.count_nonzero(np.abs(interleaved) > 1.0))
        scaled = np.clip(interleaved, lo, hi) * full
        ints = np.round(scaled).astype(np.int64)
        ints = np.clip(ints, -int(full), int(full) - 1)
        if bits == 16:
            payload = ints.astype("<i2").tobytes()
        elif bits == 32:
            payload = ints.astype("<i4").tobytes()
        else:  # 24-bit: pack low/mid/high bytes by hand
            u = ints.astype(np.int64) & 0xFFFFFF
            b = np.empty(u.shape + (3,), dtype=np.uint8)
            b[..., 0] = u & 0xFF
            b[..., 1] = (u >> 8) & 0xFF
            b[..., 2] = (u >> 16) & 0xFF
            payload = b.tobytes()
    elif bits == 32:
        payload = interleaved.astype("<f4").tobytes()
    else:
        payload = interleaved.astype("<f8").tobytes()

    channels = buffer.channel_count
    byte_rate = buffer.sample_rate_hz * channels * bits // 8
    block_align = channels * bits // 8
    header = b"".join(
        [
            b"RIFF",
            struct.pack("<I", 36 + len(payload)),
            b"WAVE",
            b"fmt ",
            struct.pack("<IHHIIHH", 16, tag, channels, buffer.sample_rate_hz, byte_rate, block_align, bits),
            b"data",
            struct.pack("<I", len(payload)),
        ]
    )
    Path(path).write_bytes(header + payload)
    return clipped


def to_mono(buffer: AudioBuffer, policy: str = "average") -> AudioBuffer:
    """Collapse to one channel: "average" means per-frame mean, "channel:<i>" selects."""
    if buffer.channel_count == 1:
        return buffer
    if policy == "average":
        return AudioBuffer(buffer.samples.mean(axis=0), buffer.sample_rate_hz)
    if policy.startswith("channel:"):
        try:
            i = int(policy.split(":", 1)[1])
        except ValueError:
            raise ChannelOutOfRange(f"bad channel selector {policy!r}") from None
        return AudioBuffer(buffer.channel(i), buffer.sample_rate_hz)
    raise ValueError(f"unknown mono policy {policy!r}")
