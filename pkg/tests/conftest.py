"""Shared signal factories for the test suite."""

import numpy as np
import pytest

from voicebench import AudioBuffer, lowpass


def tone(freq_hz: float, duration_s: float, rate: int, amplitude: float = 0.5, phase: float = 0.0):
    t = np.arange(int(round(duration_s * rate))) / rate
    return amplitude * np.sin(2 * np.pi * freq_hz * t + phase)


def white_noise(duration_s: float, rate: int, seed: int, amplitude: float = 0.2):
    rng = np.random.default_rng(seed)
    return amplitude * rng.standard_normal(int(round(duration_s * rate)))


def speech_shaped_noise(duration_s: float, rate: int, seed: int, amplitude: float = 0.2):
    """Band-limited modulated noise: broadband below ~0.35 Nyquist with a slow envelope."""
    x = white_noise(duration_s, rate, seed, amplitude)
    buf = lowpass(AudioBuffer(x, rate), 0.35 * rate / 2, 0.05 * rate / 2)
    t = np.arange(buf.n_frames) / rate
    envelope = 1.0 + 0.6 * np.sin(2 * np.pi * 4.0 * t) * np.sin(2 * np.pi * 0.7 * t)
    return buf.samples[0] * envelope


def fade_edges(x: np.ndarray, rate: int, fade_ms: float = 100.0):
    n = int(rate * fade_ms / 1000.0)
    w = 0.5 * (1.0 - np.cos(np.pi * np.arange(n) / n))
    y = x.copy()
    y[:n] *= w
    y[-n:] *= w[::-1]
    return y


def buffer(x, rate) -> AudioBuffer:
    return AudioBuffer(np.asarray(x, dtype=np.float64), rate)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
