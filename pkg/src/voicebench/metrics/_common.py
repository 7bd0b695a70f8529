"""Shared plumbing for the metric suite: pair alignment and dB helpers."""

from __future__ import annotations

import numpy as np

from ..audio import AudioBuffer
from ..errors import DegenerateSignal, LengthMismatch, SampleRateMismatch

CAP_DB = 100.0
FLOOR_DB = -100.0
MAX_LENGTH_GAP_S = 0.5

FLAG_CAPPED = "capped"
FLAG_TRIMMED = "length_trimmed"
FLAG_FRAMES_SKIPPED = "frames_skipped"


def align_pair(ref: AudioBuffer, est: AudioBuffer) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Apply the shared metric preconditions: mono, same rate, trim-to-shorter.

    Length differences up to 0.5 s are trimmed (flag "length_trimmed");
    larger gaps raise LengthMismatch. An all-zero reference (after trim)
    raises DegenerateSignal.
    """
    x = ref.require_mono()
    y = est.require_mono()
    if ref.sample_rate_hz != est.sample_rate_hz:
        raise SampleRateMismatch(
            f"reference at {ref.sample_rate_hz} Hz vs estimate at {est.sample_rate_hz} Hz"
        )
    flags: list[str] = []
    if x.size != y.size:
        gap_s = abs(x.size - y.size) / ref.sample_rate_hz
        if gap_s > MAX_LENGTH_GAP_S:
            raise LengthMismatch(
                f"length gap {gap_s:.3f} s exceeds {MAX_LENGTH_GAP_S} s trim tolerance"
            )
        n = min(x.size, y.size)
        x, y = x[:n], y[:n]
        flags.append(FLAG_TRIMMED)
    if not np.any(x):
        raise DegenerateSignal("reference signal is all-zero")
    return x, y, flags


def align_many(buffers: list[AudioBuffer]) -> tuple[list[np.ndarray], list[str]]:
    """Trim a group of mono buffers to a common length under the 0.5 s rule."""
    if not buffers:
        raise ValueError("empty buffer list")
    rate = buffers[0].sample_rate_hz
    arrays = []
    for b in buffers:
        if b.sample_rate_hz != rate:
            raise SampleRateMismatch(f"mixed sample rates {rate} and {b.sample_rate_hz}")
        arrays.append(b.require_mono())
    lengths = [a.size for a in arrays]
    flags: list[str] = []
    if len(set(lengths)) > 1:
        gap_s = (max(lengths) - min(lengths)) / rate
        if gap_s > MAX_LENGTH_GAP_S:
            raise LengthMismatch(
                f"length gap {gap_s:.3f} s exceeds {MAX_LENGTH_GAP_S} s trim tolerance"
            )
        n = min(lengths)
        arrays = [a[:n] for a in arrays]
        flags.append(FLAG_TRIMMED)
    return arrays, flags


def energy_ratio_db(num_energy: float, den_energy: float) -> float:
    """10 log10 of an energy ratio, capped into [FLOOR_DB, CAP_DB]."""
    if num_energy <= 0.0:
        return FLOOR_DB
    if den_energy < 1e-20 * num_energy:
        return CAP_DB
    if num_energy < 1e-20 * den_energy:
        return FLOOR_DB
    value = 10.0 * np.log10(num_energy / den_energy)
    return float(min(max(value, FLOOR_DB), CAP_DB))
