"""Waveform-domain ratios: SNR, scale-invariant SNR, and SI-SNR improvement.

SNR treats the reference as the target verbatim:
10 log10(sum(ref^2) / sum((est - ref)^2)); it is deliberately NOT
scale-invariant. SI-SNR first removes the means, then projects the
estimate onto the reference, so any nonzero rescaling of the estimate
(positive or negative) leaves the value unchanged.
"""

from __future__ import annotations

import numpy as np

from ..audio import AudioBuffer
from ..errors import DegenerateSignal, ZeroEstimate
from ._common import CAP_DB, FLOOR_DB, align_many, align_pair, energy_ratio_db


def snr(ref: AudioBuffer, est: AudioBuffer) -> float:
    """Signal-to-noise ratio in dB, capped at +100."""
    x, y, _ = align_pair(ref, est)
    residual = y - x
    return energy_ratio_db(float(np.dot(x, x)), float(np.dot(residual, residual)))


def si_snr(ref: AudioBuffer, est: AudioBuffer) -> float:
    """Scale-invariant SNR in dB, capped at +100."""
    x, y, _ = align_pair(ref, est)
    return _si_snr_arrays(x, y)


def _si_snr_arrays(x: np.ndarray, y: np.ndarray) -> float:
    x = x - x.mean()
    y = y - y.mean()
    if not np.any(y):
        raise ZeroEstimate("estimate is all-zero after mean removal")
    alpha = float(np.dot(y, x) / np.dot(x, x))
    target = alpha * x
    residual = y - target
    return energy_ratio_db(float(np.dot(target, target)), float(np.dot(residual, residual)))


def si_snr_improvement(mixture: AudioBuffer, est: AudioBuffer, ref: AudioBuffer) -> float:
    """SI-SNR(ref, est) - SI-SNR(ref, mixture), both under identical trimming."""
    arrays, _ = align_many([ref, est, mixture])
    x, y, m = arrays
    if not np.any(x):
        raise DegenerateSignal("reference signal is all-zero")
    gain = _si_snr_arrays(x, y) - _si_snr_arrays(x, m)
    return float(min(max(gain, FLOOR_DB), CAP_DB))
