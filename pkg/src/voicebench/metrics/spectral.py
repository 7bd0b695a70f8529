"""Spectral distortion metrics: log-spectral distance and mel-cepstral distortion.

Both compare frame-aligned short-time spectra (no DTW); this suite scores
enhancement/separation outputs that are already time-aligned with their
references. Values depend on the STFT parameters; when no config is given,
dsp.default_stft_config() is used and results are only comparable to
numbers produced with the same analysis settings.
"""

from __future__ import annotations

import numpy as np
from scipy.fft import dct

from ..audio import AudioBuffer
from ..dsp import StftConfig, default_stft_config, mel_filterbank, stft
from ._common import align_pair

_LSD_EPS = 1e-12
_MCD_SILENCE_FLOOR_DB = 60.0  # frames this far below the loudest ref frame are skipped
_MCD_SCALE = 10.0 * np.sqrt(2.0) / np.log(10.0)


def _power_spectra(x: np.ndarray, rate: int, config: StftConfig) -> np.ndarray:
    spec = stft(AudioBuffer(x, rate), config)
    return np.abs(spec.frames) ** 2


def lsd(ref: AudioBuffer, est: AudioBuffer, config: StftConfig | None = None) -> float:
    """Log-spectral distance in dB.

    Per frame: sqrt(mean over bins of (10 log10((P_ref+eps)/(P_est+eps)))^2),
    averaged over frames. Frames where both spectra are entirely below eps
    are skipped.
    """
    x, y, _ = align_pair(ref, est)
    config = config or default_stft_config(ref.sample_rate_hz)
    p_ref = _power_spectra(x, ref.sample_rate_hz, config)
    p_est = _power_spectra(y, ref.sample_rate_hz, config)

    live = (p_ref.max(axis=1) >= _LSD_EPS) | (p_est.max(axis=1) >= _LSD_EPS)
    if not live.any():
        return 0.0
    log_ratio = 10.0 * np.log10((p_ref[live] + _LSD_EPS) / (p_est[live] + _LSD_EPS))
    per_frame = np.sqrt(np.mean(log_ratio**2, axis=1))
    return float(per_frame.mean())


def mel_cepstra(
    x: np.ndarray,
    rate: int,
    n_mels: int,
    order: int,
    config: StftConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Mel cepstra (DCT-II, orthonormal, of log mel power) and frame energies."""
    power = _power_spectra(x, rate, config)
    fb = mel_filterbank(n_mels, config, rate)
    mel_power = fb.apply(power)
    log_mel = np.log(np.maximum(mel_power, _LSD_EPS))
    ceps = dct(log_mel, type=2, norm="ortho", axis=1)[:, : order + 1]
    return ceps, power.sum(axis=1)


def mcd(
    ref: AudioBuffer,
    est: AudioBuffer,
    n_mels: int = 80,
    order: int = 13,
    config: StftConfig | None = None,
) -> float:
    """Mel-cepstral distortion in dB, c0 (the gain term) excluded.

    (10 sqrt(2) / ln 10) * mean over frames of ||c_ref[1..order] - c_est[1..order]||.
    Frames more than 60 dB below the loudest reference frame are skipped.
    """
    x, y, _ = align_pair(ref, est)
    config = config or default_stft_config(ref.sample_rate_hz)
    c_ref, energy = mel_cepstra(x, ref.sample_rate_hz, n_mels, order, config)
    c_est, _ = mel_cepstra(y, ref.sample_rate_hz, n_mels, order, config)

    floor = energy.max() * 10.0 ** (-_MCD_SILENCE_FLOOR_DB / 10.0)
    live = energy >= floor
    diff = c_ref[live, 1:] - c_est[live, 1:]
    return float(_MCD_SCALE * np.mean(np.linalg.norm(diff, axis=1)))
