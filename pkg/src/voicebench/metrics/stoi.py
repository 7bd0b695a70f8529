"""Short-time objective intelligibility.

Classic recipe: both signals resampled to 10 kHz; silent frames removed
based on the reference energy (frames more than 40 dB below the loudest
reference frame are dropped from both signals); 512-point FFT over
256-sample hann frames with 50% hop; 15 one-third-octave bands from
150 Hz; 30-frame segments; per segment and band the estimate envelope is
scale-matched to the reference, clipped at -15 dB SDR, and correlated.
The score is the mean correlation over all bands and segments.
"""

from __future__ import annotations

import numpy as np

from ..audio import AudioBuffer
from ..dsp import resample
from ..errors import TooShort
from ._common import align_pair

_FS = 10000
_FRAME = 256
_HOP = 128
_NFFT = 512
_N_BANDS = 15
_MIN_FREQ = 150.0
_SEGMENT = 30  # frames per intelligibility segment
_BETA_DB = -15.0  # lower SDR clip bound
_DYN_RANGE_DB = 40.0
_EPS = np.finfo(np.float64).eps


def _hann_inner(length: int) -> np.ndarray:
    # symmetric hann without the zero endpoints, as in the reference STOI code
    return np.hanning(length + 2)[1:-1]


def _frame_signal(x: np.ndarray, window: np.ndarray) -> np.ndarray:
    n_frames = 1 + (x.size - _FRAME) // _HOP
    idx = np.arange(_FRAME)[np.newaxis, :] + _HOP * np.arange(n_frames)[:, np.newaxis]
    return x[idx] * window


def _remove_silent_frames(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Drop frames whose reference energy is > 40 dB below the loudest frame."""
    w = _hann_inner(_FRAME)
    xf = _frame_signal(x, w)
    yf = _frame_signal(y, w)
    energies_db = 20.0 * np.log10(np.linalg.norm(xf, axis=1) + _EPS)
    keep = energies_db > energies_db.max() - _DYN_RANGE_DB
    xf, yf = xf[keep], yf[keep]

    n_out = (xf.shape[0] - 1) * _HOP + _FRAME if xf.shape[0] else 0
    xs = np.zeros(n_out)
    ys = np.zeros(n_out)
    for t in range(xf.shape[0]):
        start = t * _HOP
        xs[start : start + _FRAME] += xf[t]
        ys[start : start + _FRAME] += yf[t]
    return xs, ys


def _third_octave_matrix(fs: int, nfft: int) -> np.ndarray:
    """Boolean band matrix mapping FFT bins to 15 one-third-octave bands."""
    f = np.linspace(0, fs, nfft + 1)[: nfft // 2 + 1]
    k = np.arange(_N_BANDS, dtype=np.float64)
    f_low = _MIN_FREQ * 2.0 ** ((2 * k - 1) / 6)
    f_high = _MIN_FREQ * 2.0 ** ((2 * k + 1) / 6)
    obm = np.zeros((_N_BANDS, f.size))
    for i in range(_N_BANDS):
        lo = int(np.argmin(np.square(f - f_low[i])))
        hi = int(np.argmin(np.square(f - f_high[i])))
        obm[i, lo:hi] = 1.0
    return obm


def _band_envelopes(x: np.ndarray, obm: np.ndarray) -> np.ndarray:
    w = _hann_inner(_FRAME)
    frames = _frame_signal(x, w)
    spec = np.fft.rfft(frames, n=_NFFT, axis=1)
    return np.sqrt(np.maximum(obm @ (np.abs(spec.T) ** 2), 0.0))  # (bands, frames)


def stoi(ref: AudioBuffer, est: AudioBuffer) -> float:
    """STOI score in [0, 1] (deterministic)."""
    x, y, _ = align_pair(ref, est)
    if ref.sample_rate_hz != _FS:
        x = resample(AudioBuffer(x, ref.sample_rate_hz), _FS).samples[0]
        y = resample(AudioBuffer(y, ref.sample_rate_hz), _FS).samples[0]

    if x.size < _FRAME:
        raise TooShort(f"{x.size} samples at 10 kHz is shorter than one analysis frame")
    x, y = _remove_silent_frames(x, y)
    if x.size < _FRAME:
        raise TooShort("no frames survive silence removal")

    obm = _third_octave_matrix(_FS, _NFFT)
    ex = _band_envelopes(x, obm)
    ey = _band_envelopes(y, obm)
    n_frames = ex.shape[1]
    if n_frames < _SEGMENT:
        raise TooShort(
            f"{n_frames} analysis frames after silence removal; need >= {_SEGMENT}"
        )

    clip_gain = 10.0 ** (-_BETA_DB / 20.0)
    correlations = []
    for m in range(_SEGMENT, n_frames + 1):
        xs = ex[:, m - _SEGMENT : m]
        ys = ey[:, m - _SEGMENT : m]
        scale = np.linalg.norm(xs, axis=1, keepdims=True) / (
            np.linalg.norm(ys, axis=1, keepdims=True) + _EPS
        )
        ys_clipped = np.minimum(ys * scale, xs * (1.0 + clip_gain))

        xs_c = xs - xs.mean(axis=1, keepdims=True)
        ys_c = ys_clipped - ys_clipped.mean(axis=1, keepdims=True)
        xs_c /= np.linalg.norm(xs_c, axis=1, keepdims=True) + _EPS
        ys_c /= np.linalg.norm(ys_c, axis=1, keepdims=True) + _EPS
        correlations.append(np.sum(xs_c * ys_c, axis=1))

    value = float(np.mean(correlations))
    return min(max(value, 0.0), 1.0)
