"""Shared signal-processing primitives: STFT/ISTFT, mel filterbank,
FFT convolution, Kaiser-windowed FIR low-pass and polyphase resampling.

Everything computes in float64. All functions are pure; none keeps
mutable state, so concurrent calls are safe.

STFT parameter defaults for the spectral metrics (LSD/MCD) are set by
default_stft_config(): 512/512/256 hann below 24 kHz, 2048/2048/512 at
higher rates. Published distortion numbers depend on these choices, so
callers comparing against external results should pass explicit configs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve, firwin, upfirdn

from .audio import AudioBuffer
from .errors import EmptyInput, EmptySignal, InvalidBand, InvalidCutoff, NonColaConfig

_WINDOWS = ("hann", "hamming", "sqrt_hann")


def _make_window(name: str, length: int) -> np.ndarray:
    """Periodic (DFT-even) windows; periodic form is what overlap-add needs."""
    n = np.arange(length)
    if name == "hann":
        return 0.5 - 0.5 * np.cos(2 * np.pi * n / length)
    if name == "hamming":
        return 0.54 - 0.46 * np.cos(2 * np.pi * n / length)
    if name == "sqrt_hann":
        return np.sqrt(0.5 - 0.5 * np.cos(2 * np.pi * n / length))
    raise ValueError(f"unknown window {name!r}, expected one of {_WINDOWS}")


@dataclass(frozen=True)
class StftConfig:
    fft_size: int
    win_length: int = 0  # 0 -> fft_size
    hop_length: int = 0  # 0 -> win_length // 2
    window: str = "hann"
    center: bool = True

    def __post_init__(self):
        if self.fft_size < 2 or self.fft_size & (self.fft_size - 1):
            raise ValueError(f"fft_size must be a power of two >= 2, got {self.fft_size}")
        if self.win_length == 0:
            object.__setattr__(self, "win_length", self.fft_size)
        if self.hop_length == 0:
            object.__setattr__(self, "hop_length", self.win_length // 2)
        if not 0 < self.win_length <= self.fft_size:
            raise ValueError(f"win_length must be in (0, fft_size], got {self.win_length}")
        if not 0 < self.hop_length <= self.win_length:
            raise ValueError(f"hop_length must be in (0, win_length], got {self.hop_length}")
        if self.window not in _WINDOWS:
            raise ValueError(f"unknown window {self.window!r}")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1


@dataclass(frozen=True)
class Spectrogram:
    frames: np.ndarray  # (n_frames, n_bins) complex128
    config: StftConfig
    sample_rate_hz: int

    def __post_init__(self):
        arr = np.asarray(self.frames, dtype=np.complex128)
        if arr.ndim != 2 or arr.shape[1] != self.config.n_bins:
            raise ValueError(
                f"frames must be (n_frames, {self.config.n_bins}), got {arr.shape}"
            )
        if not np.all(np.isfinite(arr.view(np.float64))):
            raise ValueError("spectrogram contains non-finite values")
        object.__setattr__(self, "frames", arr)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_bins(self) -> int:
        return self.frames.shape[1]


def _as_mono_array(audio) -> tuple[np.ndarray, int]:
    if isinstance(audio, AudioBuffer):
        return audio.require_mono(), audio.sample_rate_hz
    arr = np.asarray(audio, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError("expected 1-D array or mono AudioBuffer")
    return arr, 0


def default_stft_config(sample_rate_hz: int) -> StftConfig:
    """Metric-suite analysis defaults; see module docstring for the caveat."""
    if sample_rate_hz <= 24000:
        return StftConfig(fft_size=512, win_length=512, hop_length=256)
    return StftConfig(fft_size=2048, win_length=2048, hop_length=512)


def stft(audio, config: StftConfig, sample_rate_hz: int = 0) -> Spectrogram:
    """Windowed real FFT of successive hops.

    Frame t covers samples [t*hop, t*hop + win) of the (optionally
    reflect-padded) signal; n_frames = 1 + (padded_len - win) // hop.
    """
    x, rate = _as_mono_array(audio)
    rate = rate or sample_rate_hz
    if x.size == 0:
        raise EmptySignal("cannot analyze an empty signal")
    if config.center:
        pad = config.fft_size // 2
        x = np.pad(x, pad, mode="reflect") if x.size > 1 else np.pad(x, pad)
    if x.size < config.win_length:
        raise EmptySignal(
            f"signal of {x.size} samples is shorter than win_length={config.win_length}"
        )
    n_frames = 1 + (x.size - config.win_length) // config.hop_length
    window = _make_window(config.window, config.win_length)
    idx = np.arange(config.win_length)[np.newaxis, :] + config.hop_length * np.arange(n_frames)[:, np.newaxis]
    frames = x[idx] * window
    spec = np.fft.rfft(frames, n=config.fft_size, axis=1)
    return Spectrogram(spec, config, rate)


def istft(spec: Spectrogram) -> AudioBuffer:
    """Weighted overlap-add inverse; exact wherever the squared-window sum is positive.

    Raises NonColaConfig when the window/hop combination leaves gaps in
    the interior of the squared-window sum (e.g. hann with hop == win).
    """
    cfg = spec.config
    window = _make_window(cfg.window, cfg.win_length)
    n_frames = spec.n_frames
    frames = np.fft.irfft(spec.frames, n=cfg.fft_size, axis=1)[:, : cfg.win_length]
    out_len = (n_frames - 1) * cfg.hop_length + cfg.win_length
    signal = np.zeros(out_len)
    wsum = np.zeros(out_len)
    wsq = window * window
    for t in range(n_frames):
        start = t * cfg.hop_length
        signal[start : start + cfg.win_length] += frames[t] * window
        wsum[start : start + cfg.win_length] += wsq

    # interior of the OLA sum must be bounded away from zero
    interior = wsum[cfg.win_length // 2 : out_len - cfg.win_length // 2]
    if interior.size and interior.min() < 1e-8 * wsum.max():
        raise NonColaConfig(
            f"window={cfg.window} win={cfg.win_length} hop={cfg.hop_length} "
            "leaves gaps in the overlap-add sum"
        )
    nonzero = wsum > 1e-12 * wsum.max()
    signal[nonzero] /= wsum[nonzero]

    if cfg.center:
        pad = cfg.fft_size // 2
        signal = signal[pad : out_len - pad]
    return AudioBuffer(signal, spec.sample_rate_hz)


def hz_to_mel(f_hz):
    """HTK mel scale: mel(f) = 2595 log10(1 + f/700)."""
    return 2595.0 * np.log10(1.0 + np.asarray(f_hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (np.power(10.0, np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


@dataclass(frozen=True)
class MelFilterbank:
    weights: np.ndarray  # (n_mels, n_bins), peak-normalized triangles
    fmin_hz: float
    fmax_hz: float
    sample_rate_hz: int

    @property
    def n_mels(self) -> int:
        return self.weights.shape[0]

    def apply(self, power_spectra: np.ndarray) -> np.ndarray:
        """Map (n_frames, n_bins) power spectra to (n_frames, n_mels) band powers."""
        return power_spectra @ self.weights.T


def mel_filterbank(
    n_mels: int,
    config: StftConfig,
    sample_rate_hz: int,
    fmin_hz: float = 0.0,
    fmax_hz: float | None = None,
) -> MelFilterbank:
    """Triangular filters with centers equally spaced on the HTK mel scale.

    Peak of each triangle is 1 (no area normalization).
    """
    if fmax_hz is None:
        fmax_hz = sample_rate_hz / 2.0
    if not (0 <= fmin_hz < fmax_hz <= sample_rate_hz / 2.0):
        raise InvalidBand(f"need 0 <= fmin < fmax <= Nyquist, got [{fmin_hz}, {fmax_hz}]")
    if n_mels < 2:
        raise InvalidBand(f"n_mels must be >= 2, got {n_mels}")

    edges_hz = mel_to_hz(np.linspace(hz_to_mel(fmin_hz), hz_to_mel(fmax_hz), n_mels + 2))
    bin_hz = np.arange(config.n_bins) * sample_rate_hz / config.fft_size
    lo = edges_hz[:-2, np.newaxis]
    center = edges_hz[1:-1, np.newaxis]
    hi = edges_hz[2:, np.newaxis]
    up = (bin_hz - lo) / np.maximum(center - lo, 1e-12)
    down = (hi - bin_hz) / np.maximum(hi - center, 1e-12)
    weights = np.maximum(0.0, np.minimum(up, down))

    empty = np.flatnonzero(~weights.any(axis=1))
    if empty.size:
        raise InvalidBand(
            f"{empty.size} mel filters cover no FFT bin (first: {empty[0]}); "
            "reduce n_mels or increase fft_size"
        )
    return MelFilterbank(weights, float(fmin_hz), float(fmax_hz), sample_rate_hz)


def fft_convolve(signal: AudioBuffer, kernel) -> AudioBuffer:
    """Full linear convolution; output length = len(signal) + len(kernel) - 1."""
    x = signal.require_mono()
    k = np.asarray(kernel, dtype=np.float64)
    if k.ndim != 1:
        raise ValueError("kernel must be 1-D")
    if x.size == 0 or k.size == 0:
        raise EmptyInput("signal and kernel must be non-empty")
    return AudioBuffer(fftconvolve(x, k, mode="full"), signal.sample_rate_hz)


def _kaiser_taps(num_taps: int, cutoff_norm: float, attenuation_db: float) -> np.ndarray:
    """Type-I linear-phase Kaiser-window FIR; cutoff_norm relative to Nyquist."""
    beta = 0.1102 * (attenuation_db - 8.7)  # valid for attenuation > 50 dB
    return firwin(num_taps, cutoff_norm, window=("kaiser", beta))


def _kaiser_num_taps(attenuation_db: float, transition_norm: float) -> int:
    """Kaiser length estimate; transition_norm relative to Nyquist."""
    delta_omega = np.pi * transition_norm
    n = int(math.ceil((attenuation_db - 7.95) / (2.285 * delta_omega))) + 1
    return n | 1  # odd length -> integer group delay


def _apply_fir_aligned(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Convolve with reflect-padded edges and remove the group delay."""
    half = (taps.size - 1) // 2
    if half == 0:
        return fftconvolve(x, taps, mode="full")[: x.size]
    xp = np.pad(x, half, mode="reflect")
    y = fftconvolve(xp, taps, mode="full")
    return y[2 * half : 2 * half + x.size]


_LOWPASS_DESIGN_ATTEN_DB = 70.0  # margin over the 60 dB stopband contract


def lowpass(audio: AudioBuffer, cutoff_hz: float, transition_hz: float) -> AudioBuffer:
    """Linear-phase windowed-sinc low-pass, group delay compensated.

    The passband edge sits at cutoff_hz; attenuation reaches >= 60 dB at
    cutoff_hz + transition_hz. Output has the input's length and alignment.
    """
    nyquist = audio.sample_rate_hz / 2.0
    if not 0 < cutoff_hz < nyquist:
        raise InvalidCutoff(f"cutoff {cutoff_hz} Hz outside (0, {nyquist})")
    if transition_hz <= 0:
        raise InvalidCutoff(f"transition width must be positive, got {transition_hz}")

    # -6 dB point mid-transition, clamped below Nyquist for cutoff ~ Nyquist
    design_cutoff = min(cutoff_hz + transition_hz / 2.0, 0.999 * nyquist)
    num_taps = _kaiser_num_taps(_LOWPASS_DESIGN_ATTEN_DB, transition_hz / nyquist)
    taps = _kaiser_taps(num_taps, design_cutoff / nyquist, _LOWPASS_DESIGN_ATTEN_DB)
    out = np.vstack([_apply_fir_aligned(ch, taps) for ch in audio.samples])
    return AudioBuffer(out, audio.sample_rate_hz)


_RESAMPLE_ATTEN_DB = 85.0
_RESAMPLE_TRANSITION = 0.08  # fraction of the effective Nyquist


def _resample_filter(up: int, down: int) -> np.ndarray:
    """Anti-alias/anti-image prototype at the upsampled rate, gain-compensated."""
    ratio = max(up, down)
    # effective Nyquist is 1/ratio of the upsampled Nyquist
    transition = _RESAMPLE_TRANSITION / ratio
    cutoff = (1.0 - _RESAMPLE_TRANSITION / 2.0) / ratio
    num_taps = _kaiser_num_taps(_RESAMPLE_ATTEN_DB, transition)
    beta = 0.1102 * (_RESAMPLE_ATTEN_DB - 8.7)
    return firwin(num_taps, cutoff, window=("kaiser", beta)) * up


def _resample_channel(x: np.ndarray, up: int, down: int) -> np.ndarray:
    taps = _resample_filter(up, down)
    half = (taps.size - 1) // 2
    n_out = int(round(x.size * up / down))

    # reflect-pad so edges see a smooth continuation; choose the pad length
    # so the filter delay lands on an integer output index
    pad = -(-half // up)  # ceil(half / up)
    while (pad * up + half) % down:
        pad += 1
    extra = -(-(n_out * down) // up) + 1
    xp = np.pad(x, (pad, pad + extra), mode="reflect")
    y = upfirdn(taps, xp, up=up, down=down)
    start = (pad * up + half) // down
    return y[start : start + n_out]


def resample(audio: AudioBuffer, target_hz: int) -> AudioBuffer:
    """Polyphase windowed-sinc rational resampling.

    Output length is round(n * target / source); sample j of the output
    sits at input time j * source_rate/target_rate (no extra delay).
    """
    if target_hz <= 0:
        raise ValueError(f"target_hz must be positive, got {target_hz}")
    source = audio.sample_rate_hz
    if target_hz == source:
        return audio
    g = math.gcd(source, target_hz)
    up, down = target_hz // g, source // g
    out = np.vstack([_resample_channel(ch, up, down) for ch in audio.samples])
    return AudioBuffer(out, target_hz)
