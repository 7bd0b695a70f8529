"""Deterministic synthesis of evaluation/training material: image-source
room impulse responses, SNR-exact noisy mixtures, two-speaker mixtures,
super-resolution pairs and bandwidth augmentation.

Every operation is a pure function of (spec, seed, assets); realizations
are bit-identical across runs. Seeded draws use Philox keyed by the
spec seed, consumed in the order documented on each function.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .audio import AudioBuffer
from .dsp import fft_convolve, lowpass, resample
from .errors import (
    AssetNotFound,
    InvalidCutoff,
    SameSpeaker,
    SampleRateMismatch,
    SilentNoise,
    SilentSpeech,
    UnachievableRT60,
    WrongRate,
)
from .manifest import GainPolicy, MixtureSpec
from .seeding import make_rng

_MIN_SRC_MIC_DIST_M = 0.01
_FRAC_DELAY_TAPS = 81  # hann-windowed sinc kernel length
_IMAGE_CHUNK = 65536

FLAG_CLIPPED = "clipped"


@dataclass(frozen=True)
class RoomSpec:
    """Shoebox room for image-source RIR generation.

    Wall behavior comes from either rt60_s (Sabine-inverted, uniform
    across the six surfaces) or explicit reflection_coeffs ordered
    (x0, x1, y0, y1, z0, z1) where *0 is the wall at coordinate 0.
    """

    dimensions_m: tuple[float, float, float]
    source_pos_m: tuple[float, float, float]
    mic_pos_m: tuple[float, float, float]
    sample_rate_hz: int
    rir_length_samples: int
    rt60_s: float | None = None
    reflection_coeffs: tuple[float, ...] | None = None
    max_order: int = 10
    sound_speed_mps: float = 343.0
    high_pass: bool = True  # 100 Hz post-filter against DC buildup

    def __post_init__(self):
        dims = tuple(float(v) for v in self.dimensions_m)
        src = tuple(float(v) for v in self.source_pos_m)
        mic = tuple(float(v) for v in self.mic_pos_m)
        object.__setattr__(self, "dimensions_m", dims)
        object.__setattr__(self, "source_pos_m", src)
        object.__setattr__(self, "mic_pos_m", mic)
        if any(d <= 0 for d in dims):
            raise ValueError(f"room dimensions must be positive, got {dims}")
        for label, pos in (("source", src), ("mic", mic)):
            if not all(0 < p < d for p, d in zip(pos, dims)):
                raise ValueError(f"{label} position {pos} not strictly inside room {dims}")
        if math.dist(src, mic) < _MIN_SRC_MIC_DIST_M:
            raise ValueError(
                f"source and mic are {math.dist(src, mic):.4f} m apart; need >= {_MIN_SRC_MIC_DIST_M}"
            )
        if self.sample_rate_hz <= 0 or self.rir_length_samples <= 0:
            raise ValueError("sample_rate_hz and rir_length_samples must be positive")
        if self.max_order < 0:
            raise ValueError(f"max_order must be >= 0, got {self.max_order}")
        if self.rt60_s is None and self.reflection_coeffs is None:
            raise ValueError("one of rt60_s or reflection_coeffs is required")
        if self.rt60_s is not None and self.rt60_s <= 0:
            raise ValueError(f"rt60_s must be positive, got {self.rt60_s}")
        if self.reflection_coeffs is not None:
            coeffs = tuple(float(b) for b in self.reflection_coeffs)
            object.__setattr__(self, "reflection_coeffs", coeffs)
            if len(coeffs) != 6 or any(not 0 <= b < 1 for b in coeffs):
                raise ValueError("reflection_coeffs must be 6 values in [0, 1)")


def rt60_to_reflection(room: RoomSpec) -> tuple[float, ...]:
    """Sabine inversion: alpha = 0.161 V / (S rt60), beta = sqrt(1 - alpha).

    The same coefficient is used on all six surfaces. Raises
    UnachievableRT60 when the requested time needs absorption >= 1.
    """
    if room.rt60_s is None:
        raise ValueError("room has no rt60_s")
    lx, ly, lz = room.dimensions_m
    volume = lx * ly * lz
    surface = 2.0 * (lx * ly + lx * lz + ly * lz)
    alpha = 0.161 * volume / (surface * room.rt60_s)
    if alpha >= 1.0:
        raise UnachievableRT60(
            f"rt60={room.rt60_s} s in a {lx}x{ly}x{lz} room needs absorption {alpha:.3f} >= 1"
        )
    beta = math.sqrt(1.0 - alpha)
    return (beta,) * 6


def _wall_coefficients(room: RoomSpec) -> np.ndarray:
    coeffs = room.reflection_coeffs or rt60_to_reflection(room)
    return np.asarray(coeffs, dtype=np.float64).reshape(3, 2)  # (dim, wall 0|1)


def _axis_images(
    s: float, length: float, beta0: float, beta1: float, n_max: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-axis image coordinates (1-2q)s + 2mL with reflection products and hit counts."""
    m = np.arange(-n_max, n_max + 1)
    coords, refl, hits = [], [], []
    for q in (0, 1):
        coords.append((1 - 2 * q) * s + 2.0 * m * length)
        hits_q = np.abs(m - q) + np.abs(m)
        refl.append(beta0 ** np.abs(m - q) * beta1 ** np.abs(m))
        hits.append(hits_q)
    return np.concatenate(coords), np.concatenate(refl), np.concatenate(hits)


def generate_rir(room: RoomSpec) -> AudioBuffer:
    """Allen-Berkley image-source RIR.

    Each image up to max_order total reflections contributes
    (prod of wall reflections) / (4 pi d) at delay d/c, placed with an
    81-tap hann-windowed sinc fractional-delay kernel. A 100 Hz one-pole
    high-pass (the classic image-method post-filter) removes DC buildup
    unless room.high_pass is False.
    """
    betas = _wall_coefficients(room)
    fs = room.sample_rate_hz
    c = room.sound_speed_mps
    npts = room.rir_length_samples
    half = (_FRAC_DELAY_TAPS - 1) // 2

    # per-axis image range: the order cap and the RIR time span both bound m
    t_max_m = (npts + half) / fs * c
    per_axis = []
    for d in range(3):
        n_order = (room.max_order + 1) // 2
        n_time = int(math.ceil((t_max_m + abs(room.source_pos_m[d]) + room.dimensions_m[d]) / (2.0 * room.dimensions_m[d])))
        n_max = min(n_order, n_time)
        per_axis.append(
            _axis_images(room.source_pos_m[d], room.dimensions_m[d], betas[d, 0], betas[d, 1], n_max)
        )
    (cx, rx, hx), (cy, ry, hy), (cz, rz, hz) = per_axis

    dx = cx[:, None, None] - room.mic_pos_m[0]
    dy = cy[None, :, None] - room.mic_pos_m[1]
    dz = cz[None, None, :] - room.mic_pos_m[2]
    dist = np.sqrt(dx * dx + dy * dy + dz * dz).ravel()
    refl = (rx[:, None, None] * ry[None, :, None] * rz[None, None, :]).ravel()
    hits = (hx[:, None, None] + hy[None, :, None] + hz[None, None, :]).ravel()

    delay = dist / c * fs
    keep = (hits <= room.max_order) & (refl > 0.0) & (delay < npts + half)
    dist, refl, delay = dist[keep], refl[keep], delay[keep]
    amp = refl / (4.0 * math.pi * np.maximum(dist, 1e-6))

    h = np.zeros(npts)
    rel = np.arange(-half, half + 1)
    for start in range(0, delay.size, _IMAGE_CHUNK):
        tau = delay[start : start + _IMAGE_CHUNK]
        a = amp[start : start + _IMAGE_CHUNK]
        centers = np.round(tau).astype(np.int64)
        positions = centers[:, None] + rel[None, :]
        x = positions - tau[:, None]
        kernel = 0.5 * (1.0 + np.cos(2.0 * np.pi * x / _FRAC_DELAY_TAPS)) * np.sinc(x)
        kernel *= a[:, None]
        valid = (positions >= 0) & (positions < npts) & (np.abs(x) <= half + 0.5)
        np.add.at(h, positions[valid], kernel[valid])

    if room.high_pass:
        h = _image_method_highpass(h, fs)
    return AudioBuffer(h, fs)


def _image_method_highpass(h: np.ndarray, fs: int, cutoff_hz: float = 100.0) -> np.ndarray:
    """Allen-Berkley 100 Hz high-pass: removes the DC component images build up."""
    w = 2.0 * math.pi * cutoff_hz / fs
    r1 = math.exp(-w)
    b1, b2 = 2.0 * r1 * math.cos(w), -r1 * r1
    a1 = -(1.0 + r1)
    return lfilter([1.0, a1, r1], [1.0, -b1, -b2], h)


def estimate_rt60(rir: AudioBuffer, fit_range_db: tuple[float, float] = (-5.0, -25.0)) -> float:
    """Schroeder backward-integration RT60 estimate.

    Fits a line to the energy-decay curve between fit_range_db and
    extrapolates to -60 dB.
    """
    h = rir.require_mono()
    energy = h * h
    edc = np.cumsum(energy[::-1])[::-1]
    if edc[0] <= 0:
        raise ValueError("RIR has no energy")
    with np.errstate(divide="ignore"):
        decay_db = 10.0 * np.log10(edc / edc[0])
    hi, lo = fit_range_db
    mask = (decay_db <= hi) & (decay_db >= lo)
    if mask.sum() < 2:
        raise ValueError(f"decay range {fit_range_db} dB not covered; lengthen the RIR")
    t = np.flatnonzero(mask) / rir.sample_rate_hz
    slope, _ = np.polyfit(t, decay_db[mask], 1)
    if slope >= 0:
        raise ValueError("energy-decay curve is not decreasing")
    return float(-60.0 / slope)


@dataclass(frozen=True)
class MixResult:
    """mixture = speech_component + noise_component, exactly."""

    mixture: AudioBuffer
    speech_component: AudioBuffer
    noise_component: AudioBuffer
    rescale: float  # common factor applied by the gain policy (1.0 if none)
    flags: tuple[str, ...] = field(default=())


def _loop_to_length(noise: np.ndarray, n: int, offset: int) -> np.ndarray:
    idx = (offset + np.arange(n)) % noise.size
    return noise[idx]


def mix_at_snr(
    speech: AudioBuffer,
    noise: AudioBuffer,
    snr_db: float,
    gain_policy: GainPolicy | None = None,
    rng: np.random.Generator | None = None,
) -> MixResult:
    """Mix noise into speech at an exact energy-ratio SNR.

    The noise is looped/trimmed to the speech length starting at a
    seeded offset (rng draw #1; offset 0 without an rng), then scaled so
    10 log10(sum(s^2)/sum(n^2)) equals snr_db exactly. peak_norm rescales
    all three outputs by one common factor when the mixture peak exceeds
    the target, which leaves the component SNR unchanged.
    """
    s = speech.require_mono()
    n = noise.require_mono()
    if speech.sample_rate_hz != noise.sample_rate_hz:
        raise SampleRateMismatch(
            f"speech at {speech.sample_rate_hz} Hz vs noise at {noise.sample_rate_hz} Hz"
        )
    if not np.any(s):
        raise SilentSpeech("speech signal is all-zero")
    if not np.any(n):
        raise SilentNoise("noise signal is all-zero")

    offset = int(rng.integers(0, n.size)) if rng is not None else 0
    n_used = _loop_to_length(n, s.size, offset)
    noise_energy = float(np.dot(n_used, n_used))
    if noise_energy == 0.0:
        raise SilentNoise("noise segment after looping is all-zero")
    speech_energy = float(np.dot(s, s))
    gain = math.sqrt(speech_energy / (noise_energy * 10.0 ** (snr_db / 10.0)))
    n_scaled = gain * n_used
    mixture = s + n_scaled

    policy = gain_policy or GainPolicy(kind="none")
    rescale = 1.0
    flags: tuple[str, ...] = ()
    peak = float(np.abs(mixture).max())
    if policy.kind == "peak_norm" and peak > policy.target:
        rescale = policy.target / peak
    elif policy.kind == "none" and peak > 1.0:
        flags = (FLAG_CLIPPED,)

    rate = speech.sample_rate_hz
    return MixResult(
        mixture=AudioBuffer(mixture * rescale, rate),
        speech_component=AudioBuffer(s * rescale, rate),
        noise_component=AudioBuffer(n_scaled * rescale, rate),
        rescale=rescale,
        flags=flags,
    )


@dataclass(frozen=True)
class EnhancementPair:
    noisy: AudioBuffer
    clean_target: AudioBuffer
    realized: MixtureSpec
    flags: tuple[str, ...] = field(default=())


def make_enhancement_pair(
    spec: MixtureSpec,
    corpus,
    reverb_probability: float = 0.3,
    snr_noise_range_db: tuple[float, float] = (0.0, 15.0),
    dry_target: bool = False,
) -> EnhancementPair:
    """Noisy/clean pair per one MixtureSpec.

    Seeded draw order: (1) reverb coin when spec.reverberant is None,
    (2) RIR pick when reverberant and spec.rir_id is None, (3) noise SNR
    when spec.snr_noise_db is None, (4) noise loop offset. The clean
    target is the pre-mixing speech: reverberant speech by default when
    an RIR was applied, the dry source when dry_target is True.
    """
    if spec.noise_id is None:
        raise AssetNotFound(f"{spec.utterance_id}: enhancement spec has no noise_id")
    rng = make_rng(spec.seed)
    speech = corpus.load(spec.speech_ids[0])

    reverberant = spec.reverberant
    if reverberant is None:
        reverberant = bool(rng.random() < reverb_probability)
    rir_id = spec.rir_id
    mix_input = speech
    if reverberant:
        if rir_id is None:
            rir_ids = corpus.ids("rir")
            if not rir_ids:
                raise AssetNotFound(f"{spec.utterance_id}: reverberant but no rir assets")
            rir_id = rir_ids[int(rng.integers(0, len(rir_ids)))]
        rir = corpus.load(rir_id)
        if rir.sample_rate_hz != speech.sample_rate_hz:
            raise SampleRateMismatch(
                f"rir at {rir.sample_rate_hz} Hz vs speech at {speech.sample_rate_hz} Hz"
            )
        wet = fft_convolve(speech, rir.samples[0]).samples[0][: speech.n_frames]
        mix_input = AudioBuffer(wet, speech.sample_rate_hz)

    snr_noise = spec.snr_noise_db
    if snr_noise is None:
        snr_noise = float(rng.uniform(*snr_noise_range_db))

    noise = corpus.load(spec.noise_id)
    mixed = mix_at_snr(mix_input, noise, snr_noise, spec.gain_policy, rng)

    clean = speech if (dry_target or not reverberant) else mix_input
    clean_scaled = AudioBuffer(clean.samples[0] * mixed.rescale, speech.sample_rate_hz)
    realized = dataclasses.replace(
        spec, reverberant=reverberant, rir_id=rir_id, snr_noise_db=snr_noise
    )
    return EnhancementPair(
        noisy=mixed.mixture,
        clean_target=clean_scaled,
        realized=realized,
        flags=mixed.flags,
    )


@dataclass(frozen=True)
class SeparationMixture:
    mixture: AudioBuffer
    ref_1: AudioBuffer
    ref_2: AudioBuffer
    realized: MixtureSpec
    flags: tuple[str, ...] = field(default=())


def make_separation_mixture(
    spec: MixtureSpec,
    corpus,
    snr_speech_range_db: tuple[float, float] = (0.0, 5.0),
    snr_noise_range_db: tuple[float, float] = (-5.0, 15.0),
) -> SeparationMixture:
    """Two-speaker mixture with optional noise.

    Seeded draw order: (1) zero-pad offset for the shorter utterance,
    (2) inter-speaker SNR when unset, (3) noise SNR when unset, (4) noise
    loop offset. Speaker 2 is scaled so 10 log10(E1/E2) equals the
    inter-speaker SNR; noise, when present, is scaled relative to the
    louder post-scaling speaker. References are returned post-scaling.
    """
    if len(spec.speech_ids) != 2:
        raise SameSpeaker(f"{spec.utterance_id}: separation needs two speech_ids")
    if spec.speech_ids[0] == spec.speech_ids[1]:
        raise SameSpeaker(f"{spec.utterance_id}: speech_ids are identical")
    rng = make_rng(spec.seed)
    s1 = corpus.load(spec.speech_ids[0])
    s2 = corpus.load(spec.speech_ids[1])
    if s1.sample_rate_hz != s2.sample_rate_hz:
        raise SampleRateMismatch(
            f"speakers at {s1.sample_rate_hz} Hz and {s2.sample_rate_hz} Hz"
        )
    a1, a2 = s1.samples[0], s2.samples[0]
    if not np.any(a1) or not np.any(a2):
        raise SilentSpeech("a speaker utterance is all-zero")

    n = max(a1.size, a2.size)
    pad_gap = n - min(a1.size, a2.size)
    offset = int(rng.integers(0, pad_gap + 1))
    if a1.size < n:
        a1 = _pad_at(a1, n, offset)
    elif a2.size < n:
        a2 = _pad_at(a2, n, offset)

    snr_speech = spec.snr_speech_db
    if snr_speech is None:
        snr_speech = float(rng.uniform(*snr_speech_range_db))
    e1 = float(np.dot(a1, a1))
    e2 = float(np.dot(a2, a2))
    g2 = math.sqrt(e1 / (e2 * 10.0 ** (snr_speech / 10.0)))
    a2 = g2 * a2
    mixture = a1 + a2

    snr_noise = spec.snr_noise_db
    noise_component = None
    if spec.noise_id is not None:
        if snr_noise is None:
            snr_noise = float(rng.uniform(*snr_noise_range_db))
        noise = corpus.load(spec.noise_id)
        if noise.sample_rate_hz != s1.sample_rate_hz:
            raise SampleRateMismatch(
                f"noise at {noise.sample_rate_hz} Hz vs speech at {s1.sample_rate_hz} Hz"
            )
        nm = noise.samples[0]
        if not np.any(nm):
            raise SilentNoise("noise signal is all-zero")
        n_used = _loop_to_length(nm, n, int(rng.integers(0, nm.size)))
        louder_energy = max(e1, float(np.dot(a2, a2)))
        gn = math.sqrt(louder_energy / (float(np.dot(n_used, n_used)) * 10.0 ** (snr_noise / 10.0)))
        noise_component = gn * n_used
        mixture = mixture + noise_component

    rescale = 1.0
    flags: tuple[str, ...] = ()
    peak = float(np.abs(mixture).max())
    if spec.gain_policy.kind == "peak_norm" and peak > spec.gain_policy.target:
        rescale = spec.gain_policy.target / peak
    elif spec.gain_policy.kind == "none" and peak > 1.0:
        flags = (FLAG_CLIPPED,)

    rate = s1.sample_rate_hz
    realized = dataclasses.replace(spec, snr_speech_db=snr_speech, snr_noise_db=snr_noise)
    return SeparationMixture(
        mixture=AudioBuffer(mixture * rescale, rate),
        ref_1=AudioBuffer(a1 * rescale, rate),
        ref_2=AudioBuffer(a2 * rescale, rate),
        realized=realized,
        flags=flags,
    )


def _pad_at(x: np.ndarray, n: int, offset: int) -> np.ndarray:
    out = np.zeros(n)
    out[offset : offset + x.size] = x
    return out


SR_SOURCE_RATE = 48000
SR_CUTOFF_RANGE_HZ = (8000.0, 16000.0)
_SR_TRANSITION_HZ = 500.0


@dataclass(frozen=True)
class SrPair:
    lr_input: AudioBuffer  # band-limited, still at 48 kHz
    hr_target: AudioBuffer


def make_sr_pair(hr: AudioBuffer, cutoff_hz: float) -> SrPair:
    """Band-limit a 48 kHz signal for super-resolution training pairs.

    cutoff_hz in [8k, 16k] is the effective Nyquist of a 16-32 kHz rate;
    the low-rate input stays sampled at 48 kHz and keeps the target's
    length and alignment.
    """
    if hr.sample_rate_hz != SR_SOURCE_RATE:
        raise WrongRate(f"super-resolution pairs need {SR_SOURCE_RATE} Hz input, got {hr.sample_rate_hz}")
    lo, hi = SR_CUTOFF_RANGE_HZ
    if not lo <= cutoff_hz <= hi:
        raise InvalidCutoff(f"cutoff {cutoff_hz} Hz outside [{lo}, {hi}]")
    lr = lowpass(hr, cutoff_hz, _SR_TRANSITION_HZ)
    return SrPair(lr_input=lr, hr_target=hr)


def bandwidth_augment(
    audio: AudioBuffer,
    seed: int,
    p16: float = 0.10,
    p8: float = 0.05,
) -> AudioBuffer:
    """Seeded bandwidth degradation: resample 48k through 16k (prob p16)
    or 8k (prob p8), else return the input unchanged. Output length always
    equals input length (the round trip can drift by a sample)."""
    if audio.sample_rate_hz != SR_SOURCE_RATE:
        raise WrongRate(f"bandwidth augmentation expects {SR_SOURCE_RATE} Hz, got {audio.sample_rate_hz}")
    if p16 < 0 or p8 < 0 or p16 + p8 > 1.0:
        raise ValueError(f"need p16, p8 >= 0 with p16 + p8 <= 1, got {p16}, {p8}")
    draw = float(make_rng(seed).random())
    if draw < p16:
        intermediate = 16000
    elif draw < p16 + p8:
        intermediate = 8000
    else:
        return audio
    out = resample(resample(audio, intermediate), SR_SOURCE_RATE)
    y = out.samples
    n = audio.n_frames
    if y.shape[1] < n:
        y = np.pad(y, ((0, 0), (0, n - y.shape[1])))
    return AudioBuffer(y[:, :n], SR_SOURCE_RATE)
