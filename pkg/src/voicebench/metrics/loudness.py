"""Integrated loudness per ITU-R BS.1770-4.

K-weighting (high-shelf pre-filter followed by an RLB high-pass) is
applied to each channel, mean-square power is taken over 400 ms blocks
with 75% overlap, and blocks are gated twice: an absolute gate at
-70 LKFS, then a relative gate 10 LU below the mean loudness of the
absolutely-gated blocks. Channels are summed with unit weights (mono and
stereo program material; no surround weighting).

Filter coefficients are designed parametrically from the BS.1770 analog
prototypes so any sample rate is supported; at 48 kHz the design
reproduces the coefficient table in the recommendation.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import sosfilt

from ..audio import AudioBuffer
from ..errors import SilentOrGatedOut

_BLOCK_S = 0.400
_OVERLAP = 0.75
_OFFSET_DB = -0.691
_ABS_GATE_LUFS = -70.0
_REL_GATE_LU = 10.0


def k_weighting_sos(sample_rate_hz: int) -> np.ndarray:
    """Two-section K-weighting filter as second-order sections.

    Stage 1 is the +4 dB high-frequency shelf, stage 2 the RLB high-pass;
    prototype parameters from the BS.1770 filter fits.
    """
    # high-shelf: f0, gain (dB), Q
    f0, gain_db, q = 1681.9744509555319, 3.99984385397, 0.7071752369554193
    k = np.tan(np.pi * f0 / sample_rate_hz)
    vh = 10.0 ** (gain_db / 20.0)
    vb = vh**0.499666774155
    a0 = 1.0 + k / q + k * k
    shelf = [
        (vh + vb * k / q + k * k) / a0,
        2.0 * (k * k - vh) / a0,
        (vh - vb * k / q + k * k) / a0,
        1.0,
        2.0 * (k * k - 1.0) / a0,
        (1.0 - k / q + k * k) / a0,
    ]

    # RLB high-pass: numerator fixed at [1, -2, 1] per the recommendation
    f0, q = 38.13547087613982, 0.5003270373253953
    k = np.tan(np.pi * f0 / sample_rate_hz)
    a0 = 1.0 + k / q + k * k
    highpass = [
        1.0,
        -2.0,
        1.0,
        1.0,
        2.0 * (k * k - 1.0) / a0,
        (1.0 - k / q + k * k) / a0,
    ]
    return np.array([shelf, highpass])


def loudness_lufs(audio: AudioBuffer) -> float:
    """Gated integrated loudness in LUFS.

    Raises SilentOrGatedOut when no 400 ms block survives the gates
    (digital silence, or signal shorter than one block).
    """
    sos = k_weighting_sos(audio.sample_rate_hz)
    weighted = sosfilt(sos, audio.samples, axis=1)

    block = int(round(_BLOCK_S * audio.sample_rate_hz))
    hop = int(round(block * (1.0 - _OVERLAP)))
    n = audio.n_frames
    if n < block:
        raise SilentOrGatedOut(f"signal shorter than one {_BLOCK_S * 1000:.0f} ms block")
    n_blocks = 1 + (n - block) // hop

    # per-block mean square, summed over channels with unit weight
    sq = weighted**2
    starts = hop * np.arange(n_blocks)
    csum = np.concatenate([np.zeros((audio.channel_count, 1)), np.cumsum(sq, axis=1)], axis=1)
    block_power = ((csum[:, starts + block] - csum[:, starts]) / block).sum(axis=0)

    with np.errstate(divide="ignore"):
        block_lufs = _OFFSET_DB + 10.0 * np.log10(block_power)
    kept = block_power[block_lufs > _ABS_GATE_LUFS]
    if kept.size == 0:
        raise SilentOrGatedOut("no block above the -70 LKFS absolute gate")

    rel_threshold = _OFFSET_DB + 10.0 * np.log10(kept.mean()) - _REL_GATE_LU
    final = kept[_OFFSET_DB + 10.0 * np.log10(kept) > rel_threshold]
    if final.size == 0:
        raise SilentOrGatedOut("no block above the relative gate")
    return float(_OFFSET_DB + 10.0 * np.log10(final.mean()))
