"""voicebench: speech-processing evaluation metrics and deterministic
corpus simulation (noisy mixtures, reverberant speech, two-speaker
mixtures, super-resolution pairs)."""

from .audio import AudioBuffer, read_wav, read_wav_info, to_mono, write_wav
from .dsp import (
    MelFilterbank,
    Spectrogram,
    StftConfig,
    default_stft_config,
    fft_convolve,
    istft,
    lowpass,
    mel_filterbank,
    resample,
    stft,
)
from .manifest import (
    CorpusIndex,
    GainPolicy,
    MixtureSpec,
    Recipe,
    load_manifest,
    sample_specs,
    save_manifest,
    scan_corpus,
)
from .metrics import (
    BssScores,
    MetricReport,
    PitResult,
    bss_eval,
    loudness_lufs,
    lsd,
    mcd,
    pit_score,
    score_pair,
    si_snr,
    si_snr_improvement,
    snr,
    stoi,
)
from .report import SummaryTable, aggregate, emit
from .simulate import (
    RoomSpec,
    bandwidth_augment,
    estimate_rt60,
    generate_rir,
    make_enhancement_pair,
    make_separation_mixture,
    make_sr_pair,
    mix_at_snr,
    rt60_to_reflection,
)

__version__ = "0.1.0"
