"""Metric suite facade: registry, per-utterance reports, batch entry point.

Registered metric names: snr, si_snr, si_snri, lsd, stoi, mcd,
bss_sdr, bss_sir, bss_sar, lufs. PESQ-family, DNSMOS and SRMR are
intentionally absent (patented / neural raters); the registry is a plain
dict so such scorers can be bolted on by callers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..audio import AudioBuffer
from ..errors import SingularProjection, UnknownMetric, VoicebenchError
from ._common import CAP_DB, FLAG_CAPPED, FLAG_TRIMMED, MAX_LENGTH_GAP_S
from .bss import BssScores, bss_eval
from .loudness import loudness_lufs
from .pit import PitResult, pit_score
from .snr import si_snr, si_snr_improvement, snr
from .spectral import lsd, mcd
from .stoi import stoi

__all__ = [
    "CAP_DB",
    "BssScores",
    "MetricReport",
    "PitResult",
    "METRIC_NAMES",
    "bss_eval",
    "loudness_lufs",
    "lsd",
    "mcd",
    "pit_score",
    "score_pair",
    "si_snr",
    "si_snr_improvement",
    "snr",
    "stoi",
]

_BSS_NAMES = ("bss_sdr", "bss_sir", "bss_sar")
_CAPPABLE = {"snr", "si_snr", "si_snri", *_BSS_NAMES}

METRIC_NAMES = ("snr", "si_snr", "si_snri", "lsd", "stoi", "mcd", *_BSS_NAMES, "lufs")


@dataclass
class MetricReport:
    """Scores for one utterance; metrics that failed appear in errors, not scores."""

    utterance_id: str
    scores: dict[str, float] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)
    errors: dict[str, str] = field(default_factory=dict)

    def add_flag(self, flag: str) -> None:
        if flag not in self.flags:
            self.flags.append(flag)

    def to_dict(self) -> dict:
        return {
            "utterance_id": self.utterance_id,
            "scores": dict(self.scores),
            "flags": list(self.flags),
            "errors": dict(self.errors),
        }


def score_pair(
    ref: AudioBuffer,
    est: AudioBuffer,
    metric_set: list[str],
    mixture: AudioBuffer | None = None,
    utterance_id: str = "",
) -> MetricReport:
    """Run the requested metrics on one reference/estimate pair.

    A metric failure is recorded as an error string under its name and
    the rest of the report is still produced. si_snri additionally needs
    the unprocessed mixture.
    """
    unknown = [m for m in metric_set if m not in METRIC_NAMES]
    if unknown:
        raise UnknownMetric(f"unknown metric(s) {unknown}; registry has {list(METRIC_NAMES)}")

    report = MetricReport(utterance_id=utterance_id)
    if ref.n_frames != est.n_frames:
        gap_s = abs(ref.n_frames - est.n_frames) / ref.sample_rate_hz
        if gap_s <= MAX_LENGTH_GAP_S and metric_set:
            report.add_flag(FLAG_TRIMMED)

    bss_cache: list[BssScores] | None = None

    for name in metric_set:
        try:
            if name == "snr":
                value = snr(ref, est)
            elif name == "si_snr":
                value = si_snr(ref, est)
            elif name == "si_snri":
                if mixture is None:
                    raise VoicebenchError("si_snri requires the unprocessed mixture")
                value = si_snr_improvement(mixture, est, ref)
            elif name == "lsd":
                value = lsd(ref, est)
            elif name == "stoi":
                value = stoi(ref, est)
            elif name == "mcd":
                value = mcd(ref, est)
            elif name in _BSS_NAMES:
                if bss_cache is None:
                    bss_cache = bss_eval([ref], [est])
                scores = bss_cache[0]
                field_name = name.split("_", 1)[1]
                picked = getattr(scores, field_name)
                if picked is None:
                    raise SingularProjection("projection failed for this pair")
                value = picked
            else:  # lufs
                value = loudness_lufs(est)
        except VoicebenchError as exc:
            report.errors[name] = f"{type(exc).__name__}: {exc}"
            continue
        report.scores[name] = value
        if name in _CAPPABLE and value >= CAP_DB:
            report.add_flag(FLAG_CAPPED)
    return report
