"""Corpus indexing, mixture manifests, and deterministic recipe sampling.

Manifests are JSONL (one spec per line) so very large corpora stream
without whole-file parsing. Field names: schema_version, utterance_id,
kind, speech_ids, noise_id, rir_id, snr_speech_db, snr_noise_db,
reverberant, cutoff_hz, seed, gain_policy. Unknown fields survive a
load/save round trip verbatim.

Per-spec seeds are derived from the recipe seed with splitmix64 (see
seeding module); sampling randomness uses Philox, so a (recipe, index)
pair yields bit-identical manifests across runs and platforms.
"""

from __future__ import annotations

import json
import math
import os
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .audio import AudioBuffer, read_wav, read_wav_info, to_mono
from .errors import (
    AssetNotFound,
    DuplicateAssetId,
    InsufficientAssets,
    MalformedLine,
    NoAssetsFound,
    SchemaVersionMismatch,
)
from .seeding import RNG_ALGORITHM, derive_seed, make_rng

SCHEMA_VERSION = "1"

ASSET_KINDS = ("speech", "noise", "rir")
RECIPE_KINDS = ("enhancement", "separation", "sr_pair")

_GAIN_RE = re.compile(r"^peak_norm\((?P<target>[0-9.eE+-]+)\)$")


@dataclass(frozen=True)
class GainPolicy:
    """Output gain handling: "none" or peak normalization to a target amplitude."""

    kind: str = "peak_norm"
    target: float = 0.9

    def __post_init__(self):
        if self.kind not in ("none", "peak_norm"):
            raise ValueError(f"gain policy kind must be none|peak_norm, got {self.kind!r}")
        if self.kind == "peak_norm" and not 0 < self.target <= 1.0:
            raise ValueError(f"peak_norm target must be in (0, 1], got {self.target}")

    def format(self) -> str:
        # repr() keeps the shortest digits that reparse to the same float
        return "none" if self.kind == "none" else f"peak_norm({self.target!r})"

    @classmethod
    def parse(cls, text: str) -> "GainPolicy":
        if text == "none":
            return cls(kind="none")
        m = _GAIN_RE.match(text)
        if not m:
            raise ValueError(f"bad gain_policy {text!r}; expected none or peak_norm(<target>)")
        return cls(kind="peak_norm", target=float(m.group("target")))


@dataclass
class MixtureSpec:
    """Fully deterministic recipe for one synthetic utterance.

    Fields left None are sampled at realization time from the seed; the
    realized spec echoed into output manifests has every value filled.
    """

    utterance_id: str
    kind: str
    seed: int
    speech_ids: tuple[str, ...] = ()
    noise_id: str | None = None
    rir_id: str | None = None
    snr_speech_db: float | None = None
    snr_noise_db: float | None = None
    reverberant: bool | None = None
    cutoff_hz: float | None = None
    gain_policy: GainPolicy = field(default_factory=GainPolicy)
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in RECIPE_KINDS:
            raise ValueError(f"kind must be one of {RECIPE_KINDS}, got {self.kind!r}")
        self.speech_ids = tuple(self.speech_ids)
        if not 1 <= len(self.speech_ids) <= 2:
            raise ValueError(f"need 1-2 speech_ids, got {len(self.speech_ids)}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        for name in ("snr_speech_db", "snr_noise_db", "cutoff_hz"):
            value = getattr(self, name)
            if value is not None and not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")

    def to_json_dict(self) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "utterance_id": self.utterance_id,
            "kind": self.kind,
            "speech_ids": list(self.speech_ids),
            "noise_id": self.noise_id,
            "rir_id": self.rir_id,
            "snr_speech_db": self.snr_speech_db,
            "snr_noise_db": self.snr_noise_db,
            "reverberant": self.reverberant,
            "cutoff_hz": self.cutoff_hz,
            "seed": self.seed,
            "gain_policy": self.gain_policy.format(),
        }
        for key, value in self.extras.items():
            d.setdefault(key, value)
        return d

    @classmethod
    def from_json_dict(cls, d: dict, where: str = "") -> "MixtureSpec":
        version = d.get("schema_version")
        if version is None:
            raise MalformedLine(f"{where}: missing schema_version")
        if str(version) != SCHEMA_VERSION:
            raise SchemaVersionMismatch(
                f"{where}: manifest version {version!r}, reader supports {SCHEMA_VERSION!r}"
            )
        known = {
            "schema_version",
            "utterance_id",
            "kind",
            "speech_ids",
            "noise_id",
            "rir_id",
            "snr_speech_db",
            "snr_noise_db",
            "reverberant",
            "cutoff_hz",
            "seed",
            "gain_policy",
        }
        for required in ("utterance_id", "kind", "seed", "speech_ids"):
            if d.get(required) is None:
                raise MalformedLine(f"{where}: missing required field {required!r}")
        try:
            return cls(
                utterance_id=d["utterance_id"],
                kind=d["kind"],
                seed=int(d["seed"]),
                speech_ids=tuple(d["speech_ids"]),
                noise_id=d.get("noise_id"),
                rir_id=d.get("rir_id"),
                snr_speech_db=d.get("snr_speech_db"),
                snr_noise_db=d.get("snr_noise_db"),
                reverberant=d.get("reverberant"),
                cutoff_hz=d.get("cutoff_hz"),
                gain_policy=GainPolicy.parse(d.get("gain_policy", "none")),
                extras={k: v for k, v in d.items() if k not in known},
            )
        except (ValueError, TypeError) as exc:
            raise MalformedLine(f"{where}: {exc}") from exc


def save_manifest(specs: list[MixtureSpec], path) -> None:
    """Write specs as JSONL; atomic (temp file + rename), stable key order."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        for spec in specs:
            fh.write(json.dumps(spec.to_json_dict(), sort_keys=True) + "\n")
    os.replace(tmp, path)


def load_manifest(path) -> list[MixtureSpec]:
    specs = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{line_no}"
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLine(f"{where}: invalid JSON ({exc})") from exc
            if not isinstance(d, dict):
                raise MalformedLine(f"{where}: expected a JSON object")
            specs.append(MixtureSpec.from_json_dict(d, where))
    return specs


@dataclass(frozen=True)
class AssetInfo:
    asset_id: str
    path: Path
    kind: str
    sample_rate_hz: int
    duration_s: float
    speaker: str | None = None


class CorpusIndex:
    """Immutable catalog of WAV assets; asset id = path relative to its root."""

    def __init__(self, entries: dict[str, AssetInfo], warnings_list: list[str] | None = None):
        self.entries = dict(entries)
        self.warnings = list(warnings_list or [])
        self._by_kind: dict[str, list[str]] = {}
        for asset_id in sorted(self.entries):
            self._by_kind.setdefault(self.entries[asset_id].kind, []).append(asset_id)

    def __len__(self) -> int:
        return len(self.entries)

    def ids(self, kind: str | None = None) -> list[str]:
        if kind is None:
            return sorted(self.entries)
        return list(self._by_kind.get(kind, []))

    def get(self, asset_id: str) -> AssetInfo:
        try:
            return self.entries[asset_id]
        except KeyError:
            raise AssetNotFound(f"asset {asset_id!r} not in corpus index") from None

    def load(self, asset_id: str) -> AudioBuffer:
        """Decode an asset as mono (average over channels)."""
        return to_mono(read_wav(self.get(asset_id).path), "average")

    def speakers(self, kind: str = "speech") -> dict[str, list[str]]:
        groups: dict[str, list[str]] = {}
        for asset_id in self.ids(kind):
            speaker = self.entries[asset_id].speaker or asset_id
            groups.setdefault(speaker, []).append(asset_id)
        return groups


def _infer_speaker(rel_path: Path) -> str:
    parts = rel_path.parts
    return parts[0] if len(parts) > 1 else rel_path.stem


def load_speaker_map(path) -> dict[str, str]:
    """TSV of asset_id<TAB>speaker rows."""
    mapping = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise MalformedLine(f"{path}:{line_no}: expected 2 tab-separated fields")
            mapping[fields[0]] = fields[1]
    return mapping


def scan_corpus(
    roots: list[tuple[str, str | Path]],
    speaker_map: dict[str, str] | None = None,
) -> CorpusIndex:
    """Recursively index WAV files under (kind, directory) roots.

    Unreadable files are skipped and reported in CorpusIndex.warnings.
    Speaker identity for speech assets comes from speaker_map when given,
    otherwise from the first path component under the root.
    """
    entries: dict[str, AssetInfo] = {}
    skipped: list[str] = []
    for kind, root in roots:
        if kind not in ASSET_KINDS:
            raise ValueError(f"asset kind must be one of {ASSET_KINDS}, got {kind!r}")
        root = Path(root)
        for wav_path in sorted(root.rglob("*")):
            if not wav_path.is_file() or wav_path.suffix.lower() != ".wav":
                continue
            rel = wav_path.relative_to(root)
            asset_id = rel.as_posix()
            if asset_id in entries:
                raise DuplicateAssetId(
                    f"asset id {asset_id!r} appears under multiple roots "
                    f"({entries[asset_id].path} and {wav_path})"
                )
            try:
                info = read_wav_info(wav_path)
            except Exception as exc:  # noqa: BLE001 - any undecodable file is skipped
                skipped.append(f"{wav_path}: {exc}")
                continue
            if info.n_frames == 0:
                skipped.append(f"{wav_path}: empty data chunk")
                continue
            speaker = None
            if kind == "speech":
                speaker = (speaker_map or {}).get(asset_id) or _infer_speaker(rel)
            entries[asset_id] = AssetInfo(
                asset_id=asset_id,
                path=wav_path,
                kind=kind,
                sample_rate_hz=info.sample_rate_hz,
                duration_s=info.duration_s,
                speaker=speaker,
            )
    if not entries:
        raise NoAssetsFound(f"no readable WAV files under {[str(r) for _, r in roots]}")
    for message in skipped:
        warnings.warn(f"scan_corpus skipped {message}")
    return CorpusIndex(entries, skipped)


@dataclass(frozen=True)
class Recipe:
    """Declarative sampling plan for one dataset split."""

    name: str
    kind: str
    count: int
    seed: int
    snr_noise_range_db: tuple[float, float] = (0.0, 15.0)
    snr_speech_range_db: tuple[float, float] = (0.0, 5.0)
    reverb_fraction: float = 0.3
    cutoff_range_hz: tuple[float, float] = (8000.0, 16000.0)
    gain_policy: GainPolicy = field(default_factory=GainPolicy)
    rng: str = RNG_ALGORITHM

    def __post_init__(self):
        if self.kind not in RECIPE_KINDS:
            raise ValueError(f"recipe kind must be one of {RECIPE_KINDS}, got {self.kind!r}")
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        if not 0.0 <= self.reverb_fraction <= 1.0:
            raise ValueError(f"reverb_fraction must be in [0, 1], got {self.reverb_fraction}")
        for name in ("snr_noise_range_db", "snr_speech_range_db", "cutoff_range_hz"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise ValueError(f"{name} must be a finite [lo, hi] range, got ({lo}, {hi})")
        if self.rng != RNG_ALGORITHM:
            raise ValueError(f"unsupported rng algorithm {self.rng!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "Recipe":
        d = dict(d)
        gain = d.get("gain_policy", "peak_norm(0.9)")
        if isinstance(gain, str):
            gain = GainPolicy.parse(gain)
        ranges = {
            key: tuple(float(v) for v in d[key])
            for key in ("snr_noise_range_db", "snr_speech_range_db", "cutoff_range_hz")
            if key in d
        }
        if "snr_noise_range_db" not in ranges and d.get("kind") == "separation":
            # noise relative to the louder speaker spans -5..15 dB by default
            ranges["snr_noise_range_db"] = (-5.0, 15.0)
        kwargs = {
            "name": d["name"],
            "kind": d["kind"],
            "count": int(d["count"]),
            "seed": int(d["seed"]),
            "gain_policy": gain,
            **ranges,
        }
        if "reverb_fraction" in d:
            kwargs["reverb_fraction"] = float(d["reverb_fraction"])
        if "rng" in d:
            kwargs["rng"] = d["rng"]
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "Recipe":
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        if path.suffix.lower() == ".json":
            return cls.from_dict(json.loads(text))
        try:
            import tomllib  # Python >= 3.11
        except ModuleNotFoundError:
            import tomli as tomllib
        return cls.from_dict(tomllib.loads(text))


def _pick(rng, items: list[str]) -> str:
    return items[int(rng.integers(0, len(items)))]


def sample_specs(recipe: Recipe, index: CorpusIndex) -> list[MixtureSpec]:
    """Draw recipe.count fully-resolved MixtureSpecs.

    Pure function of (recipe, index): per-utterance seeds are
    derive_seed(recipe.seed, i) and all sampling randomness comes from a
    Philox stream keyed by derive_seed(recipe.seed, "sample_specs").
    Draw order per utterance is fixed; see the per-kind blocks.
    """
    rng = make_rng(derive_seed(recipe.seed, "sample_specs"))
    speech_ids = index.ids("speech")
    noise_ids = index.ids("noise")
    rir_ids = index.ids("rir")

    if not speech_ids:
        raise InsufficientAssets("recipe needs speech assets, corpus has none")
    if recipe.kind == "enhancement":
        if not noise_ids:
            raise InsufficientAssets("enhancement recipe needs noise assets")
        if recipe.reverb_fraction > 0 and not rir_ids:
            raise InsufficientAssets(
                f"reverb_fraction={recipe.reverb_fraction} needs rir assets"
            )
    if recipe.kind == "separation":
        by_speaker = index.speakers("speech")
        speaker_names = sorted(by_speaker)
        if len(speaker_names) < 2:
            raise InsufficientAssets(
                f"separation needs >= 2 speakers, corpus has {len(speaker_names)}"
            )

    specs = []
    for i in range(recipe.count):
        utterance_id = f"{recipe.name}-{i:06d}"
        seed = derive_seed(recipe.seed, i)
        if recipe.kind == "enhancement":
            # draws: speech, noise, reverb coin, [rir], snr
            speech = _pick(rng, speech_ids)
            noise = _pick(rng, noise_ids)
            reverberant = bool(rng.random() < recipe.reverb_fraction)
            rir = _pick(rng, rir_ids) if reverberant else None
            snr_noise = float(rng.uniform(*recipe.snr_noise_range_db))
            spec = MixtureSpec(
                utterance_id=utterance_id,
                kind="enhancement",
                seed=seed,
                speech_ids=(speech,),
                noise_id=noise,
                rir_id=rir,
                snr_noise_db=snr_noise,
                reverberant=reverberant,
                gain_policy=recipe.gain_policy,
            )
        elif recipe.kind == "separation":
            # draws: speaker pair, utterance per speaker, snr_speech, [noise, snr_noise]
            pair = rng.choice(len(speaker_names), size=2, replace=False)
            chosen = []
            for speaker_idx in pair:
                utts = by_speaker[speaker_names[int(speaker_idx)]]
                chosen.append(_pick(rng, utts))
            snr_speech = float(rng.uniform(*recipe.snr_speech_range_db))
            noise = _pick(rng, noise_ids) if noise_ids else None
            snr_noise = float(rng.uniform(*recipe.snr_noise_range_db)) if noise else None
            spec = MixtureSpec(
                utterance_id=utterance_id,
                kind="separation",
                seed=seed,
                speech_ids=tuple(chosen),
                noise_id=noise,
                snr_speech_db=snr_speech,
                snr_noise_db=snr_noise,
                reverberant=False,
                gain_policy=recipe.gain_policy,
            )
        else:  # sr_pair; draws: speech, cutoff
            speech = _pick(rng, speech_ids)
            cutoff = float(rng.uniform(*recipe.cutoff_range_hz))
            spec = MixtureSpec(
                utterance_id=utterance_id,
                kind="sr_pair",
                seed=seed,
                speech_ids=(speech,),
                cutoff_hz=cutoff,
                reverberant=False,
                gain_policy=recipe.gain_policy,
            )
        specs.append(spec)
    return specs
