"""Command-line interface.

Subcommands: score, compare, simulate, rir, srpairs, loudness.

Exit codes: 0 success, 1 usage error, 2 data error (nothing usable),
3 partial failure (at least one utterance succeeded and at least one
failed). Outputs are deterministic for fixed inputs/flags/seeds,
including under --workers parallelism: results are sorted by utterance
id before anything is written.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import simulate
from .audio import AudioBuffer, read_wav, to_mono, write_wav
from .dsp import resample
from .errors import VoicebenchError
from .manifest import MixtureSpec, Recipe, sample_specs, save_manifest, scan_corpus
from .metrics import METRIC_NAMES, loudness_lufs, pit_score, score_pair, si_snr
from .report import aggregate, emit, per_utterance_jsonl
from .seeding import derive_seed, make_rng
from .simulate import RoomSpec, generate_rir, make_sr_pair

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_PARTIAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage problems, not argparse's 2
        raise _UsageError(message)


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get("VOICEBENCH_WORKERS", "1")))
    except ValueError:
        return 1


def _add_workers(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--workers",
        type=int,
        default=_default_workers(),
        help="parallel workers (default: $VOICEBENCH_WORKERS or 1)",
    )


def _parallel_map(fn, items, workers: int):
    """Map preserving item order regardless of completion order."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _atomic_write_wav(buffer: AudioBuffer, path: Path, encoding: str) -> None:
    tmp = path.with_name(path.name + ".tmp.wav")
    write_wav(buffer, tmp, encoding)
    os.replace(tmp, path)


def _wav_names(root: Path) -> list[str]:
    return sorted(
        p.relative_to(root).as_posix()
        for p in root.rglob("*")
        if p.is_file() and p.suffix.lower() == ".wav"
    )


# score


def _build_pairs(args) -> list[tuple[str, Path, Path]]:
    ref, est = Path(args.ref), Path(args.est)
    if args.pairs:
        pairs = []
        for line_no, line in enumerate(Path(args.pairs).read_text().splitlines(), start=1):
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) < 2:
                raise _UsageError(f"{args.pairs}:{line_no}: expected ref<TAB>est")
            pairs.append((fields[0], Path(fields[0]), Path(fields[1])))
        return pairs
    if ref.is_file() and est.is_file():
        return [(ref.name, ref, est)]
    if ref.is_dir() and est.is_dir():
        names = sorted(set(_wav_names(ref)) & set(_wav_names(est)))
        return [(name, ref / name, est / name) for name in names]
    raise _UsageError("--ref and --est must both be files or both be directories")


def _load_mono(path: Path, mono_policy: str, target_rate: int | None) -> AudioBuffer:
    buf = to_mono(read_wav(path), mono_policy)
    if target_rate and buf.sample_rate_hz != target_rate:
        buf = resample(buf, target_rate)
    return buf


def cmd_score(args) -> int:
    metric_set = [m.strip() for m in args.metrics.split(",") if m.strip()]
    unknown = [m for m in metric_set if m not in METRIC_NAMES]
    if unknown:
        raise _UsageError(f"unknown metric(s) {unknown}; choose from {list(METRIC_NAMES)}")
    pairs = _build_pairs(args)
    if not pairs:
        print("no ref/est pairs matched", file=sys.stderr)
        return EXIT_DATA

    mix_dir = Path(args.mix) if args.mix else None

    def one(item):
        name, ref_path, est_path = item
        try:
            ref = _load_mono(ref_path, args.mono_policy, args.sample_rate)
            est = _load_mono(est_path, args.mono_policy, args.sample_rate)
            if est.sample_rate_hz != ref.sample_rate_hz:
                if not args.allow_resample:
                    raise VoicebenchError(
                        f"rate mismatch {ref.sample_rate_hz} vs {est.sample_rate_hz}"
                        " (pass --allow-resample)"
                    )
                est = resample(est, ref.sample_rate_hz)
            mixture = None
            if mix_dir is not None:
                mixture = _load_mono(mix_dir / name, args.mono_policy, args.sample_rate)
                if mixture.sample_rate_hz != ref.sample_rate_hz:
                    mixture = resample(mixture, ref.sample_rate_hz)
            return score_pair(ref, est, metric_set, mixture=mixture, utterance_id=name)
        except (VoicebenchError, OSError, ValueError) as exc:
            print(f"score: {name}: {exc}", file=sys.stderr)
            return None

    results = _parallel_map(one, pairs, args.workers)
    reports = [r for r in results if r is not None]
    failed = len(results) - len(reports)
    if not reports:
        return EXIT_DATA

    summary = emit(aggregate(reports, metadata={"pairs": str(len(reports))}), args.format)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        _atomic_write_text(out, summary)
        per_utt = Path(args.per_utterance) if args.per_utterance else out.with_suffix(out.suffix + ".utt.jsonl")
        _atomic_write_text(per_utt, per_utterance_jsonl(reports))
    else:
        sys.stdout.write(summary)
        if args.per_utterance:
            _atomic_write_text(Path(args.per_utterance), per_utterance_jsonl(reports))
    return EXIT_PARTIAL if failed else EXIT_OK


# compare


def cmd_compare(args) -> int:
    refs_root, ests_root = Path(args.refs), Path(args.ests)
    if not refs_root.is_dir() or not ests_root.is_dir():
        raise _UsageError("--refs and --ests must be directories of per-source subdirectories")
    ref_sources = sorted(p.name for p in refs_root.iterdir() if p.is_dir())
    est_sources = sorted(p.name for p in ests_root.iterdir() if p.is_dir())
    if len(ref_sources) < 2:
        print("need at least two reference source subdirectories", file=sys.stderr)
        return EXIT_DATA
    if len(est_sources) != len(ref_sources):
        print(
            f"source count mismatch: refs {ref_sources} vs ests {est_sources}",
            file=sys.stderr,
        )
        return EXIT_DATA

    name_sets = [set(_wav_names(refs_root / s)) for s in ref_sources]
    name_sets += [set(_wav_names(ests_root / s)) for s in est_sources]
    names = sorted(set.intersection(*name_sets))
    if not names:
        print("no utterances present in every source directory", file=sys.stderr)
        return EXIT_DATA
    mix_dir = Path(args.mix) if args.mix else None

    def one(name):
        try:
            refs = [to_mono(read_wav(refs_root / s / name), "average") for s in ref_sources]
            ests = [to_mono(read_wav(ests_root / s / name), "average") for s in est_sources]
            result = pit_score(refs, ests, metric=args.metric)
            row = {
                "utterance_id": name,
                "permutation": list(result.permutation),
                "per_pair_scores": list(result.per_pair_scores),
                "mean_score": result.mean_score,
            }
            if mix_dir is not None:
                mixture = to_mono(read_wav(mix_dir / name), "average")
                gains = [
                    min(max(result.per_pair_scores[i] - si_snr(refs[i], mixture), -100.0), 100.0)
                    for i in range(len(refs))
                ]
                row["si_snri"] = float(np.mean(gains))
            return row
        except (VoicebenchError, OSError, ValueError) as exc:
            print(f"compare: {name}: {exc}", file=sys.stderr)
            return None

    results = _parallel_map(one, names, args.workers)
    rows = [r for r in results if r is not None]
    failed = len(results) - len(rows)
    if not rows:
        return EXIT_DATA

    lines = "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)
    if args.out:
        _atomic_write_text(Path(args.out), lines)
    else:
        sys.stdout.write(lines)
    mean_best = float(np.mean([r["mean_score"] for r in rows]))
    print(f"mean best-permutation {args.metric}: {mean_best:.4f} dB", file=sys.stderr)
    if mix_dir is not None:
        mean_gain = float(np.mean([r["si_snri"] for r in rows if "si_snri" in r]))
        print(f"mean si_snri: {mean_gain:.4f} dB", file=sys.stderr)
    return EXIT_PARTIAL if failed else EXIT_OK


# simulate


def _realize_spec(spec: MixtureSpec, corpus, dry_target: bool) -> tuple[MixtureSpec, dict[str, AudioBuffer]]:
    if spec.kind == "enhancement":
        pair = simulate.make_enhancement_pair(spec, corpus, dry_target=dry_target)
        return pair.realized, {"noisy": pair.noisy, "clean": pair.clean_target}
    if spec.kind == "separation":
        out = simulate.make_separation_mixture(spec, corpus)
        return out.realized, {"mix": out.mixture, "s1": out.ref_1, "s2": out.ref_2}
    hr = corpus.load(spec.speech_ids[0])
    if spec.cutoff_hz is None:
        raise VoicebenchError(f"{spec.utterance_id}: sr_pair spec has no cutoff_hz")
    pair = make_sr_pair(hr, spec.cutoff_hz)
    return spec, {"lr": pair.lr_input, "hr": pair.hr_target}


def _parse_corpus_roots(values: list[str]) -> list[tuple[str, str]]:
    roots = []
    for value in values:
        kind, sep, path = value.partition("=")
        if not sep:
            raise _UsageError(f"--corpus expects kind=dir, got {value!r}")
        roots.append((kind, path))
    return roots


def cmd_simulate(args) -> int:
    try:
        recipe = Recipe.from_file(args.recipe)
    except (OSError, ValueError, KeyError) as exc:
        print(f"simulate: bad recipe: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        corpus = scan_corpus(_parse_corpus_roots(args.corpus))
        specs = sample_specs(recipe, corpus)
    except VoicebenchError as exc:
        print(f"simulate: {exc}", file=sys.stderr)
        return EXIT_DATA

    out_root = Path(args.out) / recipe.name
    out_root.mkdir(parents=True, exist_ok=True)
    manifest_path = out_root / "manifest.jsonl"
    if args.dry_run:
        save_manifest(specs, manifest_path)
        print(f"wrote {len(specs)} specs to {manifest_path} (dry run)", file=sys.stderr)
        return EXIT_OK

    def one(spec):
        try:
            realized, outputs = _realize_spec(spec, corpus, args.dry_target)
            for sub, buf in outputs.items():
                sub_dir = out_root / sub
                sub_dir.mkdir(parents=True, exist_ok=True)
                _atomic_write_wav(buf, sub_dir / f"{spec.utterance_id}.wav", args.encoding)
            return realized
        except (VoicebenchError, OSError, ValueError) as exc:
            print(f"simulate: {spec.utterance_id}: {exc}", file=sys.stderr)
            return None

    results = _parallel_map(one, specs, args.workers)
    realized = [r for r in results if r is not None]
    failed = len(results) - len(realized)
    if not realized:
        return EXIT_DATA
    save_manifest(sorted(realized, key=lambda s: s.utterance_id), manifest_path)
    print(f"realized {len(realized)}/{len(specs)} specs under {out_root}", file=sys.stderr)
    return EXIT_PARTIAL if failed else EXIT_OK


# rir


def _parse_triple(text: str, sep: str) -> tuple[float, float, float]:
    parts = text.replace("x", sep).split(sep)
    if len(parts) != 3:
        raise _UsageError(f"expected three {sep!r}-separated values, got {text!r}")
    return tuple(float(p) for p in parts)


def cmd_rir(args) -> int:
    try:
        room_kwargs = dict(
            dimensions_m=_parse_triple(args.room, "x"),
            source_pos_m=_parse_triple(args.src, ","),
            mic_pos_m=_parse_triple(args.mic, ","),
            sample_rate_hz=args.fs,
            rir_length_samples=args.len,
            max_order=args.order,
        )
        if args.anechoic:
            room_kwargs["reflection_coeffs"] = (0.0,) * 6
            room_kwargs["max_order"] = 0
        elif args.beta:
            coeffs = tuple(float(b) for b in args.beta.split(","))
            room_kwargs["reflection_coeffs"] = coeffs
        else:
            room_kwargs["rt60_s"] = args.rt60
        room = RoomSpec(**room_kwargs)
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc

    try:
        rir = generate_rir(room)
    except VoicebenchError as exc:
        print(f"rir: {exc}", file=sys.stderr)
        return EXIT_DATA
    _atomic_write_wav(rir, Path(args.out), "float32")
    print(f"wrote {args.len}-sample RIR to {args.out}", file=sys.stderr)
    return EXIT_OK


# srpairs


def cmd_srpairs(args) -> int:
    in_dir = Path(args.indir)
    if not in_dir.is_dir():
        raise _UsageError(f"--in must be a directory, got {args.indir}")
    try:
        lo, hi = (float(v) for v in args.cutoff_range.split(","))
    except ValueError:
        raise _UsageError(f"--cutoff-range expects lo,hi got {args.cutoff_range!r}") from None
    if not lo <= hi:
        raise _UsageError(f"--cutoff-range needs lo <= hi, got {lo} > {hi}")
    names = _wav_names(in_dir)
    if not names:
        print(f"no WAV files under {in_dir}", file=sys.stderr)
        return EXIT_DATA

    out_root = Path(args.out)
    (out_root / "lr").mkdir(parents=True, exist_ok=True)
    (out_root / "hr").mkdir(parents=True, exist_ok=True)

    def one(item):
        i, name = item
        seed = derive_seed(args.seed, i)
        cutoff = float(make_rng(seed).uniform(lo, hi))
        try:
            hr = to_mono(read_wav(in_dir / name), "average")
            pair = make_sr_pair(hr, cutoff)
        except (VoicebenchError, OSError) as exc:
            print(f"srpairs: {name}: {exc}", file=sys.stderr)
            return None
        flat = name.replace("/", "__")
        _atomic_write_wav(pair.lr_input, out_root / "lr" / flat, args.encoding)
        _atomic_write_wav(pair.hr_target, out_root / "hr" / flat, args.encoding)
        return MixtureSpec(
            utterance_id=Path(flat).stem,
            kind="sr_pair",
            seed=seed,
            speech_ids=(name,),
            cutoff_hz=cutoff,
            reverberant=False,
        )

    results = _parallel_map(one, list(enumerate(names)), args.workers)
    specs = [s for s in results if s is not None]
    failed = len(results) - len(specs)
    if not specs:
        return EXIT_DATA
    save_manifest(specs, out_root / "manifest.jsonl")
    print(f"wrote {len(specs)} pairs under {out_root}", file=sys.stderr)
    return EXIT_PARTIAL if failed else EXIT_OK


# loudness


def cmd_loudness(args) -> int:
    target = Path(args.indir)
    if target.is_file():
        paths = [target]
        batch = False
    elif target.is_dir():
        paths = [target / n for n in _wav_names(target)]
        batch = True
    else:
        raise _UsageError(f"--in path {target} does not exist")
    if not paths:
        print(f"no WAV files under {target}", file=sys.stderr)
        return EXIT_DATA

    values = []
    failed = 0
    for path in paths:
        try:
            value = loudness_lufs(read_wav(path))
            values.append(value)
            print(f"{path}\t{value:.2f} LUFS")
        except VoicebenchError:
            print(f"{path}\tgated-out")
            failed += 1
        except OSError as exc:
            print(f"loudness: {path}: {exc}", file=sys.stderr)
            failed += 1
    if batch and values:
        print(f"mean\t{float(np.mean(values)):.2f} LUFS")
    if not values:
        return EXIT_DATA
    return EXIT_PARTIAL if failed else EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="voicebench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score estimate files against references")
    p.add_argument("--ref", required=True, help="reference WAV file or directory")
    p.add_argument("--est", required=True, help="estimate WAV file or directory")
    p.add_argument("--metrics", default="snr,si_snr,stoi,lsd,mcd", help="comma-separated metric names")
    p.add_argument("--mix", help="mixture file/dir (enables si_snri)")
    p.add_argument("--pairs", help="TSV of ref<TAB>est paths overriding directory pairing")
    p.add_argument("--sample-rate", type=int, help="resample everything to this rate first")
    p.add_argument("--allow-resample", action="store_true", help="resample est on rate mismatch")
    p.add_argument("--mono-policy", default="average", help="average or channel:<i>")
    p.add_argument("--out", help="summary output path (default: stdout)")
    p.add_argument("--per-utterance", help="per-utterance JSONL path")
    p.add_argument("--format", default="csv", choices=("csv", "json", "markdown"))
    _add_workers(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("compare", help="permutation-invariant separation scoring")
    p.add_argument("--refs", required=True, help="directory with per-source subdirs (s1, s2, ...)")
    p.add_argument("--ests", required=True, help="directory with matching per-source subdirs")
    p.add_argument("--metric", default="si_snr", choices=("si_snr", "snr"))
    p.add_argument("--mix", help="mixture directory (enables SI-SNRi)")
    p.add_argument("--out", help="per-utterance JSONL output path (default: stdout)")
    _add_workers(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("simulate", help="realize a dataset recipe")
    p.add_argument("--recipe", required=True, help="recipe file (.toml or .json)")
    p.add_argument("--corpus", action="append", required=True, metavar="KIND=DIR",
                   help="asset root, e.g. speech=/data/clean (repeatable)")
    p.add_argument("--out", required=True, help="output root directory")
    p.add_argument("--dry-run", action="store_true", help="write the manifest only")
    p.add_argument("--encoding", default="float32", choices=("float32", "pcm16", "pcm24", "pcm32"))
    p.add_argument("--dry-target", action="store_true",
                   help="use the dry source as the enhancement target even for reverberant mixtures")
    _add_workers(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("rir", help="generate one room impulse response")
    p.add_argument("--room", required=True, help="LxWxH in meters, e.g. 4x5x3")
    p.add_argument("--src", required=True, help="source position x,y,z")
    p.add_argument("--mic", required=True, help="microphone position x,y,z")
    p.add_argument("--rt60", type=float, default=0.3, help="target RT60 seconds")
    p.add_argument("--beta", help="six reflection coefficients, comma-separated")
    p.add_argument("--anechoic", action="store_true", help="direct path only")
    p.add_argument("--order", type=int, default=10, help="maximum image order")
    p.add_argument("--fs", type=int, default=16000)
    p.add_argument("--len", type=int, default=8192, help="RIR length in samples")
    p.add_argument("--out", required=True, help="output WAV path")
    p.set_defaults(func=cmd_rir)

    p = sub.add_parser("srpairs", help="make super-resolution training pairs")
    p.add_argument("--in", dest="indir", required=True, help="directory of 48 kHz WAVs")
    p.add_argument("--cutoff-range", default="8000,16000", help="lo,hi cutoff in Hz")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output root directory")
    p.add_argument("--encoding", default="float32", choices=("float32", "pcm16", "pcm24", "pcm32"))
    _add_workers(p)
    p.set_defaults(func=cmd_srpairs)

    p = sub.add_parser("loudness", help="BS.1770 integrated loudness")
    p.add_argument("--in", dest="indir", required=True, help="WAV file or directory")
    p.set_defaults(func=cmd_loudness)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except VoicebenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
