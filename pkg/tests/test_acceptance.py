"""Acceptance suite: one test per release criterion, each printing a
PASS line when it holds (run with `pytest tests/test_acceptance.py -v -s`).

Criteria 1-10 are self-contained. Criterion 11 needs external benchmark
datasets and is skipped unless the environment points at them:

    VOICEBENCH_DNS2020_DIR  -> DNS-2020 synthetic no-reverb test set root
                               (clean/ and noisy/ WAV dirs, paired by fileid)
    VOICEBENCH_VBDMD_DIR    -> VoiceBank+DEMAND 48 kHz test set root
                               (clean_testset_wav/ and noisy_testset_wav/)
"""

import itertools
import json
import os
import time
from pathlib import Path

import numpy as np
import pytest

from voicebench import (
    GainPolicy,
    MixtureSpec,
    Recipe,
    RoomSpec,
    StftConfig,
    bss_eval,
    estimate_rt60,
    fft_convolve,
    generate_rir,
    istft,
    loudness_lufs,
    lowpass,
    lsd,
    make_enhancement_pair,
    make_separation_mixture,
    mcd,
    pit_score,
    resample,
    sample_specs,
    scan_corpus,
    si_snr,
    snr,
    stft,
    stoi,
    write_wav,
)
from voicebench.cli import main as cli_main
from voicebench.metrics import score_pair

from conftest import buffer, fade_edges, speech_shaped_noise, tone, white_noise

FS = 16000


def _ok(n, text):
    print(f"ACCEPTANCE {n}: PASS - {text}")


def test_criterion_01_metric_identity_suite():
    start = time.monotonic()
    for seed in range(50):
        x = buffer(speech_shaped_noise(1.2, FS, seed, amplitude=0.3), FS)
        assert snr(x, x) == 100.0
        assert si_snr(x, x) == 100.0
        assert bss_eval([x], [x])[0].sdr == 100.0
        assert lsd(x, x) == 0.0
        assert mcd(x, x) == 0.0
        assert stoi(x, x) == pytest.approx(1.0, abs=1e-9)
    elapsed = time.monotonic() - start
    assert elapsed < 30.0
    _ok(1, f"identities capped/zero/one for 50 seeded signals in {elapsed:.1f}s")


def test_criterion_02_scale_invariance():
    for seed in range(20):
        x = speech_shaped_noise(1.2, FS, 100 + seed, amplitude=0.3)
        est = x + white_noise(1.2, FS, 200 + seed, amplitude=0.05)[: x.size]
        ref = buffer(x, FS)
        base_si = si_snr(ref, buffer(est, FS))
        base_stoi = stoi(ref, buffer(est, FS))
        for alpha in (-5.0, 0.1, 1.0, 10.0):
            assert abs(si_snr(ref, buffer(alpha * est, FS)) - base_si) <= 1e-9
            if alpha > 0:
                assert abs(stoi(ref, buffer(alpha * est, FS)) - base_stoi) <= 1e-9
    _ok(2, "si_snr invariant for alpha in {-5, 0.1, 1, 10}; stoi for alpha > 0")


def test_criterion_03_orthogonal_construction():
    for k in (0, 10, 20, 30):
        rng = np.random.default_rng(300 + k)
        x = rng.standard_normal(FS * 2) * 0.1
        x -= x.mean()
        e = rng.standard_normal(x.size)
        e -= e.mean()
        e -= (e @ x) / (x @ x) * x
        e *= np.sqrt((x @ x) / 10 ** (k / 10) / (e @ e))
        assert si_snr(buffer(x, FS), buffer(x + e, FS)) == pytest.approx(k, abs=1e-6)
    _ok(3, "si_snr equals the constructed ratio for k in {0, 10, 20, 30} dB")


def test_criterion_04_bss_oracle_equivalence():
    from test_metrics_bss import brute_force_oracle, orthogonal_sources

    flen = 8
    for seed in (41, 42, 43):
        rng = np.random.default_rng(seed)
        refs = orthogonal_sources(seed, n=4000)
        ests = np.vstack(
            [
                refs[0] + 0.25 * refs[1] + 0.02 * rng.standard_normal(4000),
                refs[1] - 0.15 * refs[0] + 0.01 * rng.standard_normal(4000),
            ]
        )
        mine = bss_eval([buffer(r, FS) for r in refs], [buffer(e, FS) for e in ests], filter_len=flen)
        oracle = brute_force_oracle(refs, ests, flen)
        for got, want in zip(mine, oracle):
            assert got.sdr == pytest.approx(want[0], abs=1e-6)
            assert got.sir == pytest.approx(want[1], abs=1e-6)
            assert got.sar == pytest.approx(want[2], abs=1e-6)
    _ok(4, "SDR/SIR/SAR match brute-force projection within 1e-6 dB on 3 instances")


def test_criterion_05_pit_correctness():
    recovered = 0
    for trial in range(100):
        n_src = 2 if trial % 2 == 0 else 3
        rng = np.random.default_rng(500 + trial)
        q, _ = np.linalg.qr(rng.standard_normal((6000, n_src)))
        refs = (q * 10.0).T
        perm = tuple(rng.permutation(n_src))
        ests = [None] * n_src
        for i, j in enumerate(perm):
            noise = rng.standard_normal(6000)
            noise *= np.sqrt((refs[i] @ refs[i]) / 100.0 / (noise @ noise))
            ests[j] = refs[i] + noise
        ref_bufs = [buffer(r, FS) for r in refs]
        est_bufs = [buffer(e, FS) for e in ests]
        result = pit_score(ref_bufs, est_bufs)
        if result.permutation == perm:
            recovered += 1
        # exhaustive search agrees with direct argmax over all permutations
        best = max(
            itertools.permutations(range(n_src)),
            key=lambda p: np.mean([si_snr(ref_bufs[i], est_bufs[p[i]]) for i in range(n_src)]),
        )
        assert result.permutation == best
    assert recovered == 100
    _ok(5, "known permutation recovered 100/100; argmax verified against brute force")


def _mix_corpus(tmp_path, n_speakers=4, rate=FS):
    for spk in range(n_speakers):
        for utt in range(3):
            x = speech_shaped_noise(1.0, rate, 7000 + spk * 10 + utt, amplitude=0.3)
            path = tmp_path / "speech" / f"spk{spk}" / f"u{utt}.wav"
            path.parent.mkdir(parents=True, exist_ok=True)
            write_wav(buffer(x, rate), path, "float32")
    for i in range(2):
        path = tmp_path / "noise" / f"n{i}.wav"
        path.parent.mkdir(parents=True, exist_ok=True)
        write_wav(buffer(white_noise(1.4, rate, 7100 + i, amplitude=0.1), rate), path, "float32")
    rir_dir = tmp_path / "rir"
    rir_dir.mkdir(parents=True, exist_ok=True)
    rir = generate_rir(
        RoomSpec((4, 5, 3), (1, 1, 1.2), (2.5, 3.1, 1.5), rate, 3200, rt60_s=0.25, max_order=16)
    )
    write_wav(rir, rir_dir / "r0.wav", "float32")
    return [("speech", tmp_path / "speech"), ("noise", tmp_path / "noise"), ("rir", tmp_path / "rir")]


def test_criterion_06_mixing_exactness(tmp_path):
    roots = _mix_corpus(tmp_path)
    index = scan_corpus(roots)

    enh_recipe = Recipe(name="enh", kind="enhancement", count=100, seed=606,
                        snr_noise_range_db=(0.0, 15.0), reverb_fraction=0.3,
                        gain_policy=GainPolicy("peak_norm", 0.9))
    for spec in sample_specs(enh_recipe, index):
        pair = make_enhancement_pair(spec, index)
        noise = pair.noisy.samples[0] - pair.clean_target.samples[0]
        speech = pair.clean_target.samples[0]
        measured = 10 * np.log10((speech @ speech) / (noise @ noise))
        assert measured == pytest.approx(spec.snr_noise_db, abs=1e-6)

    sep_recipe = Recipe(name="sep", kind="separation", count=100, seed=607,
                        snr_speech_range_db=(0.0, 5.0), snr_noise_range_db=(-5.0, 15.0),
                        gain_policy=GainPolicy("peak_norm", 0.9))
    for spec in sample_specs(sep_recipe, index):
        out = make_separation_mixture(spec, index)
        r1, r2 = out.ref_1.samples[0], out.ref_2.samples[0]
        measured = 10 * np.log10((r1 @ r1) / (r2 @ r2))
        assert measured == pytest.approx(spec.snr_speech_db, abs=1e-6)
        residual = out.mixture.samples[0] - r1 - r2
        louder = max(r1 @ r1, r2 @ r2)
        measured_noise = 10 * np.log10(louder / (residual @ residual))
        assert measured_noise == pytest.approx(spec.snr_noise_db, abs=1e-6)

    frac_recipe = Recipe(name="frac", kind="enhancement", count=10000, seed=608,
                         reverb_fraction=0.3)
    specs = sample_specs(frac_recipe, index)
    fraction = float(np.mean([s.reverberant for s in specs]))
    assert fraction == pytest.approx(0.30, abs=0.01)
    _ok(6, f"200 realizations SNR-exact to 1e-6 dB; reverb fraction {fraction:.4f}")


def test_criterion_07_rir_physics():
    anechoic = RoomSpec(
        (5, 4, 3), (1.0, 1.0, 1.0), (2.715, 1.0, 1.0),
        sample_rate_hz=FS, rir_length_samples=2000,
        reflection_coeffs=(0.0,) * 6, max_order=0,
    )
    h = generate_rir(anechoic).samples[0]
    peak = int(np.argmax(np.abs(h)))
    assert peak == round(FS * 1.715 / 343.0)
    assert h[peak] == pytest.approx(1.0 / (4 * np.pi * 1.715), rel=0.02)

    combos = [(0.3, (4, 5, 3)), (0.35, (5, 4, 3)), (0.45, (6, 5, 4)),
              (0.5, (6, 5, 4)), (0.55, (7, 5, 4))]
    errors = []
    for rt, dims in combos:
        order = int(np.ceil(343 * rt * 0.85 / (2 * min(dims)))) * 2 + 2
        room = RoomSpec(dims, (1.2, 1.1, 1.3), (dims[0] - 1.5, dims[1] - 1.2, 1.6),
                        sample_rate_hz=FS, rir_length_samples=int(FS * rt * 1.3),
                        rt60_s=rt, max_order=order)
        estimated = estimate_rt60(generate_rir(room))
        errors.append((estimated - rt) / rt)
        assert estimated == pytest.approx(rt, rel=0.2)
    worst = max(abs(e) for e in errors)
    _ok(7, f"direct path exact; Schroeder RT60 within +/-20% (worst {worst * 100:.1f}%)")


def test_criterion_08_dsp_round_trips():
    x = white_noise(1.0, FS, 800)
    back = istft(stft(buffer(x, FS), StftConfig(512, 512, 256))).samples[0]
    n = min(x.size, back.size)
    assert np.abs(back[:n] - x[:n]).max() <= 1e-6

    rng = np.random.default_rng(801)
    for _ in range(100):
        a = rng.standard_normal(int(rng.integers(8, 2048)))
        k = rng.standard_normal(int(rng.integers(1, 256)))
        mine = fft_convolve(buffer(a, FS), k).samples[0]
        direct = np.convolve(a, k)
        assert np.abs(mine - direct).max() <= 1e-9 * max(np.abs(direct).max(), 1e-30)

    fs = 48000
    noise = fade_edges(lowpass(buffer(white_noise(2.0, fs, 802), fs), 7000, 400).samples[0], fs)
    round_trip = resample(resample(buffer(noise, fs), 16000), fs).samples[0]
    n = min(noise.size, round_trip.size)
    err = round_trip[:n] - noise[:n]
    snr_db = 10 * np.log10((noise[:n] @ noise[:n]) / (err @ err))
    assert snr_db >= 55.0
    _ok(8, f"ISTFT/convolution round trips exact; resample round trip {snr_db:.1f} dB")


def test_criterion_09_loudness_conformance():
    sine = tone(997.0, 10.0, 48000, amplitude=1.0)
    full = loudness_lufs(buffer(sine, 48000))
    low = loudness_lufs(buffer(0.1 * sine, 48000))
    assert full == pytest.approx(-3.01, abs=0.1)
    assert low == pytest.approx(-23.01, abs=0.1)
    _ok(9, f"997 Hz sine: {full:.3f} LUFS at 0 dBFS, {low:.3f} at -20 dBFS")


def test_criterion_10_simulate_determinism(tmp_path):
    roots = _mix_corpus(tmp_path)
    recipe_path = tmp_path / "recipe.toml"
    recipe_path.write_text(
        'name = "det"\nkind = "enhancement"\ncount = 100\nseed = 1010\n'
        "snr_noise_range_db = [0.0, 15.0]\nreverb_fraction = 0.3\n"
        'gain_policy = "peak_norm(0.9)"\n'
    )
    corpus_args = []
    for kind, root in roots:
        corpus_args += ["--corpus", f"{kind}={root}"]

    start = time.monotonic()
    outputs = []
    for run, workers in (("a", "1"), ("b", "8"), ("c", "1")):
        out = tmp_path / f"out_{run}"
        code = cli_main(["simulate", "--recipe", str(recipe_path), *corpus_args,
                         "--out", str(out), "--workers", workers])
        assert code == 0
        outputs.append(out / "det")
    first_run_time = time.monotonic() - start

    base = outputs[0]
    manifest = (base / "manifest.jsonl").read_bytes()
    wavs = sorted((base / "noisy").glob("*.wav")) + sorted((base / "clean").glob("*.wav"))
    assert len(wavs) == 200
    for other in outputs[1:]:
        assert (other / "manifest.jsonl").read_bytes() == manifest
        for wav in wavs:
            rel = wav.relative_to(base)
            assert (other / rel).read_bytes() == wav.read_bytes()
    assert first_run_time / 3 < 60.0
    _ok(10, f"byte-identical manifests/WAVs across runs and workers 1 vs 8 "
            f"({first_run_time / 3:.1f}s per 100-utterance run)")


def _paired_mean(clean_dir, noisy_dir, pair_key, metrics, rate=None):
    clean = {pair_key(p): p for p in Path(clean_dir).glob("*.wav")}
    noisy = {pair_key(p): p for p in Path(noisy_dir).glob("*.wav")}
    keys = sorted(set(clean) & set(noisy))
    assert keys, f"no pairs between {clean_dir} and {noisy_dir}"
    from voicebench import read_wav, to_mono

    sums = {m: [] for m in metrics}
    for key in keys:
        ref = to_mono(read_wav(clean[key]), "average")
        est = to_mono(read_wav(noisy[key]), "average")
        if rate and ref.sample_rate_hz != rate:
            ref, est = resample(ref, rate), resample(est, rate)
        report = score_pair(ref, est, list(metrics), utterance_id=key)
        for m in metrics:
            if m in report.scores:
                sums[m].append(report.scores[m])
    return {m: float(np.mean(v)) for m, v in sums.items()}


@pytest.mark.skipif(
    "VOICEBENCH_DNS2020_DIR" not in os.environ,
    reason="optional: set VOICEBENCH_DNS2020_DIR to the DNS-2020 no-reverb synthetic test set",
)
def test_criterion_11a_dns2020_noisy_stoi():
    root = Path(os.environ["VOICEBENCH_DNS2020_DIR"])
    means = _paired_mean(
        root / "clean", root / "noisy",
        pair_key=lambda p: p.stem.split("fileid_")[-1],
        metrics=("stoi",),
    )
    assert means["stoi"] * 100.0 == pytest.approx(91.52, abs=0.5)
    _ok("11a", f"DNS-2020 noisy STOI {means['stoi'] * 100:.2f}")


@pytest.mark.skipif(
    "VOICEBENCH_VBDMD_DIR" not in os.environ,
    reason="optional: set VOICEBENCH_VBDMD_DIR to the VoiceBank+DEMAND 48 kHz test set",
)
def test_criterion_11b_vbdmd_noisy_sisdr_mcd():
    root = Path(os.environ["VOICEBENCH_VBDMD_DIR"])
    means = _paired_mean(
        root / "clean_testset_wav", root / "noisy_testset_wav",
        pair_key=lambda p: p.stem,
        metrics=("si_snr", "mcd"),
    )
    assert means["si_snr"] == pytest.approx(8.39, abs=0.3)
    assert means["mcd"] == pytest.approx(5.41, abs=0.4)
    _ok("11b", f"VB+DMD noisy SI-SDR {means['si_snr']:.2f} dB, MCD {means['mcd']:.2f}")
