"""Acceptance gate: one test per release criterion, each printing a
single pass/fail line (run with -s to see them on success)."""

import math
import subprocess
import sys
import time

import numpy as np
import pytest

from mbsynth.bench import BenchSpec, compare_variants
from mbsynth.decoder import (
    DecoderConfig,
    DecoderVariant,
    default_config,
    forward,
    init_random,
    load_weights,
    random_latent,
    save_latent,
    save_weights,
)
from mbsynth.dsp import FrameParams, Waveform, istft, rfft, stft, to_magphase
from mbsynth.errors import InvalidArgumentError
from mbsynth.losses import ResolutionSet, multires_stft_loss, subband_multires_loss
from mbsynth.pqmf import (
    PrototypeSpec,
    analyze,
    make_bank,
    optimize_cutoff,
    reconstruction_error_db,
)

SR = 22050.0


def verdict(number, name, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {number} ({name}): {detail}")
    assert ok, f"criterion {number} ({name}): {detail}"


@pytest.fixture(scope="module")
def full_bench():
    spec = BenchSpec(variants=tuple(default_config(v) for v in DecoderVariant),
                     seconds=10.0, warmup=3, runs=10, seed=0)
    t0 = time.perf_counter()
    report = compare_variants(spec)
    return report, time.perf_counter() - t0


def test_criterion_1_pqmf_near_perfect_reconstruction():
    t0 = time.perf_counter()
    cutoff = optimize_cutoff(63, 4, 9.0)
    bank = make_bank(PrototypeSpec(63, 4, cutoff, 9.0))
    rng = np.random.default_rng(7)
    t = np.arange(22050) / SR
    signals = {
        "noise": rng.standard_normal(22050),
        "chirp": np.sin(2 * np.pi * (200 * t + (8000 - 200) / 2 * t * t)),
        "multitone": sum(a * np.sin(2 * np.pi * f * t)
                         for f, a in [(220, 1.0), (440, 0.8), (880, 0.6),
                                      (1760, 0.45), (3520, 0.3), (7040, 0.2)]),
    }
    dbs = {name: reconstruction_error_db(Waveform(sig, SR), bank)
           for name, sig in signals.items()}
    elapsed = time.perf_counter() - t0
    ok = all(db <= -36.0 for db in dbs.values()) and elapsed < 5.0
    detail = (", ".join(f"{k}={v:.1f} dB" for k, v in dbs.items())
              + f", cutoff={cutoff:.4f}, {elapsed:.2f} s (limits: <= -36 dB, < 5 s)")
    verdict(1, "pqmf reconstruction", ok, detail)


def test_criterion_2_istft_stft_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    x = rng.standard_normal(22050)
    errs = {}
    for label, (fft, win, hop) in {"16/4/16": (16, 16, 4),
                                   "1024/1024/256": (1024, 1024, 256)}.items():
        p = FrameParams.hann(fft, hop, win)
        y = istft(to_magphase(stft(Waveform(x, SR), p)), p)
        n = len(y.samples)
        seg = slice(win, n - win)  # edge windows excluded with center_pad off
        errs[label] = np.abs(y.samples[seg] - x[seg]).max() / np.abs(x).max()
    elapsed = time.perf_counter() - t0
    ok = all(e <= 1e-6 for e in errs.values()) and elapsed < 5.0
    detail = (", ".join(f"{k}: rel {v:.2e}" for k, v in errs.items())
              + f", {elapsed:.2f} s (limits: <= 1e-6, < 5 s)")
    verdict(2, "istft-stft identity", ok, detail)


def test_criterion_3_dft_oracle_equivalence():
    worst = 0.0
    for n in (16, 171, 384, 683, 1024):
        rng = np.random.default_rng(n)
        x = rng.standard_normal(n)
        k = np.arange(n // 2 + 1)[:, None]
        m = np.arange(n)[None, :]
        ref = (np.exp(-2j * np.pi * k * m / n) * x).sum(axis=1)
        rel = np.max(np.abs(rfft(x) - ref)) / np.max(np.abs(ref))
        worst = max(worst, rel)
    ok = worst <= 1e-9
    verdict(3, "dft oracle", ok,
            f"max rel err {worst:.2e} over n in 16,171,384,683,1024 (limit 1e-9)")


def test_criterion_4_loss_correctness():
    rng = np.random.default_rng(13)
    x = Waveform(rng.standard_normal(22050), SR)

    zero_total = multires_stft_loss(x, x).total

    bank = make_bank(PrototypeSpec(63, 4, optimize_cutoff(63, 4, 9.0), 9.0))
    y = Waveform(rng.standard_normal(22050), SR)
    rep = subband_multires_loss(x, y, bank)
    sb_x, sb_y = analyze(x, bank), analyze(y, bank)
    manual = [multires_stft_loss(Waveform(sb_x.bands[k], sb_x.band_rate),
                                 Waveform(sb_y.bands[k], sb_y.band_rate))
              for k in range(4)]
    sc = float(np.mean([r.spectral_convergence for r in manual]))
    mag = float(np.mean([r.log_magnitude for r in manual]))
    compositional = (rep.spectral_convergence == sc and rep.log_magnitude == mag
                     and rep.total == sc + mag)

    a = rng.standard_normal(256)
    b = rng.standard_normal(256)
    got = multires_stft_loss(Waveform(a, SR), Waveform(b, SR),
                             ResolutionSet(((64, 64, 16),)))
    w = [0.5 - 0.5 * math.cos(2 * math.pi * i / 64) for i in range(64)]

    def mags(sig):
        out = []
        for f in range(13):
            frame = [sig[f * 16 + i] * w[i] for i in range(64)]
            out.append([abs(sum(frame[i] * complex(math.cos(2 * math.pi * kk * i / 64),
                                                   -math.sin(2 * math.pi * kk * i / 64))
                                for i in range(64))) for kk in range(33)])
        return out

    mr, mg = mags(a), mags(b)
    num = math.sqrt(sum((r - g) ** 2 for rr, gg in zip(mr, mg) for r, g in zip(rr, gg)))
    den = math.sqrt(sum(r ** 2 for rr in mr for r in rr))
    sc_ref = num / max(den, 1e-7)
    cells = [abs(math.log(max(r, 1e-7)) - math.log(max(g, 1e-7)))
             for rr, gg in zip(mr, mg) for r, g in zip(rr, gg)]
    mag_ref = sum(cells) / len(cells)
    brute_err = max(abs(got.spectral_convergence - sc_ref),
                    abs(got.log_magnitude - mag_ref))

    ok = zero_total == 0.0 and compositional and brute_err <= 1e-5
    verdict(4, "loss correctness", ok,
            f"identical-signal total={zero_total}, compositional identity "
            f"{'exact' if compositional else 'BROKEN'}, brute-force delta "
            f"{brute_err:.2e} (limit 1e-5)")


def test_criterion_5_length_law_and_config_rejection():
    checked = 0
    for variant in DecoderVariant:
        cfg = default_config(variant)
        w = init_random(cfg, 7)
        for frames in (1, 7, 100, 513):
            out = forward(random_latent(cfg, 3, frames), cfg, w)
            assert len(out) == 256 * frames, (variant, frames, len(out))
            checked += 1
    rejected = 0
    for bad in (dict(variant=DecoderVariant.FULL_CONV, upsample_scales=(8, 8)),
                dict(variant=DecoderVariant.MULTI_BAND_ISTFT, istft_hop=8),
                dict(variant=DecoderVariant.MULTI_BAND_ISTFT, bands=8),
                dict(variant=DecoderVariant.ISTFT, upsample_scales=(4, 4))):
        try:
            DecoderConfig(**bad)
        except InvalidArgumentError:
            rejected += 1
    ok = checked == 16 and rejected == 4
    verdict(5, "length law", ok,
            f"{checked}/16 variant x frame-count cases gave 256*T samples; "
            f"{rejected}/4 budget-violating configs rejected")


def test_criterion_6_ms_embeds_mb():
    worst = 0.0
    for seed in (7, 23):
        mb = default_config(DecoderVariant.MULTI_BAND_ISTFT)
        ms = default_config(DecoderVariant.MULTI_STREAM_ISTFT)
        wmb, wms = init_random(mb, seed), init_random(ms, seed)
        z = random_latent(mb, seed + 100, 50)
        ymb = forward(z, mb, wmb)
        yms = forward(random_latent(ms, seed + 100, 50), ms, wms)
        worst = max(worst, float(np.max(np.abs(ymb.samples - yms.samples))))
    ok = worst <= 1e-6
    verdict(6, "ms embeds mb", ok,
            f"max abs output difference {worst:.2e} over 2 seeds (limit 1e-6)")


def test_criterion_7_speedup_ordering(full_bench):
    report, elapsed = full_bench
    med = {r.name: r.rtf_median for r in report.results}
    macs = {r.name: r.conv_macs for r in report.results}
    rtf_order = med["vits"] > med["istft"] > max(med["mb"], med["ms"])
    mb_speedup = med["istft"] / med["mb"]
    ms_speedup = med["istft"] / med["ms"]
    mac_order = macs["vits"] > macs["istft"] > max(macs["mb"], macs["ms"])
    ok = (rtf_order and mb_speedup >= 1.5 and ms_speedup >= 1.5
          and mac_order and elapsed < 300.0)
    detail = (f"RTF medians vits={med['vits']:.3f} istft={med['istft']:.3f} "
              f"mb={med['mb']:.3f} ms={med['ms']:.3f}; speedup vs istft "
              f"mb={mb_speedup:.2f}x ms={ms_speedup:.2f}x (limit >= 1.5x); "
              f"mac ordering {'ok' if mac_order else 'BROKEN'}; "
              f"bench wall {elapsed:.0f} s (limit < 300 s)")
    verdict(7, "speedup ordering", ok, detail)


def test_criterion_8_fullconv_bottleneck(full_bench):
    report, _ = full_bench
    vits = next(r for r in report.results if r.name == "vits")
    frac = vits.stage_fractions()["resblocks"]
    ok = frac >= 0.90
    verdict(8, "conv-stack bottleneck", ok,
            f"FullConv conv-stack share of decoder wall time {frac:.1%} "
            f"(limit >= 90%)")


def test_criterion_9_determinism_and_portability(tmp_path):
    cfg = default_config(DecoderVariant.MULTI_BAND_ISTFT)
    w = init_random(cfg, 7)
    path = str(tmp_path / "w.bin")
    save_weights(w, path)
    w2 = load_weights(path)
    bit_exact = (w2.fingerprint == w.fingerprint
                 and list(w2.tensors) == list(w.tensors)
                 and all(w.tensors[k].tobytes() == w2.tensors[k].tobytes()
                         for k in w.tensors))

    latent_path = str(tmp_path / "z.f32")
    save_latent(random_latent(cfg, 5, 100), latent_path)
    outs = []
    for name in ("a.wav", "b.wav"):
        out = tmp_path / name
        proc = subprocess.run(
            [sys.executable, "-m", "mbsynth.cli", "decode", "--variant", "mb",
             "--latent", latent_path, "--seed", "7", "--out", str(out)],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outs.append(out.read_bytes())
    across_runs = outs[0] == outs[1]

    ok = bit_exact and across_runs
    verdict(9, "determinism", ok,
            f"weight round-trip bit-exact: {bit_exact}; decode byte-identical "
            f"across fresh processes: {across_runs}")
