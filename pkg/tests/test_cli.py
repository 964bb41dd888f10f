import wave

import numpy as np
import pytest

from mbsynth.cli import main
from mbsynth.decoder import (
    DecoderVariant,
    default_config,
    init_random,
    random_latent,
    save_latent,
    save_weights,
)
from mbsynth.dsp import Waveform
from mbsynth.errors import FormatError
from mbsynth.losses import multires_stft_loss
from mbsynth.wavio import read_wav, write_wav

SR = 22050.0


def noise_wav(path, seed=0, n=22050, scale=0.5):
    rng = np.random.default_rng(seed)
    x = Waveform(np.clip(scale * rng.standard_normal(n), -0.99, 0.99), SR)
    write_wav(x, str(path))
    return x


def make_latent(path, variant=DecoderVariant.MULTI_BAND_ISTFT, frames=100, seed=5):
    cfg = default_config(variant, mini=True)
    z = random_latent(cfg, seed, frames)
    save_latent(z, str(path))
    return z


class TestWavIO:
    def test_round_trip_quantization_bound(self, tmp_path):
        path = tmp_path / "x.wav"
        x = noise_wav(path, seed=1)
        y = read_wav(str(path))
        assert y.sample_rate == SR and len(y) == len(x)
        assert np.max(np.abs(y.samples - x.samples)) <= 1.0 / 32768.0

    def test_write_clamps_overrange(self, tmp_path):
        path = tmp_path / "loud.wav"
        write_wav(Waveform(np.array([2.0, -2.0, 0.0]), SR), str(path))
        y = read_wav(str(path))
        assert y.samples[0] == pytest.approx(32767 / 32768)
        assert y.samples[1] == -1.0

    def test_stereo_rejected_with_channel_count(self, tmp_path):
        path = tmp_path / "stereo.wav"
        with wave.open(str(path), "wb") as f:
            f.setnchannels(2)
            f.setsampwidth(2)
            f.setframerate(22050)
            f.writeframes(b"\0\0" * 8)
        with pytest.raises(FormatError, match="2 channels"):
            read_wav(str(path))

    def test_eight_bit_rejected(self, tmp_path):
        path = tmp_path / "8bit.wav"
        with wave.open(str(path), "wb") as f:
            f.setnchannels(1)
            f.setsampwidth(1)
            f.setframerate(22050)
            f.writeframes(b"\0" * 8)
        with pytest.raises(FormatError, match="8-bit"):
            read_wav(str(path))

    def test_garbage_rejected(self, tmp_path):
        path = tmp_path / "junk.wav"
        path.write_bytes(b"not audio at all")
        with pytest.raises(FormatError):
            read_wav(str(path))


class TestPqmfRoundtripCmd:
    def test_noise_reconstruction(self, tmp_path, capsys):
        src = tmp_path / "in.wav"
        out = tmp_path / "out.wav"
        noise_wav(src)
        assert main(["pqmf-roundtrip", "--in", str(src), "--out", str(out)]) == 0
        printed = capsys.readouterr().out
        db = float(printed.strip().split("=")[1])
        assert db <= -36.0
        assert out.exists() and len(read_wav(str(out))) == 22052  # padded to x4

    def test_stereo_exits_2(self, tmp_path, capsys):
        path = tmp_path / "st.wav"
        with wave.open(str(path), "wb") as f:
            f.setnchannels(2)
            f.setsampwidth(2)
            f.setframerate(22050)
            f.writeframes(b"\0\0" * 8)
        code = main(["pqmf-roundtrip", "--in", str(path), "--out", str(tmp_path / "o.wav")])
        assert code == 2
        assert "2 channels" in capsys.readouterr().err

    def test_missing_file_exits_1(self, tmp_path):
        assert main(["pqmf-roundtrip", "--in", str(tmp_path / "nope.wav"),
                     "--out", str(tmp_path / "o.wav")]) == 1


class TestLossCmd:
    def test_identical_files_zero_total(self, tmp_path, capsys):
        path = tmp_path / "a.wav"
        noise_wav(path)
        assert main(["loss", "--ref", str(path), "--gen", str(path)]) == 0
        lines = dict(ln.split("=") for ln in capsys.readouterr().out.splitlines())
        assert float(lines["total"]) == 0.0

    def test_subband_identical_all_band_keys_zero(self, tmp_path, capsys):
        path = tmp_path / "a.wav"
        noise_wav(path)
        assert main(["loss", "--ref", str(path), "--gen", str(path), "--subband"]) == 0
        lines = dict(ln.split("=") for ln in capsys.readouterr().out.splitlines())
        for k in range(4):
            assert float(lines[f"band{k}_sc"]) == 0.0
            assert float(lines[f"band{k}_mag"]) == 0.0

    def test_matches_library_output_exactly(self, tmp_path, capsys):
        ref_p, gen_p = tmp_path / "r.wav", tmp_path / "g.wav"
        noise_wav(ref_p, seed=3)
        noise_wav(gen_p, seed=4)
        assert main(["loss", "--ref", str(ref_p), "--gen", str(gen_p)]) == 0
        printed = capsys.readouterr().out.strip()
        expected = multires_stft_loss(read_wav(str(ref_p)), read_wav(str(gen_p)))
        assert printed == expected.to_text()

    def test_length_mismatch_without_trim(self, tmp_path, capsys):
        a, b = tmp_path / "a.wav", tmp_path / "b.wav"
        noise_wav(a, n=22050)
        noise_wav(b, n=20000)
        assert main(["loss", "--ref", str(a), "--gen", str(b)]) == 2
        assert "length mismatch" in capsys.readouterr().err
        assert main(["loss", "--ref", str(a), "--gen", str(b), "--trim"]) == 0


class TestDecodeCmd:
    def test_length_law_and_determinism(self, tmp_path, capsys):
        latent = tmp_path / "z.f32"
        make_latent(latent, frames=100)
        out1, out2 = tmp_path / "a.wav", tmp_path / "b.wav"
        argv = ["decode", "--variant", "mb", "--mini", "--latent", str(latent),
                "--seed", "9"]
        assert main(argv + ["--out", str(out1)]) == 0
        assert main(argv + ["--out", str(out2)]) == 0
        assert "samples=25600" in capsys.readouterr().out
        assert out1.read_bytes() == out2.read_bytes()
        assert len(read_wav(str(out1))) == 25600

    def test_weights_file_used(self, tmp_path):
        cfg = default_config(DecoderVariant.MULTI_BAND_ISTFT, mini=True)
        wfile = tmp_path / "w.bin"
        save_weights(init_random(cfg, 4), str(wfile))
        latent = tmp_path / "z.f32"
        make_latent(latent, frames=10)
        via_file = tmp_path / "f.wav"
        via_seed = tmp_path / "s.wav"
        base = ["decode", "--variant", "mb", "--mini", "--latent", str(latent)]
        assert main(base + ["--weights", str(wfile), "--out", str(via_file)]) == 0
        assert main(base + ["--seed", "4", "--out", str(via_seed)]) == 0
        assert via_file.read_bytes() == via_seed.read_bytes()

    def test_fingerprint_mismatch_exits_2(self, tmp_path, capsys):
        wfile = tmp_path / "w.bin"
        save_weights(init_random(default_config(DecoderVariant.ISTFT, mini=True), 0),
                     str(wfile))
        latent = tmp_path / "z.f32"
        make_latent(latent, frames=4)
        code = main(["decode", "--variant", "mb", "--mini", "--latent", str(latent),
                     "--weights", str(wfile), "--out", str(tmp_path / "o.wav")])
        assert code == 2
        assert "fingerprint" in capsys.readouterr().err

    def test_compare_ms_passes(self, tmp_path, capsys):
        latent = tmp_path / "z.f32"
        make_latent(latent, DecoderVariant.MULTI_STREAM_ISTFT, frames=25)
        code = main(["decode", "--variant", "ms", "--mini", "--latent", str(latent),
                     "--out", str(tmp_path / "o.wav"), "--compare"])
        assert code == 0
        out = capsys.readouterr().out
        diff = float(dict(ln.split("=") for ln in out.splitlines())["ms_vs_mb_max_abs_diff"])
        assert diff <= 1e-6

    def test_compare_rejected_for_other_variants(self, tmp_path):
        latent = tmp_path / "z.f32"
        make_latent(latent, frames=4)
        assert main(["decode", "--variant", "mb", "--mini", "--latent", str(latent),
                     "--out", str(tmp_path / "o.wav"), "--compare"]) == 2

    def test_unknown_variant_exits_2(self, tmp_path):
        assert main(["decode", "--variant", "hifigan", "--latent", "z",
                     "--out", "o.wav"]) == 2

    def test_missing_latent_exits_1(self, tmp_path):
        assert main(["decode", "--variant", "mb", "--mini",
                     "--latent", str(tmp_path / "none.f32"),
                     "--out", str(tmp_path / "o.wav")]) == 1

    def test_corrupt_sidecar_exits_2(self, tmp_path):
        latent = tmp_path / "z.f32"
        make_latent(latent, frames=4)
        (tmp_path / "z.f32.meta").write_text("frames=999 channels=96\n")
        assert main(["decode", "--variant", "mb", "--mini", "--latent", str(latent),
                     "--out", str(tmp_path / "o.wav")]) == 2


class TestBenchCmd:
    def test_single_variant_no_verdict(self, capsys):
        code = main(["bench", "--variants", "mb", "--seconds", "1", "--runs", "5",
                     "--warmup", "1", "--mini"])
        assert code == 0
        out = capsys.readouterr().out
        assert "ordering" not in out
        assert "mb_rtf_median=" in out

    def test_two_variants_emit_verdict(self, capsys):
        code = main(["bench", "--variants", "istft,mb", "--seconds", "1",
                     "--runs", "5", "--warmup", "1", "--mini"])
        assert code == 0
        out = capsys.readouterr().out
        assert "ordering" in out and "ordering_pass=true" in out

    def test_unknown_variant_exits_2(self, capsys):
        assert main(["bench", "--variants", "vits,bogus"]) == 2
        assert "unknown variant" in capsys.readouterr().err

    def test_too_few_runs_exits_2(self):
        assert main(["bench", "--variants", "mb", "--runs", "3", "--mini"]) == 2
