"""Command-line surface: pqmf-roundtrip, loss, decode, bench.

Exit codes: 0 success, 1 I/O failure, 2 validation or format failure
(bench also exits 2 when the measured variant ordering is violated).
All commands pin math libraries to one thread, which keeps decode
outputs byte-reproducible and matches the benchmark contract.
"""

import argparse
import sys

import numpy as np
import torch
from threadpoolctl import threadpool_limits

from .bench import BenchSpec, compare_variants
from .decoder import (
    DecoderVariant,
    DecoderWeights,
    check_weights,
    default_config,
    forward,
    init_random,
    load_latent,
    load_weights,
    synthesis_bank,
)
from .dsp import Waveform
from .errors import FormatError, InvalidArgumentError
from .losses import multires_stft_loss, subband_multires_loss
from .pqmf import analyze, reconstruction_error_db, synthesize
from .wavio import read_wav, write_wav

MS_MB_TOLERANCE = 1e-6


def cmd_pqmf_roundtrip(args) -> int:
    x = read_wav(args.infile)
    bank = synthesis_bank(args.bands, args.taps)
    db = reconstruction_error_db(x, bank)
    y = synthesize(analyze(x, bank), bank)
    write_wav(y, args.out)
    print(f"reconstruction_db={db:.2f}")
    return 0


def cmd_loss(args) -> int:
    ref = read_wav(args.ref)
    gen = read_wav(args.gen)
    if len(ref) != len(gen):
        if not args.trim:
            raise InvalidArgumentError(
                f"length mismatch ({len(ref)} vs {len(gen)} samples); "
                "pass --trim to compare the common prefix")
        n = min(len(ref), len(gen))
        ref = Waveform(ref.samples[:n], ref.sample_rate)
        gen = Waveform(gen.samples[:n], gen.sample_rate)
    if args.subband:
        report = subband_multires_loss(ref, gen, synthesis_bank(args.bands))
    else:
        report = multires_stft_loss(ref, gen)
    print(report.to_text())
    return 0


def cmd_decode(args) -> int:
    variant = DecoderVariant.from_name(args.variant)
    config = default_config(variant, mini=args.mini)
    if args.weights:
        weights = load_weights(args.weights)
    else:
        weights = init_random(config, args.seed)
    check_weights(config, weights)
    z = load_latent(args.latent)
    y = forward(z, config, weights)
    write_wav(y, args.out)
    print(f"samples={len(y)}")
    if not args.compare:
        return 0

    if variant is not DecoderVariant.MULTI_STREAM_ISTFT:
        raise InvalidArgumentError("--compare only applies to the ms variant")
    # force the trained filter back to the fixed bank so the check is
    # about the two recombination paths, not about training drift
    bank = synthesis_bank(config.bands, config.ms_filter_taps)
    forced = dict(weights.tensors)
    forced["stream_filter.weight"] = (config.bands * bank.synthesis).astype(np.float32)
    ms_weights = DecoderWeights(forced, weights.fingerprint)
    mb_config = default_config(DecoderVariant.MULTI_BAND_ISTFT, mini=args.mini)
    mb_tensors = {k: v for k, v in forced.items() if k != "stream_filter.weight"}
    mb_weights = DecoderWeights(mb_tensors, mb_config.fingerprint())
    diff = float(np.max(np.abs(forward(z, config, ms_weights).samples
                               - forward(z, mb_config, mb_weights).samples)))
    print(f"ms_vs_mb_max_abs_diff={diff!r}")
    if diff > MS_MB_TOLERANCE:
        print(f"error: difference exceeds {MS_MB_TOLERANCE}", file=sys.stderr)
        return 2
    return 0


def cmd_bench(args) -> int:
    variants = tuple(DecoderVariant.from_name(name.strip())
                     for name in args.variants.split(","))
    spec = BenchSpec(
        variants=tuple(default_config(v, mini=args.mini) for v in variants),
        seconds=args.seconds, warmup=args.warmup, runs=args.runs, seed=args.seed)
    report = compare_variants(spec)
    print(report.table_text())
    print()
    print(report.kv_text())
    if report.verdict is False:
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mbsynth",
        description="multi-band iSTFT waveform synthesis tools")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pqmf-roundtrip",
                       help="analyze+synthesize a WAV through the filter bank")
    p.add_argument("--in", dest="infile", required=True, help="input mono 16-bit WAV")
    p.add_argument("--out", required=True, help="output WAV path")
    p.add_argument("--bands", type=int, default=4)
    p.add_argument("--taps", type=int, default=63)
    p.set_defaults(func=cmd_pqmf_roundtrip)

    p = sub.add_parser("loss", help="multi-resolution STFT loss between two WAVs")
    p.add_argument("--ref", required=True, help="reference WAV")
    p.add_argument("--gen", required=True, help="generated WAV")
    p.add_argument("--subband", action="store_true",
                   help="evaluate per pseudo-QMF band")
    p.add_argument("--bands", type=int, default=4)
    p.add_argument("--trim", action="store_true",
                   help="trim both inputs to the shorter length")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("decode", help="run a decoder forward pass to a WAV")
    p.add_argument("--variant", required=True, help="vits, istft, mb or ms")
    p.add_argument("--latent", required=True,
                   help="raw float32 frames x channels file with <path>.meta sidecar")
    p.add_argument("--out", required=True, help="output WAV path")
    p.add_argument("--weights", help="weight file; omitted means seeded random init")
    p.add_argument("--seed", type=int, default=0, help="seed for random weights")
    p.add_argument("--mini", action="store_true", help="halved channel widths")
    p.add_argument("--compare", action="store_true",
                   help="ms only: also decode as mb and report the max difference")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("bench", help="measure single-thread RTF per variant")
    p.add_argument("--variants", default="vits,istft,mb,ms",
                   help="comma-separated variant names")
    p.add_argument("--seconds", type=float, default=10.0)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--warmup", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mini", action="store_true")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    torch.set_num_threads(1)
    try:
        with threadpool_limits(limits=1):
            return args.func(args)
    except (FormatError, InvalidArgumentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
