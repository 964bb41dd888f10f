"""Four decoder variants from latent frames to waveform samples.

All share a HiFi-GAN-style convolutional body (pre-conv, transposed-conv
upsampling stages, multi-receptive-field residual fusion).  They differ
in how samples leave the feature domain:

  vits   full conv upsampling to one channel, tanh output
  istft  body at 1/4 rate, magnitude/phase head, one 16/4 iSTFT
  mb     body at 1/16 rate, 4-band head, per-band iSTFT, fixed
         pseudo-QMF synthesis recombination
  ms     as mb, but recombination is a learned 63-tap filter per band
         (no bias) applied to the zero-stuffed streams

Convolutions run in float32 through torch (inference hot path); the
iSTFT and band recombination run in float64 numpy, which is what lets
the ms-initialized-from-the-fixed-bank output track the mb output to
1e-6.
"""

import struct
import time
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from hashlib import blake2b

import numpy as np
import torch
import torch.nn.functional as F

from .dsp import FrameParams, MagPhaseSpectrogram, Waveform, istft
from .errors import FormatError, InvalidArgumentError
from .pqmf import FilterBank, PrototypeSpec, combine_bands, make_bank, optimize_cutoff

LRELU_SLOPE = 0.1
WEIGHT_MAGIC = b"MBIW"
WEIGHT_VERSION = 1


class DecoderVariant(Enum):
    FULL_CONV = "vits"
    ISTFT = "istft"
    MULTI_BAND_ISTFT = "mb"
    MULTI_STREAM_ISTFT = "ms"

    @classmethod
    def from_name(cls, name: str) -> "DecoderVariant":
        for v in cls:
            if v.value == name:
                return v
        known = ", ".join(v.value for v in cls)
        raise InvalidArgumentError(f"unknown variant {name!r}; expected one of {known}")


_DEFAULT_SCALES = {
    DecoderVariant.FULL_CONV: (8, 8, 2, 2),
    DecoderVariant.ISTFT: (8, 8),
    DecoderVariant.MULTI_BAND_ISTFT: (4, 4),
    DecoderVariant.MULTI_STREAM_ISTFT: (4, 4),
}
_DEFAULT_BANDS = {
    DecoderVariant.FULL_CONV: 1,
    DecoderVariant.ISTFT: 1,
    DecoderVariant.MULTI_BAND_ISTFT: 4,
    DecoderVariant.MULTI_STREAM_ISTFT: 4,
}


@dataclass(frozen=True)
class DecoderConfig:
    """Architecture description; the upsampling budget is checked here.

    The total upsampling (conv scales x iSTFT hop x band count) must
    equal 256 samples per latent frame, matching the analysis hop of
    the surrounding pipeline.
    """

    variant: DecoderVariant
    latent_channels: int = 192
    initial_channels: int = 512
    upsample_scales: tuple = None
    istft_fft: int = 16
    istft_hop: int = 4
    istft_win: int = 16
    bands: int = None
    resblock_kernels: tuple = (3, 7, 11)
    resblock_dilations: tuple = (1, 3, 5)
    ms_filter_taps: int = 63
    sample_rate: float = 22050.0

    def __post_init__(self):
        if not isinstance(self.variant, DecoderVariant):
            raise InvalidArgumentError("variant must be a DecoderVariant")
        if self.upsample_scales is None:
            object.__setattr__(self, "upsample_scales", _DEFAULT_SCALES[self.variant])
        else:
            object.__setattr__(self, "upsample_scales",
                               tuple(int(s) for s in self.upsample_scales))
        if self.bands is None:
            object.__setattr__(self, "bands", _DEFAULT_BANDS[self.variant])
        if self.latent_channels < 1 or self.initial_channels < 1:
            raise InvalidArgumentError("channel counts must be positive")
        if not self.upsample_scales or any(s < 2 or s % 2 for s in self.upsample_scales):
            raise InvalidArgumentError("upsample scales must be even and >= 2")
        if self.initial_channels % (2 ** len(self.upsample_scales)):
            raise InvalidArgumentError(
                "initial_channels must be divisible by 2^len(upsample_scales)")
        if self.ms_filter_taps < 1 or self.ms_filter_taps % 2 == 0:
            raise InvalidArgumentError("ms_filter_taps must be odd and positive")
        if len(self.resblock_kernels) != len(self.resblock_dilations) or not self.resblock_kernels:
            raise InvalidArgumentError("need matching resblock kernel/dilation lists")
        if any(k % 2 == 0 for k in self.resblock_kernels):
            raise InvalidArgumentError("resblock kernels must be odd for same-padding")

        total = 1
        for s in self.upsample_scales:
            total *= s
        if self.variant is DecoderVariant.FULL_CONV:
            if self.bands != 1:
                raise InvalidArgumentError("FullConv uses a single band")
            if total != 256:
                raise InvalidArgumentError(
                    f"product of upsample scales must be 256, got {total}")
        else:
            FrameParams.hann(self.istft_fft, self.istft_hop, self.istft_win)
            if self.variant is DecoderVariant.ISTFT and self.bands != 1:
                raise InvalidArgumentError("Istft uses a single band")
            if self.variant in (DecoderVariant.MULTI_BAND_ISTFT,
                                DecoderVariant.MULTI_STREAM_ISTFT) and self.bands < 2:
                raise InvalidArgumentError("multi-band variants need bands >= 2")
            if total * self.istft_hop * self.bands != 256:
                raise InvalidArgumentError(
                    "upsampling budget violated: scales x hop x bands = "
                    f"{total * self.istft_hop * self.bands}, expected 256")

    @property
    def stage_channels(self) -> tuple:
        c = self.initial_channels
        return tuple(c // 2 ** (i + 1) for i in range(len(self.upsample_scales)))

    @property
    def spectrum_bins(self) -> int:
        return self.istft_fft // 2 + 1

    def istft_params(self) -> FrameParams:
        return FrameParams.hann(self.istft_fft, self.istft_hop, self.istft_win)

    def canonical_text(self) -> str:
        return (
            f"variant={self.variant.value}"
            f" latent={self.latent_channels}"
            f" initial={self.initial_channels}"
            f" scales={','.join(map(str, self.upsample_scales))}"
            f" fft={self.istft_fft} hop={self.istft_hop} win={self.istft_win}"
            f" bands={self.bands}"
            f" kernels={','.join(map(str, self.resblock_kernels))}"
            f" dilations={','.join(map(str, self.resblock_dilations))}"
            f" ms_taps={self.ms_filter_taps}"
            f" rate={self.sample_rate!r}"
        )

    def fingerprint(self) -> int:
        digest = blake2b(self.canonical_text().encode(), digest_size=8).digest()
        return int.from_bytes(digest, "little")


def default_config(variant: DecoderVariant, mini: bool = False) -> DecoderConfig:
    """Full-scale config, or the halved-width variant with mini=True."""
    return DecoderConfig(variant,
                         latent_channels=96 if mini else 192,
                         initial_channels=256 if mini else 512)


def layer_plan(config: DecoderConfig):
    """Ordered (name, shape) list of every tensor the config requires."""
    plan = []
    c_in = config.initial_channels
    plan.append(("conv_pre.weight", (c_in, config.latent_channels, 7)))
    plan.append(("conv_pre.bias", (c_in,)))
    block = 0
    for i, s in enumerate(config.upsample_scales):
        c_out = c_in // 2
        plan.append((f"ups.{i}.weight", (c_in, c_out, 2 * s)))
        plan.append((f"ups.{i}.bias", (c_out,)))
        for k in config.resblock_kernels:
            for m in range(len(config.resblock_dilations)):
                plan.append((f"resblocks.{block}.convs1.{m}.weight", (c_out, c_out, k)))
                plan.append((f"resblocks.{block}.convs1.{m}.bias", (c_out,)))
            for m in range(len(config.resblock_dilations)):
                plan.append((f"resblocks.{block}.convs2.{m}.weight", (c_out, c_out, k)))
                plan.append((f"resblocks.{block}.convs2.{m}.bias", (c_out,)))
            block += 1
        c_in = c_out
    if config.variant is DecoderVariant.FULL_CONV:
        plan.append(("conv_post.weight", (1, c_in, 7)))
        plan.append(("conv_post.bias", (1,)))
    else:
        out = config.bands * 2 * config.spectrum_bins
        plan.append(("head.weight", (out, c_in, 7)))
        plan.append(("head.bias", (out,)))
        if config.variant is DecoderVariant.MULTI_STREAM_ISTFT:
            plan.append(("stream_filter.weight", (config.bands, config.ms_filter_taps)))
    return plan


def count_parameters(config: DecoderConfig) -> int:
    return sum(int(np.prod(shape)) for _, shape in layer_plan(config))


@dataclass
class DecoderWeights:
    """Named float32 tensors plus the fingerprint of their config."""

    tensors: dict
    fingerprint: int
    _torch: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for name, arr in self.tensors.items():
            if arr.dtype != np.float32:
                raise InvalidArgumentError(f"tensor {name!r} must be float32")
            if not np.all(np.isfinite(arr)):
                raise InvalidArgumentError(f"tensor {name!r} contains non-finite values")

    def as_torch(self) -> dict:
        # from_numpy shares storage, so this is a one-time cheap view
        if self._torch is None:
            object.__setattr__(self, "_torch",
                               {k: torch.from_numpy(v) for k, v in self.tensors.items()})
        return self._torch


@lru_cache(maxsize=8)
def synthesis_bank(bands: int, taps: int = 63) -> FilterBank:
    """Fixed recombination bank shared by the mb forward path and the
    ms filter initialization; cutoff re-derived by grid search."""
    cutoff = optimize_cutoff(taps, bands, 9.0)
    return make_bank(PrototypeSpec(taps, bands, cutoff, 9.0))


def init_random(config: DecoderConfig, seed: int) -> DecoderWeights:
    """Seeded uniform(-k, k) init with k = 1/sqrt(fan_in) per tensor.

    The ms stream filter is not drawn randomly: it starts from the
    fixed synthesis bank (rows N*g_k), so a fresh ms decoder computes
    the same recombination as mb until trained away from it.
    """
    rng = np.random.default_rng(seed)
    tensors = {}
    fan_in = None
    for name, shape in layer_plan(config):
        if name == "stream_filter.weight":
            bank = synthesis_bank(config.bands, config.ms_filter_taps)
            tensors[name] = (config.bands * bank.synthesis).astype(np.float32)
            continue
        if name.endswith(".weight"):
            # conv (C_out, C_in, K) and transposed conv (C_in, C_out, K)
            # both use shape[1]*shape[2], matching torch's fan-in rule
            fan_in = shape[1] * shape[2]
        k = 1.0 / np.sqrt(fan_in)
        tensors[name] = rng.uniform(-k, k, size=shape).astype(np.float32)
    return DecoderWeights(tensors, config.fingerprint())


def check_weights(config: DecoderConfig, weights: DecoderWeights) -> None:
    """Verify fingerprint and the exact tensor plan (names and shapes)."""
    if weights.fingerprint != config.fingerprint():
        raise FormatError(
            f"weights fingerprint {weights.fingerprint:#018x} does not match "
            f"config {config.fingerprint():#018x} ({config.canonical_text()})")
    plan = layer_plan(config)
    for name, shape in plan:
        if name not in weights.tensors:
            raise FormatError(f"missing tensor {name!r}")
        if weights.tensors[name].shape != shape:
            raise FormatError(
                f"tensor {name!r} has shape {weights.tensors[name].shape}, "
                f"expected {shape}")
    extras = set(weights.tensors) - {name for name, _ in plan}
    if extras:
        raise FormatError(f"unexpected tensor {sorted(extras)[0]!r}")


def save_weights(weights: DecoderWeights, path: str) -> None:
    """Binary weight file: magic, version, fingerprint, then per tensor
    name, rank, dims and a little-endian float32 payload."""
    with open(path, "wb") as f:
        f.write(WEIGHT_MAGIC)
        f.write(struct.pack("<IQI", WEIGHT_VERSION, weights.fingerprint,
                            len(weights.tensors)))
        for name, arr in weights.tensors.items():
            encoded = name.encode()
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<I", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.astype("<f4", copy=False).tobytes())


def load_weights(path: str) -> DecoderWeights:
    """Inverse of save_weights; truncation errors name the tensor hit."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != WEIGHT_MAGIC:
        raise FormatError("bad magic; not a weight file")
    if len(data) < 20:
        raise FormatError("truncated header")
    version, fingerprint, count = struct.unpack_from("<IQI", data, 4)
    if version != WEIGHT_VERSION:
        raise FormatError(f"unsupported weight file version {version}")
    off = 20
    tensors = {}
    for i in range(count):
        label = f"tensor #{i}"
        try:
            (name_len,) = struct.unpack_from("<I", data, off)
            off += 4
            name = data[off: off + name_len].decode()
            if len(data) < off + name_len:
                raise struct.error("name cut short")
            off += name_len
            label = name
            (rank,) = struct.unpack_from("<I", data, off)
            off += 4
            shape = struct.unpack_from(f"<{rank}I", data, off)
            off += 4 * rank
            size = int(np.prod(shape)) if rank else 1
            payload = data[off: off + 4 * size]
            if len(payload) < 4 * size:
                raise struct.error("payload cut short")
            off += 4 * size
            tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
        except (struct.error, UnicodeDecodeError) as exc:
            raise FormatError(f"truncated or corrupt weight file at {label}: {exc}") from exc
    if off != len(data):
        raise FormatError(f"{len(data) - off} trailing bytes after last tensor")
    return DecoderWeights(tensors, fingerprint)


@dataclass
class LatentFeatures:
    """Per-frame decoder input, shape (frames, channels), float32."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise InvalidArgumentError("latent data must be frames x channels")
        if self.data.shape[0] < 1:
            raise InvalidArgumentError("need at least one latent frame")
        if not np.all(np.isfinite(self.data)):
            raise InvalidArgumentError("latent data contains non-finite values")

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[1]


def random_latent(config: DecoderConfig, seed: int, frames: int) -> LatentFeatures:
    rng = np.random.default_rng(seed)
    return LatentFeatures(rng.standard_normal((frames, config.latent_channels)))


def save_latent(z: LatentFeatures, path: str) -> None:
    """Raw little-endian float32 rows plus a `<path>.meta` text sidecar."""
    z.data.astype("<f4", copy=False).tofile(path)
    with open(path + ".meta", "w") as f:
        f.write(f"frames={z.frames} channels={z.channels}\n")


def load_latent(path: str) -> LatentFeatures:
    try:
        with open(path + ".meta") as f:
            meta = dict(tok.split("=") for tok in f.read().split())
        frames, channels = int(meta["frames"]), int(meta["channels"])
    except (ValueError, KeyError) as exc:
        raise FormatError(f"bad latent sidecar {path + '.meta'}: {exc}") from exc
    raw = np.fromfile(path, dtype="<f4")
    if raw.size != frames * channels:
        raise FormatError(
            f"latent file holds {raw.size} floats, sidecar says {frames}x{channels}")
    return LatentFeatures(raw.reshape(frames, channels))


def _as_torch_tc(x):
    """Accept (T, C) numpy or torch; return ((1, C, T) torch f-dtype, was_numpy, dtype)."""
    was_numpy = isinstance(x, np.ndarray)
    t = torch.from_numpy(np.ascontiguousarray(x)) if was_numpy else x
    if t.ndim != 2:
        raise InvalidArgumentError("features must be 2-D (frames, channels)")
    return t.T.contiguous()[None], was_numpy


def conv1d(x, weight, bias=None, dilation: int = 1, padding: int = 0):
    """Cross-correlation over (frames, channels) features.

    weight is (C_out, C_in, K); numpy in gives numpy out, torch in
    gives torch out, dtype preserved.
    """
    t, was_numpy = _as_torch_tc(x)
    w = torch.from_numpy(weight) if isinstance(weight, np.ndarray) else weight
    b = torch.from_numpy(bias) if isinstance(bias, np.ndarray) else bias
    if w.ndim != 3 or t.shape[1] != w.shape[1]:
        raise InvalidArgumentError(
            f"kernel wants {w.shape[1] if w.ndim == 3 else '?'} input channels, "
            f"features have {t.shape[1]}")
    out = F.conv1d(t.to(w.dtype), w, b, dilation=dilation, padding=padding)
    out = out[0].T
    return out.numpy() if was_numpy else out


def conv_transpose1d(x, weight, bias=None, stride: int = 1):
    """Strided transposed convolution upsampling (frames, channels) by
    exactly `stride`; weight is (C_in, C_out, K) with K - stride even."""
    t, was_numpy = _as_torch_tc(x)
    w = torch.from_numpy(weight) if isinstance(weight, np.ndarray) else weight
    b = torch.from_numpy(bias) if isinstance(bias, np.ndarray) else bias
    if w.ndim != 3 or t.shape[1] != w.shape[0]:
        raise InvalidArgumentError(
            f"kernel wants {w.shape[0] if w.ndim == 3 else '?'} input channels, "
            f"features have {t.shape[1]}")
    k = w.shape[2]
    if k < stride or (k - stride) % 2:
        raise InvalidArgumentError(
            f"kernel size {k} incompatible with stride {stride}: need K >= stride, "
            "K - stride even")
    out = F.conv_transpose1d(t.to(w.dtype), w, b, stride=stride,
                             padding=(k - stride) // 2)
    out = out[0].T
    return out.numpy() if was_numpy else out


def _stack_torch(x, config: DecoderConfig, tw: dict):
    """Body on a (1, C, T) float32 tensor: pre-conv, then per stage
    lrelu -> transposed conv -> mean of the residual branches."""
    x = F.conv1d(x, tw["conv_pre.weight"], tw["conv_pre.bias"], padding=3)
    block = 0
    for i, s in enumerate(config.upsample_scales):
        w = tw[f"ups.{i}.weight"]
        x = F.leaky_relu(x, LRELU_SLOPE)
        x = F.conv_transpose1d(x, w, tw[f"ups.{i}.bias"], stride=s,
                               padding=(w.shape[2] - s) // 2)
        acc = None
        for k in config.resblock_kernels:
            h = x
            for m, d in enumerate(config.resblock_dilations):
                xt = F.leaky_relu(h, LRELU_SLOPE)
                xt = F.conv1d(xt, tw[f"resblocks.{block}.convs1.{m}.weight"],
                              tw[f"resblocks.{block}.convs1.{m}.bias"],
                              dilation=d, padding=d * (k - 1) // 2)
                xt = F.leaky_relu(xt, LRELU_SLOPE)
                xt = F.conv1d(xt, tw[f"resblocks.{block}.convs2.{m}.weight"],
                              tw[f"resblocks.{block}.convs2.{m}.bias"],
                              padding=(k - 1) // 2)
                h = h + xt
            acc = h if acc is None else acc + h
            block += 1
        x = acc / len(config.resblock_kernels)
    return x


def resblock_stack(features, config: DecoderConfig, weights: DecoderWeights):
    """Public (frames, channels) wrapper around the convolutional body."""
    t, was_numpy = _as_torch_tc(features)
    if t.shape[1] != config.latent_channels:
        raise InvalidArgumentError(
            f"expected {config.latent_channels} channels, got {t.shape[1]}")
    with torch.no_grad():
        out = _stack_torch(t.to(torch.float32), config, weights.as_torch())[0].T
    return out.numpy() if was_numpy else out


def _head_torch(x, config: DecoderConfig, tw: dict):
    """Project body features to per-band magnitude/phase rasters."""
    x = F.leaky_relu(x, LRELU_SLOPE)
    x = F.pad(x, (3, 3), mode="reflect")
    raw = F.conv1d(x, tw["head.weight"], tw["head.bias"])
    half = config.bands * config.spectrum_bins
    mag = torch.exp(torch.clamp(raw[:, :half], -10.0, 10.0))
    phase = np.pi * torch.sin(raw[:, half:])
    return mag, phase


def mag_phase_head(features, config: DecoderConfig, weights: DecoderWeights):
    """(frames, channels) features -> one MagPhaseSpectrogram per band.

    Output channels come in band-major blocks of fft/2+1 bins, first
    all magnitudes then all phases.
    """
    t, was_numpy = _as_torch_tc(features)
    del was_numpy
    tw = weights.as_torch()
    if t.shape[1] != tw["head.weight"].shape[1]:
        raise InvalidArgumentError(
            f"head wants {tw['head.weight'].shape[1]} channels, got {t.shape[1]}")
    with torch.no_grad():
        mag, phase = _head_torch(t.to(torch.float32), config, tw)
    return _split_bands(mag, phase, config)


def _split_bands(mag, phase, config: DecoderConfig):
    bins = config.spectrum_bins
    mag = mag[0].numpy().astype(np.float64)
    phase = phase[0].numpy().astype(np.float64)
    out = []
    for band in range(config.bands):
        sl = slice(band * bins, (band + 1) * bins)
        out.append(MagPhaseSpectrogram(mag[sl].T, phase[sl].T))
    return out


def forward(z: LatentFeatures, config: DecoderConfig, weights: DecoderWeights) -> Waveform:
    return forward_timed(z, config, weights)[0]


def forward_timed(z: LatentFeatures, config: DecoderConfig, weights: DecoderWeights):
    """Forward pass plus a wall-time split over the stage buckets
    resblocks / head / istft / band_combination (unused stages 0)."""
    check_weights(config, weights)
    if z.channels != config.latent_channels:
        raise InvalidArgumentError(
            f"latent has {z.channels} channels, config wants {config.latent_channels}")
    tw = weights.as_torch()
    times = dict.fromkeys(("resblocks", "head", "istft", "band_combination"), 0.0)

    with torch.no_grad():
        t0 = time.perf_counter()
        x = torch.from_numpy(z.data).T.contiguous()[None]
        x = _stack_torch(x, config, tw)
        t1 = time.perf_counter()
        times["resblocks"] = t1 - t0

        if config.variant is DecoderVariant.FULL_CONV:
            x = F.leaky_relu(x, LRELU_SLOPE)
            x = torch.tanh(F.conv1d(x, tw["conv_post.weight"], tw["conv_post.bias"],
                                    padding=3))
            samples = x[0, 0].numpy().astype(np.float64)
            times["head"] = time.perf_counter() - t1
            return Waveform(samples, config.sample_rate), times

        mag, phase = _head_torch(x, config, tw)
        spectra = _split_bands(mag, phase, config)
        t2 = time.perf_counter()
        times["head"] = t2 - t1

    params = config.istft_params()
    frames = spectra[0].frames
    band_len = config.istft_hop * frames
    rows = np.empty((config.bands, band_len))
    for band, spec in enumerate(spectra):
        rows[band] = istft(spec, params, target_len=band_len).samples
    t3 = time.perf_counter()
    times["istft"] = t3 - t2

    if config.variant is DecoderVariant.ISTFT:
        return Waveform(rows[0], config.sample_rate), times

    if config.variant is DecoderVariant.MULTI_BAND_ISTFT:
        bank = synthesis_bank(config.bands, config.ms_filter_taps)
        filters = config.bands * bank.synthesis
    else:
        filters = weights.tensors["stream_filter.weight"].astype(np.float64)
    samples = combine_bands(rows, filters)
    times["band_combination"] = time.perf_counter() - t3
    return Waveform(samples, config.sample_rate), times


def count_conv_macs(config: DecoderConfig, frames: int) -> int:
    """Static multiply-accumulate count of every convolution in forward
    (body, output head or post conv, and band recombination); the
    iSTFT itself is transform work, not conv work, and is excluded."""
    if frames < 1:
        raise InvalidArgumentError("frames must be >= 1")
    macs = 0
    c_in = config.initial_channels
    t = frames
    macs += t * c_in * config.latent_channels * 7
    for s in config.upsample_scales:
        c_out = c_in // 2
        macs += t * c_in * c_out * 2 * s
        t *= s
        for k in config.resblock_kernels:
            macs += 2 * len(config.resblock_dilations) * t * c_out * c_out * k
        c_in = c_out
    if config.variant is DecoderVariant.FULL_CONV:
        macs += t * c_in * 1 * 7
        return macs
    macs += t * c_in * (config.bands * 2 * config.spectrum_bins) * 7
    if config.variant is not DecoderVariant.ISTFT:
        macs += config.bands * config.ms_filter_taps * (256 * frames)
    return macs
