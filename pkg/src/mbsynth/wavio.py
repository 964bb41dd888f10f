"""Mono 16-bit PCM WAV reading and writing on top of the stdlib wave
module.  Samples map to [-1, 1) via /32768 on read and are rounded and
clamped on write, so a round trip moves each sample by at most one
quantization step."""

import wave

import numpy as np

from .dsp import Waveform
from .errors import FormatError


def read_wav(path: str) -> Waveform:
    """Read a mono 16-bit PCM file; anything else raises FormatError."""
    try:
        with wave.open(path, "rb") as f:
            channels = f.getnchannels()
            if channels != 1:
                raise FormatError(f"expected mono audio, file has {channels} channels")
            if f.getsampwidth() != 2:
                raise FormatError(f"expected 16-bit PCM, got {8 * f.getsampwidth()}-bit")
            if f.getcomptype() != "NONE":
                raise FormatError(f"expected uncompressed PCM, got {f.getcomptype()}")
            rate = f.getframerate()
            raw = f.readframes(f.getnframes())
    except wave.Error as exc:
        raise FormatError(f"not a readable WAV file: {exc}") from exc
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return Waveform(samples, float(rate))


def write_wav(x: Waveform, path: str) -> None:
    """Write as mono 16-bit PCM at the waveform's sample rate."""
    pcm = np.clip(np.round(x.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(path, "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(int(round(x.sample_rate)))
        f.writeframes(pcm.tobytes())
