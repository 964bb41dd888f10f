"""Windows, real FFT with a direct-DFT fallback, STFT analysis, and
overlap-add iSTFT synthesis.

All functions are pure and operate on float64 unless the caller passes
narrower dtypes explicitly.  Frame layout is (frames, bins) everywhere.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import InvalidArgumentError

_WIN_SUM_FLOOR = 1e-8  # floor for the squared-window envelope before division


def hann_window(length: int) -> np.ndarray:
    """Periodic Hann window w[n] = 0.5 - 0.5*cos(2*pi*n/length)."""
    if length < 1:
        raise InvalidArgumentError("window length must be >= 1")
    n = np.arange(length)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / length)


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@lru_cache(maxsize=16)
def _dft_matrix(n: int) -> np.ndarray:
    # bins x n forward kernel, e^{-j 2 pi k m / n}
    k = np.arange(n // 2 + 1)
    m = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, m) / n)


@lru_cache(maxsize=16)
def _idft_matrix(n: int) -> np.ndarray:
    # n x bins inverse kernel with Hermitian bin weights folded in
    bins = n // 2 + 1
    k = np.arange(bins)
    m = np.arange(n)
    weights = np.full(bins, 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
    return np.exp(2j * np.pi * np.outer(m, k) / n) * weights / n


def rfft(frame: np.ndarray, allow_dft: bool = True) -> np.ndarray:
    """Forward real transform; length n/2+1 complex bins.

    Power-of-two sizes go through the FFT.  Other sizes (the loss
    resolutions use 683, 384 and 171) take a direct O(n^2) DFT unless
    ``allow_dft`` is off, in which case they are rejected.
    """
    frame = np.asarray(frame)
    n = frame.shape[-1]
    if n == 0:
        raise InvalidArgumentError("rfft of an empty frame")
    if _is_pow2(n):
        return np.fft.rfft(frame)
    if not allow_dft:
        raise InvalidArgumentError(f"frame length {n} is not a power of two")
    return frame @ _dft_matrix(n).T


def irfft(spectrum: np.ndarray, n: int, allow_dft: bool = True) -> np.ndarray:
    """Inverse of :func:`rfft` back to n real samples."""
    spectrum = np.asarray(spectrum)
    if spectrum.shape[-1] != n // 2 + 1:
        raise InvalidArgumentError(
            f"expected {n // 2 + 1} bins for length {n}, got {spectrum.shape[-1]}"
        )
    if _is_pow2(n):
        return np.fft.irfft(spectrum, n=n)
    if not allow_dft:
        raise InvalidArgumentError(f"length {n} is not a power of two")
    return np.real(spectrum @ _idft_matrix(n).T)


@dataclass(frozen=True)
class FrameParams:
    """STFT framing parameters: transform size, hop, and analysis window."""

    fft_size: int
    hop: int
    win_length: int
    window: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.fft_size < 1 or self.hop < 1 or self.win_length < 1:
            raise InvalidArgumentError("fft_size, hop and win_length must be positive")
        if self.win_length > self.fft_size:
            raise InvalidArgumentError("win_length must not exceed fft_size")
        if self.hop > self.win_length:
            raise InvalidArgumentError("hop must not exceed win_length")
        w = np.asarray(self.window, dtype=np.float64)
        if w.shape != (self.win_length,):
            raise InvalidArgumentError("window length must equal win_length")
        if w.min() < -1e-12 or w.max() > 1.0 + 1e-12:
            raise InvalidArgumentError("window values must lie in [0, 1]")
        # symmetry in the periodic sense: w[n] == w[(L-n) mod L]
        if not np.allclose(w, w[(-np.arange(self.win_length)) % self.win_length],
                           atol=1e-12, rtol=0.0):
            raise InvalidArgumentError("window must be symmetric")
        object.__setattr__(self, "window", w)

    @property
    def bins(self) -> int:
        return self.fft_size // 2 + 1

    @classmethod
    def hann(cls, fft_size: int, hop: int, win_length: int | None = None) -> "FrameParams":
        if win_length is None:
            win_length = fft_size
        return cls(fft_size, hop, win_length, hann_window(win_length))


@dataclass
class Waveform:
    """Mono sample sequence with its sample rate."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise InvalidArgumentError("waveform samples must be 1-D")
        if not np.all(np.isfinite(self.samples)):
            raise InvalidArgumentError("waveform contains non-finite samples")
        if not self.sample_rate > 0:
            raise InvalidArgumentError("sample_rate must be positive")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class ComplexSpectrogram:
    """Per-frame complex bins, shape (frames, fft_size//2+1)."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.ndim != 2:
            raise InvalidArgumentError("spectrogram data must be frames x bins")
        if not np.all(np.isfinite(self.data)):
            raise InvalidArgumentError("spectrogram contains non-finite values")

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def bins(self) -> int:
        return self.data.shape[1]


@dataclass
class MagPhaseSpectrogram:
    """Per-frame magnitude and phase, both shape (frames, bins)."""

    magnitude: np.ndarray
    phase: np.ndarray

    def __post_init__(self):
        self.magnitude = np.asarray(self.magnitude, dtype=np.float64)
        self.phase = np.asarray(self.phase, dtype=np.float64)
        if self.magnitude.shape != self.phase.shape or self.magnitude.ndim != 2:
            raise InvalidArgumentError("magnitude and phase must share a frames x bins shape")
        if self.magnitude.size and self.magnitude.min() < 0:
            raise InvalidArgumentError("magnitude must be non-negative")
        if not (np.all(np.isfinite(self.magnitude)) and np.all(np.isfinite(self.phase))):
            raise InvalidArgumentError("spectrogram contains non-finite values")

    @property
    def frames(self) -> int:
        return self.magnitude.shape[0]

    @property
    def bins(self) -> int:
        return self.magnitude.shape[1]


def to_magphase(spec: ComplexSpectrogram) -> MagPhaseSpectrogram:
    """Split a complex spectrogram into |z| and atan2 phase."""
    return MagPhaseSpectrogram(np.abs(spec.data), np.angle(spec.data))


def frame_count(num_samples: int, params: FrameParams) -> int:
    if num_samples < params.win_length:
        return 0
    return 1 + (num_samples - params.win_length) // params.hop


def stft(x: Waveform, params: FrameParams, center_pad: bool = False) -> ComplexSpectrogram:
    """Windowed short-time transform.

    Frames are win_length-sample slices taken every hop samples,
    multiplied by the window and zero-padded on the right up to
    fft_size.  With ``center_pad`` the signal is reflect-padded by
    fft_size//2 on both ends first.  An input too short to fill one
    frame yields an empty (0-frame) spectrogram.
    """
    sig = x.samples
    if center_pad and len(sig) > 0:
        pad = params.fft_size // 2
        sig = np.pad(sig, pad, mode="reflect")
    frames = frame_count(len(sig), params)
    if frames == 0:
        return ComplexSpectrogram(np.zeros((0, params.bins), dtype=np.complex128))
    idx = params.hop * np.arange(frames)[:, None] + np.arange(params.win_length)[None, :]
    mat = sig[idx] * params.window
    if params.win_length < params.fft_size:
        mat = np.pad(mat, ((0, 0), (0, params.fft_size - params.win_length)))
    if _is_pow2(params.fft_size):
        data = np.fft.rfft(mat, axis=1)
    else:
        data = mat @ _dft_matrix(params.fft_size).T
    return ComplexSpectrogram(data)


def window_sum_envelope(params: FrameParams, frames: int) -> np.ndarray:
    """Squared-window overlap-add envelope for a given frame count."""
    length = (frames - 1) * params.hop + params.win_length if frames > 0 else 0
    env = np.zeros(length)
    wsq = params.window ** 2
    for i in range(frames):
        env[i * params.hop: i * params.hop + params.win_length] += wsq
    return env


def cola_min(params: FrameParams, frames: int = 16) -> float:
    """Minimum of the squared-window envelope over the interior samples.

    A value bounded away from zero means overlap-add normalization is
    well conditioned for this hop/window pair.
    """
    env = window_sum_envelope(params, frames)
    interior = env[params.win_length: -params.win_length]
    if interior.size == 0:
        raise InvalidArgumentError("too few frames to expose an interior region")
    return float(interior.min())


def istft(
    s: MagPhaseSpectrogram,
    params: FrameParams,
    target_len: int | None = None,
    sample_rate: float = 22050.0,
) -> Waveform:
    """Overlap-add inverse transform of magnitude*exp(j*phase).

    Each frame is inverse-transformed, windowed, and accumulated at the
    hop spacing; the result is divided by the summed squared-window
    envelope (floored at 1e-8).  ``target_len`` trims or zero-pads the
    output on the right.
    """
    if s.bins != params.bins:
        raise InvalidArgumentError(
            f"spectrogram has {s.bins} bins but params imply {params.bins}"
        )
    frames = s.frames
    if frames == 0:
        out = np.zeros(0)
    else:
        spec = s.magnitude * np.exp(1j * s.phase)
        if _is_pow2(params.fft_size):
            time_frames = np.fft.irfft(spec, n=params.fft_size, axis=1)
        else:
            time_frames = np.real(spec @ _idft_matrix(params.fft_size).T)
        time_frames = time_frames[:, : params.win_length] * params.window
        length = (frames - 1) * params.hop + params.win_length
        out = np.zeros(length)
        if params.win_length % params.hop == 0:
            # all kernel configs divide evenly; vectorized block accumulation
            ratio = params.win_length // params.hop
            blocks = np.zeros((frames + ratio - 1, params.hop))
            chunk = time_frames.reshape(frames, ratio, params.hop)
            for c in range(ratio):
                blocks[c: c + frames] += chunk[:, c, :]
            out = blocks.reshape(-1)[:length]
        else:
            for i in range(frames):
                out[i * params.hop: i * params.hop + params.win_length] += time_frames[i]
        env = window_sum_envelope(params, frames)
        out = out / np.maximum(env, _WIN_SUM_FLOOR)
    if target_len is not None:
        if target_len < len(out):
            out = out[:target_len]
        elif target_len > len(out):
            out = np.pad(out, (0, target_len - len(out)))
    return Waveform(out, sample_rate)
