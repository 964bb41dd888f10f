"""Spectral-convergence and log-magnitude STFT losses, averaged over a
set of analysis resolutions, and the sub-band variant that applies the
same measure to each pseudo-QMF band."""

from dataclasses import dataclass

import numpy as np

from .dsp import FrameParams, Waveform, stft
from .errors import InvalidArgumentError
from .pqmf import FilterBank, analyze

_CLAMP = 1e-7  # floor inside log and norm denominators; keeps silence finite

# fft, win, hop per resolution
DEFAULT_RESOLUTIONS = ((683, 300, 60), (384, 150, 30), (171, 60, 10))


@dataclass(frozen=True)
class ResolutionSet:
    """Hann-window analysis settings, one (fft_size, win_length, hop) each."""

    triples: tuple = DEFAULT_RESOLUTIONS

    def __post_init__(self):
        if not self.triples:
            raise InvalidArgumentError("need at least one resolution")
        object.__setattr__(self, "triples", tuple(tuple(int(v) for v in t) for t in self.triples))
        for t in self.triples:
            if len(t) != 3:
                raise InvalidArgumentError("each resolution is (fft, win, hop)")
            fft, win, hop = t
            if not (0 < win <= fft and 0 < hop <= win):
                raise InvalidArgumentError(f"bad resolution {t}: need hop <= win <= fft")

    def frame_params(self):
        return [FrameParams.hann(fft, hop, win) for fft, win, hop in self.triples]


@dataclass
class LossReport:
    """sc/mag components, their sum, and the per-resolution breakdown.

    per_band is filled only by the sub-band variant (band-averaged
    values go in the top-level fields there).
    """

    spectral_convergence: float
    log_magnitude: float
    total: float
    per_resolution: list
    per_band: list | None = None

    def __post_init__(self):
        vals = [self.spectral_convergence, self.log_magnitude, self.total]
        for sc, mag in self.per_resolution:
            vals += [sc, mag]
        for sc, mag in self.per_band or []:
            vals += [sc, mag]
        if not all(np.isfinite(v) for v in vals):
            raise InvalidArgumentError("loss report contains non-finite values")
        if self.spectral_convergence < 0 or self.log_magnitude < 0:
            raise InvalidArgumentError("loss components must be non-negative")

    def to_text(self) -> str:
        """Flat key=value block with a stable key order."""
        lines = [
            f"spectral_convergence={self.spectral_convergence!r}",
            f"log_magnitude={self.log_magnitude!r}",
            f"total={self.total!r}",
        ]
        for i, (sc, mag) in enumerate(self.per_resolution):
            lines.append(f"res{i}_sc={sc!r}")
            lines.append(f"res{i}_mag={mag!r}")
        for k, (sc, mag) in enumerate(self.per_band or []):
            lines.append(f"band{k}_sc={sc!r}")
            lines.append(f"band{k}_mag={mag!r}")
        return "\n".join(lines)


def spectral_convergence(ref_mag: np.ndarray, gen_mag: np.ndarray) -> float:
    """Frobenius-norm relative magnitude error, ref in the denominator."""
    ref_mag = np.asarray(ref_mag, dtype=np.float64)
    gen_mag = np.asarray(gen_mag, dtype=np.float64)
    if ref_mag.shape != gen_mag.shape:
        raise InvalidArgumentError("magnitude shapes must match")
    if ref_mag.size == 0:
        return 0.0
    num = np.linalg.norm(ref_mag - gen_mag)
    return float(num / max(np.linalg.norm(ref_mag), _CLAMP))


def log_stft_magnitude(ref_mag: np.ndarray, gen_mag: np.ndarray) -> float:
    """Mean absolute log-magnitude distance with a 1e-7 clamp."""
    ref_mag = np.asarray(ref_mag, dtype=np.float64)
    gen_mag = np.asarray(gen_mag, dtype=np.float64)
    if ref_mag.shape != gen_mag.shape:
        raise InvalidArgumentError("magnitude shapes must match")
    if ref_mag.size == 0:
        return 0.0
    diff = np.log(np.maximum(ref_mag, _CLAMP)) - np.log(np.maximum(gen_mag, _CLAMP))
    return float(np.mean(np.abs(diff)))


def _magnitudes(x: Waveform, params: FrameParams) -> np.ndarray:
    return np.abs(stft(x, params).data)


def multires_stft_loss(x: Waveform, x_hat: Waveform,
                       res: ResolutionSet = ResolutionSet()) -> LossReport:
    """sc + log-mag per resolution (Hann, no center pad), averaged.

    x is the reference; the measure is directional.
    """
    if len(x) != len(x_hat):
        raise InvalidArgumentError("signals must have equal length; trim or pad first")
    per_res = []
    for params in res.frame_params():
        ref = _magnitudes(x, params)
        gen = _magnitudes(x_hat, params)
        per_res.append((spectral_convergence(ref, gen), log_stft_magnitude(ref, gen)))
    sc = float(np.mean([t[0] for t in per_res]))
    mag = float(np.mean([t[1] for t in per_res]))
    return LossReport(sc, mag, sc + mag, per_res)


def subband_multires_loss(x: Waveform, x_hat: Waveform, bank: FilterBank,
                          res: ResolutionSet = ResolutionSet()) -> LossReport:
    """Multi-resolution loss applied per pseudo-QMF band, then band-averaged.

    Both signals go through the same analysis bank, so the measure sees
    the decimated band signals a multi-band decoder actually produces.
    """
    if len(x) != len(x_hat):
        raise InvalidArgumentError("signals must have equal length; trim or pad first")
    sb_ref = analyze(x, bank)
    sb_gen = analyze(x_hat, bank)
    band_reports = []
    for k in range(bank.bands):
        band_reports.append(multires_stft_loss(
            Waveform(sb_ref.bands[k], sb_ref.band_rate),
            Waveform(sb_gen.bands[k], sb_gen.band_rate),
            res,
        ))
    sc = float(np.mean([r.spectral_convergence for r in band_reports]))
    mag = float(np.mean([r.log_magnitude for r in band_reports]))
    n_res = len(res.triples)
    per_res = [
        (
            float(np.mean([r.per_resolution[i][0] for r in band_reports])),
            float(np.mean([r.per_resolution[i][1] for r in band_reports])),
        )
        for i in range(n_res)
    ]
    per_band = [(r.spectral_convergence, r.log_magnitude) for r in band_reports]
    return LossReport(sc, mag, sc + mag, per_res, per_band)
