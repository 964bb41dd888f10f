"""Pseudo-QMF filter bank: Kaiser-windowed sinc prototype, cosine
modulation with alternating +-pi/4 phases, decimating analysis and
zero-stuffing synthesis, plus a grid search for the prototype cutoff.

Band k of the analysis bank sits near omega = pi*(k+0.5)/N; the
synthesis bank mirrors it so the cascade approximates a pure delay of
taps-1 samples (aliasing between adjacent bands cancels, hence
"pseudo").
"""

from dataclasses import dataclass, field

import numpy as np

from .dsp import Waveform
from .errors import FormatError, InvalidArgumentError


@dataclass(frozen=True)
class PrototypeSpec:
    """Lowpass prototype parameters for an N-band bank."""

    taps: int = 63
    bands: int = 4
    cutoff_ratio: float = 0.142
    kaiser_beta: float = 9.0

    def __post_init__(self):
        if self.taps < 1 or self.taps % 2 == 0:
            raise InvalidArgumentError("taps must be odd and positive")
        if self.bands < 1:
            raise InvalidArgumentError("bands must be >= 1")
        if self.taps < 2 * self.bands:
            raise InvalidArgumentError("taps must be >= 2*bands")
        if not 0.0 < self.cutoff_ratio < 0.5:
            raise InvalidArgumentError("cutoff_ratio must lie in (0, 0.5)")
        if self.kaiser_beta < 0.0:
            raise InvalidArgumentError("kaiser_beta must be non-negative")


def design_prototype(spec: PrototypeSpec) -> np.ndarray:
    """Windowed-sinc lowpass, cutoff in units where 0.5 is Nyquist.

    p[n] = cutoff * sinc(cutoff*(n - (taps-1)/2)) * kaiser(n; beta),
    so the center tap equals the cutoff ratio and the zero-frequency
    response is close to 1.
    """
    m = np.arange(spec.taps) - (spec.taps - 1) / 2
    return spec.cutoff_ratio * np.sinc(spec.cutoff_ratio * m) * np.kaiser(spec.taps, spec.kaiser_beta)


@dataclass(frozen=True)
class FilterBank:
    """Matched analysis/synthesis banks derived from one prototype.

    cutoff_ratio and kaiser_beta are carried for serialization only and
    stay NaN when the bank was built from a raw prototype vector.
    """

    prototype: np.ndarray = field(repr=False)
    analysis: np.ndarray = field(repr=False)
    synthesis: np.ndarray = field(repr=False)
    bands: int
    delay: int
    cutoff_ratio: float = float("nan")
    kaiser_beta: float = float("nan")

    def __post_init__(self):
        taps = len(self.prototype)
        if self.analysis.shape != (self.bands, taps) or self.synthesis.shape != (self.bands, taps):
            raise InvalidArgumentError("filter matrices must be bands x taps")
        if self.delay != taps - 1:
            raise InvalidArgumentError("delay must equal taps - 1")
        for a in (self.prototype, self.analysis, self.synthesis):
            if not np.all(np.isfinite(a)):
                raise InvalidArgumentError("filter coefficients must be finite")

    @property
    def taps(self) -> int:
        return len(self.prototype)


def build_filterbank(
    prototype: np.ndarray,
    bands: int,
    cutoff_ratio: float = float("nan"),
    kaiser_beta: float = float("nan"),
) -> FilterBank:
    """Cosine-modulate a prototype into N analysis/synthesis filters.

    h_k[n] = 2 p[n] cos((pi/N)(k+0.5)(n-(taps-1)/2) + (-1)^k pi/4)
    g_k[n] = same with the pi/4 term negated; adjacent bands take
    opposite phase offsets, which is what cancels their aliasing.
    """
    p = np.asarray(prototype, dtype=np.float64)
    if p.ndim != 1 or len(p) == 0:
        raise InvalidArgumentError("prototype must be a non-empty vector")
    if bands < 1:
        raise InvalidArgumentError("bands must be >= 1")
    taps = len(p)
    m = np.arange(taps) - (taps - 1) / 2
    k = np.arange(bands)[:, None]
    phase = (np.pi / bands) * (k + 0.5) * m[None, :]
    offset = ((-1.0) ** k) * (np.pi / 4)
    analysis = 2.0 * p * np.cos(phase + offset)
    synthesis = 2.0 * p * np.cos(phase - offset)
    return FilterBank(p, analysis, synthesis, bands, taps - 1, cutoff_ratio, kaiser_beta)


def make_bank(spec: PrototypeSpec) -> FilterBank:
    """design_prototype + build_filterbank with metadata attached."""
    return build_filterbank(design_prototype(spec), spec.bands,
                            spec.cutoff_ratio, spec.kaiser_beta)


@dataclass
class SubbandSignals:
    """Decimated band signals, shape (N, L_sub), at rate/N each."""

    bands: np.ndarray
    band_rate: float

    def __post_init__(self):
        self.bands = np.asarray(self.bands, dtype=np.float64)
        if self.bands.ndim != 2:
            raise InvalidArgumentError("bands must be a 2-D array")
        if not np.all(np.isfinite(self.bands)):
            raise InvalidArgumentError("bands contain non-finite values")
        if not self.band_rate > 0:
            raise InvalidArgumentError("band_rate must be positive")

    @property
    def count(self) -> int:
        return self.bands.shape[0]

    @property
    def length(self) -> int:
        return self.bands.shape[1]


def causal_fir(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Zero-padded convolution truncated to len(x); group delay stays in band."""
    return np.convolve(x, taps)[: len(x)]


def zero_stuff(band: np.ndarray, factor: int) -> np.ndarray:
    """Insert factor-1 zeros after every sample."""
    up = np.zeros(len(band) * factor, dtype=np.float64)
    up[::factor] = band
    return up


def combine_bands(bands: np.ndarray, filters: np.ndarray) -> np.ndarray:
    """Zero-stuff each band xN, filter with its row of `filters`, sum.

    This is the synthesis-side recombination; callers supply filters
    with any gain already folded in (the fixed bank uses N*g_k, a
    trained combiner supplies its own weights).
    """
    bands = np.asarray(bands, dtype=np.float64)
    filters = np.asarray(filters, dtype=np.float64)
    if bands.ndim != 2 or filters.ndim != 2 or bands.shape[0] != filters.shape[0]:
        raise InvalidArgumentError("bands and filters must both have N rows")
    n = bands.shape[0]
    out = np.zeros(bands.shape[1] * n, dtype=np.float64)
    for k in range(n):
        out += causal_fir(zero_stuff(bands[k], n), filters[k])
    return out


def analyze(x: Waveform, bank: FilterBank) -> SubbandSignals:
    """Split a waveform into N decimated bands.

    The input is zero-padded to a multiple of N so every band has
    ceil(len/N) samples.
    """
    sig = x.samples
    if len(sig) == 0:
        raise InvalidArgumentError("cannot analyze an empty waveform")
    n = bank.bands
    rem = (-len(sig)) % n
    if rem:
        sig = np.pad(sig, (0, rem))
    rows = np.stack([causal_fir(sig, bank.analysis[k])[::n] for k in range(n)])
    return SubbandSignals(rows, x.sample_rate / n)


def synthesize(s: SubbandSignals, bank: FilterBank) -> Waveform:
    """Recombine decimated bands into a full-rate waveform.

    Zero-stuffing spreads each band back to the full rate (attenuating
    it by 1/N); the synthesis filters are scaled by N to restore unity
    cascade gain.
    """
    if s.count != bank.bands:
        raise InvalidArgumentError(
            f"expected {bank.bands} bands, got {s.count}"
        )
    out = combine_bands(s.bands, bank.bands * bank.synthesis)
    return Waveform(out, s.band_rate * bank.bands)


def reconstruction_error_db(x: Waveform, bank: FilterBank) -> float:
    """20*log10 of the relative l2 error of analyze+synthesize against
    the input delayed by taps-1 samples."""
    y = synthesize(analyze(x, bank), bank).samples
    d = bank.delay
    n = min(len(x.samples) - d, len(y) - d)
    if n <= 0:
        raise InvalidArgumentError("input too short to measure past the filter delay")
    err = y[d: d + n] - x.samples[:n]
    return 20.0 * np.log10(np.linalg.norm(err) / np.linalg.norm(x.samples[:n]))


def optimize_cutoff(taps: int = 63, bands: int = 4, beta: float = 9.0) -> float:
    """Grid-search the prototype cutoff minimizing impulse reconstruction error.

    The grid spans 0.5x to 1.9x the ideal band edge 1/(2N) in steps of
    1e-3 (clipped below the 0.5 Nyquist bound); the objective is the l2
    error of analyze+synthesize on a unit impulse against a pure
    taps-1 delay.  Deterministic for fixed arguments.
    """
    ideal = 1.0 / (2 * bands)
    grid = np.arange(0.5 * ideal, 1.9 * ideal + 1e-12, 1e-3)
    grid = np.clip(grid, 1e-3, 0.499)
    impulse = np.zeros(8 * taps)
    impulse[0] = 1.0
    best_cut, best_err = None, None
    for cut in grid:
        bank = make_bank(PrototypeSpec(taps, bands, float(cut), beta))
        y = synthesize(analyze(Waveform(impulse, 22050.0), bank), bank).samples
        ref = np.zeros_like(y)
        ref[taps - 1] = 1.0
        err = float(np.linalg.norm(y - ref))
        if best_err is None or err < best_err:
            best_cut, best_err = float(cut), err
    return best_cut


def save_bank(bank: FilterBank, path: str) -> None:
    """Write a bank as text: header `pqmf v1 <taps> <N> <cutoff> <beta>`
    then prototype, analysis rows, synthesis rows, one vector per line."""
    lines = [f"pqmf v1 {bank.taps} {bank.bands} {bank.cutoff_ratio!r} {bank.kaiser_beta!r}"]
    for vec in (bank.prototype, *bank.analysis, *bank.synthesis):
        lines.append(" ".join(f"{v:.17g}" for v in vec))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_bank(path: str) -> FilterBank:
    """Inverse of save_bank; malformed files raise FormatError."""
    with open(path) as f:
        text = f.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty bank file")
    head = lines[0].split()
    if len(head) != 6 or head[0] != "pqmf" or head[1] != "v1":
        raise FormatError("bad bank header")
    try:
        taps, bands = int(head[2]), int(head[3])
        cutoff, beta = float(head[4]), float(head[5])
    except ValueError as exc:
        raise FormatError(f"bad bank header field: {exc}") from exc
    if taps < 1 or bands < 1:
        raise FormatError("bank header sizes must be positive")
    if len(lines) != 1 + 1 + 2 * bands:
        raise FormatError(f"expected {1 + 2 * bands} coefficient rows, got {len(lines) - 1}")
    rows = []
    for ln in lines[1:]:
        try:
            vec = np.array([float(tok) for tok in ln.split()], dtype=np.float64)
        except ValueError as exc:
            raise FormatError(f"bad coefficient: {exc}") from exc
        if len(vec) != taps:
            raise FormatError(f"row has {len(vec)} coefficients, expected {taps}")
        rows.append(vec)
    prototype = rows[0]
    analysis = np.stack(rows[1: 1 + bands])
    synthesis = np.stack(rows[1 + bands:])
    try:
        return FilterBank(prototype, analysis, synthesis, bands, taps - 1, cutoff, beta)
    except InvalidArgumentError as exc:
        raise FormatError(str(exc)) from exc
