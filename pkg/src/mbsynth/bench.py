"""Single-thread RTF measurement across decoder variants.

RTF = forward wall-time / synthesized duration, median over measured
runs after warmup.  Wall clocks are machine-specific, so the report
also carries a static conv multiply-accumulate count per variant; the
variant ordering must agree on both measures.
"""

import os
import platform
import statistics
import sys
import time
from dataclasses import dataclass

import numpy as np
import torch
from threadpoolctl import threadpool_limits

from .decoder import (
    DecoderConfig,
    DecoderVariant,
    DecoderWeights,
    check_weights,
    count_conv_macs,
    count_parameters,
    forward_timed,
    init_random,
    random_latent,
)
from .errors import FormatError, InvalidArgumentError

SAMPLE_RATE = 22050.0
STAGES = ("resblocks", "head", "istft", "band_combination")

# published single-thread full-model RTFs for the four architectures,
# shown in the report footer for context (not reproduced here; only the
# ordering is)
REFERENCE_RTFS = {"vits": 0.27, "istft": 0.15, "mb": 0.078, "ms": 0.066}


@dataclass(frozen=True)
class BenchSpec:
    """What to run: variants, per-run duration, repetition counts."""

    variants: tuple
    seconds: float = 10.0
    warmup: int = 3
    runs: int = 10
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "variants", tuple(self.variants))
        if not self.variants:
            raise InvalidArgumentError("need at least one variant config")
        if not all(isinstance(c, DecoderConfig) for c in self.variants):
            raise InvalidArgumentError("variants must be DecoderConfig instances")
        if self.runs < 5:
            raise InvalidArgumentError("need at least 5 measured runs")
        if self.seconds < 1.0:
            raise InvalidArgumentError("per-run duration must be >= 1 s")
        if self.warmup < 0 or self.threads < 1:
            raise InvalidArgumentError("warmup must be >= 0 and threads >= 1")

    @property
    def frames(self) -> int:
        return int(np.ceil(self.seconds * SAMPLE_RATE / 256.0))


@dataclass
class VariantResult:
    """Timing statistics for one decoder variant."""

    name: str
    rtf_median: float
    rtf_min: float
    rtf_max: float
    stage_seconds: dict
    wall_mean: float
    parameters: int
    conv_macs: int
    samples: int

    def __post_init__(self):
        if not 0 < self.rtf_min <= self.rtf_median <= self.rtf_max:
            raise InvalidArgumentError("RTF statistics must be positive and ordered")
        covered = sum(self.stage_seconds.values())
        if covered > self.wall_mean * 1.001:
            raise InvalidArgumentError("stage times exceed measured wall time")

    def stage_fractions(self) -> dict:
        return {k: v / self.wall_mean for k, v in self.stage_seconds.items()}


def machine_descriptor() -> str:
    return (f"{platform.platform()} {platform.machine()}"
            f" cpus={torch.get_num_threads()}/{os.cpu_count()}"
            f" python={sys.version.split()[0]}"
            f" torch={torch.__version__} numpy={np.__version__}")


def measure_rtf(config: DecoderConfig, weights: DecoderWeights,
                spec: BenchSpec) -> VariantResult:
    """Median/min/max RTF of forward over spec.runs measured runs.

    Warmup runs are executed and discarded; stage times are averaged
    over the measured runs only.  Thread pools (BLAS and torch) are
    pinned to spec.threads for the duration.
    """
    try:
        check_weights(config, weights)
    except FormatError as exc:
        raise InvalidArgumentError(str(exc)) from exc
    z = random_latent(config, spec.seed, spec.frames)
    duration = 256 * spec.frames / SAMPLE_RATE
    rtfs = []
    stage_totals = dict.fromkeys(STAGES, 0.0)
    walls = []
    prev_threads = torch.get_num_threads()
    with threadpool_limits(limits=spec.threads):
        torch.set_num_threads(spec.threads)
        try:
            for _ in range(spec.warmup):
                forward_timed(z, config, weights)
            for _ in range(spec.runs):
                t0 = time.perf_counter()
                out, stages = forward_timed(z, config, weights)
                wall = time.perf_counter() - t0
                walls.append(wall)
                rtfs.append(wall / duration)
                for k in STAGES:
                    stage_totals[k] += stages[k]
        finally:
            torch.set_num_threads(prev_threads)
    samples = len(out)
    return VariantResult(
        name=config.variant.value,
        rtf_median=statistics.median(rtfs),
        rtf_min=min(rtfs),
        rtf_max=max(rtfs),
        stage_seconds={k: v / spec.runs for k, v in stage_totals.items()},
        wall_mean=sum(walls) / len(walls),
        parameters=count_parameters(config),
        conv_macs=count_conv_macs(config, spec.frames),
        samples=samples,
    )


# pairwise median-RTF constraints behind the verdict: (slower, faster)
_ORDERING = (("vits", "istft"), ("istft", "mb"), ("istft", "ms"))


def ordering_verdict(results) -> bool | None:
    """True/False for the slow-to-fast variant ordering, None when
    fewer than one comparable pair was measured."""
    med = {r.name: r.rtf_median for r in results}
    applicable = [(a, b) for a, b in _ORDERING if a in med and b in med]
    if not applicable:
        return None
    return all(med[a] > med[b] for a, b in applicable)


@dataclass
class BenchReport:
    results: list
    machine: str
    verdict: bool | None

    def table_text(self) -> str:
        header = (f"{'variant':<8} {'params':>10} {'gmacs':>8} {'rtf_med':>8} "
                  f"{'rtf_min':>8} {'rtf_max':>8}  "
                  + " ".join(f"{s:>10}" for s in STAGES))
        lines = [header, "-" * len(header)]
        for r in self.results:
            frac = r.stage_fractions()
            lines.append(
                f"{r.name:<8} {r.parameters:>10} {r.conv_macs / 1e9:>8.2f} "
                f"{r.rtf_median:>8.4f} {r.rtf_min:>8.4f} {r.rtf_max:>8.4f}  "
                + " ".join(f"{frac[s]:>9.1%}" for s in STAGES))
        if self.verdict is not None:
            lines.append(f"ordering (vits > istft > mb,ms): "
                         f"{'pass' if self.verdict else 'FAIL'}")
        ref = " ".join(f"{k}={v}" for k, v in REFERENCE_RTFS.items())
        lines.append(f"reference full-model single-thread RTFs: {ref}")
        lines.append(f"machine: {self.machine}")
        return "\n".join(lines)

    def kv_text(self) -> str:
        lines = [f"machine={self.machine}"]
        if self.verdict is not None:
            lines.append(f"ordering_pass={str(self.verdict).lower()}")
        for r in self.results:
            p = r.name
            lines.append(f"{p}_rtf_median={r.rtf_median!r}")
            lines.append(f"{p}_rtf_min={r.rtf_min!r}")
            lines.append(f"{p}_rtf_max={r.rtf_max!r}")
            lines.append(f"{p}_parameters={r.parameters}")
            lines.append(f"{p}_conv_macs={r.conv_macs}")
            for s in STAGES:
                lines.append(f"{p}_stage_{s}={r.stage_seconds[s]!r}")
        for k, v in REFERENCE_RTFS.items():
            lines.append(f"reference_{k}_rtf={v}")
        return "\n".join(lines)


def compare_variants(spec: BenchSpec) -> BenchReport:
    """Run measure_rtf for every variant in the spec with a shared seed
    and attach the ordering verdict (None if only one variant ran)."""
    results = []
    for config in spec.variants:
        weights = init_random(config, spec.seed)
        results.append(measure_rtf(config, weights, spec))
    verdict = ordering_verdict(results) if len(results) >= 2 else None
    return BenchReport(results, machine_descriptor(), verdict)
