"""Multi-band waveform synthesis: inverse-STFT decoders, pseudo-QMF
filter banks, sub-band spectral losses, and an RTF benchmark harness."""

from .bench import (
    BenchReport,
    BenchSpec,
    VariantResult,
    compare_variants,
    machine_descriptor,
    measure_rtf,
    ordering_verdict,
)
from .decoder import (
    DecoderConfig,
    DecoderVariant,
    DecoderWeights,
    LatentFeatures,
    check_weights,
    count_conv_macs,
    count_parameters,
    default_config,
    forward,
    forward_timed,
    init_random,
    layer_plan,
    load_latent,
    load_weights,
    mag_phase_head,
    random_latent,
    resblock_stack,
    save_latent,
    save_weights,
    synthesis_bank,
)
from .dsp import (
    ComplexSpectrogram,
    FrameParams,
    MagPhaseSpectrogram,
    Waveform,
    frame_count,
    hann_window,
    irfft,
    istft,
    rfft,
    stft,
    to_magphase,
)
from .errors import FormatError, InvalidArgumentError
from .losses import (
    LossReport,
    ResolutionSet,
    log_stft_magnitude,
    multires_stft_loss,
    spectral_convergence,
    subband_multires_loss,
)
from .pqmf import (
    FilterBank,
    PrototypeSpec,
    SubbandSignals,
    analyze,
    build_filterbank,
    combine_bands,
    design_prototype,
    load_bank,
    make_bank,
    optimize_cutoff,
    reconstruction_error_db,
    save_bank,
    synthesize,
)
from .wavio import read_wav, write_wav

__version__ = "0.1.0"

__all__ = [
    "BenchReport",
    "BenchSpec",
    "ComplexSpectrogram",
    "DecoderConfig",
    "DecoderVariant",
    "DecoderWeights",
    "FilterBank",
    "FormatError",
    "FrameParams",
    "InvalidArgumentError",
    "LatentFeatures",
    "LossReport",
    "MagPhaseSpectrogram",
    "PrototypeSpec",
    "ResolutionSet",
    "SubbandSignals",
    "VariantResult",
    "Waveform",
    "analyze",
    "build_filterbank",
    "check_weights",
    "combine_bands",
    "compare_variants",
    "count_conv_macs",
    "count_parameters",
    "default_config",
    "design_prototype",
    "forward",
    "forward_timed",
    "frame_count",
    "hann_window",
    "init_random",
    "irfft",
    "istft",
    "layer_plan",
    "load_bank",
    "load_latent",
    "load_weights",
    "log_stft_magnitude",
    "machine_descriptor",
    "mag_phase_head",
    "make_bank",
    "measure_rtf",
    "multires_stft_loss",
    "optimize_cutoff",
    "ordering_verdict",
    "random_latent",
    "read_wav",
    "reconstruction_error_db",
    "resblock_stack",
    "rfft",
    "save_bank",
    "save_latent",
    "save_weights",
    "spectral_convergence",
    "stft",
    "subband_multires_loss",
    "synthesis_bank",
    "synthesize",
    "to_magphase",
    "write_wav",
]
