"""Link-level simulator for the NB-IoT single-tone hopping random access preamble."""

__version__ = "0.1.0"

from .numerology import ConfigError, CpKind, DerivedNumerology, NprachConfig, derive, load_config, validate
from .hopping import HoppingPattern, block_offset, full_pattern, gold_bits, subcarrier_index
from .waveform import ComplexBuffer, PreambleSequence, default_sequence, generate, papr_db
from .channel import ChannelConfig, Fading, RxBuffers, SnrReference, propagate
from .receiver import (
    DetectionResult,
    ReceiveGrid,
    SearchGrids,
    calibrate_threshold,
    default_grids,
    demodulate,
    detect,
    dirichlet_gain,
    estimate,
    metric,
    metric_surface,
)

