"""Benchmark architectures, encoder-decoder variants and checkpoint I/O."""

from .builder import EncoderDecoder, Model, SequentialModel, build_model, count_parameters, model_forward
from .checkpoint import (
    FORMAT_VERSION, MAGIC, VOLATILE_KEYS, checkpoint_bytes, load_checkpoint, parse_checkpoint, save_checkpoint,
)
from .config import (
    BENCHMARK_KINDS, DEEP_WIDTHS, PROPOSED_KINDS, SHALLOW_WIDTHS, SWEEP_WINDOWS, ModelConfig, ModelKind,
)

__all__ = [
    "BENCHMARK_KINDS", "DEEP_WIDTHS", "EncoderDecoder", "FORMAT_VERSION", "MAGIC", "Model", "ModelConfig",
    "ModelKind", "PROPOSED_KINDS", "SHALLOW_WIDTHS", "SWEEP_WINDOWS", "SequentialModel", "VOLATILE_KEYS",
    "build_model", "checkpoint_bytes", "count_parameters", "load_checkpoint", "model_forward",
    "parse_checkpoint", "save_checkpoint",
]
