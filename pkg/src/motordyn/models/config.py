"""Architecture identifiers and declarative model configuration."""

from dataclasses import dataclass, field, replace
from enum import Enum

from ..errors import ConfigError


class ModelKind(str, Enum):
    FF_SHALLOW = "ff_shallow"
    FF_DEEP = "ff_deep"
    RNN_SHALLOW = "rnn_shallow"
    RNN_DEEP = "rnn_deep"
    LSTM_SHALLOW = "lstm_shallow"
    LSTM_DEEP = "lstm_deep"
    CNN_SHALLOW = "cnn_shallow"
    CNN_DEEP = "cnn_deep"
    ENCDEC_SHALLOW = "encdec_shallow"
    ENCDEC_DEEP = "encdec_deep"
    ENCDEC_SKIP = "encdec_skip"
    ENCDEC_RNN_SKIP = "encdec_rnn_skip"
    ENCDEC_BIRNN_SKIP = "encdec_birnn_skip"
    ENCDEC_DIAG_BIRNN_SKIP = "encdec_diag_birnn_skip"

    def __str__(self):
        return self.value

    @property
    def family(self):
        return self.value.rsplit("_", 1)[0] if not self.is_encdec else "encdec"

    @property
    def is_encdec(self):
        return self.value.startswith("encdec")

    @property
    def io_contract(self):
        """``"pointwise"`` (middle value) for feed-forward and CNN benchmarks, else ``"sequence"``."""
        return "pointwise" if self.value.startswith(("ff", "cnn")) else "sequence"


BENCHMARK_KINDS = tuple(k for k in ModelKind if not k.is_encdec)
PROPOSED_KINDS = tuple(k for k in ModelKind if k.is_encdec)
SWEEP_WINDOWS = (5, 10, 15, 20, 25, 50, 100, 200)

SHALLOW_WIDTHS = (16, 32)
DEEP_WIDTHS = (16, 32, 64, 128)


@dataclass(frozen=True)
class ModelConfig:
    kind: ModelKind
    window_length: int = 100
    in_channels: int = 3
    out_channels: int = 3
    hidden_size: int = 32
    encoder_widths: tuple = None
    kernel_size: int = 5
    seed: int = 0

    def __post_init__(self):
        try:
            kind = ModelKind(self.kind)
        except ValueError:
            raise ConfigError(f"unknown model kind {self.kind!r}") from None
        object.__setattr__(self, "kind", kind)
        if self.encoder_widths is None:
            default = DEEP_WIDTHS if kind is ModelKind.ENCDEC_DEEP else SHALLOW_WIDTHS
            object.__setattr__(self, "encoder_widths", default)
        object.__setattr__(self, "encoder_widths", tuple(int(w) for w in self.encoder_widths))
        if self.window_length < 2:
            raise ConfigError("window_length must be >= 2")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigError("kernel_size must be a positive odd integer")
        if self.hidden_size < 1 or self.in_channels < 1 or self.out_channels < 1:
            raise ConfigError("channel counts and hidden_size must be positive")
        if kind.is_encdec:
            if not self.encoder_widths or min(self.encoder_widths) < 1:
                raise ConfigError("encoder-decoder kinds need non-empty positive encoder_widths")
            if kind in (ModelKind.ENCDEC_BIRNN_SKIP, ModelKind.ENCDEC_DIAG_BIRNN_SKIP) \
                    and min(self.encoder_widths) < 2:
                raise ConfigError("bidirectional skips split channels; every width must be >= 2")

    @property
    def padding(self):
        return self.kernel_size // 2

    @property
    def io_contract(self):
        return self.kind.io_contract

    @property
    def output_length(self):
        return 1 if self.io_contract == "pointwise" else self.window_length

    def with_(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "window_length": self.window_length,
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "hidden_size": self.hidden_size,
            "encoder_widths": list(self.encoder_widths),
            "kernel_size": self.kernel_size,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.get("encoder_widths") is not None:
            d["encoder_widths"] = tuple(d["encoder_widths"])
        return cls(**d)
