"""Layer graphs for every benchmark and encoder-decoder kind."""

from collections import OrderedDict

import numpy as np

from ..errors import ConfigError, ShapeError
from ..tensor.layers import (
    Conv1d, ConvTranspose1d, Flatten, Linear, Module, ReLU, Reshape, Sequential, SwapTimeChannels,
)
from ..tensor.recurrent import Bidirectional, DiagRNNCell, LSTMCell, Recurrent, RNNCell
from .config import ModelConfig, ModelKind


class Model(Module):
    """A built architecture: ``forward`` maps (B, 3, T) to (B, 3, T_out)."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config

    @property
    def io_contract(self):
        return self.config.io_contract

    def _check_input(self, x):
        c = self.config
        if x.ndim != 3 or x.shape[1] != c.in_channels or x.shape[2] != c.window_length:
            raise ShapeError(
                f"{c.kind.value} expects (B, {c.in_channels}, {c.window_length}), got {x.shape}")

    def state_dict(self):
        return OrderedDict((name, p) for name, p, _ in self.named_parameters())

    def snapshot(self):
        return OrderedDict((name, p.copy()) for name, p, _ in self.named_parameters())

    def load_state_dict(self, state):
        own = self.state_dict()
        if list(own) != list(state):
            raise ShapeError("parameter names do not match the model graph")
        for name, p in own.items():
            src = np.asarray(state[name], dtype=np.float64)
            if src.shape != p.shape:
                raise ShapeError(f"{name}: shape {src.shape} != {p.shape}")
            p[...] = src

    def count_parameters(self):
        return self.num_parameters()


class SequentialModel(Model):
    def __init__(self, config, layers):
        super().__init__(config)
        self.net = Sequential(layers)

    def children(self):
        return self.net.children()

    def forward(self, x):
        self._check_input(x)
        return self.net.forward(x)

    def backward(self, dy):
        return self.net.backward(dy)


def _mlp_head(hidden, out_channels, rng, prefix="fc"):
    return [(f"{prefix}1", Linear(hidden, hidden, rng)), ("act_fc", ReLU()),
            (f"{prefix}2", Linear(hidden, out_channels, rng))]


def _feed_forward(cfg, rng, n_linear):
    h, T = cfg.hidden_size, cfg.window_length
    layers = [("flatten", Flatten()), ("fc1", Linear(cfg.in_channels * T, h, rng)), ("act1", ReLU())]
    for i in range(2, n_linear):
        layers += [(f"fc{i}", Linear(h, h, rng)), (f"act{i}", ReLU())]
    layers += [(f"fc{n_linear}", Linear(h, cfg.out_channels, rng)), ("reshape", Reshape((cfg.out_channels, 1)))]
    return SequentialModel(cfg, layers)


def _recurrent(cfg, rng, depth, cell_cls):
    h = cfg.hidden_size
    layers = []
    for i in range(depth):
        layers.append((f"rec{i + 1}", Recurrent(cell_cls(cfg.in_channels if i == 0 else h, h, rng))))
    layers.append(("to_channels_last", SwapTimeChannels()))
    layers += _mlp_head(h, cfg.out_channels, rng)
    layers.append(("to_channels_first", SwapTimeChannels()))
    return SequentialModel(cfg, layers)


def _cnn(cfg, rng, n_conv):
    h, k, p = cfg.hidden_size, cfg.kernel_size, cfg.padding
    layers = []
    for i in range(n_conv):
        layers += [(f"conv{i + 1}", Conv1d(cfg.in_channels if i == 0 else h, h, k, p, rng)),
                   (f"act{i + 1}", ReLU())]
    layers += [("flatten", Flatten()), ("fc1", Linear(h * cfg.window_length, h, rng)), ("act_fc", ReLU()),
               ("fc2", Linear(h, cfg.out_channels, rng)), ("reshape", Reshape((cfg.out_channels, 1)))]
    return SequentialModel(cfg, layers)


def _split_bidirectional(width, cell_factory):
    # forward direction takes the first ceil(width/2) channels, backward the rest
    a = (width + 1) // 2
    return Bidirectional(cell_factory(a), cell_factory(width - a), split=True)


class EncoderDecoder(Model):
    """Length-preserving conv encoder / transposed-conv decoder.

    Encoder level ``l`` produces ``widths[l]`` channels.  In skip variants
    every encoder output passes through a skip transform (identity, RNN,
    split bidirectional RNN or split bidirectional diagonal RNN); the
    deepest transformed features feed the decoder and shallower ones are
    concatenated channelwise onto the matching decoder input.
    """

    def __init__(self, cfg, rng):
        super().__init__(cfg)
        kind = cfg.kind
        widths = list(cfg.encoder_widths)
        k, p = cfg.kernel_size, cfg.padding
        self.widths = widths
        self.skip_variant = kind not in (ModelKind.ENCDEC_SHALLOW, ModelKind.ENCDEC_DEEP)
        L = len(widths)
        self.enc, self.enc_act = [], []
        for i, w in enumerate(widths):
            self.enc.append(Conv1d(cfg.in_channels if i == 0 else widths[i - 1], w, k, p, rng))
            self.enc_act.append(ReLU())
        self.skips = [self._make_skip(kind, w, rng) for w in widths] if self.skip_variant else []
        self.dec, self.dec_act = [], []
        for i in range(L):
            out_ch = cfg.out_channels if i == 0 else widths[i - 1]
            in_ch = widths[i] * (2 if self.skip_variant and i < L - 1 else 1)
            self.dec.append(ConvTranspose1d(in_ch, out_ch, k, p, rng))
            self.dec_act.append(ReLU() if i > 0 else None)

    @staticmethod
    def _make_skip(kind, width, rng):
        if kind is ModelKind.ENCDEC_SKIP:
            return None
        if kind is ModelKind.ENCDEC_RNN_SKIP:
            return Recurrent(RNNCell(width, width, rng))
        if kind is ModelKind.ENCDEC_BIRNN_SKIP:
            return _split_bidirectional(width, lambda n: RNNCell(n, n, rng))
        if kind is ModelKind.ENCDEC_DIAG_BIRNN_SKIP:
            return _split_bidirectional(width, lambda n: DiagRNNCell(n, rng))
        raise ConfigError(f"{kind} has no skip transform")

    def children(self):
        out = []
        for i, m in enumerate(self.enc):
            out.append((f"enc{i + 1}", m))
        for i, m in enumerate(self.skips):
            if m is not None:
                out.append((f"skip{i + 1}", m))
        for i in reversed(range(len(self.dec))):
            out.append((f"dec{i + 1}", self.dec[i]))
        return out

    def forward(self, x):
        self._check_input(x)
        L = len(self.widths)
        feats = []
        e = x
        for conv, act in zip(self.enc, self.enc_act):
            e = act.forward(conv.forward(e))
            feats.append(e)
        if self.skip_variant:
            feats = [f if s is None else s.forward(f) for f, s in zip(feats, self.skips)]
        h = feats[L - 1]
        for i in reversed(range(L)):
            inp = h if (i == L - 1 or not self.skip_variant) else np.concatenate([h, feats[i]], axis=1)
            h = self.dec[i].forward(inp)
            if self.dec_act[i] is not None:
                h = self.dec_act[i].forward(h)
        return h

    def backward(self, dy):
        L = len(self.widths)
        d_feat = [None] * L
        dh = dy
        for i in range(L):
            if self.dec_act[i] is not None:
                dh = self.dec_act[i].backward(dh)
            dinp = self.dec[i].backward(dh)
            if i == L - 1:
                d_feat[i] = dinp
            elif self.skip_variant:
                dh, d_feat[i] = dinp[:, :self.widths[i]], dinp[:, self.widths[i]:]
            else:
                dh = dinp
        if self.skip_variant:
            d_feat = [g if s is None else s.backward(g) for g, s in zip(d_feat, self.skips)]
        de = None
        for i in reversed(range(L)):
            g = d_feat[i]
            if g is not None:
                de = g if de is None else de + g
            de = self.enc[i].backward(self.enc_act[i].backward(de))
        return de


def build_model(config: ModelConfig) -> Model:
    """Construct the layer graph for ``config`` with seeded uniform initialization."""
    rng = np.random.default_rng(config.seed)
    kind = config.kind
    K = ModelKind
    if kind is K.FF_SHALLOW:
        return _feed_forward(config, rng, 4)
    if kind is K.FF_DEEP:
        return _feed_forward(config, rng, 5)
    if kind in (K.RNN_SHALLOW, K.RNN_DEEP):
        return _recurrent(config, rng, 1 if kind is K.RNN_SHALLOW else 2, RNNCell)
    if kind in (K.LSTM_SHALLOW, K.LSTM_DEEP):
        return _recurrent(config, rng, 1 if kind is K.LSTM_SHALLOW else 2, LSTMCell)
    if kind is K.CNN_SHALLOW:
        return _cnn(config, rng, 3)
    if kind is K.CNN_DEEP:
        return _cnn(config, rng, 4)
    return EncoderDecoder(config, rng)


def model_forward(model: Model, window):
    """Run ``model`` on one (3, T) window or a (B, 3, T) batch."""
    x = np.asarray(window, dtype=np.float64)
    if x.ndim == 2:
        return model.forward(x[None])[0]
    return model.forward(x)


def count_parameters(model) -> int:
    return model.num_parameters()
