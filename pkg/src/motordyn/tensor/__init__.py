"""Minimal float64 layer library with exact backward passes."""

from .functional import (
    activation, bidirectional_scan, conv1d, conv1d_transpose, diag_rnn_cell_step, linear,
    lstm_cell_step, rnn_cell_step,
)
from .gradcheck import finite_difference_check
from .layers import (
    Activation, Conv1d, ConvTranspose1d, Flatten, Linear, Module, ReLU, Reshape, Sequential,
    SwapTimeChannels, Tanh,
)
from .recurrent import Bidirectional, DiagRNNCell, LSTMCell, Recurrent, RNNCell
