"""Unbatched forms of the layer computations.

Inputs follow the (channels, time) convention for sequences and plain
vectors otherwise; each call validates shapes and raises ``ShapeError``.
"""

import numpy as np

from ..errors import ShapeError
from . import ops
from .layers import ReLU, Tanh
from .recurrent import Bidirectional


def _arr(a, ndim, name):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != ndim:
        raise ShapeError(f"{name} must be {ndim}-D, got shape {a.shape}")
    return a


def conv1d(x, weights, bias, padding=0):
    x = _arr(x, 2, "input")
    weights = _arr(weights, 3, "weights")
    bias = _arr(bias, 1, "bias")
    c_out, c_in, k = weights.shape
    if x.shape[0] != c_in or bias.shape[0] != c_out:
        raise ShapeError(f"conv1d shape mismatch: input {x.shape}, weights {weights.shape}, bias {bias.shape}")
    if padding < 0 or k > x.shape[1] + 2 * padding:
        raise ShapeError("conv1d requires 0 <= padding and K <= T + 2 * padding")
    return ops.corr1d(x[None], weights, padding)[0] + bias[:, None]


def conv1d_transpose(x, weights, bias, padding=0):
    x = _arr(x, 2, "input")
    weights = _arr(weights, 3, "weights")
    bias = _arr(bias, 1, "bias")
    c_in, c_out, k = weights.shape
    if x.shape[0] != c_in or bias.shape[0] != c_out:
        raise ShapeError(f"conv1d_transpose shape mismatch: input {x.shape}, weights {weights.shape}")
    if padding < 0 or x.shape[1] + k - 1 - 2 * padding < 1:
        raise ShapeError("conv1d_transpose output would be empty")
    return ops.corr1d_adjoint(x[None], weights, padding)[0] + bias[:, None]


def linear(x, weights, bias):
    x = _arr(x, 1, "input")
    weights = _arr(weights, 2, "weights")
    bias = _arr(bias, 1, "bias")
    if weights.shape != (bias.shape[0], x.shape[0]):
        raise ShapeError(f"linear shape mismatch: W {weights.shape}, x {x.shape}, b {bias.shape}")
    return weights @ x + bias


def activation(x, kind):
    layer = {"relu": ReLU, "tanh": Tanh}[kind]()
    return layer.forward(np.asarray(x, dtype=np.float64))


def rnn_cell_step(x_t, h_prev, W, U, b):
    x_t, h_prev = _arr(x_t, 1, "x_t"), _arr(h_prev, 1, "h_prev")
    W, U, b = _arr(W, 2, "W"), _arr(U, 2, "U"), _arr(b, 1, "b")
    n, m = W.shape
    if x_t.shape != (m,) or h_prev.shape != (n,) or U.shape != (n, n) or b.shape != (n,):
        raise ShapeError("rnn_cell_step shape mismatch")
    return np.tanh(W @ x_t + U @ h_prev + b)


def diag_rnn_cell_step(x_t, h_prev, w, u, b):
    arrs = [_arr(a, 1, name) for a, name in ((x_t, "x_t"), (h_prev, "h_prev"), (w, "w"), (u, "u"), (b, "b"))]
    if len({a.shape for a in arrs}) != 1:
        raise ShapeError("diag_rnn_cell_step operands must all have length M")
    x_t, h_prev, w, u, b = arrs
    return np.tanh(w * x_t + u * h_prev + b)


def lstm_cell_step(x_t, h_prev, c_prev, W, U, b):
    """Gate blocks ordered input, forget, candidate, output."""
    x_t, h_prev, c_prev = _arr(x_t, 1, "x_t"), _arr(h_prev, 1, "h_prev"), _arr(c_prev, 1, "c_prev")
    W, U, b = _arr(W, 2, "W"), _arr(U, 2, "U"), _arr(b, 1, "b")
    n = h_prev.shape[0]
    if W.shape != (4 * n, x_t.shape[0]) or U.shape != (4 * n, n) or b.shape != (4 * n,) or c_prev.shape != (n,):
        raise ShapeError("lstm_cell_step shape mismatch")
    z = W @ x_t + U @ h_prev + b
    i = ops.sigmoid(z[:n])
    f = ops.sigmoid(z[n:2 * n])
    g = np.tanh(z[2 * n:3 * n])
    o = ops.sigmoid(z[3 * n:])
    c = f * c_prev + i * g
    return o * np.tanh(c), c


def bidirectional_scan(cell, sequence, h0_fwd=None, h0_bwd=None):
    """Scan ``cell`` left-to-right and right-to-left; stack both outputs.

    Returns ``(2N, T)``: rows ``:N`` are the forward pass, ``N:`` the
    backward pass, each aligned with the input time index.
    """
    seq = _arr(sequence, 2, "sequence")
    if seq.shape[0] != cell.input_size:
        raise ShapeError(f"cell expects {cell.input_size} channels, got {seq.shape[0]}")
    n = cell.hidden_size
    h0f = np.zeros((1, n)) if h0_fwd is None else _arr(h0_fwd, 1, "h0_fwd")[None]
    h0b = np.zeros((1, n)) if h0_bwd is None else _arr(h0_bwd, 1, "h0_bwd")[None]
    return Bidirectional(cell, cell).forward(seq[None], h0f, h0b)[0]
