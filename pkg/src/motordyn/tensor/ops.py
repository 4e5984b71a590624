"""Batched array kernels shared by the layer modules.

Arrays are float64 numpy arrays; sequences are laid out (batch, channels, time).
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def pad_time(x, p):
    if p == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (p, p)))


def _columns(x, K, p):
    """(B, C, T) -> (B * T_out, C * K) patch matrix of the zero-padded input."""
    xp = pad_time(x, p)
    cols = sliding_window_view(xp, K, axis=2)            # (B, C, T_out, K)
    B, C, t_out, _ = cols.shape
    return cols.transpose(0, 2, 1, 3).reshape(B * t_out, C * K), t_out


def corr1d(x, w, p):
    """Cross-correlation: out[b,o,t] = sum_{c,k} xpad[b,c,t+k] * w[o,c,k]."""
    K = w.shape[2]
    cols, t_out = _columns(x, K, p)
    out = cols @ w.reshape(w.shape[0], -1).T
    return np.ascontiguousarray(out.reshape(x.shape[0], t_out, -1).transpose(0, 2, 1))


def corr1d_adjoint(y, w, p):
    """Adjoint of :func:`corr1d` in its input (length T' + K - 1 - 2p)."""
    K = w.shape[2]
    flipped = np.ascontiguousarray(w[:, :, ::-1].transpose(1, 0, 2))
    if p <= K - 1:
        return corr1d(y, flipped, K - 1 - p)
    full = corr1d(y, flipped, K - 1)
    return full[:, :, p:full.shape[2] - p]


def corr1d_weight_grad(x, dy, K, p):
    """d/dw of ``<corr1d(x, w, p), dy>`` with ``w`` shaped (C_dy, C_x, K)."""
    cols, _ = _columns(x, K, p)
    d2 = dy.transpose(0, 2, 1).reshape(-1, dy.shape[1])
    return (d2.T @ cols).reshape(dy.shape[1], x.shape[1], K)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))
