"""Recurrent cells, single-direction scans and bidirectional wrappers.

A cell only holds parameters.  ``cell.scan`` runs it over a (B, M, T)
sequence and returns the hidden sequence plus an opaque cache;
``cell.scan_backward`` consumes that cache, accumulates parameter grads and
returns input and initial-state grads.  Layers (:class:`Recurrent`,
:class:`Bidirectional`) own the caches, so one cell may serve several scans.
"""

import numpy as np

from .. import kernels
from ..errors import ShapeError
from . import ops
from .layers import Module, uniform_init


def _time_order(T, reverse):
    return range(T - 1, -1, -1) if reverse else range(T)


def _check_seq(x, m, who):
    if x.ndim != 3 or x.shape[1] != m:
        raise ShapeError(f"{who} expects (B, {m}, T), got {x.shape}")


def _prev_states(hs, h0, reverse):
    """Hidden state fed into each time step, aligned with ``hs``."""
    prev = np.empty_like(hs)
    if reverse:
        prev[:, :, :-1] = hs[:, :, 1:]
        prev[:, :, -1] = h0
    else:
        prev[:, :, 1:] = hs[:, :, :-1]
        prev[:, :, 0] = h0
    return prev


class RNNCell(Module):
    """h_t = tanh(W x_t + U h_{t-1} + b); W (N, M), U (N, N)."""

    def __init__(self, input_size, hidden_size, rng=None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.input_size, self.hidden_size = input_size, hidden_size
        self.add_param("W", uniform_init(rng, (hidden_size, input_size), hidden_size))
        self.add_param("U", uniform_init(rng, (hidden_size, hidden_size), hidden_size))
        self.add_param("b", uniform_init(rng, (hidden_size,), hidden_size))

    def step(self, x_t, h_prev):
        p = self.params
        return np.tanh(x_t @ p["W"].T + h_prev @ p["U"].T + p["b"])

    def scan(self, x, h0=None, reverse=False):
        _check_seq(x, self.input_size, "RNNCell.scan")
        B, _, T = x.shape
        W, U, b = self.params["W"], self.params["U"], self.params["b"]
        h0 = np.zeros((B, self.hidden_size)) if h0 is None else h0
        xw = np.einsum("nm,bmt->bnt", W, x) + b[None, :, None]
        hs = np.empty((B, self.hidden_size, T))
        h = h0
        for t in _time_order(T, reverse):
            h = np.tanh(xw[:, :, t] + h @ U.T)
            hs[:, :, t] = h
        return hs, (x, h0, hs, reverse)

    def scan_backward(self, dhs, cache):
        x, h0, hs, reverse = cache
        U = self.params["U"]
        T = x.shape[2]
        da = np.empty_like(hs)
        carry = np.zeros_like(h0)
        for t in _time_order(T, not reverse):
            h = hs[:, :, t]
            d = (dhs[:, :, t] + carry) * (1.0 - h * h)
            da[:, :, t] = d
            carry = d @ U
        prev = _prev_states(hs, h0, reverse)
        self.grads["W"] += np.einsum("bnt,bmt->nm", da, x)
        self.grads["U"] += np.einsum("bnt,bkt->nk", da, prev)
        self.grads["b"] += da.sum(axis=(0, 2))
        dx = np.einsum("nm,bnt->bmt", self.params["W"], da)
        return dx, carry


class DiagRNNCell(Module):
    """h_t = tanh(w * x_t + u * h_{t-1} + b) with w, u, b of length M (N == M)."""

    def __init__(self, size, rng=None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.input_size = self.hidden_size = size
        self.add_param("w", uniform_init(rng, (size,), size))
        self.add_param("u", uniform_init(rng, (size,), size))
        self.add_param("b", uniform_init(rng, (size,), size))

    def step(self, x_t, h_prev):
        p = self.params
        return np.tanh(p["w"] * x_t + p["u"] * h_prev + p["b"])

    def scan(self, x, h0=None, reverse=False):
        _check_seq(x, self.input_size, "DiagRNNCell.scan")
        x = np.ascontiguousarray(x)
        B = x.shape[0]
        h0 = np.zeros((B, self.hidden_size)) if h0 is None else np.ascontiguousarray(h0)
        p = self.params
        hs = kernels.diag_scan_forward(x, p["w"], p["u"], p["b"], h0, bool(reverse))
        return hs, (x, h0, hs, reverse)

    def scan_backward(self, dhs, cache):
        x, h0, hs, reverse = cache
        p = self.params
        dx, dh0, dw, du, db = kernels.diag_scan_backward(
            np.ascontiguousarray(dhs), x, hs, h0, p["w"], p["u"], bool(reverse))
        self.grads["w"] += dw
        self.grads["u"] += du
        self.grads["b"] += db
        return dx, dh0


class LSTMCell(Module):
    """Standard LSTM; gate blocks of W (4N, M), U (4N, N), b (4N) ordered i, f, g, o."""

    def __init__(self, input_size, hidden_size, rng=None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.input_size, self.hidden_size = input_size, hidden_size
        n = hidden_size
        self.add_param("W", uniform_init(rng, (4 * n, input_size), n))
        self.add_param("U", uniform_init(rng, (4 * n, n), n))
        self.add_param("b", uniform_init(rng, (4 * n,), n))

    def step(self, x_t, h_prev, c_prev):
        p = self.params
        n = self.hidden_size
        z = x_t @ p["W"].T + h_prev @ p["U"].T + p["b"]
        i = ops.sigmoid(z[..., :n])
        f = ops.sigmoid(z[..., n:2 * n])
        g = np.tanh(z[..., 2 * n:3 * n])
        o = ops.sigmoid(z[..., 3 * n:])
        c = f * c_prev + i * g
        return o * np.tanh(c), c

    def scan(self, x, h0=None, reverse=False, c0=None):
        _check_seq(x, self.input_size, "LSTMCell.scan")
        B, _, T = x.shape
        n = self.hidden_size
        W, U, b = self.params["W"], self.params["U"], self.params["b"]
        h = np.zeros((B, n)) if h0 is None else h0
        c = np.zeros((B, n)) if c0 is None else c0
        h0, c0 = h, c
        zx = np.einsum("gm,bmt->bgt", W, x) + b[None, :, None]
        gates = np.empty((B, 4 * n, T))
        cs = np.empty((B, n, T))
        tcs = np.empty((B, n, T))
        hs = np.empty((B, n, T))
        for t in _time_order(T, reverse):
            z = zx[:, :, t] + h @ U.T
            i = ops.sigmoid(z[:, :n])
            f = ops.sigmoid(z[:, n:2 * n])
            g = np.tanh(z[:, 2 * n:3 * n])
            o = ops.sigmoid(z[:, 3 * n:])
            c = f * c + i * g
            tc = np.tanh(c)
            h = o * tc
            gates[:, :n, t] = i
            gates[:, n:2 * n, t] = f
            gates[:, 2 * n:3 * n, t] = g
            gates[:, 3 * n:, t] = o
            cs[:, :, t] = c
            tcs[:, :, t] = tc
            hs[:, :, t] = h
        return hs, (x, h0, c0, hs, cs, tcs, gates, reverse)

    def scan_backward(self, dhs, cache):
        x, h0, c0, hs, cs, tcs, gates, reverse = cache
        U = self.params["U"]
        n = self.hidden_size
        T = x.shape[2]
        dz = np.empty_like(gates)
        dh_carry = np.zeros_like(h0)
        dc_carry = np.zeros_like(c0)
        c_prev_all = _prev_states(cs, c0, reverse)
        for t in _time_order(T, not reverse):
            i = gates[:, :n, t]
            f = gates[:, n:2 * n, t]
            g = gates[:, 2 * n:3 * n, t]
            o = gates[:, 3 * n:, t]
            tc = tcs[:, :, t]
            dh = dhs[:, :, t] + dh_carry
            dc = dh * o * (1.0 - tc * tc) + dc_carry
            dz[:, :n, t] = dc * g * i * (1.0 - i)
            dz[:, n:2 * n, t] = dc * c_prev_all[:, :, t] * f * (1.0 - f)
            dz[:, 2 * n:3 * n, t] = dc * i * (1.0 - g * g)
            dz[:, 3 * n:, t] = dh * tc * o * (1.0 - o)
            dc_carry = dc * f
            dh_carry = dz[:, :, t] @ U
        h_prev_all = _prev_states(hs, h0, reverse)
        self.grads["W"] += np.einsum("bgt,bmt->gm", dz, x)
        self.grads["U"] += np.einsum("bgt,bkt->gk", dz, h_prev_all)
        self.grads["b"] += dz.sum(axis=(0, 2))
        dx = np.einsum("gm,bgt->bmt", self.params["W"], dz)
        return dx, dh_carry


class Recurrent(Module):
    """Run one cell over a (B, M, T) sequence from a zero initial state."""

    def __init__(self, cell, reverse=False):
        super().__init__()
        self.cell = cell
        self.reverse = reverse

    def children(self):
        return [("cell", self.cell)]

    def forward(self, x):
        hs, cache = self.cell.scan(x, None, self.reverse)
        self._cache = cache
        return hs

    def backward(self, dy):
        dx, _ = self.cell.scan_backward(dy, self._pop_cache())
        return dx


class Bidirectional(Module):
    """Left-to-right pass with ``fwd`` and right-to-left pass with ``bwd``.

    With ``split=True`` the input channels are divided: ``fwd`` scans the
    first ``fwd.input_size`` channels and ``bwd`` the rest, so the
    concatenated output has as many channels as the input whenever both
    cells keep their width.  Otherwise both scan every channel and the
    output is ``fwd.hidden_size + bwd.hidden_size`` wide.  Passing the same
    cell twice shares (and accumulates into) its parameters.
    """

    def __init__(self, fwd, bwd, split=False):
        super().__init__()
        self.fwd, self.bwd, self.split = fwd, bwd, split

    def children(self):
        if self.fwd is self.bwd:
            return [("fwd", self.fwd)]
        return [("fwd", self.fwd), ("bwd", self.bwd)]

    def _inputs(self, x):
        if self.split:
            k = self.fwd.input_size
            return x[:, :k], x[:, k:]
        return x, x

    def forward(self, x, h0_fwd=None, h0_bwd=None):
        xf, xb = self._inputs(x)
        hf, cf = self.fwd.scan(xf, h0_fwd, reverse=False)
        hb, cb = self.bwd.scan(xb, h0_bwd, reverse=True)
        self._cache = (cf, cb, x.shape)
        return np.concatenate([hf, hb], axis=1)

    def backward(self, dy):
        cf, cb, shape = self._pop_cache()
        nf = self.fwd.hidden_size
        dxf, dh0f = self.fwd.scan_backward(dy[:, :nf], cf)
        dxb, dh0b = self.bwd.scan_backward(dy[:, nf:], cb)
        self.last_initial_grads = (dh0f, dh0b)
        if self.split:
            return np.concatenate([dxf, dxb], axis=1)
        return dxf + dxb
