"""LSTM layer with full-sequence backpropagation through time.

Gate order everywhere is (i, f, o, c~) over the concatenated input
[h_prev, x_t]. The four gate weights live as separate parameters; each
forward pass stacks them into one matrix so every timestep costs a single
matmul, and the backward pass splits the stacked gradient back out.
"""

from __future__ import annotations

import numpy as np

from .layers import Parameter, glorot_uniform, sigmoid


class LSTM:
    """Maps (batch, time, fan_in) to the full hidden sequence
    (batch, time, hidden). Initial hidden and cell states are zero; the
    forget-gate bias starts at 1 so fresh cells default to remembering.
    """

    def __init__(self, fan_in, hidden, *, rng=None, name="lstm"):
        if rng is None:
            rng = np.random.default_rng(0)
        self.fan_in = int(fan_in)
        self.hidden = int(hidden)
        self.name = name
        cat = self.hidden + self.fan_in
        def gate(tag):
            return Parameter(glorot_uniform(rng, cat, hidden),
                             f"{name}.w_{tag}")
        self.w_i, self.w_f, self.w_o, self.w_c = map(gate, "ifoc")
        self.b_i = Parameter(np.zeros(hidden), f"{name}.b_i")
        self.b_f = Parameter(np.ones(hidden), f"{name}.b_f")
        self.b_o = Parameter(np.zeros(hidden), f"{name}.b_o")
        self.b_c = Parameter(np.zeros(hidden), f"{name}.b_c")
        self._cache = None

    def parameters(self):
        return [self.w_i, self.w_f, self.w_o, self.w_c,
                self.b_i, self.b_f, self.b_o, self.b_c]

    def buffers(self):
        return {}

    def descriptor(self):
        return {"kind": "lstm", "fan_in": self.fan_in,
                "hidden": self.hidden, "name": self.name}

    def _stacked(self):
        w = np.concatenate([self.w_i.value, self.w_f.value,
                            self.w_o.value, self.w_c.value], axis=1)
        b = np.concatenate([self.b_i.value, self.b_f.value,
                            self.b_o.value, self.b_c.value])
        return w, b

    def forward(self, x, training=False, cache=True):
        x = np.asarray(x, dtype=float)
        if x.ndim != 3 or x.shape[-1] != self.fan_in:
            raise ValueError(f"{self.name}: expected (batch, time, "
                             f"{self.fan_in}), got {x.shape}")
        n, t_len, _ = x.shape
        hid = self.hidden
        w, b = self._stacked()
        h = np.zeros((n, hid))
        c = np.zeros((n, hid))
        h_seq = np.empty((n, t_len, hid))
        if cache:
            # per-step caches for BPTT; skipped in prediction because a
            # long sequence times a wide batch makes them the peak memory
            cat = np.empty((t_len, n, hid + self.fan_in))
            gates = np.empty((t_len, n, 4 * hid))
            c_all = np.empty((t_len, n, hid))
            tanh_c = np.empty((t_len, n, hid))
            c_prev_all = np.empty((t_len, n, hid))
        for t in range(t_len):
            u = np.concatenate([h, x[:, t, :]], axis=1)
            z = u @ w + b
            gi = sigmoid(z[:, :hid])
            gf = sigmoid(z[:, hid:2 * hid])
            go = sigmoid(z[:, 2 * hid:3 * hid])
            gc = np.tanh(z[:, 3 * hid:])
            if cache:
                c_prev_all[t] = c
            c = gf * c + gi * gc
            tc = np.tanh(c)
            h = go * tc
            h_seq[:, t, :] = h
            if cache:
                cat[t] = u
                gates[t] = np.concatenate([gi, gf, go, gc], axis=1)
                c_all[t] = c
                tanh_c[t] = tc
        self._cache = (cat, gates, c_all, tanh_c, c_prev_all, w) if cache \
            else None
        return h_seq

    def backward(self, grad_h_seq):
        if self._cache is None:
            raise RuntimeError(f"{self.name}: backward before forward")
        cat, gates, c_all, tanh_c, c_prev_all, w = self._cache
        t_len, n, _ = cat.shape
        hid = self.hidden
        grad_h_seq = np.asarray(grad_h_seq)
        dx = np.empty((n, t_len, self.fan_in))
        dw = np.zeros_like(w)
        db = np.zeros(4 * hid)
        dh_carry = np.zeros((n, hid))
        dc_carry = np.zeros((n, hid))
        for t in range(t_len - 1, -1, -1):
            gi = gates[t][:, :hid]
            gf = gates[t][:, hid:2 * hid]
            go = gates[t][:, 2 * hid:3 * hid]
            gc = gates[t][:, 3 * hid:]
            tc = tanh_c[t]
            dh = grad_h_seq[:, t, :] + dh_carry
            do = dh * tc
            dc = dc_carry + dh * go * (1.0 - tc * tc)
            di = dc * gc
            df = dc * c_prev_all[t]
            dg = dc * gi
            dc_carry = dc * gf
            dz = np.concatenate([di * gi * (1.0 - gi),
                                 df * gf * (1.0 - gf),
                                 do * go * (1.0 - go),
                                 dg * (1.0 - gc * gc)], axis=1)
            dw += cat[t].T @ dz
            db += dz.sum(axis=0)
            du = dz @ w.T
            dh_carry = du[:, :hid]
            dx[:, t, :] = du[:, hid:]
        for k, p in enumerate((self.w_i, self.w_f, self.w_o, self.w_c)):
            p.grad += dw[:, k * hid:(k + 1) * hid]
        for k, p in enumerate((self.b_i, self.b_f, self.b_o, self.b_c)):
            p.grad += db[k * hid:(k + 1) * hid]
        return dx


def lstm_cell(layer: LSTM, x_t, h_prev, c_prev):
    """One cell update: i, f, o gates and the candidate from the
    concatenated (h_prev, x_t), then c_t = f*c_prev + i*c~ and
    h_t = o*tanh(c_t). Stateless with respect to the layer."""
    x_t = np.atleast_2d(np.asarray(x_t, dtype=float))
    h_prev = np.atleast_2d(np.asarray(h_prev, dtype=float))
    c_prev = np.atleast_2d(np.asarray(c_prev, dtype=float))
    if x_t.shape[-1] != layer.fan_in or h_prev.shape[-1] != layer.hidden:
        raise ValueError("lstm_cell: inconsistent shapes")
    u = np.concatenate([h_prev, x_t], axis=1)
    gi = sigmoid(u @ layer.w_i.value + layer.b_i.value)
    gf = sigmoid(u @ layer.w_f.value + layer.b_f.value)
    go = sigmoid(u @ layer.w_o.value + layer.b_o.value)
    gc = np.tanh(u @ layer.w_c.value + layer.b_c.value)
    c_t = gf * c_prev + gi * gc
    h_t = go * np.tanh(c_t)
    return h_t, c_t
