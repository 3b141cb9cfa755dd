"""Dense layer with fused affine, batch norm, and activation.

Everything is float64 and shape-generic over leading axes: a dense layer
maps (..., fan_in) to (..., fan_out), which is what lets the same class
serve both plain MLPs and the per-timestep head on top of an LSTM stack.
"""

from __future__ import annotations

import numpy as np

BN_EPS = 1e-5
LEAKY_SLOPE = 0.2


class Parameter:
    """A trainable array with an accumulated gradient."""

    __slots__ = ("value", "grad", "name")

    def __init__(self, value, name=""):
        self.value = np.asarray(value, dtype=float)
        self.grad = np.zeros_like(self.value)
        self.name = name

    def zero_grad(self):
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Parameter({self.name or 'unnamed'}, shape={self.value.shape})"


def glorot_uniform(rng, fan_in, fan_out, shape=None):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, (fan_in, fan_out) if shape is None
                       else shape)


def apply_activation(name, z):
    if name == "linear":
        return z
    if name == "leaky_relu":
        return np.where(z > 0.0, z, LEAKY_SLOPE * z)
    if name == "sigmoid":
        return sigmoid(z)
    if name == "tanh":
        return np.tanh(z)
    raise ValueError(f"unknown activation {name!r}")


def activation_grad(name, z, out):
    """d activation / d z, from the cached pre-activation and output."""
    if name == "linear":
        return np.ones_like(z)
    if name == "leaky_relu":
        return np.where(z > 0.0, 1.0, LEAKY_SLOPE)
    if name == "sigmoid":
        return out * (1.0 - out)
    if name == "tanh":
        return 1.0 - out * out
    raise ValueError(f"unknown activation {name!r}")


def sigmoid(z):
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class Dense:
    """activation(batch_norm(x @ w + b)).

    Batch norm (momentum 0.8, applied between the affine map and the
    activation) is optional. In training mode it normalizes with batch
    statistics computed over every leading axis and updates the running
    buffers; in inference mode it uses the running buffers only, so the
    output of a frozen layer does not depend on batch size.
    """

    def __init__(self, fan_in, fan_out, activation="linear", *,
                 batch_norm=False, rng=None, name="dense"):
        if rng is None:
            rng = np.random.default_rng(0)
        self.fan_in = int(fan_in)
        self.fan_out = int(fan_out)
        self.activation = activation
        apply_activation(activation, np.zeros(1))  # validate the tag early
        self.batch_norm = bool(batch_norm)
        self.name = name
        self.w = Parameter(glorot_uniform(rng, fan_in, fan_out), f"{name}.w")
        self.b = Parameter(np.zeros(fan_out), f"{name}.b")
        if self.batch_norm:
            self.gamma = Parameter(np.ones(fan_out), f"{name}.gamma")
            self.beta = Parameter(np.zeros(fan_out), f"{name}.beta")
            self.running_mean = np.zeros(fan_out)
            self.running_var = np.ones(fan_out)
            self.momentum = 0.8
        self._cache = None

    def parameters(self):
        if self.batch_norm:
            return [self.w, self.b, self.gamma, self.beta]
        return [self.w, self.b]

    def buffers(self):
        if self.batch_norm:
            return {"running_mean": self.running_mean,
                    "running_var": self.running_var}
        return {}

    def descriptor(self):
        return {"kind": "dense", "fan_in": self.fan_in,
                "fan_out": self.fan_out, "activation": self.activation,
                "batch_norm": self.batch_norm, "name": self.name}

    def forward(self, x, training=False, cache=True):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.fan_in:
            raise ValueError(f"{self.name}: expected feature dim "
                             f"{self.fan_in}, got {x.shape[-1]}")
        a = x @ self.w.value + self.b.value
        if self.batch_norm:
            flat = a.reshape(-1, self.fan_out)
            if training:
                mean = flat.mean(axis=0)
                var = flat.var(axis=0)
                self.running_mean[...] = (self.momentum * self.running_mean
                                          + (1.0 - self.momentum) * mean)
                self.running_var[...] = (self.momentum * self.running_var
                                         + (1.0 - self.momentum) * var)
            else:
                mean = self.running_mean
                var = self.running_var
            inv_std = 1.0 / np.sqrt(var + BN_EPS)
            xhat = (a - mean) * inv_std
            z = self.gamma.value * xhat + self.beta.value
        else:
            xhat = inv_std = None
            z = a
        out = apply_activation(self.activation, z)
        self._cache = (x, a, xhat, inv_std, z, out, training) if cache \
            else None
        return out

    def backward(self, grad_out):
        if self._cache is None:
            raise RuntimeError(f"{self.name}: backward before forward")
        x, a, xhat, inv_std, z, out, training = self._cache
        dz = np.asarray(grad_out) * activation_grad(self.activation, z, out)
        if self.batch_norm:
            shape = dz.shape
            dz2 = dz.reshape(-1, self.fan_out)
            xhat2 = xhat.reshape(-1, self.fan_out)
            self.gamma.grad += np.sum(dz2 * xhat2, axis=0)
            self.beta.grad += np.sum(dz2, axis=0)
            dxhat = dz2 * self.gamma.value
            if training:
                n = dz2.shape[0]
                # normalization couples every sample in the batch
                da = (inv_std / n) * (n * dxhat
                                      - np.sum(dxhat, axis=0)
                                      - xhat2 * np.sum(dxhat * xhat2, axis=0))
            else:
                da = dxhat * inv_std
            da = da.reshape(shape)
        else:
            da = dz
        flat_x = x.reshape(-1, self.fan_in)
        flat_da = da.reshape(-1, self.fan_out)
        self.w.grad += flat_x.T @ flat_da
        self.b.grad += flat_da.sum(axis=0)
        return da @ self.w.value.T


def dense_forward(layer, x, training=False):
    """Functional alias for a single dense layer application."""
    return layer.forward(x, training=training)
