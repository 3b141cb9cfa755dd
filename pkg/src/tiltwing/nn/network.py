"""Layer stacks, the training/inference switch, and checkpoint rebuild."""

from __future__ import annotations

import numpy as np

from .layers import Dense
from .recurrent import LSTM


class Network:
    """A plain sequential stack.

    ``trainable=False`` marks a frozen sub-network: its forward always
    runs in inference mode (batch-norm uses running statistics) and its
    parameters are excluded from ``parameters()``, so no optimizer ever
    sees them. ``backward`` still pushes gradients through to the input,
    which is exactly what conditioning one network on another's output
    requires.
    """

    def __init__(self, layers, name="net"):
        self.layers = list(layers)
        self.name = name
        self.trainable = True
        self._ran_forward = False

    def parameters(self):
        if not self.trainable:
            return []
        out = []
        for layer in self.layers:
            out.extend(layer.parameters())
        return out

    def all_parameters(self):
        out = []
        for layer in self.layers:
            out.extend(layer.parameters())
        return out

    def zero_grad(self):
        for p in self.all_parameters():
            p.zero_grad()

    def freeze(self):
        self.trainable = False
        return self

    def forward(self, x, training=False, cache=True):
        if not self.trainable:
            training = False
        for layer in self.layers:
            x = layer.forward(x, training=training, cache=cache)
        self._ran_forward = cache
        return x

    def backward(self, grad_out):
        if not self._ran_forward:
            raise RuntimeError(f"{self.name}: backward before forward")
        for layer in reversed(self.layers):
            grad_out = layer.backward(grad_out)
        return grad_out

    def predict(self, x):
        return self.forward(x, training=False, cache=False)

    def descriptor(self):
        return {"name": self.name,
                "layers": [layer.descriptor() for layer in self.layers]}

    def state_arrays(self):
        """Named parameter and buffer arrays, checkpoint layout."""
        arrays = {}
        for i, layer in enumerate(self.layers):
            for p in layer.parameters():
                arrays[f"layer{i}.{p.name}"] = p.value
            for key, buf in layer.buffers().items():
                arrays[f"layer{i}.buffer.{key}"] = buf
        return arrays

    def load_state_arrays(self, arrays):
        for i, layer in enumerate(self.layers):
            for p in layer.parameters():
                key = f"layer{i}.{p.name}"
                value = np.asarray(arrays[key], dtype=float)
                if value.shape != p.value.shape:
                    raise ValueError(f"{key}: shape mismatch")
                p.value[...] = value
                p.grad = np.zeros_like(p.value)
            for key, buf in layer.buffers().items():
                buf[...] = np.asarray(arrays[f"layer{i}.buffer.{key}"],
                                      dtype=float)


def mlp(sizes, *, hidden_activation="leaky_relu", out_activation="linear",
        batch_norm=False, out_batch_norm=False, rng=None, name="mlp"):
    """Dense stack from a size list [in, h1, ..., out]."""
    if rng is None:
        rng = np.random.default_rng(0)
    layers = []
    last = len(sizes) - 2
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        act = out_activation if i == last else hidden_activation
        bn = out_batch_norm if i == last else batch_norm
        layers.append(Dense(a, b, act, batch_norm=bn, rng=rng,
                            name=f"{name}.d{i}"))
    return Network(layers, name=name)


def build_from_descriptor(desc, rng=None):
    if rng is None:
        rng = np.random.default_rng(0)
    layers = []
    for spec in desc["layers"]:
        kind = spec["kind"]
        if kind == "dense":
            layers.append(Dense(spec["fan_in"], spec["fan_out"],
                                spec["activation"],
                                batch_norm=spec["batch_norm"],
                                rng=rng, name=spec["name"]))
        elif kind == "lstm":
            layers.append(LSTM(spec["fan_in"], spec["hidden"], rng=rng,
                               name=spec["name"]))
        else:
            raise ValueError(f"unknown layer kind {kind!r}")
    return Network(layers, name=desc.get("name", "net"))
