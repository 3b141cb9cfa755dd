"""Checkpointing: one .npz per network, architecture descriptor included.

Arrays round-trip bit-exactly (float64 in, float64 out); the descriptor
rides along as a JSON string so a checkpoint rebuilds its network without
any out-of-band knowledge.
"""

from __future__ import annotations

import json

import numpy as np

from .network import Network, build_from_descriptor

FORMAT_VERSION = 1


def save_network(network: Network, path):
    arrays = network.state_arrays()
    meta = {"format_version": FORMAT_VERSION,
            "descriptor": network.descriptor(),
            "trainable": network.trainable}
    np.savez(path, __meta__=np.frombuffer(
        json.dumps(meta).encode(), dtype=np.uint8), **arrays)


def load_network(path) -> Network:
    with np.load(path) as data:
        meta = json.loads(bytes(data["__meta__"]).decode())
        if meta.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version in {path}")
        network = build_from_descriptor(meta["descriptor"])
        network.load_state_arrays({k: data[k] for k in data.files
                                   if k != "__meta__"})
    network.trainable = bool(meta.get("trainable", True))
    return network
