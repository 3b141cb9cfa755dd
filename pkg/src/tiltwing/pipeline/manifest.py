"""Run manifests: what a stage read, what it wrote, and how long it took.

Output hashes are the determinism contract: two runs of the same stage
under the same config and seed must produce identical ``outputs`` maps.
Wall time and anything else expected to differ between runs lives in
``volatile``.
"""

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path


def hash_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            digest.update(block)
    return "sha256:" + digest.hexdigest()


def hash_tree(directory):
    """Hash every file under a directory, keyed by relative path."""
    directory = Path(directory)
    return {str(p.relative_to(directory)): hash_file(p)
            for p in sorted(directory.rglob("*")) if p.is_file()}


@dataclass
class RunManifest:
    stage: str
    config_hash: str
    seed: int
    wall_time_s: float = 0.0
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    volatile: dict = field(default_factory=dict)

    def add_input(self, name, path):
        self.inputs[name] = hash_file(path)

    def add_output(self, name, path):
        path = Path(path)
        if path.is_dir():
            for rel, digest in hash_tree(path).items():
                self.outputs[f"{name}/{rel}"] = digest
        else:
            self.outputs[name] = hash_file(path)

    def save(self, path):
        blob = {"stage": self.stage, "config_hash": self.config_hash,
                "seed": self.seed, "wall_time_s": self.wall_time_s,
                "inputs": self.inputs, "outputs": self.outputs,
                "metrics": self.metrics, "volatile": self.volatile}
        Path(path).write_text(json.dumps(blob, indent=2, sort_keys=True))

    @classmethod
    def load(cls, path):
        blob = json.loads(Path(path).read_text())
        return cls(**blob)


class StageTimer:
    """Context manager stamping wall time onto a manifest."""

    def __init__(self, manifest):
        self.manifest = manifest

    def __enter__(self):
        self._t0 = time.perf_counter()
        return self.manifest

    def __exit__(self, exc_type, exc, tb):
        self.manifest.wall_time_s = time.perf_counter() - self._t0
        return False
