"""Pipeline configuration: two presets, INI overrides, seeded stages.

The ``desk`` preset is sized to run the whole pipeline on one core in
well under an hour; ``full`` carries the published-scale network sizes
and budgets and wants a real machine. A config file can override any
value; unknown keys are rejected so typos fail loudly instead of
silently training the default.
"""

import configparser
import hashlib
import json
from pathlib import Path

import numpy as np

DESK = {
    "run": {
        "seed": 7,
    },
    "reference": {
        "n_points": 100,
        "budget": 150_000,
        "warm_budget": 50_000,
        "pop_size": 120,
        "outer_iters": 5,
    },
    "twin": {
        "g_hidden": (64, 128, 256),
        "d_hidden": (256, 128),
        "epochs": 300,
        "batch_size": 32,
        "lr": 2e-4,
    },
    "surrogate": {
        "n_records": 2500,
        "stride": 10,
        "energy_hidden": (64, 64, 64),
        "energy_epochs": 400,
        "energy_lr": 1e-3,
        "energy_batch": 64,
        "energy_patience": 60,
        "series_hidden": (32, 32),
        "series_epochs": 80,
        "series_lr": 3e-3,
        "series_batch": 128,
        "series_patience": 12,
    },
    "feasible": {
        "n_target": 2000,
        "batch": 4096,
        "max_draws": 1_000_000,
    },
    "physics": {
        "latent_dim": 3,
        "g_hidden": (64, 128, 256),
        "d_hidden": (256, 128),
        "epochs": 40,
        "batch_size": 107,
        "lr": 2e-4,
        "accel_weight": 10.0,
        "probe_draws": 1500,
    },
    "evaluate": {
        "n_designs": 1000,
        "coverage_repeats": 3,
        "fit_budget": 600,
        "fit_restarts": 2,
        "fit_records": 100,
    },
    "compare": {
        "reference_budget": 150_000,
        "twin_budget": 40_000,
        "physics_budget": 20_000,
    },
}

FULL = {
    "run": {
        "seed": 7,
    },
    "reference": {
        "n_points": 500,
        "budget": 300_000,
        "warm_budget": 100_000,
        "pop_size": 150,
        "outer_iters": 5,
    },
    "twin": {
        "g_hidden": (125, 256, 512, 1024),
        "d_hidden": (1024, 512, 256),
        "epochs": 1000,
        "batch_size": 32,
        "lr": 2e-4,
    },
    "surrogate": {
        "n_records": 8000,
        "stride": 1,
        "energy_hidden": (410, 290, 500, 310, 500),
        "energy_epochs": 800,
        "energy_lr": 1e-3,
        "energy_batch": 64,
        "energy_patience": 80,
        "series_hidden": (200, 200, 200, 200),
        "series_epochs": 300,
        "series_lr": 1e-3,
        "series_batch": 128,
        "series_patience": 30,
    },
    "feasible": {
        "n_target": 10_000,
        "batch": 4096,
        "max_draws": 1_000_000,
    },
    "physics": {
        "latent_dim": 3,
        "g_hidden": (125, 256, 512, 1024),
        "d_hidden": (1024, 512, 256),
        "epochs": 100,
        "batch_size": 107,
        "lr": 2e-4,
        "accel_weight": 10.0,
        "probe_draws": 3000,
    },
    "evaluate": {
        "n_designs": 1000,
        "coverage_repeats": 3,
        "fit_budget": 1000,
        "fit_restarts": 3,
        "fit_records": 500,
    },
    "compare": {
        "reference_budget": 300_000,
        "twin_budget": 60_000,
        "physics_budget": 30_000,
    },
}

PRESETS = {"desk": DESK, "full": FULL}

STAGES = ("datagen-reference", "train-twin", "datagen-surrogate",
          "train-surrogates", "train-physics", "evaluate", "compare",
          "report")


def _coerce(raw, like):
    """Parse an INI string to the type of the preset default."""
    if isinstance(like, bool):
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(like, int):
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    if isinstance(like, tuple):
        return tuple(int(v) for v in raw.replace(",", " ").split())
    return raw


class PipelineConfig:
    """Effective settings for one run, hashable and seed-bearing."""

    def __init__(self, preset, sections):
        self.preset = preset
        self._sections = sections

    def __getitem__(self, section):
        return self._sections[section]

    @property
    def seed(self):
        return self._sections["run"]["seed"]

    def describe(self):
        out = {"preset": self.preset}
        for name, section in self._sections.items():
            out[name] = {k: list(v) if isinstance(v, tuple) else v
                         for k, v in section.items()}
        return out

    def config_hash(self):
        blob = json.dumps(self.describe(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def stage_seed(self, stage):
        """Independent integer seed for one named stage.

        Hashing the stage name keeps streams decoupled even if stages
        are added or reordered later.
        """
        tag = int.from_bytes(hashlib.sha256(stage.encode()).digest()[:8],
                             "big")
        seq = np.random.SeedSequence([self.seed, tag])
        return int(seq.generate_state(1)[0])


def load_config(path=None, preset=None, seed=None):
    """Build the effective config from preset, optional file, optional seed.

    Precedence, lowest to highest: preset defaults, values in the INI
    file, the explicit ``seed`` argument. A ``preset`` key in the file's
    [run] section selects the base when the argument is None.
    """
    parser = None
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(Path(path))
        if not read:
            raise FileNotFoundError(f"config file not found: {path}")
        if preset is None and parser.has_option("run", "preset"):
            preset = parser.get("run", "preset")
    preset = preset or "desk"
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; "
                         f"choose from {sorted(PRESETS)}")

    sections = {name: dict(values) for name, values in
                PRESETS[preset].items()}
    if parser is not None:
        for sec in parser.sections():
            if sec not in sections:
                raise ValueError(f"unknown config section [{sec}]")
            for key, raw in parser.items(sec):
                if key == "preset" and sec == "run":
                    continue
                if key not in sections[sec]:
                    raise ValueError(f"unknown key {key!r} in [{sec}]")
                sections[sec][key] = _coerce(raw, sections[sec][key])
    if seed is not None:
        sections["run"]["seed"] = int(seed)
    return PipelineConfig(preset, sections)
