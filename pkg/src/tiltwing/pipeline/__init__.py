"""Staged pipeline: data generation, training, evaluation, comparison."""

from tiltwing.pipeline.config import PipelineConfig, load_config
from tiltwing.pipeline.manifest import RunManifest, hash_file

__all__ = ["PipelineConfig", "RunManifest", "hash_file", "load_config"]
