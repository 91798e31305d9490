"""Batch experiment driver: INI configs, runs with manifests, SVG plots."""

from .config import KINDS, RunConfig, load_config, validate_config
from .plotting import emit_plot
from .runner import RunManifest, run, verify_manifest

__all__ = ["KINDS", "RunConfig", "RunManifest", "emit_plot", "load_config", "run", "validate_config", "verify_manifest"]
