"""Boundary-safe synthetic volumes: layered shell / gap / core objects with
decoupled textured cores, plus diagnostics for boundary aliasing."""

from .analyzer import AliasingReport, bsr_map, decomposition_check, spatial_gradient
from .composer import RenderedSample, SceneSpec, render, render_batch, sample_scene
from .config import GenConfig, load_config
from .edt import compute_edt
from .io import read_sample, write_sample

__all__ = [
    "AliasingReport", "GenConfig", "RenderedSample", "SceneSpec", "bsr_map", "compute_edt",
    "decomposition_check", "load_config", "read_sample", "render", "render_batch",
    "sample_scene", "spatial_gradient", "write_sample",
]
__version__ = "0.1.0"
