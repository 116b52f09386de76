"""Simulator, pipeline runner, metrics, file formats and CLI."""

from __future__ import annotations

from .metrics import jitter_metric
from .pipeline import PipelineOptions, RunReport, run_pipeline
from .simulate import FrameRecord, TrajectoryConfig, simulate_sequence

__all__ = ["FrameRecord", "PipelineOptions", "RunReport", "TrajectoryConfig", "jitter_metric", "run_pipeline", "simulate_sequence"]
