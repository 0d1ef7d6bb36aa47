"""Causal multi-scale aggregation video segmentation (desk-scale core)."""

from ._cmsa import (
    MetricReport,
    Model,
    determinacy,
    frame_metrics,
    gen_clip,
    run_checks,
)

__all__ = [
    "MetricReport",
    "Model",
    "determinacy",
    "frame_metrics",
    "gen_clip",
    "run_checks",
]
