"""Synthetic document scans, patch masks, QA metrics and embedding search."""

from ._pixeldoc import (
    EmbeddingIndex,
    Model,
    PixeldocError,
    __version__,
    boxes_to_mask,
    crop_count,
    edit_distance,
    fuzzy_locate,
    qa_metrics,
    sample_span_mask,
    sliding_crops,
    synth_scan,
)

__all__ = [
    "EmbeddingIndex",
    "Model",
    "PixeldocError",
    "__version__",
    "boxes_to_mask",
    "crop_count",
    "edit_distance",
    "fuzzy_locate",
    "qa_metrics",
    "sample_span_mask",
    "sliding_crops",
    "synth_scan",
]
