"""Desk-scale pipeline for studying affect bias in receptivity-triggered
EMA delivery on synthetic wearable cohorts."""

__version__ = "0.1.0"

from .timeseries import Channel, SegmentIndex, SignalRecord, iqr_clean, normalize_apply, normalize_fit, segment
from .ema import EmaEvent, composite_score, ema_descriptives, grouped_stratified_split, pseudo_label
from .synth import CohortSpec, generate, paper_preset

__all__ = [
    "Channel",
    "SegmentIndex",
    "SignalRecord",
    "segment",
    "iqr_clean",
    "normalize_fit",
    "normalize_apply",
    "EmaEvent",
    "composite_score",
    "pseudo_label",
    "grouped_stratified_split",
    "ema_descriptives",
    "CohortSpec",
    "generate",
    "paper_preset",
]
