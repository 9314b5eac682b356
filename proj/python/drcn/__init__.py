"""Densely-connected recurrent co-attentive network for sentence pairs."""

from ._drcn import (
    ArgumentError,
    ConfigError,
    EmptyDatasetError,
    FormatError,
    IoError,
    Model,
    NumericError,
    average_precision,
    grad_check,
    init_model,
    preset,
    preset_names,
    ranking_metrics,
    reciprocal_rank,
    tokenize,
    train,
)

__all__ = [
    "ArgumentError",
    "ConfigError",
    "EmptyDatasetError",
    "FormatError",
    "IoError",
    "Model",
    "NumericError",
    "average_precision",
    "grad_check",
    "init_model",
    "preset",
    "preset_names",
    "ranking_metrics",
    "reciprocal_rank",
    "tokenize",
    "train",
]
