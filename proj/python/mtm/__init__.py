"""Masked trajectory modelling on a synthetic world.

Thin Python layer over the C++ core: geodesy, tokenizer, metrics, label
builders and the file-based pipeline commands.
"""

from ._core import (
    Error,
    Vocab,
    World,
    cell_boundary,
    cell_to_latlon,
    classification_metrics,
    command_names,
    default_config_text,
    encode_trajectory,
    haversine_km,
    latlon_to_cell,
    load_checkpoint_info,
    mask_trajectory,
    masked_hash_count,
    perplexity,
    regression_metrics,
    run_command,
    train_vocab,
)

__all__ = [
    "Error",
    "Vocab",
    "World",
    "cell_boundary",
    "cell_to_latlon",
    "classification_metrics",
    "command_names",
    "default_config_text",
    "encode_trajectory",
    "haversine_km",
    "latlon_to_cell",
    "load_checkpoint_info",
    "mask_trajectory",
    "masked_hash_count",
    "perplexity",
    "regression_metrics",
    "run_command",
    "train_vocab",
]
