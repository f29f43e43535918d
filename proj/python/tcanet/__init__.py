"""Temporal context aggregation and boundary refinement for action proposals.

Intervals are (start, end) pairs and proposals (start, end, score) triples,
all in normalized time. Configuration dicts use the same keys as the JSON
config files of the command-line tool.
"""

from ._tcanet import (
    DataError,
    FeatureSequence,
    FormatError,
    Model,
    TrainingError,
    Video,
    apply_offsets,
    auc,
    average_recall,
    evaluate,
    fuse_proposals,
    fuse_scores,
    load_dataset,
    load_features,
    regression_targets,
    run_cli,
    soft_nms,
    synth_dataset,
    tiou,
    train,
    write_dataset,
    write_features,
)

__all__ = [
    "DataError",
    "FeatureSequence",
    "FormatError",
    "Model",
    "TrainingError",
    "Video",
    "apply_offsets",
    "auc",
    "average_recall",
    "evaluate",
    "fuse_proposals",
    "fuse_scores",
    "load_dataset",
    "load_features",
    "regression_targets",
    "run_cli",
    "soft_nms",
    "synth_dataset",
    "tiou",
    "train",
    "write_dataset",
    "write_features",
]
