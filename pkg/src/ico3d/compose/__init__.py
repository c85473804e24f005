"""Head-body integration: rigid alignment, merging, pruning, border
injection, and color harmonization."""

from .align import (RigAlignment, align_head_to_body, composed_transform,
                    transform_set)
from .harmonize import HarmonizeResult, band_indices, harmonize_colors
from .inject import inject_border
from .merge import MergedAvatar, merge
from .prune import PruneConfig, default_prune_config, prune_body, prune_mask
from .rig import (format_rig, parse_rig, read_boundary, read_rig,
                  write_boundary, write_rig)

__all__ = [
    "RigAlignment", "align_head_to_body", "composed_transform", "transform_set",
    "HarmonizeResult", "band_indices", "harmonize_colors",
    "inject_border",
    "MergedAvatar", "merge",
    "PruneConfig", "default_prune_config", "prune_body", "prune_mask",
    "format_rig", "parse_rig", "read_boundary", "read_rig",
    "write_boundary", "write_rig",
]
