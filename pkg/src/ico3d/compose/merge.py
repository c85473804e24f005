"""Merging the aligned head set with a body window's splats.

The merged avatar is a single splat set rendered in one pass; provenance is
kept as an index split (head first) so later passes can still address the
two parts separately (pruning touches only body splats, color harmonization
only head splats).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.gaussians import GaussianSet, concat


@dataclass(frozen=True)
class MergedAvatar:
    splats: GaussianSet
    head_count: int

    def __post_init__(self) -> None:
        if not 0 <= self.head_count <= self.splats.count:
            raise ValueError("head_count outside splat range")

    @property
    def body_count(self) -> int:
        return self.splats.count - self.head_count

    @property
    def labels(self) -> np.ndarray:
        """Per-splat provenance, "head" or "body"."""
        out = np.full(self.splats.count, "body", dtype="<U4")
        out[: self.head_count] = "head"
        return out

    def head(self) -> GaussianSet:
        return self.splats.take(np.arange(self.head_count))

    def body(self) -> GaussianSet:
        return self.splats.take(np.arange(self.head_count, self.splats.count))


def merge(head: GaussianSet, body: GaussianSet) -> MergedAvatar:
    """Concatenate head-first; SH degrees are unified by zero-padding."""
    return MergedAvatar(splats=concat(head, body), head_count=head.count)
