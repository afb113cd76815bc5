"""Per-coding-unit decision of whether the network blending applies.

Three condition sets trade encoder speed against reach:

  default: not affine, no CIIP, no non-default BCW weight, references
           placed symmetrically in past and future, no SMVD
  fast:    default, plus block width and height strictly greater than 8
  slow:    only the affine / CIIP / BCW conditions

Fast implies default implies slow for every coding unit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass


class GatingMode(enum.Enum):
    DEFAULT = "default"
    FAST = "fast"
    SLOW = "slow"


@dataclass(frozen=True)
class CuMeta:
    """Codec metadata of one bi-predicted coding unit."""

    is_affine: bool
    uses_ciip: bool
    uses_bcw: bool
    uses_smvd: bool
    poc_current: int
    poc_ref0: int
    poc_ref1: int
    width: int
    height: int
    is_biprediction: bool = True

    def __post_init__(self):
        if self.width < 4 or self.height < 4:
            raise ValueError(f"block {self.width}x{self.height} below the 4x4 minimum")


def symmetric_poc(cu: CuMeta) -> bool:
    """True when ref0 is strictly past and ref1 strictly future at equal distance."""
    past = cu.poc_current - cu.poc_ref0
    future = cu.poc_ref1 - cu.poc_current
    return past == future and past > 0


def should_apply(cu: CuMeta, mode: GatingMode) -> bool:
    """Apply the network blending to this coding unit under the given mode?"""
    if not cu.is_biprediction:
        raise ValueError("gating is only defined for bi-predicted coding units")
    base = not (cu.is_affine or cu.uses_ciip or cu.uses_bcw)
    if mode is GatingMode.SLOW:
        return base
    default = base and symmetric_poc(cu) and not cu.uses_smvd
    if mode is GatingMode.DEFAULT:
        return default
    return default and cu.width > 8 and cu.height > 8
