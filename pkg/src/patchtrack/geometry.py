"""Box geometry and the IoU family used by both association stages.

Boxes are stored as ``(x, y, w, h)`` with ``(x, y)`` the top-left corner, the
same convention as MOT Challenge files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in pixel coordinates."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box width and height must be positive, got w={self.w}, h={self.h}")

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h

    @classmethod
    def from_xyxy(cls, x1: float, y1: float, x2: float, y2: float) -> "BBox":
        return cls(x1, y1, x2 - x1, y2 - y1)

    def scaled(self, s: float) -> "BBox":
        return BBox(self.x * s, self.y * s, self.w * s, self.h * s)


class CostKind(str, Enum):
    """Distance used to build the stage-1 cost matrix."""

    AREA = "area"
    HEIGHT = "height"


class IoUKind(str, Enum):
    """Score used by the greedy patching stage."""

    IOU = "iou"
    GIOU = "giou"
    DIOU = "diou"
    CIOU = "ciou"


def _intersection(a: BBox, b: BBox) -> float:
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def _hull(a: BBox, b: BBox) -> tuple[float, float]:
    """Width and height of the smallest box enclosing both."""
    return max(a.x2, b.x2) - min(a.x, b.x), max(a.y2, b.y2) - min(a.y, b.y)


def iou(a: BBox, b: BBox) -> float:
    if a == b:
        return 1.0
    inter = _intersection(a, b)
    if inter == 0.0:
        return 0.0
    # rounding can push near-identical pairs a hair above 1
    return min(1.0, inter / (a.area + b.area - inter))


def giou(a: BBox, b: BBox) -> float:
    """Generalized IoU: IoU minus the fraction of the hull not covered by the union."""
    if a == b:
        return 1.0
    inter = _intersection(a, b)
    union = a.area + b.area - inter
    cw, ch = _hull(a, b)
    hull = cw * ch
    return inter / union - (hull - union) / hull


def _center_penalty(a: BBox, b: BBox) -> float:
    (acx, acy), (bcx, bcy) = a.center, b.center
    cw, ch = _hull(a, b)
    return ((acx - bcx) ** 2 + (acy - bcy) ** 2) / (cw * cw + ch * ch)


def diou(a: BBox, b: BBox) -> float:
    """Distance IoU: IoU minus squared center distance over squared hull diagonal."""
    if a == b:
        return 1.0
    return iou(a, b) - _center_penalty(a, b)


def ciou(a: BBox, b: BBox) -> float:
    """Complete IoU: DIoU with an aspect-ratio consistency penalty.

    The trade-off weight is evaluated (not differentiated) and taken as 0 when
    the aspect-ratio term vanishes.
    """
    if a == b:
        return 1.0
    o = iou(a, b)
    v = (4.0 / math.pi**2) * (math.atan(a.w / a.h) - math.atan(b.w / b.h)) ** 2
    alpha = 0.0 if v == 0.0 else v / ((1.0 - o) + v)
    return o - _center_penalty(a, b) - alpha * v


def height_iou(a: BBox, b: BBox) -> float:
    """IoU of the vertical extents only; horizontal position is ignored."""
    inter = min(a.y2, b.y2) - max(a.y, b.y)
    if inter <= 0:
        return 0.0
    return min(1.0, inter / (max(a.y2, b.y2) - min(a.y, b.y)))


SCORE_FUNCS: dict[IoUKind, Callable[[BBox, BBox], float]] = {
    IoUKind.IOU: iou,
    IoUKind.GIOU: giou,
    IoUKind.DIOU: diou,
    IoUKind.CIOU: ciou,
}


def build_cost_matrix(rows: Sequence[BBox], cols: Sequence[BBox], kind: CostKind) -> np.ndarray:
    """Cost ``1 - similarity`` for every (row, col) pair, shape ``(len(rows), len(cols))``."""
    kind = CostKind(kind)
    sim = height_iou if kind is CostKind.HEIGHT else iou
    cost = np.empty((len(rows), len(cols)), dtype=np.float64)
    for i, r in enumerate(rows):
        for j, c in enumerate(cols):
            cost[i, j] = 1.0 - sim(r, c)
    return cost
