"""
Patch decomposition of granules, event labelling and dataset statistics
"""

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import EmptyInputError, PatchGridError
from .hotspot import BoundingBox
from .raster import Raster, Window, crop_band, round_half_away
from utils.logger import pipeline_logger

DEFAULT_PATCH_SIZE = 128
DEFAULT_OVERLAP = 0.25
DEFAULT_MIN_PIXELS = 5

STUDY_SIZES = (128, 256, 384, 512)
STUDY_OVERLAPS = (0.25, 0.33, 0.50, 0.75)


class PatchLabel(Enum):
    EVENT = "event"
    NONEVENT = "nonevent"


@dataclass(frozen=True)
class PatchGridSpec:
    """Square patches of patch_size pixels overlapping by a fraction"""
    patch_size: int
    overlap: float

    def __post_init__(self):
        if self.patch_size < 1:
            raise PatchGridError(f"patch size must be at least 1, got {self.patch_size}")
        if not 0.0 <= self.overlap < 1.0:
            raise PatchGridError(f"overlap must be in [0, 1), got {self.overlap}")
        if self.stride < 1:
            raise PatchGridError(
                f"stride of size {self.patch_size} with overlap {self.overlap} is below 1")

    @property
    def stride(self) -> int:
        return round_half_away(self.patch_size * (1.0 - self.overlap))


@dataclass(frozen=True)
class DatasetStats:
    """Event / non-event patch counts"""
    event_count: int
    nonevent_count: int

    @property
    def total(self) -> int:
        return self.event_count + self.nonevent_count

    @property
    def ratio(self) -> Fraction:
        """Exact proportion of events"""
        if self.total == 0:
            return Fraction(0)
        return Fraction(self.event_count, self.total)

    @property
    def proportion(self) -> float:
        return float(self.ratio)


@dataclass(frozen=True)
class StudyRow:
    """One line of a patch study"""
    overlap: float
    patch_size: int
    stats: DatasetStats


def _origins(length: int, size: int, stride: int) -> List[int]:
    origins = list(range(0, length - size + 1, stride))
    if origins[-1] != length - size:
        origins.append(length - size)
    return origins


def patch_grid(height: int, width: int, spec: PatchGridSpec) -> List[Window]:
    """Row-major windows on the stride grid plus edge-snapped last row and column"""
    if spec.patch_size > min(height, width):
        raise PatchGridError(f"patch size {spec.patch_size} exceeds raster {height}x{width}")
    rows = _origins(height, spec.patch_size, spec.stride)
    cols = _origins(width, spec.patch_size, spec.stride)
    return [Window(r, c, spec.patch_size, spec.patch_size) for r in rows for c in cols]


def rasterize_boxes(shape: Tuple[int, int], boxes: Sequence[BoundingBox]) -> np.ndarray:
    """Union of the boxes as a boolean mask, clipped to shape"""
    mask = np.zeros(shape, dtype=bool)
    height, width = shape
    for box in boxes:
        mask[max(0, box.row0):min(height, box.row1), max(0, box.col0):min(width, box.col1)] = True
    return mask


def label_patches(windows: Sequence[Window], boxes: Sequence[BoundingBox],
                  min_pixels: int = DEFAULT_MIN_PIXELS, strict: bool = True,
                  shape: Optional[Tuple[int, int]] = None) -> List[PatchLabel]:
    """Label a window as event when the annotated area inside it exceeds min_pixels.

    Overlapping boxes count their shared pixels once. With ``strict`` off the
    threshold itself is enough.
    """
    if not windows:
        return []
    if shape is None:
        shape = (max([w.row1 for w in windows] + [b.row1 for b in boxes]),
                 max([w.col1 for w in windows] + [b.col1 for b in boxes]))
    mask = rasterize_boxes(shape, boxes)
    integral = np.zeros((shape[0] + 1, shape[1] + 1), dtype=np.int64)
    integral[1:, 1:] = mask.cumsum(axis=0).cumsum(axis=1)

    labels = []
    for w in windows:
        area = (integral[w.row1, w.col1] - integral[w.row0, w.col1]
                - integral[w.row1, w.col0] + integral[w.row0, w.col0])
        event = area > min_pixels if strict else area >= min_pixels
        labels.append(PatchLabel.EVENT if event else PatchLabel.NONEVENT)
    return labels


def dataset_stats(labels: Sequence[PatchLabel]) -> DatasetStats:
    if not labels:
        raise EmptyInputError("no patch labels")
    events = sum(1 for label in labels if label == PatchLabel.EVENT)
    return DatasetStats(events, len(labels) - events)


def merge_stats(parts: Sequence[DatasetStats]) -> DatasetStats:
    """Sum counts over several granules"""
    return DatasetStats(sum(p.event_count for p in parts), sum(p.nonevent_count for p in parts))


def extract_patches(raster: Raster, windows: Sequence[Window]) -> List[Raster]:
    return [crop_band(raster, window) for window in windows]


def patch_study(shapes_and_boxes: Sequence[Tuple[Tuple[int, int], Sequence[BoundingBox]]],
                sizes: Sequence[int] = STUDY_SIZES, overlaps: Sequence[float] = STUDY_OVERLAPS,
                min_pixels: int = DEFAULT_MIN_PIXELS, strict: bool = True) -> List[StudyRow]:
    """Event statistics for every (overlap, size) pair over a set of annotated granules.

    Granules smaller than a patch size are skipped for that size.
    """
    if not shapes_and_boxes:
        raise EmptyInputError("no granules for the patch study")
    rows = []
    for overlap in overlaps:
        for size in sizes:
            spec = PatchGridSpec(size, overlap)
            parts = []
            for shape, boxes in shapes_and_boxes:
                if size > min(shape):
                    pipeline_logger.warning("Granule smaller than patch", {"shape": shape, "size": size})
                    continue
                windows = patch_grid(shape[0], shape[1], spec)
                parts.append(dataset_stats(label_patches(windows, boxes, min_pixels, strict, shape)))
            rows.append(StudyRow(overlap, size, merge_stats(parts)))
    return rows
