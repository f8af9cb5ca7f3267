"""
Thermal hotspot detection on TOA reflectance: hotmap, surrounding operator and
cluster bounding boxes
"""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy import ndimage

from .errors import NaNInputError
from .l1c import ReflectanceStack

DEFAULT_MIN_CLUSTER = 9

_NEIGHBOURHOOD = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class BoundingBox:
    """Pixel box [row0, row0 + rows) x [col0, col0 + cols) around an event cluster"""
    row0: int
    col0: int
    rows: int
    cols: int
    active_pixels: int = 0

    @property
    def row1(self) -> int:
        return self.row0 + self.rows

    @property
    def col1(self) -> int:
        return self.col0 + self.cols

    @property
    def area(self) -> int:
        return self.rows * self.cols

    def sort_key(self) -> Tuple[int, int, int, int, int]:
        return (self.row0, self.col0, self.rows, self.cols, self.active_pixels)


def _ratio_at_least(numerator: np.ndarray, denominator: np.ndarray, threshold: float) -> np.ndarray:
    """numerator / denominator >= threshold, false where the denominator is zero"""
    defined = denominator != 0
    ratio = np.zeros_like(numerator)
    np.divide(numerator, denominator, out=ratio, where=defined)
    return defined & (ratio >= threshold)


def surround(mask: np.ndarray) -> np.ndarray:
    """3x3 dilation including the center; pixels beyond the edge count as false"""
    return ndimage.binary_dilation(np.asarray(mask, dtype=bool), structure=_NEIGHBOURHOOD)


def compute_hotmap(stack: ReflectanceStack) -> np.ndarray:
    """Boolean hotmap p = alpha or beta or S or gamma"""
    r8 = np.asarray(stack.rho_8a, dtype=np.float64)
    r11 = np.asarray(stack.rho_11, dtype=np.float64)
    r12 = np.asarray(stack.rho_12, dtype=np.float64)
    for name, plane in (("B8A", r8), ("B11", r11), ("B12", r12)):
        if np.isnan(plane).any():
            raise NaNInputError(f"{name} reflectance contains NaN")

    alpha = _ratio_at_least(r12, r11, 1.4) & _ratio_at_least(r12, r8, 1.2) & (r12 >= 0.15)
    beta = _ratio_at_least(r11, r8, 2.0) & (r11 >= 0.5) & (r12 >= 0.5)
    saturated = ((r12 >= 1.2) & (r8 <= 1.0)) | ((r11 >= 1.5) & (r8 >= 1.0))
    surrounded = surround(alpha | beta)
    gamma = (r12 >= 1.0) & (r11 >= 1.0) & (r8 >= 0.5) & surrounded
    return alpha | beta | saturated | gamma


_CONNECTIVITY = {4: ndimage.generate_binary_structure(2, 1), 8: ndimage.generate_binary_structure(2, 2)}


def _label(hotmap: np.ndarray, connectivity: int) -> Tuple[np.ndarray, np.ndarray]:
    """Component labels and the active pixel count of each label (index 0 is background)"""
    if connectivity not in _CONNECTIVITY:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    labels, _ = ndimage.label(np.asarray(hotmap, dtype=bool), structure=_CONNECTIVITY[connectivity])
    return labels, np.bincount(labels.ravel())


def extract_event_boxes(hotmap: np.ndarray, min_cluster: int = DEFAULT_MIN_CLUSTER,
                        connectivity: int = 8) -> List[BoundingBox]:
    """One tight box per connected cluster of at least min_cluster active pixels"""
    if min_cluster < 1:
        raise ValueError(f"min_cluster must be at least 1, got {min_cluster}")
    labels, sizes = _label(hotmap, connectivity)
    boxes = []
    for index, extent in enumerate(ndimage.find_objects(labels), start=1):
        if extent is None or sizes[index] < min_cluster:
            continue
        rows, cols = extent
        boxes.append(BoundingBox(rows.start, cols.start, rows.stop - rows.start, cols.stop - cols.start,
                                 int(sizes[index])))
    return sorted(boxes, key=BoundingBox.sort_key)


def cluster_mask(hotmap: np.ndarray, min_cluster: int = DEFAULT_MIN_CLUSTER,
                 connectivity: int = 8) -> np.ndarray:
    """Hotmap pixels that belong to a surviving cluster"""
    labels, sizes = _label(hotmap, connectivity)
    keep = sizes >= min_cluster
    keep[0] = False
    return keep[labels]


def detect_events(stack: ReflectanceStack, min_cluster: int = DEFAULT_MIN_CLUSTER,
                  connectivity: int = 8) -> Tuple[np.ndarray, List[BoundingBox]]:
    """Hotmap and the filtered event boxes of a reflectance stack"""
    hotmap = compute_hotmap(stack)
    return hotmap, extract_event_boxes(hotmap, min_cluster, connectivity)
