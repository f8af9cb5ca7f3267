"""
Affine bridge between L1C crop pixels and raw granule pixels
"""

import math
from typing import List, Sequence, Tuple

import numpy as np
from affine import Affine

from .errors import AffineError
from .georef import BandFootprint
from .hotspot import BoundingBox
from utils.logger import pipeline_logger

DEFAULT_BUFFER = 2
SINGULAR_TOLERANCE = 1e-12
# Hull coordinates this close to an integer are snapped before floor/ceil
SNAP_EPSILON = 1e-9

Point = Tuple[float, float]


def _check_invertible(t: Affine):
    if abs(t.determinant) <= SINGULAR_TOLERANCE:
        raise AffineError(f"transform is singular (det={t.determinant})")


def fit_affine(src: Sequence[Point], dst: Sequence[Point]) -> Affine:
    """Unique affine map taking three (x, y) points onto three (x, y) points"""
    if len(src) != 3 or len(dst) != 3:
        raise AffineError(f"need exactly 3 correspondences, got {len(src)} and {len(dst)}")
    design = np.array([[x, y, 1.0] for x, y in src], dtype=np.float64)
    spread = max(1.0, float(np.abs(design[:, :2]).max()))
    if abs(np.linalg.det(design)) <= SINGULAR_TOLERANCE * spread * spread:
        raise AffineError(f"source points {list(src)} are collinear")
    targets = np.array(dst, dtype=np.float64)
    try:
        row_x = np.linalg.solve(design, targets[:, 0])
        row_y = np.linalg.solve(design, targets[:, 1])
    except np.linalg.LinAlgError as e:
        raise AffineError(f"cannot fit affine transform: {e}") from e
    t = Affine(*row_x, *row_y)
    _check_invertible(t)
    return t


def invert_affine(t: Affine) -> Affine:
    _check_invertible(t)
    return ~t


def warp_hull(t: Affine, box: BoundingBox) -> Tuple[float, float, float, float]:
    """Real-valued (row_min, col_min, row_max, col_max) hull of the mapped box edges"""
    corners = [t * (col, row) for row in (box.row0, box.row1) for col in (box.col0, box.col1)]
    cols = [p[0] for p in corners]
    rows = [p[1] for p in corners]
    return (min(rows), min(cols), max(rows), max(cols))


def _snap_floor(value: float) -> int:
    return math.floor(value + SNAP_EPSILON)


def _snap_ceil(value: float) -> int:
    return math.ceil(value - SNAP_EPSILON)


def warp_boxes(t: Affine, boxes: Sequence[BoundingBox], shape: Tuple[int, int],
               buffer: int = DEFAULT_BUFFER, manual_offset: Tuple[int, int] = (0, 0)) -> List[BoundingBox]:
    """Map boxes through t, grow them by buffer, shift by manual_offset and clip to shape.

    Boxes left empty by clipping are dropped with a warning record.
    """
    if buffer < 0:
        raise ValueError(f"buffer must be non-negative, got {buffer}")
    height, width = shape
    d_row, d_col = manual_offset
    out = []
    for box in boxes:
        row_min, col_min, row_max, col_max = warp_hull(t, box)
        row0 = _snap_floor(row_min) - buffer + d_row
        col0 = _snap_floor(col_min) - buffer + d_col
        row1 = _snap_ceil(row_max) + buffer + d_row
        col1 = _snap_ceil(col_max) + buffer + d_col
        row0, row1 = max(0, row0), min(height, row1)
        col0, col1 = max(0, col0), min(width, col1)
        if row1 <= row0 or col1 <= col0:
            pipeline_logger.box_dropped(box, f"outside {height}x{width} target after warping")
            continue
        out.append(BoundingBox(row0, col0, row1 - row0, col1 - col0, box.active_pixels))
    return sorted(out, key=BoundingBox.sort_key)


def footprint_correspondences(footprint: BandFootprint, rows: int, cols: int,
                              crop_transform: Affine) -> Tuple[List[Point], List[Point]]:
    """PC0, PC1, AC0 as (x, y) points in the L1C crop frame and in the raw band frame.

    Footprint corners are the centres of the raw corner pixels.
    """
    inverse = ~crop_transform
    src = [inverse * (p.lon, p.lat) for p in (footprint.pc[0], footprint.pc[1], footprint.ac[0])]
    dst = [(0.5, 0.5), (cols - 0.5, 0.5), (0.5, rows - 0.5)]
    return [(float(x), float(y)) for x, y in src], dst


def l1c_to_raw_transform(footprint: BandFootprint, rows: int, cols: int,
                         crop_transform: Affine) -> Affine:
    """Affine map from L1C crop pixels to raw band pixels"""
    src, dst = footprint_correspondences(footprint, rows, cols, crop_transform)
    return fit_affine(src, dst)
