"""
L1C tile mosaicking, footprint cropping and reflectance resampling
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np
from affine import Affine

from .errors import (EmptyInputError, FootprintOverlapError, MetadataError, ResampleError,
                     TileConsistencyError, UnknownBandError)
from .georef import BandFootprint, footprint_bounds
from .raster import BandId, REFERENCE_RESOLUTION, Raster
from utils.logger import pipeline_logger

DEFAULT_QUANTIFICATION = 10000.0
NODATA = 0
# Snap tolerance for pixel coordinates from the inverse geotransform
PIXEL_EPSILON = 1e-9


@dataclass
class L1CTile:
    """L1C tile: DN rasters plus a geotransform of the reference-resolution grid.

    ``transform`` maps (col, row) of a 10 m pixel grid to (lon, lat); a band
    of resolution R uses the same origin with pixels R / 10 times larger.
    """
    tile_id: str
    bands: Dict[BandId, Raster]
    transform: Affine
    quantification: float = DEFAULT_QUANTIFICATION

    def __post_init__(self):
        if not self.quantification > 0:
            raise MetadataError("quantification", f"must be positive, got {self.quantification}")
        if self.transform.is_degenerate:
            raise MetadataError("geotransform", "linear part is singular")

    def band_transform(self, band: BandId) -> Affine:
        return self.transform * Affine.scale(band.resolution / REFERENCE_RESOLUTION)


@dataclass
class GeoRaster:
    """2-D array with the affine transform mapping (col, row) to (lon, lat)"""
    array: np.ndarray
    transform: Affine
    nodata: int = NODATA
    quantification: float = DEFAULT_QUANTIFICATION

    @property
    def shape(self) -> Tuple[int, int]:
        return self.array.shape

    def bounds(self) -> Tuple[float, float, float, float]:
        """(lat_min, lat_max, lon_min, lon_max) of the pixel-edge extent"""
        rows, cols = self.array.shape
        corners = [self.transform * (c, r) for c in (0, cols) for r in (0, rows)]
        lons = [p[0] for p in corners]
        lats = [p[1] for p in corners]
        return (min(lats), max(lats), min(lons), max(lons))


@dataclass
class ReflectanceStack:
    """TOA reflectance planes on one common grid"""
    planes: Dict[BandId, np.ndarray]
    transform: Affine
    resolution: int = 20

    def __post_init__(self):
        shapes = {plane.shape for plane in self.planes.values()}
        if len(shapes) > 1:
            raise ResampleError(f"reflectance planes differ in shape: {sorted(shapes)}")

    @property
    def shape(self) -> Tuple[int, int]:
        return next(iter(self.planes.values())).shape

    def plane(self, band: BandId) -> np.ndarray:
        if band not in self.planes:
            raise UnknownBandError(band.value)
        return self.planes[band]

    @property
    def rho_8a(self) -> np.ndarray:
        return self.plane(BandId.B8A)

    @property
    def rho_11(self) -> np.ndarray:
        return self.plane(BandId.B11)

    @property
    def rho_12(self) -> np.ndarray:
        return self.plane(BandId.B12)


def _grid_offset(value: float, origin: float, step: float, what: str, tile_id: str) -> int:
    offset = (value - origin) / step
    nearest = round(offset)
    if abs(offset - nearest) > 1e-6:
        raise TileConsistencyError(f"tile {tile_id}: {what} origin not aligned to the mosaic grid")
    return int(nearest)


def mosaic_tiles(tiles: Sequence[L1CTile], band: BandId) -> GeoRaster:
    """Merge tiles onto their minimal bounding grid; lower tile ids win overlaps"""
    if not tiles:
        raise EmptyInputError("no L1C tiles to mosaic")
    ordered = sorted(tiles, key=lambda t: t.tile_id)
    transforms = []
    for tile in ordered:
        if band not in tile.bands:
            raise UnknownBandError(band.value, tile.tile_id)
        t = tile.band_transform(band)
        if t.b != 0 or t.d != 0:
            raise TileConsistencyError(f"tile {tile.tile_id}: rotated geotransform is not supported")
        transforms.append(t)

    first = transforms[0]
    for tile, t in zip(ordered, transforms):
        if not (math.isclose(t.a, first.a, rel_tol=1e-9) and math.isclose(t.e, first.e, rel_tol=1e-9)):
            raise TileConsistencyError(
                f"tile {tile.tile_id}: pixel size ({t.a}, {t.e}) differs from ({first.a}, {first.e})")
        if tile.quantification != ordered[0].quantification:
            raise TileConsistencyError(
                f"tile {tile.tile_id}: quantification {tile.quantification} differs from "
                f"{ordered[0].quantification}")

    step_x, step_y = first.a, first.e
    # grid origin is the corner where column and row indices are smallest
    origin_x = min(t.c for t in transforms) if step_x > 0 else max(t.c for t in transforms)
    origin_y = min(t.f for t in transforms) if step_y > 0 else max(t.f for t in transforms)

    placements = []
    for tile, t in zip(ordered, transforms):
        col = _grid_offset(t.c, origin_x, step_x, "column", tile.tile_id)
        row = _grid_offset(t.f, origin_y, step_y, "row", tile.tile_id)
        placements.append((row, col, tile.bands[band].samples))
    height = max(row + samples.shape[0] for row, _, samples in placements)
    width = max(col + samples.shape[1] for _, col, samples in placements)

    mosaic = np.full((height, width), NODATA, dtype=np.uint16)
    for row, col, samples in placements:
        target = mosaic[row:row + samples.shape[0], col:col + samples.shape[1]]
        empty = target == NODATA
        target[empty] = samples[empty]

    pipeline_logger.debug("Mosaic built", {"band": band.value, "tiles": len(ordered),
                                           "shape": (height, width)})
    return GeoRaster(mosaic, Affine(step_x, 0.0, origin_x, 0.0, step_y, origin_y),
                     quantification=ordered[0].quantification)


def crop_to_footprint(mosaic: GeoRaster, footprint: BandFootprint) -> GeoRaster:
    """Crop the mosaic to the pixel bounds of the footprint's bounding box"""
    lat_min, lat_max, lon_min, lon_max = footprint_bounds(footprint)
    inverse = ~mosaic.transform
    pixels = [inverse * (lon, lat) for lon in (lon_min, lon_max) for lat in (lat_min, lat_max)]
    cols = [p[0] for p in pixels]
    rows = [p[1] for p in pixels]
    height, width = mosaic.shape
    col0 = max(0, math.floor(min(cols) + PIXEL_EPSILON))
    col1 = min(width, math.ceil(max(cols) - PIXEL_EPSILON))
    row0 = max(0, math.floor(min(rows) + PIXEL_EPSILON))
    row1 = min(height, math.ceil(max(rows) - PIXEL_EPSILON))
    if col1 <= col0 or row1 <= row0:
        m_lat_min, m_lat_max, m_lon_min, m_lon_max = mosaic.bounds()
        raise FootprintOverlapError(
            f"footprint lat [{lat_min}, {lat_max}] lon [{lon_min}, {lon_max}] does not overlap "
            f"mosaic lat [{m_lat_min}, {m_lat_max}] lon [{m_lon_min}, {m_lon_max}]")
    return GeoRaster(mosaic.array[row0:row1, col0:col1].copy(),
                     mosaic.transform * Affine.translation(col0, row0),
                     mosaic.nodata, mosaic.quantification)


def _downsample(rho: np.ndarray, factor: int, rows: int, cols: int, method: str) -> np.ndarray:
    if factor == 1:
        return rho[:rows, :cols]
    if method == "nearest":
        return rho[factor // 2:rows * factor:factor, factor // 2:cols * factor:factor]
    blocks = rho[:rows * factor, :cols * factor]
    return blocks.reshape(rows, factor, cols, factor).mean(axis=(1, 3))


def resample_to_coarsest(bands: Dict[BandId, GeoRaster], method: str = "mean") -> ReflectanceStack:
    """Convert DN to reflectance and bring every band to the coarsest resolution"""
    if not bands:
        raise EmptyInputError("no bands to resample")
    if method not in ("mean", "nearest"):
        raise ValueError(f"unknown resampling method '{method}'")
    coarsest = max(bands, key=lambda b: (b.resolution, b.value))
    target = coarsest.resolution

    factors: Dict[BandId, int] = {}
    for band in bands:
        factor, remainder = divmod(target, band.resolution)
        if remainder:
            raise ResampleError(f"{band.value}: {target} m is not a multiple of {band.resolution} m")
        factors[band] = factor

    rows = min(bands[b].shape[0] // factors[b] for b in bands)
    cols = min(bands[b].shape[1] // factors[b] for b in bands)
    if rows == 0 or cols == 0:
        raise ResampleError("cropped area smaller than one coarse pixel")

    planes = {}
    for band, geo in bands.items():
        rho = geo.array.astype(np.float64) / geo.quantification
        planes[band] = _downsample(rho, factors[band], rows, cols, method)
    return ReflectanceStack(planes, bands[coarsest].transform, target)


def tile_footprints(tiles: Sequence[L1CTile]) -> List[Tuple[str, Tuple[float, float, float, float]]]:
    """(tile_id, (lat_min, lat_max, lon_min, lon_max)) per tile, by tile id"""
    out = []
    for tile in sorted(tiles, key=lambda t: t.tile_id):
        band = min(tile.bands, key=lambda b: (b.resolution, b.value))
        raster = tile.bands[band]
        geo = GeoRaster(raster.samples, tile.band_transform(band))
        out.append((tile.tile_id, geo.bounds()))
    return out


def overlapping_tiles(tiles: Sequence[L1CTile], footprint: BandFootprint) -> List[L1CTile]:
    """Tiles whose extent intersects the footprint's bounding box"""
    lat_min, lat_max, lon_min, lon_max = footprint_bounds(footprint)
    by_id = {tile.tile_id: tile for tile in tiles}
    hits = []
    for tile_id, (t_lat_min, t_lat_max, t_lon_min, t_lon_max) in tile_footprints(tiles):
        if t_lat_min < lat_max and lat_min < t_lat_max and t_lon_min < lon_max and lon_min < t_lon_max:
            hits.append(by_id[tile_id])
    return hits
