"""
Coarse georeferencing of raw bands from granule corner metadata
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

from .coreg import ShiftTable, compose_shift
from .errors import GeoRefError
from .raster import (BandId, GeoPoint, GranuleMetadata, REFERENCE_RESOLUTION,
                     is_simple_quadrilateral)

KM_PER_DEGREE = 111.32
DOWNLOAD_HALF_HEIGHT_KM = 14.0
MAX_POLYGON_LATITUDE = 85.0


@dataclass(frozen=True)
class BandFootprint:
    """Prior corners (first row) and afterward corners (last row) of one band.

    Index 0 is the west end of the row and index 1 the east end.
    """
    band: BandId
    pc: Tuple[GeoPoint, GeoPoint]
    ac: Tuple[GeoPoint, GeoPoint]

    def __post_init__(self):
        ring = [(p.lon, p.lat) for p in (self.pc[0], self.pc[1], self.ac[1], self.ac[0])]
        if not is_simple_quadrilateral(ring):
            raise GeoRefError(f"{self.band.value}: footprint is not a simple quadrilateral")

    @property
    def points(self) -> Tuple[GeoPoint, GeoPoint, GeoPoint, GeoPoint]:
        """PC0, PC1, AC0, AC1"""
        return (self.pc[0], self.pc[1], self.ac[0], self.ac[1])


@dataclass(frozen=True)
class BandExtent:
    """Along-track extent of a band expressed as arc, per corner edge"""
    delta_west: Tuple[float, float]
    delta_east: Tuple[float, float]
    ac: Tuple[GeoPoint, GeoPoint]


@dataclass(frozen=True)
class GeoRefModel:
    """Coarse georeferencing of a band raster of ``rows`` x ``cols`` pixels.

    band_length and granule_length are counted in reference-band rows;
    granule_arc and offset are (lat, lon) degrees along the west edge.
    """
    footprint: BandFootprint
    rows: int
    cols: int
    band_length: float
    band_width: int
    granule_length: float
    granule_arc: Tuple[float, float]
    offset: Tuple[float, float]


def _lerp(a: GeoPoint, b: GeoPoint, t: float) -> Tuple[float, float]:
    return ((1.0 - t) * a.lat + t * b.lat, (1.0 - t) * a.lon + t * b.lon)


def _edge_points(meta: GranuleMetadata, t: float, across: float) -> Tuple[GeoPoint, GeoPoint]:
    """West/east points at fraction t of the along-track edges, moved ``across`` granule widths east"""
    c0, c1, c2, c3 = meta.corners
    west = _lerp(c0, c2, t)
    east = _lerp(c1, c3, t)
    d_lat = across * (c1.lat - c0.lat)
    d_lon = across * (c1.lon - c0.lon)
    return (GeoPoint(west[0] + d_lat, west[1] + d_lon),
            GeoPoint(east[0] + d_lat, east[1] + d_lon))


def _check_lengths(granule_length: float, granule_width: Optional[float] = None):
    if not granule_length > 0:
        raise GeoRefError(f"granule length must be positive, got {granule_length}")
    if granule_width is not None and not granule_width > 0:
        raise GeoRefError(f"granule width must be positive, got {granule_width}")


def _reference_offset(table: ShiftTable, meta: GranuleMetadata, band: BandId) -> Tuple[float, float]:
    """Signed shift of band relative to B02 in B02 pixels"""
    if band == BandId.B02:
        return (0.0, 0.0)
    shift = compose_shift(table.get(meta.satellite, meta.detector), band, BandId.B02)
    scale = band.resolution / REFERENCE_RESOLUTION
    return (shift.along * scale, shift.across * scale)


def compute_band_prior_coords(meta: GranuleMetadata, table: ShiftTable, band: BandId,
                              granule_length: float, granule_width: float) -> Tuple[GeoPoint, GeoPoint]:
    """Corners of a band's first row, displaced from the granule corners by its shift to B02"""
    _check_lengths(granule_length, granule_width)
    along, across = _reference_offset(table, meta, band)
    return _edge_points(meta, along / granule_length, across / granule_width)


def compute_band_extent(meta: GranuleMetadata, table: ShiftTable, band: BandId, band_length: float,
                        granule_length: float, granule_width: float) -> BandExtent:
    """Afterward corners AC = PC + band_length * arc / granule_length"""
    _check_lengths(granule_length, granule_width)
    if band_length < 0:
        raise GeoRefError(f"band length must be non-negative, got {band_length}")
    along, across = _reference_offset(table, meta, band)
    c0, c1, c2, c3 = meta.corners
    fraction = band_length / granule_length
    delta_west = (fraction * (c2.lat - c0.lat), fraction * (c2.lon - c0.lon))
    delta_east = (fraction * (c3.lat - c1.lat), fraction * (c3.lon - c1.lon))
    ac = _edge_points(meta, along / granule_length + fraction, across / granule_width)
    return BandExtent(delta_west, delta_east, ac)


def build_georef_model(meta: GranuleMetadata, table: ShiftTable, band: BandId, rows: int, cols: int,
                       granule_length: float, granule_width: float) -> GeoRefModel:
    """Footprint plus pixel mapping for a band raster of rows x cols"""
    if rows <= 0 or cols <= 0:
        raise GeoRefError(f"band raster must be non-empty, got {rows}x{cols}")
    band_length = rows * band.resolution / REFERENCE_RESOLUTION
    pc = compute_band_prior_coords(meta, table, band, granule_length, granule_width)
    extent = compute_band_extent(meta, table, band, band_length, granule_length, granule_width)
    c0, c2 = meta.corners[0], meta.corners[2]
    along, _ = _reference_offset(table, meta, band)
    arc = (c2.lat - c0.lat, c2.lon - c0.lon)
    return GeoRefModel(
        footprint=BandFootprint(band, pc, extent.ac),
        rows=rows,
        cols=cols,
        band_length=band_length,
        band_width=cols,
        granule_length=granule_length,
        granule_arc=arc,
        offset=(along * arc[0] / granule_length, along * arc[1] / granule_length),
    )


def georeference_pixel(model: GeoRefModel, row: float, col: float) -> GeoPoint:
    """Bilinear interpolation of the footprint corners at a band pixel"""
    if not (0 <= row <= model.rows - 1 and 0 <= col <= model.cols - 1):
        raise GeoRefError(f"pixel ({row}, {col}) outside {model.rows}x{model.cols} band")
    u = col / (model.cols - 1) if model.cols > 1 else 0.0
    v = row / (model.rows - 1) if model.rows > 1 else 0.0
    pc0, pc1, ac0, ac1 = model.footprint.points
    w00, w01, w10, w11 = (1 - u) * (1 - v), u * (1 - v), (1 - u) * v, u * v
    lat = w00 * pc0.lat + w01 * pc1.lat + w10 * ac0.lat + w11 * ac1.lat
    lon = w00 * pc0.lon + w01 * pc1.lon + w10 * ac0.lon + w11 * ac1.lon
    return GeoPoint(lat, lon)


def footprint_bounds(footprint: BandFootprint) -> Tuple[float, float, float, float]:
    """(lat_min, lat_max, lon_min, lon_max)"""
    lats = [p.lat for p in footprint.points]
    lons = [p.lon for p in footprint.points]
    return (min(lats), max(lats), min(lons), max(lons))


def compute_download_polygon(center: GeoPoint, k: float) -> Tuple[GeoPoint, GeoPoint, GeoPoint, GeoPoint]:
    """Rectangle of 28 km north-south and k km east-west around an event.

    Returned as the ring SW, SE, NE, NW.
    """
    if not k > 0:
        raise GeoRefError(f"polygon width must be positive, got {k} km")
    if abs(center.lat) > MAX_POLYGON_LATITUDE:
        raise GeoRefError(f"latitude {center.lat} beyond +/-{MAX_POLYGON_LATITUDE} degrees")
    half_lat = DOWNLOAD_HALF_HEIGHT_KM / KM_PER_DEGREE
    half_lon = (k / 2.0) / (KM_PER_DEGREE * math.cos(math.radians(center.lat)))
    south, north = center.lat - half_lat, center.lat + half_lat
    west, east = center.lon - half_lon, center.lon + half_lon
    return (GeoPoint(south, west), GeoPoint(south, east), GeoPoint(north, east), GeoPoint(north, west))
