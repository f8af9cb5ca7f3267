"""
Raster, band and granule types shared by every processing stage
"""

import math
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from .errors import EmptyInputError, MetadataError, UnknownBandError, WindowError

T = TypeVar("T")


class BandId(Enum):
    """The 13 Sentinel-2 MSI bands"""
    B01 = "B01"
    B02 = "B02"
    B03 = "B03"
    B04 = "B04"
    B05 = "B05"
    B06 = "B06"
    B07 = "B07"
    B08 = "B08"
    B8A = "B8A"
    B09 = "B09"
    B10 = "B10"
    B11 = "B11"
    B12 = "B12"

    @property
    def resolution(self) -> int:
        """Ground sampling distance in meters per pixel"""
        return BAND_RESOLUTIONS[self]

    @classmethod
    def parse(cls, text: str, path: Optional[str] = None) -> "BandId":
        """Parse 'B8A', 'b11' or '8A' into a BandId"""
        key = text.strip().upper()
        if not key.startswith("B"):
            key = "B" + key
        if len(key) == 2:
            key = "B0" + key[1]
        try:
            return cls(key)
        except ValueError:
            raise UnknownBandError(text, path) from None


BAND_RESOLUTIONS: Dict[BandId, int] = {
    BandId.B01: 60, BandId.B02: 10, BandId.B03: 10, BandId.B04: 10,
    BandId.B05: 20, BandId.B06: 20, BandId.B07: 20, BandId.B08: 10,
    BandId.B8A: 20, BandId.B09: 60, BandId.B10: 60, BandId.B11: 20,
    BandId.B12: 20,
}

REFERENCE_RESOLUTION = BAND_RESOLUTIONS[BandId.B02]


class Satellite(Enum):
    """Sentinel-2 platform"""
    S2A = "S2A"
    S2B = "S2B"


def round_half_away(value: float) -> int:
    """Round to the nearest integer, halves away from zero"""
    return int(math.copysign(math.floor(abs(value) + 0.5), value))


@dataclass(frozen=True)
class GeoPoint:
    """Geodetic point in decimal degrees"""
    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise MetadataError("corner", f"non-finite coordinate ({self.lat}, {self.lon})")
        if abs(self.lat) > 90.0 or abs(self.lon) > 180.0:
            raise MetadataError("corner", f"coordinate out of range ({self.lat}, {self.lon})")


@dataclass(frozen=True)
class Window:
    """Rectangular pixel window"""
    row0: int
    col0: int
    rows: int
    cols: int

    def fits(self, height: int, width: int) -> bool:
        """Check the window lies fully inside a height x width raster"""
        return (self.rows > 0 and self.cols > 0 and self.row0 >= 0 and self.col0 >= 0
                and self.row0 + self.rows <= height and self.col0 + self.cols <= width)

    @property
    def row1(self) -> int:
        return self.row0 + self.rows

    @property
    def col1(self) -> int:
        return self.col0 + self.cols


class Raster:
    """Immutable unsigned 16-bit band raster, row 0 = first scanned line"""

    def __init__(self, samples: np.ndarray):
        array = np.asarray(samples)
        if array.ndim != 2:
            raise ValueError(f"raster must be 2-D, got shape {array.shape}")
        if array.shape[0] == 0 or array.shape[1] == 0:
            raise ValueError("raster must have positive width and height")
        if array.dtype != np.uint16:
            if array.size and (array.min() < 0 or array.max() > 65535):
                raise ValueError("samples do not fit in unsigned 16 bits")
            array = array.astype(np.uint16)
        else:
            array = array.copy()
        array.setflags(write=False)
        self._samples = array

    @property
    def samples(self) -> np.ndarray:
        return self._samples

    @property
    def height(self) -> int:
        return self._samples.shape[0]

    @property
    def width(self) -> int:
        return self._samples.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self._samples.shape

    def __eq__(self, other) -> bool:
        if not isinstance(other, Raster):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self._samples, other._samples)

    __hash__ = None

    def __repr__(self) -> str:
        return f"Raster({self.height}x{self.width})"


@dataclass(frozen=True)
class GranuleMetadata:
    """Granule metadata.

    Corner order: 0 = first-scanned west, 1 = first-scanned east,
    2 = last-scanned west, 3 = last-scanned east. The granule outline is
    therefore the ring 0, 1, 3, 2.
    """
    satellite: Satellite
    detector: int
    sensing_time: datetime
    corners: Tuple[GeoPoint, GeoPoint, GeoPoint, GeoPoint]

    def __post_init__(self):
        if not 1 <= self.detector <= 12:
            raise MetadataError("detector", f"must be in 1..12, got {self.detector}")
        if self.sensing_time.tzinfo is None:
            raise MetadataError("sensing_time", "time must carry a UTC offset")
        if len(self.corners) != 4:
            raise MetadataError("corners", f"expected 4 corners, got {len(self.corners)}")
        ring = [self.corners[0], self.corners[1], self.corners[3], self.corners[2]]
        if not is_simple_quadrilateral([(p.lon, p.lat) for p in ring]):
            raise MetadataError("corners", "corners do not form a simple quadrilateral")

    @property
    def key(self) -> Tuple[Satellite, int]:
        return (self.satellite, self.detector)


@dataclass
class Granule:
    """One detector acquisition: metadata plus per-band rasters"""
    metadata: GranuleMetadata
    bands: Dict[BandId, Raster]
    valid_windows: Dict[BandId, Window] = field(default_factory=dict)

    def __post_init__(self):
        if not self.bands:
            raise EmptyInputError("granule has no bands")
        check_band_dimensions(self.bands)

    def band(self, band: BandId) -> Raster:
        """Get a band, failing with the band name when absent"""
        if band not in self.bands:
            raise UnknownBandError(band.value)
        return self.bands[band]

    def reference_length(self) -> int:
        """Granule length G_L in reference-band (B02) rows"""
        return self._reference_extent(0)

    def reference_width(self) -> int:
        """Granule width in reference-band (B02) columns"""
        return self._reference_extent(1)

    def _reference_extent(self, axis: int) -> int:
        if BandId.B02 in self.bands:
            return self.bands[BandId.B02].shape[axis]
        band = min(self.bands, key=lambda b: (b.resolution, b.value))
        return round_half_away(self.bands[band].shape[axis] * band.resolution / REFERENCE_RESOLUTION)


def check_band_dimensions(bands: Dict[BandId, Raster]):
    """Equal-resolution bands share dims; mixed resolutions agree within one pixel"""
    ordered = sorted(bands.items(), key=lambda item: (item[0].resolution, item[0].value))
    for (band_a, raster_a), (band_b, raster_b) in zip(ordered, ordered[1:]):
        if band_a.resolution == band_b.resolution:
            if raster_a.shape != raster_b.shape:
                raise MetadataError(
                    band_b.value,
                    f"shape {raster_b.shape} differs from {band_a.value} shape {raster_a.shape}")
            continue
        ratio = band_b.resolution / band_a.resolution
        for axis in (0, 1):
            expected = raster_a.shape[axis] / ratio
            if abs(expected - raster_b.shape[axis]) > 1:
                raise MetadataError(
                    band_b.value,
                    f"shape {raster_b.shape} inconsistent with {band_a.value} shape {raster_a.shape}")


def is_simple_quadrilateral(ring: List[Tuple[float, float]]) -> bool:
    """True when the closed ring of 4 points has no self-intersection"""
    def orient(p, q, r) -> float:
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    def crosses(a, b, c, d) -> bool:
        d1, d2 = orient(c, d, a), orient(c, d, b)
        d3, d4 = orient(a, b, c), orient(a, b, d)
        return (d1 * d2 < 0) and (d3 * d4 < 0)

    if len(set(ring)) != 4:
        return False
    p0, p1, p2, p3 = ring
    return not crosses(p0, p1, p2, p3) and not crosses(p1, p2, p3, p0)


def crop_band(raster: Raster, window: Window) -> Raster:
    """Copy the samples under a window"""
    if not window.fits(raster.height, raster.width):
        raise WindowError(
            f"window {window} outside raster {raster.height}x{raster.width}")
    return Raster(raster.samples[window.row0:window.row1, window.col0:window.col1])


def translate_array(array: np.ndarray, shift: Tuple[int, int], fill=0) -> np.ndarray:
    """out[i, j] = array[i - shift[0], j - shift[1]], fill elsewhere"""
    d_row, d_col = int(shift[0]), int(shift[1])
    height, width = array.shape
    out = np.full_like(array, fill)
    if abs(d_row) >= height or abs(d_col) >= width:
        return out
    src_rows = slice(max(0, -d_row), height - max(0, d_row))
    dst_rows = slice(max(0, d_row), height - max(0, -d_row))
    src_cols = slice(max(0, -d_col), width - max(0, d_col))
    dst_cols = slice(max(0, d_col), width - max(0, -d_col))
    out[dst_rows, dst_cols] = array[src_rows, src_cols]
    return out


def translate_raster(raster: Raster, shift: Tuple[int, int], fill: int = 0) -> Raster:
    """Rigidly move raster content by (rows, cols); vacated pixels take fill"""
    return Raster(translate_array(raster.samples, shift, fill))


def stack_along_track(granules: Iterable[Granule]) -> Granule:
    """Concatenate consecutive granules of one detector along the track"""
    granules = list(granules)
    if not granules:
        raise EmptyInputError("no granules to stack")
    first = granules[0]
    for granule in granules[1:]:
        if granule.metadata.key != first.metadata.key:
            raise MetadataError(
                "detector", f"cannot stack {granule.metadata.key} onto {first.metadata.key}")
    shared = set(first.bands)
    for granule in granules[1:]:
        shared &= set(granule.bands)
    if not shared:
        raise EmptyInputError("stacked granules share no band")

    bands: Dict[BandId, Raster] = {}
    for band in sorted(shared, key=lambda b: b.value):
        widths = {g.bands[band].width for g in granules}
        if len(widths) != 1:
            raise MetadataError(band.value, f"widths differ across stacked granules: {sorted(widths)}")
        bands[band] = Raster(np.concatenate([g.bands[band].samples for g in granules], axis=0))

    last = granules[-1].metadata
    metadata = GranuleMetadata(
        satellite=first.metadata.satellite,
        detector=first.metadata.detector,
        sensing_time=first.metadata.sensing_time,
        corners=(first.metadata.corners[0], first.metadata.corners[1],
                 last.corners[2], last.corners[3]),
    )
    return Granule(metadata, bands)


# Consecutive granules of one detector are 3.6 s apart
STACK_GAP_SECONDS = 5.0


def split_along_track(items: Sequence[T], metadata_of: Callable[[T], GranuleMetadata]) -> List[List[T]]:
    """Group items into runs of consecutive acquisitions of one satellite and detector.

    Runs are ordered by (satellite, detector) and each run by sensing time; a gap
    longer than STACK_GAP_SECONDS starts a new run.
    """
    by_key: Dict[Tuple[Satellite, int], List[T]] = {}
    for item in items:
        by_key.setdefault(metadata_of(item).key, []).append(item)
    runs = []
    for key in sorted(by_key, key=lambda k: (k[0].value, k[1])):
        ordered = sorted(by_key[key], key=lambda item: metadata_of(item).sensing_time)
        current = [ordered[0]]
        for item in ordered[1:]:
            gap = (metadata_of(item).sensing_time - metadata_of(current[-1]).sensing_time).total_seconds()
            if gap > STACK_GAP_SECONDS:
                runs.append(current)
                current = []
            current.append(item)
        runs.append(current)
    return runs
