"""
Bundle manager for reading and writing granule bundles, L1C tile bundles,
shift tables and the text outputs of each stage
"""

import os
import struct
from datetime import datetime, timezone
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from affine import Affine

from .coreg import ShiftCoefficientSet, ShiftTable, ShiftVector
from .errors import (BundleFormatError, BundleIOError, EmptyInputError, MetadataError,
                     TruncatedDataError)
from .georef import BandFootprint
from .hotspot import BoundingBox
from .l1c import DEFAULT_QUANTIFICATION, L1CTile
from .patch import DatasetStats, PatchLabel
from .raster import (BandId, GeoPoint, Granule, GranuleMetadata, Raster, Satellite, Window,
                     split_along_track)
from utils.logger import pipeline_logger

RAWB_MAGIC = b"RAWB"
RAWB_HEADER = struct.Struct("<4sIII")
BITS_PER_SAMPLE = 16
BAND_SUFFIX = ".rawb"
METADATA_FILE = "metadata.txt"
REFERENCE_TABLE = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data",
                               "reference_b8a_b11.txt")


def _read_bytes(path: str) -> bytes:
    try:
        with open(path, 'rb') as f:
            return f.read()
    except OSError as e:
        raise BundleIOError(path, e) from e


def _write_bytes(path: str, data: bytes):
    try:
        with open(path, 'wb') as f:
            f.write(data)
    except OSError as e:
        raise BundleIOError(path, e) from e


def _read_lines(path: str) -> List[str]:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return f.readlines()
    except OSError as e:
        raise BundleIOError(path, e) from e


def write_lines(path: str, lines: Iterable[str]):
    try:
        with open(path, 'w', encoding='utf-8') as f:
            for line in lines:
                f.write(line + "\n")
    except OSError as e:
        raise BundleIOError(path, e) from e


def _data_lines(path: str) -> List[Tuple[int, List[str]]]:
    """(line number, whitespace fields) of non-blank, non-comment lines"""
    out = []
    for number, raw in enumerate(_read_lines(path), 1):
        line = raw.split('#', 1)[0].strip()
        if line:
            out.append((number, line.split()))
    return out


def read_band_file(path: str) -> Raster:
    """Read a RAWB band file: 16-byte header, then row-major little-endian u16 samples"""
    data = _read_bytes(path)
    if len(data) < RAWB_HEADER.size:
        raise BundleFormatError(path, f"file shorter than the {RAWB_HEADER.size}-byte header")
    magic, width, height, bits = RAWB_HEADER.unpack_from(data)
    if magic != RAWB_MAGIC:
        raise BundleFormatError(path, f"bad magic {magic!r}")
    if bits != BITS_PER_SAMPLE:
        raise BundleFormatError(path, f"unsupported bits per sample {bits}")
    if width == 0 or height == 0:
        raise BundleFormatError(path, f"empty raster {width}x{height}")
    expected = width * height
    payload = len(data) - RAWB_HEADER.size
    if payload < expected * 2:
        raise TruncatedDataError(path, expected, payload // 2)
    if payload > expected * 2:
        raise BundleFormatError(path, f"{payload - expected * 2} trailing bytes after samples")
    samples = np.frombuffer(data, dtype='<u2', count=expected, offset=RAWB_HEADER.size)
    return Raster(samples.reshape(height, width).astype(np.uint16))


def write_band_file(path: str, raster: Raster):
    header = RAWB_HEADER.pack(RAWB_MAGIC, raster.width, raster.height, BITS_PER_SAMPLE)
    _write_bytes(path, header + raster.samples.astype('<u2').tobytes())


def read_key_values(path: str) -> Dict[str, str]:
    """Parse a key=value metadata file"""
    values: Dict[str, str] = {}
    for number, raw in enumerate(_read_lines(path), 1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise MetadataError(f"line {number}", "expected key=value", path)
        key, value = line.split('=', 1)
        values[key.strip()] = value.strip()
    return values


def _require(values: Dict[str, str], key: str, path: str) -> str:
    if key not in values or not values[key]:
        raise MetadataError(key, "missing", path)
    return values[key]


def _parse_point(text: str, key: str, path: str) -> GeoPoint:
    parts = text.split(',')
    if len(parts) != 2:
        raise MetadataError(key, f"expected 'lat,lon', got '{text}'", path)
    try:
        return GeoPoint(float(parts[0]), float(parts[1]))
    except ValueError:
        raise MetadataError(key, f"'{text}' is not a coordinate pair", path) from None
    except MetadataError as e:
        raise MetadataError(key, e.message, path) from None


def _format_point(point: GeoPoint) -> str:
    return f"{point.lat!r},{point.lon!r}"


def _parse_time(text: str, path: str) -> datetime:
    try:
        value = datetime.fromisoformat(text.replace('Z', '+00:00'))
    except ValueError:
        raise MetadataError("sensing_time", f"'{text}' is not an ISO-8601 time", path) from None
    if value.tzinfo is None:
        value = value.replace(tzinfo=timezone.utc)
    return value


def _band_files(directory: str) -> List[Tuple[BandId, str]]:
    try:
        names = sorted(os.listdir(directory))
    except OSError as e:
        raise BundleIOError(directory, e) from e
    files = []
    for name in names:
        if name.endswith(BAND_SUFFIX):
            path = os.path.join(directory, name)
            files.append((BandId.parse(name[:-len(BAND_SUFFIX)], path), path))
    return files


def read_granule_metadata(directory: str) -> GranuleMetadata:
    path = os.path.join(directory, METADATA_FILE)
    values = read_key_values(path)
    satellite_text = _require(values, "satellite", path)
    try:
        satellite = Satellite(satellite_text.upper())
    except ValueError:
        raise MetadataError("satellite", f"unknown satellite '{satellite_text}'", path) from None
    try:
        detector = int(_require(values, "detector", path))
    except ValueError:
        raise MetadataError("detector", f"'{values['detector']}' is not an integer", path) from None
    sensing_time = _parse_time(_require(values, "sensing_time", path), path)
    corners = tuple(_parse_point(_require(values, f"corner{i}", path), f"corner{i}", path)
                    for i in range(4))
    try:
        return GranuleMetadata(satellite, detector, sensing_time, corners)
    except MetadataError as e:
        raise MetadataError(e.key, e.message, path) from None


def load_granule_bundle(directory: str) -> Granule:
    """Load metadata.txt and every B<ID>.rawb file of a granule directory"""
    metadata = read_granule_metadata(directory)
    bands = {band: read_band_file(path) for band, path in _band_files(directory)}
    if not bands:
        raise EmptyInputError(f"{directory}: no band files")
    try:
        return Granule(metadata, bands)
    except MetadataError as e:
        raise MetadataError(e.key, e.message, directory) from None


def _prepare_bundle(directory: str, bands: Iterable[BandId]):
    """Create a bundle directory and drop band files left by an earlier save"""
    try:
        os.makedirs(directory, exist_ok=True)
        names = sorted(os.listdir(directory))
    except OSError as e:
        raise BundleIOError(directory, e) from e
    keep = {band.value + BAND_SUFFIX for band in bands}
    for name in names:
        if name.endswith(BAND_SUFFIX) and name not in keep:
            try:
                os.remove(os.path.join(directory, name))
            except OSError as e:
                raise BundleIOError(os.path.join(directory, name), e) from e


def save_granule_bundle(granule: Granule, directory: str):
    """Write a granule directory that load_granule_bundle reads back bit-exactly"""
    _prepare_bundle(directory, granule.bands)
    meta = granule.metadata
    lines = [
        f"satellite={meta.satellite.value}",
        f"detector={meta.detector}",
        f"sensing_time={meta.sensing_time.astimezone(timezone.utc).isoformat()}",
    ]
    lines += [f"corner{i}={_format_point(p)}" for i, p in enumerate(meta.corners)]
    write_lines(os.path.join(directory, METADATA_FILE), lines)
    for band, raster in sorted(granule.bands.items(), key=lambda item: item[0].value):
        write_band_file(os.path.join(directory, band.value + BAND_SUFFIX), raster)


def load_tile_bundle(directory: str) -> L1CTile:
    """Load an L1C tile: metadata.txt with tile_id, quantification and GDAL-order geotransform"""
    path = os.path.join(directory, METADATA_FILE)
    values = read_key_values(path)
    tile_id = _require(values, "tile_id", path)
    try:
        quantification = float(values.get("quantification", DEFAULT_QUANTIFICATION))
    except ValueError:
        raise MetadataError("quantification", f"'{values['quantification']}' is not a number", path) from None
    parts = _require(values, "geotransform", path).split(',')
    try:
        coefficients = [float(p) for p in parts]
    except ValueError:
        raise MetadataError("geotransform", "coefficients must be numbers", path) from None
    if len(coefficients) != 6:
        raise MetadataError("geotransform", f"expected 6 coefficients, got {len(coefficients)}", path)
    bands = {band: read_band_file(p) for band, p in _band_files(directory)}
    if not bands:
        raise EmptyInputError(f"{directory}: no band files")
    try:
        return L1CTile(tile_id, bands, Affine.from_gdal(*coefficients), quantification)
    except MetadataError as e:
        raise MetadataError(e.key, e.message, path) from None


def save_tile_bundle(tile: L1CTile, directory: str):
    _prepare_bundle(directory, tile.bands)
    geotransform = ",".join(repr(float(v)) for v in tile.transform.to_gdal())
    write_lines(os.path.join(directory, METADATA_FILE), [
        f"tile_id={tile.tile_id}",
        f"quantification={tile.quantification!r}",
        f"geotransform={geotransform}",
    ])
    for band, raster in sorted(tile.bands.items(), key=lambda item: item[0].value):
        write_band_file(os.path.join(directory, band.value + BAND_SUFFIX), raster)


def load_shift_table(path: str) -> ShiftTable:
    """Lines: satellite detector band_from band_to along across resolution"""
    sets: Dict[Tuple[Satellite, int], ShiftCoefficientSet] = {}
    for number, fields in _data_lines(path):
        where = f"{path}:{number}"
        if len(fields) != 7:
            raise BundleFormatError(where, f"expected 7 fields, got {len(fields)}")
        try:
            satellite = Satellite(fields[0].upper())
            detector = int(fields[1])
            along, across = float(fields[4]), float(fields[5])
            resolution = int(fields[6])
        except ValueError as e:
            raise BundleFormatError(where, str(e)) from None
        couple = (BandId.parse(fields[2], where), BandId.parse(fields[3], where))
        key = (satellite, detector)
        if key not in sets:
            sets[key] = ShiftCoefficientSet(satellite, detector)
        sets[key].set_coefficient(couple, ShiftVector(along, across, resolution))
    table = ShiftTable(sets.values())
    pipeline_logger.debug("Shift table loaded", {"path": path, "keys": len(table)})
    return table


def save_shift_table(table: ShiftTable, path: str):
    lines = ["# satellite detector band_from band_to along across resolution"]
    for key in table.keys():
        coefficient_set = table.get(*key)
        for (band_from, band_to), vector in coefficient_set.coefficients.items():
            lines.append(f"{key[0].value} {key[1]} {band_from.value} {band_to.value} "
                         f"{vector.along!r} {vector.across!r} {vector.resolution}")
    write_lines(path, lines)


def load_reference_table() -> ShiftTable:
    """Bundled table carrying the published B8A-B11 offsets of both satellites"""
    return load_shift_table(REFERENCE_TABLE)


def write_boxes(path: str, boxes: Sequence[BoundingBox]):
    write_lines(path, [f"{b.row0} {b.col0} {b.rows} {b.cols} {b.active_pixels}" for b in boxes])


def read_boxes(path: str) -> List[BoundingBox]:
    boxes = []
    for number, fields in _data_lines(path):
        if len(fields) != 5:
            raise BundleFormatError(f"{path}:{number}", f"expected 5 fields, got {len(fields)}")
        try:
            boxes.append(BoundingBox(*(int(f) for f in fields)))
        except ValueError as e:
            raise BundleFormatError(f"{path}:{number}", str(e)) from None
    return boxes


def write_footprints(path: str, footprints: Sequence[BandFootprint]):
    """One line per band, points in ring order PC0 PC1 AC1 AC0"""
    lines = []
    for fp in footprints:
        ring = (fp.pc[0], fp.pc[1], fp.ac[1], fp.ac[0])
        lines.append(" ".join([fp.band.value] + [_format_point(p) for p in ring]))
    write_lines(path, lines)


def read_footprints(path: str) -> List[BandFootprint]:
    footprints = []
    for number, fields in _data_lines(path):
        where = f"{path}:{number}"
        if len(fields) != 5:
            raise BundleFormatError(where, f"expected 5 fields, got {len(fields)}")
        band = BandId.parse(fields[0], where)
        pc0, pc1, ac1, ac0 = (_parse_point(f, band.value, where) for f in fields[1:])
        footprints.append(BandFootprint(band, (pc0, pc1), (ac0, ac1)))
    return footprints


def write_transform(path: str, t: Affine):
    """Six reals a b c d e f, row-major"""
    write_lines(path, [" ".join(repr(float(v)) for v in tuple(t)[:6])])


def read_transform(path: str) -> Affine:
    rows = _data_lines(path)
    values = [v for _, fields in rows for v in fields]
    if len(values) != 6:
        raise BundleFormatError(path, f"expected 6 reals, got {len(values)}")
    try:
        return Affine(*(float(v) for v in values))
    except ValueError as e:
        raise BundleFormatError(path, str(e)) from None


def write_labels(path: str, windows: Sequence[Window], labels: Sequence[PatchLabel]):
    write_lines(path, [f"{w.row0} {w.col0} {label.value}" for w, label in zip(windows, labels)])


def read_labels(path: str) -> List[Tuple[int, int, PatchLabel]]:
    out = []
    for number, fields in _data_lines(path):
        if len(fields) != 3:
            raise BundleFormatError(f"{path}:{number}", f"expected 3 fields, got {len(fields)}")
        try:
            out.append((int(fields[0]), int(fields[1]), PatchLabel(fields[2])))
        except ValueError as e:
            raise BundleFormatError(f"{path}:{number}", str(e)) from None
    return out


def write_verdicts(path: str, rows: Sequence[Tuple[str, str, int]]):
    """Lines: granule_id verdict n_boxes"""
    write_lines(path, [f"{granule_id} {verdict} {count}" for granule_id, verdict, count in rows])


def write_stats(path: str, stats: DatasetStats):
    write_lines(path, [
        f"events={stats.event_count}",
        f"nonevents={stats.nonevent_count}",
        f"proportion={stats.proportion:.6f}",
    ])


class BundleManager:
    """Locates granule and tile bundles under an input root.

    Layout: ``<root>/granules/<granule_id>/`` and ``<root>/tiles/<tile_id>/``.
    """

    def __init__(self, root: str):
        self.root = root
        self.granule_directory = os.path.join(root, "granules")
        self.tile_directory = os.path.join(root, "tiles")

    @staticmethod
    def ensure_directories(*directories: str):
        """Ensure output directories exist"""
        for directory in directories:
            try:
                os.makedirs(directory, exist_ok=True)
            except OSError as e:
                raise BundleIOError(directory, e) from e

    @staticmethod
    def _bundles(directory: str) -> List[str]:
        if not os.path.isdir(directory):
            return []
        try:
            names = os.listdir(directory)
        except OSError as e:
            raise BundleIOError(directory, e) from e
        return sorted(n for n in names
                      if os.path.isfile(os.path.join(directory, n, METADATA_FILE)))

    def list_granules(self) -> List[str]:
        """Granule ids in sorted order"""
        return self._bundles(self.granule_directory)

    def list_tiles(self) -> List[str]:
        return self._bundles(self.tile_directory)

    def granule_path(self, granule_id: str) -> str:
        return os.path.join(self.granule_directory, granule_id)

    def load_granule(self, granule_id: str) -> Granule:
        return load_granule_bundle(self.granule_path(granule_id))

    def load_tiles(self) -> List[L1CTile]:
        return [load_tile_bundle(os.path.join(self.tile_directory, t)) for t in self.list_tiles()]

    def neighbours(self, granule_id: str) -> Tuple[Optional[str], Optional[str]]:
        """Previous and following granule ids in the same along-track run"""
        metadata = {g: read_granule_metadata(self.granule_path(g)) for g in self.list_granules()}
        for run in split_along_track(list(metadata), metadata.__getitem__):
            if granule_id in run:
                index = run.index(granule_id)
                previous = run[index - 1] if index > 0 else None
                following = run[index + 1] if index + 1 < len(run) else None
                return previous, following
        raise EmptyInputError(f"{self.granule_path(granule_id)}: no such granule bundle")
