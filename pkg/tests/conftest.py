"""
Shared fixtures: synthetic granules, shift tables, L1C tiles and log capture
"""

import logging
import os
import sys
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from affine import Affine

# Add the repository root to the path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from rawband.coreg import ADJACENT_COUPLES, ShiftCoefficientSet, ShiftTable, ShiftVector
from rawband.l1c import L1CTile
from rawband.raster import BandId, GeoPoint, Granule, GranuleMetadata, Raster, Satellite
from utils.logger import pipeline_logger

SCENE_TIME = datetime(2021, 8, 1, 10, 30, 0, tzinfo=timezone.utc)


def make_metadata(satellite=Satellite.S2A, detector=1, corners=None, sensing_time=SCENE_TIME):
    """Metadata with corners 0=first-scanned W, 1=first-scanned E, 2=last-scanned W, 3=last-scanned E"""
    if corners is None:
        corners = ((40.0, 0.0), (40.0, 8.0), (32.0, 0.0), (32.0, 8.0))
    return GranuleMetadata(satellite, detector, sensing_time,
                           tuple(GeoPoint(lat, lon) for lat, lon in corners))


def make_table(satellite=Satellite.S2A, detector=1, values=None):
    """Every adjacent couple present and zero, except the (along, across) values given per couple"""
    values = values or {}
    coefficients = ShiftCoefficientSet(satellite, detector)
    for couple in ADJACENT_COUPLES:
        along, across = values.get(couple, (0.0, 0.0))
        coefficients.set_coefficient(couple, ShiftVector(float(along), float(across), couple[0].resolution))
    return ShiftTable([coefficients])


def noise(rng, shape, low=1000, high=60000):
    return rng.integers(low, high, size=shape, dtype=np.uint16)


@pytest.fixture
def rng():
    return np.random.default_rng(20210801)


@pytest.fixture
def metadata():
    return make_metadata()


@pytest.fixture
def zero_table():
    return make_table()


@pytest.fixture
def textured_granule(rng, metadata):
    """B8A, B11 and B12 of one 20 m granule, each an independent noise texture"""
    bands = {band: Raster(noise(rng, (64, 48))) for band in (BandId.B8A, BandId.B11, BandId.B12)}
    return Granule(metadata, bands)


def scene_tile(tile_id="T32TQM", hot=(), quantification=10000.0):
    """64x64 20 m L1C tile over lon -4..12, lat 28..44 with background reflectance 0.1.

    ``hot`` lists (row, col) pixels given rho12 = 0.30, rho11 = 0.20, rho8a = 0.20.
    """
    planes = {band: np.full((64, 64), 1000, dtype=np.uint16)
              for band in (BandId.B8A, BandId.B11, BandId.B12)}
    for row, col in hot:
        planes[BandId.B8A][row, col] = 2000
        planes[BandId.B11][row, col] = 2000
        planes[BandId.B12][row, col] = 3000
    return L1CTile(tile_id, {band: Raster(p) for band, p in planes.items()},
                   Affine(0.125, 0.0, -4.0, 0.0, -0.125, 44.0), quantification)


def block(row0, col0, rows, cols):
    return [(r, c) for r in range(row0, row0 + rows) for c in range(col0, col0 + cols)]


def scene_granule(rng, detector=1, sensing_time=SCENE_TIME):
    """Raw 32x32 granule whose B8A footprint is lon 0..8, lat 32..40 under a zero table"""
    bands = {band: Raster(noise(rng, (32, 32))) for band in (BandId.B8A, BandId.B11, BandId.B12)}
    return Granule(make_metadata(detector=detector, sensing_time=sensing_time), bands)


@pytest.fixture
def log_records():
    """Records emitted on the package logger during the test"""
    records = []

    class ListHandler(logging.Handler):
        def emit(self, record):
            records.append(record)

    handler = ListHandler(level=logging.DEBUG)
    pipeline_logger.logger.addHandler(handler)
    yield records
    pipeline_logger.logger.removeHandler(handler)


def consecutive_times(count, start=SCENE_TIME, gap=3.6):
    return [start + timedelta(seconds=gap * i) for i in range(count)]
