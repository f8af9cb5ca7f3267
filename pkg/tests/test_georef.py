import numpy as np
import pytest

from conftest import make_metadata, make_table
from rawband.errors import GeoRefError, ShiftLookupError
from rawband.georef import (BandFootprint, build_georef_model, compute_band_extent,
                            compute_band_prior_coords, compute_download_polygon, footprint_bounds,
                            georeference_pixel)
from rawband.raster import BandId, GeoPoint, Satellite

SKEWED = ((45.1, 7.3), (45.4, 8.6), (44.2, 7.0), (44.5, 8.3))


class TestPriorCoords:
    def test_b02_is_granule_corners(self, metadata, zero_table):
        pc = compute_band_prior_coords(metadata, zero_table, BandId.B02, 1000, 1000)
        assert pc == (metadata.corners[0], metadata.corners[1])

    def test_along_track_displacement(self):
        # 1000 rows over 0.1 degrees of latitude: 0.0001 degrees per B02 row
        meta = make_metadata(corners=((40.0, 0.0), (40.0, 1.0), (39.9, 0.0), (39.9, 1.0)))
        table = make_table(values={(BandId.B02, BandId.B08): (100.0, 0.0)})
        pc0, pc1 = compute_band_prior_coords(meta, table, BandId.B08, 1000, 1000)
        assert pc0.lat == pytest.approx(39.99, abs=1e-12)
        assert pc0.lon == pytest.approx(0.0, abs=1e-12)
        assert pc1.lat == pytest.approx(39.99, abs=1e-12)

    def test_across_track_displacement(self):
        meta = make_metadata(corners=((40.0, 0.0), (40.0, 1.0), (39.9, 0.0), (39.9, 1.0)))
        table = make_table(values={(BandId.B02, BandId.B08): (0.0, 50.0)})
        pc0, pc1 = compute_band_prior_coords(meta, table, BandId.B08, 1000, 1000)
        assert pc0.lon == pytest.approx(0.05, abs=1e-12)
        assert pc1.lon == pytest.approx(1.05, abs=1e-12)

    def test_scales_band_pixels_to_reference(self):
        meta = make_metadata(corners=((40.0, 0.0), (40.0, 1.0), (39.9, 0.0), (39.9, 1.0)))
        # B05 is 20 m: compose(B05, B02) = 0 + 0 + 0 + 40 * 10 / 20 = 20 px of 20 m = 40 B02 rows
        table = make_table(values={(BandId.B04, BandId.B05): (40.0, 0.0)})
        pc0, _ = compute_band_prior_coords(meta, table, BandId.B05, 1000, 1000)
        assert pc0.lat == pytest.approx(40.0 - 0.004, abs=1e-12)

    def test_non_positive_length(self, metadata, zero_table):
        with pytest.raises(GeoRefError):
            compute_band_prior_coords(metadata, zero_table, BandId.B02, 0, 100)

    def test_missing_key(self, metadata):
        with pytest.raises(ShiftLookupError, match="no shift coefficients"):
            compute_band_prior_coords(metadata, make_table(Satellite.S2B, 2), BandId.B8A, 100, 100)


class TestBandExtent:
    def test_full_length(self, metadata, zero_table):
        extent = compute_band_extent(metadata, zero_table, BandId.B02, 2304, 2304, 2592)
        assert extent.delta_west == pytest.approx((-8.0, 0.0))
        assert extent.ac == (metadata.corners[2], metadata.corners[3])

    def test_half_length(self):
        meta = make_metadata(corners=((40.0, 0.0), (40.0, 1.0), (39.8, 0.0), (39.8, 1.0)))
        extent = compute_band_extent(meta, make_table(), BandId.B02, 1152, 2304, 2592)
        assert extent.delta_west[0] == pytest.approx(-0.1, abs=1e-12)
        assert extent.ac[0].lat == pytest.approx(39.9, abs=1e-12)

    def test_zero_length(self, metadata, zero_table):
        extent = compute_band_extent(metadata, zero_table, BandId.B02, 0, 2304, 2592)
        assert extent.delta_west == (0.0, 0.0)
        assert extent.ac == (metadata.corners[0], metadata.corners[1])

    def test_negative_length(self, metadata, zero_table):
        with pytest.raises(GeoRefError):
            compute_band_extent(metadata, zero_table, BandId.B02, -1, 2304, 2592)


class TestGeoRefModel:
    def test_b02_footprint_is_granule(self, zero_table):
        rng = np.random.default_rng(11)
        for _ in range(50):
            lat, lon = rng.uniform(-60, 60), rng.uniform(-170, 170)
            meta = make_metadata(corners=((lat, lon), (lat + 0.1, lon + 1.2),
                                          (lat - 1.0, lon - 0.2), (lat - 0.9, lon + 1.0)))
            rows, cols = (int(v) for v in rng.integers(2, 3000, size=2))
            model = build_georef_model(meta, zero_table, BandId.B02, rows, cols, rows, cols)
            c0, c1, c2, c3 = meta.corners
            assert model.footprint.pc == (c0, c1)
            assert model.footprint.ac == (c2, c3)
            assert georeference_pixel(model, 0, 0) == c0
            assert georeference_pixel(model, 0, cols - 1) == c1
            assert georeference_pixel(model, rows - 1, 0) == c2
            assert georeference_pixel(model, rows - 1, cols - 1) == c3

    def test_center_is_corner_mean(self, zero_table):
        meta = make_metadata(corners=SKEWED)
        model = build_georef_model(meta, zero_table, BandId.B02, 101, 201, 101, 201)
        center = georeference_pixel(model, 50, 100)
        assert center.lat == pytest.approx(np.mean([c.lat for c in meta.corners]), abs=1e-12)
        assert center.lon == pytest.approx(np.mean([c.lon for c in meta.corners]), abs=1e-12)

    def test_coarser_band_covers_granule(self, metadata, zero_table):
        model = build_georef_model(metadata, zero_table, BandId.B8A, 32, 32, 64, 64)
        assert model.band_length == 64
        assert model.footprint.ac == (metadata.corners[2], metadata.corners[3])

    def test_shifted_band_offset(self, metadata):
        table = make_table(values={(BandId.B02, BandId.B08): (8.0, 0.0)})
        model = build_georef_model(metadata, table, BandId.B08, 64, 64, 64, 64)
        assert model.offset == pytest.approx((-1.0, 0.0))
        assert model.footprint.pc[0].lat == pytest.approx(39.0)
        assert model.footprint.ac[0].lat == pytest.approx(31.0)

    def test_pixel_outside(self, metadata, zero_table):
        model = build_georef_model(metadata, zero_table, BandId.B02, 10, 10, 10, 10)
        with pytest.raises(GeoRefError):
            georeference_pixel(model, 10, 0)

    def test_bounds(self, metadata, zero_table):
        model = build_georef_model(metadata, zero_table, BandId.B02, 10, 10, 10, 10)
        assert footprint_bounds(model.footprint) == (32.0, 40.0, 0.0, 8.0)

    def test_self_intersecting_footprint(self):
        with pytest.raises(GeoRefError):
            BandFootprint(BandId.B02, (GeoPoint(40.0, 0.0), GeoPoint(32.0, 8.0)),
                          (GeoPoint(40.0, 8.0), GeoPoint(32.0, 0.0)))


class TestDownloadPolygon:
    def test_equator(self):
        sw, se, ne, nw = compute_download_polygon(GeoPoint(0.0, 0.0), 10)
        assert ne.lat == pytest.approx(0.12576, abs=1e-5)
        assert sw.lat == pytest.approx(-0.12576, abs=1e-5)
        assert ne.lon == pytest.approx(0.04491, abs=1e-5)
        assert nw.lon == pytest.approx(-0.04491, abs=1e-5)
        assert se.lat == sw.lat and se.lon == ne.lon

    def test_width_grows_with_latitude(self):
        low = compute_download_polygon(GeoPoint(0.0, 15.0), 10)
        high = compute_download_polygon(GeoPoint(60.0, 15.0), 10)
        assert high[1].lon - high[0].lon == pytest.approx(2 * (low[1].lon - low[0].lon))

    @pytest.mark.parametrize("lat, k", [(0.0, 0.0), (0.0, -5.0), (86.0, 10.0)])
    def test_rejects(self, lat, k):
        with pytest.raises(GeoRefError):
            compute_download_polygon(GeoPoint(lat, 0.0), k)
