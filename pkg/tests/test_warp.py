import numpy as np
import pytest
from affine import Affine

from rawband.errors import AffineError
from rawband.georef import BandFootprint
from rawband.hotspot import BoundingBox
from rawband.raster import BandId, GeoPoint
from rawband.warp import (fit_affine, footprint_correspondences, invert_affine, l1c_to_raw_transform,
                          warp_boxes, warp_hull)

SRC = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)]


def well_conditioned(rng):
    while True:
        linear = rng.uniform(-3.0, 3.0, size=4)
        if abs(linear[0] * linear[3] - linear[1] * linear[2]) > 0.5:
            break
    offset = rng.uniform(-100.0, 100.0, size=2)
    return Affine(linear[0], linear[1], offset[0], linear[2], linear[3], offset[1])


class TestFitAffine:
    def test_identity(self):
        assert fit_affine(SRC, SRC).almost_equals(Affine.identity(), precision=1e-12)

    def test_translation(self):
        t = fit_affine(SRC, [(x + 10, y - 5) for x, y in SRC])
        assert t.almost_equals(Affine.translation(10, -5), precision=1e-12)

    def test_scaling(self):
        t = fit_affine(SRC, [(2 * x, 2 * y) for x, y in SRC])
        assert t.almost_equals(Affine.scale(2), precision=1e-12)

    def test_collinear(self):
        with pytest.raises(AffineError):
            fit_affine([(0, 0), (1, 1), (2, 2)], SRC)

    def test_singular_target(self):
        with pytest.raises(AffineError):
            fit_affine(SRC, [(0, 0), (1, 1), (2, 2)])

    def test_needs_three_points(self):
        with pytest.raises(AffineError):
            fit_affine(SRC[:2], SRC[:2])

    def test_reproduces_correspondences(self, rng):
        for _ in range(100):
            t = well_conditioned(rng)
            src = [tuple(p) for p in rng.uniform(-500.0, 500.0, size=(3, 2))]
            area = abs((src[1][0] - src[0][0]) * (src[2][1] - src[0][1])
                       - (src[2][0] - src[0][0]) * (src[1][1] - src[0][1]))
            if area < 1000.0:
                continue
            dst = [t * p for p in src]
            fitted = fit_affine(src, dst)
            for p, q in zip(src, dst):
                x, y = fitted * p
                scale = max(1.0, abs(q[0]), abs(q[1]))
                assert abs(x - q[0]) / scale < 1e-9
                assert abs(y - q[1]) / scale < 1e-9


class TestInvert:
    def test_identity(self):
        assert invert_affine(Affine.identity()) == Affine.identity()

    def test_translation(self):
        assert invert_affine(Affine.translation(3, -4)) == Affine.translation(-3, 4)

    def test_singular(self):
        with pytest.raises(AffineError):
            invert_affine(Affine(1, 2, 0, 2, 4, 0))

    def test_round_trip(self, rng):
        for _ in range(100):
            t = well_conditioned(rng)
            inverse = invert_affine(t)
            row0, col0 = rng.uniform(0, 1000, size=2)
            for corner in [(col0, row0), (col0 + 17, row0), (col0, row0 + 9), (col0 + 17, row0 + 9)]:
                back = inverse * (t * corner)
                scale = max(1.0, abs(corner[0]), abs(corner[1]))
                assert abs(back[0] - corner[0]) / scale < 1e-9
                assert abs(back[1] - corner[1]) / scale < 1e-9


class TestWarpBoxes:
    box = BoundingBox(5, 6, 4, 4, 16)

    def test_identity(self):
        assert warp_boxes(Affine.identity(), [self.box], (20, 20), buffer=0) == [self.box]

    def test_translation(self):
        # three rows down, four columns right
        out = warp_boxes(Affine.translation(4, 3), [self.box], (20, 20), buffer=0)
        assert out == [BoundingBox(8, 10, 4, 4, 16)]

    def test_buffer(self):
        assert warp_boxes(Affine.identity(), [self.box], (20, 20)) == [BoundingBox(3, 4, 8, 8, 16)]

    def test_manual_offset(self):
        out = warp_boxes(Affine.identity(), [self.box], (20, 20), buffer=0, manual_offset=(-1, 2))
        assert out == [BoundingBox(4, 8, 4, 4, 16)]

    def test_clipped_to_target(self):
        out = warp_boxes(Affine.identity(), [BoundingBox(0, 0, 3, 3, 9)], (20, 20))
        assert out == [BoundingBox(0, 0, 5, 5, 9)]

    def test_hull_rounds_outward(self):
        t = Affine.scale(0.5)
        assert warp_hull(t, BoundingBox(1, 1, 2, 3)) == (0.5, 0.5, 1.5, 2.0)
        assert warp_boxes(t, [BoundingBox(1, 1, 2, 3)], (20, 20), buffer=0) == [BoundingBox(0, 0, 2, 2)]

    def test_rotation_hull(self):
        t = Affine.rotation(90)
        row_min, col_min, row_max, col_max = warp_hull(t, BoundingBox(0, 0, 2, 4))
        assert (row_min, row_max) == pytest.approx((0.0, 4.0), abs=1e-12)
        assert (col_min, col_max) == pytest.approx((-2.0, 0.0), abs=1e-12)

    def test_dropped_box_is_logged(self, log_records):
        out = warp_boxes(Affine.translation(100, 0), [self.box], (20, 20))
        assert out == []
        assert any("BOX DROPPED" in r.getMessage() for r in log_records)

    def test_negative_buffer(self):
        with pytest.raises(ValueError):
            warp_boxes(Affine.identity(), [self.box], (20, 20), buffer=-1)

    @pytest.mark.filterwarnings("error")
    def test_transform_application_is_warning_free(self):
        t = Affine.translation(4, 3) * Affine.scale(2)
        assert warp_boxes(t, [self.box], (40, 40), buffer=0) == [BoundingBox(13, 16, 8, 8, 16)]
        assert invert_affine(t) * (16.0, 13.0) == pytest.approx((6.0, 5.0))


class TestFootprintTransform:
    footprint = BandFootprint(BandId.B8A, (GeoPoint(40.0, 0.0), GeoPoint(40.0, 8.0)),
                              (GeoPoint(32.0, 0.0), GeoPoint(32.0, 8.0)))
    crop = Affine(0.25, 0.0, 0.0, 0.0, -0.25, 40.0)

    def test_correspondences(self):
        src, dst = footprint_correspondences(self.footprint, 32, 32, self.crop)
        assert src == [(0.0, 0.0), (32.0, 0.0), (0.0, 32.0)]
        assert dst == [(0.5, 0.5), (31.5, 0.5), (0.5, 31.5)]

    def test_maps_crop_corners_to_raw_pixel_centres(self):
        t = l1c_to_raw_transform(self.footprint, 32, 32, self.crop)
        assert t * (0.0, 0.0) == pytest.approx((0.5, 0.5))
        assert t * (32.0, 32.0) == pytest.approx((31.5, 31.5))

    def test_event_box_lands_in_raw_frame(self):
        t = l1c_to_raw_transform(self.footprint, 32, 32, self.crop)
        assert warp_boxes(t, [BoundingBox(8, 8, 4, 4, 16)], (32, 32)) == [BoundingBox(6, 6, 9, 9, 16)]

    def test_mirrored_crop_grid(self):
        # crop grid whose columns run east to west
        mirrored = Affine(-0.25, 0.0, 8.0, 0.0, -0.25, 40.0)
        t = l1c_to_raw_transform(self.footprint, 32, 32, mirrored)
        assert not np.isclose(t.determinant, 0.0)
        assert t * (16.0, 16.0) == pytest.approx((16.0, 16.0))
