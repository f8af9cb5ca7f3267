from fractions import Fraction

import numpy as np
import pytest

from oracles import oracle_patch_origins
from rawband.errors import EmptyInputError, PatchGridError
from rawband.hotspot import BoundingBox
from rawband.patch import (STUDY_OVERLAPS, STUDY_SIZES, DatasetStats, PatchGridSpec, PatchLabel,
                           dataset_stats, extract_patches, label_patches, merge_stats, patch_grid,
                           patch_study)
from rawband.raster import Raster, Window

EVENT, NONEVENT = PatchLabel.EVENT, PatchLabel.NONEVENT


class TestGridSpec:
    def test_stride(self):
        assert PatchGridSpec(256, 0.25).stride == 192
        assert PatchGridSpec(128, 0.33).stride == 86
        assert PatchGridSpec(512, 0.75).stride == 128

    @pytest.mark.parametrize("size, overlap", [(0, 0.25), (128, 1.0), (128, -0.1), (1, 0.75)])
    def test_rejects(self, size, overlap):
        with pytest.raises(PatchGridError):
            PatchGridSpec(size, overlap)


class TestPatchGrid:
    def test_single_window(self):
        assert patch_grid(128, 128, PatchGridSpec(128, 0.25)) == [Window(0, 0, 128, 128)]

    def test_edge_snapped_column(self):
        windows = patch_grid(256, 1296, PatchGridSpec(256, 0.25))
        assert [w.col0 for w in windows] == [0, 192, 384, 576, 768, 960, 1040]

    def test_exact_tiling(self):
        windows = patch_grid(512, 512, PatchGridSpec(128, 0.0))
        assert len(windows) == 16
        covered = np.zeros((512, 512), dtype=np.int64)
        for w in windows:
            covered[w.row0:w.row1, w.col0:w.col1] += 1
        assert (covered == 1).all()

    def test_too_large(self):
        with pytest.raises(PatchGridError):
            patch_grid(100, 300, PatchGridSpec(128, 0.25))

    @pytest.mark.parametrize("size", STUDY_SIZES)
    @pytest.mark.parametrize("overlap", STUDY_OVERLAPS)
    def test_matches_enumeration(self, size, overlap):
        spec = PatchGridSpec(size, overlap)
        windows = patch_grid(1152, 1296, spec)
        assert [(w.row0, w.col0) for w in windows] == oracle_patch_origins(1152, 1296, size, spec.stride)
        assert len(set(windows)) == len(windows)
        covered = np.zeros((1152, 1296), dtype=bool)
        for w in windows:
            assert w.fits(1152, 1296)
            covered[w.row0:w.row1, w.col0:w.col1] = True
        assert covered.all()

    @pytest.mark.parametrize("size", STUDY_SIZES)
    def test_more_overlap_never_fewer_windows(self, size):
        counts = [len(patch_grid(1152, 1296, PatchGridSpec(size, overlap))) for overlap in STUDY_OVERLAPS]
        assert counts == sorted(counts)


class TestLabels:
    windows = [Window(0, 0, 8, 8)]

    def test_no_boxes(self):
        assert label_patches(patch_grid(16, 16, PatchGridSpec(8, 0.5)), []) == [NONEVENT] * 9

    def test_six_pixels_is_event(self):
        assert label_patches(self.windows, [BoundingBox(1, 1, 3, 2)]) == [EVENT]

    def test_five_pixels_is_not(self):
        assert label_patches(self.windows, [BoundingBox(1, 1, 5, 1)]) == [NONEVENT]

    def test_threshold_inclusive_when_not_strict(self):
        assert label_patches(self.windows, [BoundingBox(1, 1, 5, 1)], strict=False) == [EVENT]

    def test_overlapping_boxes_counted_once(self):
        boxes = [BoundingBox(0, 0, 1, 3), BoundingBox(0, 1, 1, 3)]
        assert label_patches(self.windows, boxes) == [NONEVENT]

    def test_box_partly_outside_window(self):
        # 4x4 box with a 2x3 corner inside the window
        assert label_patches(self.windows, [BoundingBox(6, 5, 4, 4)]) == [EVENT]
        assert label_patches(self.windows, [BoundingBox(6, 6, 4, 4)]) == [NONEVENT]

    def test_empty_windows(self):
        assert label_patches([], [BoundingBox(0, 0, 3, 3)]) == []

    def test_matches_pixel_count(self, rng):
        spec = PatchGridSpec(16, 0.5)
        windows = patch_grid(48, 64, spec)
        for _ in range(200):
            boxes = []
            for _ in range(int(rng.integers(0, 6))):
                row0, col0 = (int(v) for v in rng.integers(0, 44, size=2))
                rows, cols = (int(v) for v in rng.integers(1, 6, size=2))
                boxes.append(BoundingBox(row0, col0, rows, cols))
            expected = []
            for w in windows:
                area = sum(1 for r in range(w.row0, w.row1) for c in range(w.col0, w.col1)
                           if any(b.row0 <= r < b.row1 and b.col0 <= c < b.col1 for b in boxes))
                expected.append(EVENT if area > 5 else NONEVENT)
            assert label_patches(windows, boxes, shape=(48, 64)) == expected


class TestStats:
    def test_small_patch_proportion(self):
        stats = dataset_stats([EVENT] * 1090 + [NONEVENT] * 33335)
        assert stats.proportion == pytest.approx(0.031663, abs=5e-6)

    def test_large_patch_proportion(self):
        stats = DatasetStats(2189, 7603)
        assert stats.proportion == pytest.approx(0.223550, abs=5e-6)

    def test_no_events(self):
        stats = dataset_stats([NONEVENT] * 4)
        assert stats.proportion == 0.0
        assert stats.total == 4

    def test_exact_identity(self):
        stats = DatasetStats(1090, 33335)
        assert stats.ratio == Fraction(1090, 34425)
        assert stats.ratio * stats.total == stats.event_count

    def test_empty(self):
        with pytest.raises(EmptyInputError):
            dataset_stats([])

    def test_merge(self):
        merged = merge_stats([DatasetStats(1, 9), DatasetStats(3, 7)])
        assert merged == DatasetStats(4, 16)
        assert merge_stats([]) == DatasetStats(0, 0)


def test_extract_patches():
    raster = Raster(np.arange(64 * 64, dtype=np.uint16).reshape(64, 64))
    windows = patch_grid(64, 64, PatchGridSpec(32, 0.5))
    patches = extract_patches(raster, windows)
    assert len(patches) == 9
    assert patches[4].shape == (32, 32)
    assert patches[4].samples[0, 0] == raster.samples[16, 16]


class TestStudy:
    def test_every_size_and_overlap(self):
        rows = patch_study([((512, 512), [BoundingBox(10, 10, 4, 4)])])
        assert len(rows) == 16
        assert [(r.overlap, r.patch_size) for r in rows[:4]] == [(0.25, s) for s in STUDY_SIZES]
        assert all(r.stats.event_count >= 1 for r in rows)

    def test_small_granule_skipped(self, log_records):
        rows = patch_study([((200, 200), [])], sizes=(128, 256), overlaps=(0.5,))
        assert rows[0].stats.total == 9
        assert rows[1].stats == DatasetStats(0, 0)
        assert any("smaller than patch" in r.getMessage() for r in log_records)

    def test_empty(self):
        with pytest.raises(EmptyInputError):
            patch_study([])
