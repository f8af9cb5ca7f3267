"""
Pipeline engine for filtering raw granules into useful granules with event
boxes in the raw frame
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, TypeVar

from affine import Affine

from .bundle_manager import (BundleManager, load_reference_table, load_shift_table, write_boxes,
                             write_footprints, write_labels, write_stats, write_verdicts)
from .coreg import (FillPolicy, ShiftTable, apply_coarse_coregistration, band_position,
                    estimate_shift_coefficients)
from .errors import ConfigError, DataError, StageError, UnknownBandError
from .georef import BandFootprint, GeoRefModel, build_georef_model
from .hotspot import BoundingBox, detect_events
from .l1c import (L1CTile, ReflectanceStack, crop_to_footprint, mosaic_tiles, overlapping_tiles,
                  resample_to_coarsest)
from .patch import DatasetStats, PatchGridSpec, dataset_stats, label_patches, merge_stats, patch_grid
from .raster import BandId, Granule, split_along_track, stack_along_track
from .warp import l1c_to_raw_transform, warp_boxes
from utils.config_handler import ConfigHandler
from utils.logger import pipeline_logger

T = TypeVar("T")


@dataclass(frozen=True)
class PipelineConfig:
    """Validated pipeline settings"""
    shift_table: Optional[str] = None
    fill: FillPolicy = FillPolicy.ZERO_FILL
    bands: Tuple[BandId, ...] = (BandId.B8A, BandId.B11, BandId.B12)
    buffer: int = 2
    min_cluster: int = 9
    connectivity: int = 8
    patch_size: int = 128
    overlap: float = 0.25
    min_pixels: int = 5
    strict_threshold: bool = True
    resampling: str = "mean"
    clahe_tile: int = 8
    clahe_clip: float = 2.0
    max_shift: int = 192
    runs: int = 3
    warmups: int = 15
    workers: int = 1
    log_dir: str = "logs"
    offsets: Dict[str, Tuple[int, int]] = field(default_factory=dict)

    @classmethod
    def from_handler(cls, handler: ConfigHandler) -> "PipelineConfig":
        """Build the config from file values and flag overrides"""
        defaults = cls()
        bands = handler.get_list("bands")
        try:
            bands = tuple(BandId.parse(b) for b in bands) if bands else defaults.bands
        except UnknownBandError as e:
            raise ConfigError("bands", str(e)) from None
        return cls(
            shift_table=handler.resolve_path("shift_table"),
            fill=FillPolicy(handler.get_choice("fill", [p.value for p in FillPolicy], defaults.fill.value)),
            bands=bands,
            buffer=handler.get_integer("buffer", defaults.buffer, min_val=0),
            min_cluster=handler.get_integer("min_cluster", defaults.min_cluster, min_val=1),
            connectivity=int(handler.get_choice("connectivity", ["4", "8"], str(defaults.connectivity))),
            patch_size=handler.get_integer("patch_size", defaults.patch_size, min_val=1),
            overlap=handler.get_float("overlap", defaults.overlap, min_val=0.0, max_val=1.0,
                                      max_exclusive=True),
            min_pixels=handler.get_integer("min_pixels", defaults.min_pixels, min_val=0),
            strict_threshold=handler.get_yes_no("strict_threshold", defaults.strict_threshold),
            resampling=handler.get_choice("resampling", ["mean", "nearest"], defaults.resampling),
            clahe_tile=handler.get_integer("clahe_tile", defaults.clahe_tile, min_val=2),
            clahe_clip=handler.get_float("clahe_clip", defaults.clahe_clip, min_val=0.0),
            max_shift=handler.get_integer("max_shift", defaults.max_shift, min_val=1),
            runs=handler.get_integer("runs", defaults.runs, min_val=1),
            warmups=handler.get_integer("warmups", defaults.warmups, min_val=0),
            workers=handler.get_integer("workers", defaults.workers, min_val=1),
            log_dir=handler.get_string("log_dir", defaults.log_dir),
            offsets=handler.get_offsets(),
        )

    @property
    def reference_band(self) -> BandId:
        return self.bands[0]

    def load_table(self) -> ShiftTable:
        """Configured shift table, or the bundled reference table"""
        if self.shift_table:
            return load_shift_table(self.shift_table)
        return load_reference_table()


class Verdict(Enum):
    USEFUL = "useful"
    DISCARDED = "discarded"


@dataclass
class UsefulGranuleVerdict:
    """Outcome of the useful-granule filter for one granule"""
    granule_id: str
    verdict: Verdict
    boxes: List[BoundingBox] = field(default_factory=list)
    reason: Optional[str] = None
    footprint: Optional[BandFootprint] = None
    shape: Optional[Tuple[int, int]] = None
    transform: Optional[Affine] = None

    @property
    def useful(self) -> bool:
        return self.verdict == Verdict.USEFUL


def run_stage(stage: str, granule_id: str, action: Callable[..., T], *args, **kwargs) -> T:
    """Run one stage, tagging data errors with the stage name"""
    pipeline_logger.stage_start(stage, granule_id)
    try:
        result = action(*args, **kwargs)
    except StageError:
        raise
    except DataError as e:
        pipeline_logger.exception_caught(e, f"stage {stage}", {"granule": granule_id})
        raise StageError(stage, e) from e
    pipeline_logger.stage_done(stage, granule_id)
    return result


def georef_reference_band(granule: Granule, table: ShiftTable, band: BandId) -> GeoRefModel:
    """Coarse georeferencing model of one band of an unshifted granule"""
    raster = granule.band(band)
    return build_georef_model(granule.metadata, table, band, raster.height, raster.width,
                              granule.reference_length(), granule.reference_width())


def granule_footprints(granule: Granule, table: ShiftTable) -> List[BandFootprint]:
    """Footprints of every band of a granule, by band id"""
    return [georef_reference_band(granule, table, band).footprint
            for band in sorted(granule.bands, key=lambda b: b.value)]


def l1c_reflectance(tiles: Sequence[L1CTile], footprint: BandFootprint, bands: Sequence[BandId],
                    method: str = "mean") -> ReflectanceStack:
    """Mosaic, crop to the footprint and resample the band stack"""
    crops = {band: crop_to_footprint(mosaic_tiles(tiles, band), footprint) for band in bands}
    return resample_to_coarsest(crops, method)


def classify_useful_granule(granule: Granule, tiles: Sequence[L1CTile], table: ShiftTable,
                            config: PipelineConfig, granule_id: str = "granule",
                            previous: Optional[Granule] = None,
                            following: Optional[Granule] = None) -> UsefulGranuleVerdict:
    """CSC, CG, L1C crop, hotmap, clustering and warp; useful iff a box lands in the B_x frame"""
    reference = config.reference_band
    aligned = run_stage("coregister", granule_id, apply_coarse_coregistration,
                        granule, config.bands, table, config.fill, previous, following)
    model = run_stage("georef", granule_id, georef_reference_band, granule, table, reference)
    footprint = model.footprint

    candidates = overlapping_tiles(tiles, footprint)
    if not candidates:
        reason = "no L1C tile overlaps the reference band footprint"
        pipeline_logger.granule_verdict(granule_id, Verdict.DISCARDED.value, 0, reason)
        return UsefulGranuleVerdict(granule_id, Verdict.DISCARDED, reason=reason, footprint=footprint)

    stack = run_stage("l1c", granule_id, l1c_reflectance, candidates, footprint,
                      config.bands, config.resampling)
    _, l1c_boxes = run_stage("detect", granule_id, detect_events, stack,
                             config.min_cluster, config.connectivity)

    target = aligned.bands[reference]
    offset = config.offsets.get(granule_id, (0, 0))
    window = aligned.valid_windows.get(reference)
    if window is not None:
        offset = (offset[0] - window.row0, offset[1] - window.col0)
    transform = run_stage("warp", granule_id, l1c_to_raw_transform,
                          footprint, model.rows, model.cols, stack.transform)
    raw_boxes = run_stage("warp", granule_id, warp_boxes, transform, l1c_boxes,
                          target.shape, config.buffer, offset)

    if raw_boxes:
        verdict, reason = Verdict.USEFUL, None
    elif l1c_boxes:
        verdict, reason = Verdict.DISCARDED, "event boxes fall outside the reference band"
    else:
        verdict, reason = Verdict.DISCARDED, "no event cluster in the footprint"
    pipeline_logger.granule_verdict(granule_id, verdict.value, len(raw_boxes), reason)
    return UsefulGranuleVerdict(granule_id, verdict, raw_boxes, reason, footprint,
                                target.shape, transform)


class PipelineEngine:
    """Runs the useful-granule pipeline over a directory of bundles"""

    def __init__(self, config: PipelineConfig, table: Optional[ShiftTable] = None):
        self.config = config
        self.table = table if table is not None else config.load_table()

    def process_granule(self, manager: BundleManager, granule_id: str,
                        tiles: Sequence[L1CTile]) -> UsefulGranuleVerdict:
        granule = manager.load_granule(granule_id)
        previous = following = None
        if self.config.fill == FillPolicy.ADJACENT_FILL:
            before, after = manager.neighbours(granule_id)
            previous = manager.load_granule(before) if before else None
            following = manager.load_granule(after) if after else None
        return classify_useful_granule(granule, tiles, self.table, self.config, granule_id,
                                       previous, following)

    def process_all(self, manager: BundleManager) -> List[UsefulGranuleVerdict]:
        """Verdicts for every granule, ordered by granule id"""
        granule_ids = manager.list_granules()
        tiles = manager.load_tiles()
        pipeline_logger.info("Pipeline run", {"granules": len(granule_ids), "tiles": len(tiles),
                                              "workers": self.config.workers})
        if self.config.workers > 1:
            with ThreadPoolExecutor(max_workers=self.config.workers) as executor:
                return list(executor.map(lambda g: self.process_granule(manager, g, tiles), granule_ids))
        return [self.process_granule(manager, g, tiles) for g in granule_ids]

    def label_verdict(self, verdict: UsefulGranuleVerdict) -> Tuple[list, list]:
        """Patch windows and labels of a granule's raw reference band"""
        if verdict.shape is None:
            return [], []
        spec = PatchGridSpec(self.config.patch_size, self.config.overlap)
        if spec.patch_size > min(verdict.shape):
            return [], []
        windows = patch_grid(verdict.shape[0], verdict.shape[1], spec)
        labels = label_patches(windows, verdict.boxes, self.config.min_pixels,
                               self.config.strict_threshold, verdict.shape)
        return windows, labels

    def write_outputs(self, verdicts: Sequence[UsefulGranuleVerdict], out_dir: str) -> Optional[DatasetStats]:
        """verdicts.txt plus per-granule boxes, footprints and labels, and stats.txt"""
        BundleManager.ensure_directories(out_dir)
        parts = []
        for verdict in verdicts:
            write_boxes(os.path.join(out_dir, f"boxes_{verdict.granule_id}.txt"), verdict.boxes)
            if verdict.footprint is not None:
                write_footprints(os.path.join(out_dir, f"footprints_{verdict.granule_id}.txt"),
                                 [verdict.footprint])
            windows, labels = self.label_verdict(verdict)
            if labels:
                write_labels(os.path.join(out_dir, f"labels_{verdict.granule_id}.txt"), windows, labels)
                parts.append(dataset_stats(labels))

        write_verdicts(os.path.join(out_dir, "verdicts.txt"),
                       [(v.granule_id, v.verdict.value, len(v.boxes)) for v in verdicts])
        if not parts:
            return None
        stats = merge_stats(parts)
        write_stats(os.path.join(out_dir, "stats.txt"), stats)
        return stats


def along_track_runs(granules: Sequence[Granule]) -> List[List[Granule]]:
    """Split granules into runs of consecutive acquisitions of one satellite and detector"""
    return split_along_track(granules, lambda g: g.metadata)


def calibration_couples(bands: Iterable[BandId]) -> List[Tuple[BandId, BandId]]:
    """Consecutive bands in the band order; non-adjacent couples are bridged when fitted"""
    ordered = sorted(set(bands), key=band_position)
    return list(zip(ordered, ordered[1:]))


def calibrate_table(granules: Sequence[Granule], config: PipelineConfig) -> ShiftTable:
    """Estimate shift coefficients per (satellite, detector) from stacked granules"""
    stacks: Dict[tuple, List[Granule]] = {}
    for run in along_track_runs(granules):
        stacked = stack_along_track(run)
        stacks.setdefault(stacked.metadata.key, []).append(stacked)

    table = ShiftTable()
    for (satellite, detector), stacked in stacks.items():
        shared = set.intersection(*(set(s.bands) for s in stacked))
        couples = calibration_couples(shared)
        if not couples:
            pipeline_logger.warning("No band couple to calibrate",
                                    {"satellite": satellite.value, "detector": detector})
            continue
        pairs = {couple: [(s.bands[couple[0]], s.bands[couple[1]]) for s in stacked] for couple in couples}
        table.add(run_stage("calibrate", f"{satellite.value}-{detector}", estimate_shift_coefficients,
                            pairs, satellite, detector, config.max_shift, config.clahe_tile,
                            config.clahe_clip, config.workers))
    return table
