#!/usr/bin/env python3
"""
Rawband - Raw Sentinel-2 Granule Processing

Command-line driver for:
- Coarse spatial coregistration of raw bands with stored shift tables
- Coarse georeferencing of band footprints from granule metadata
- L1C mosaicking, hotspot detection and warping of event boxes to raw granules
- Patch decomposition and dataset statistics
- Registration latency benchmarking
"""

import argparse
import dataclasses
import os
import sys
from typing import List, Optional, Sequence

# Add the current directory to the path for imports
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from affine import Affine

from rawband.bench import (QUALITY_HEADERS, REFERENCE_CSC_MS, REFERENCE_MATCHER_MS, REPORT_HEADERS,
                           benchmark_registration, format_quality, format_report, quality_lines, report_lines)
from rawband.bundle_manager import (BundleManager, load_granule_bundle, load_tile_bundle, read_boxes,
                                    read_footprints, read_transform, save_granule_bundle,
                                    save_shift_table, save_tile_bundle, write_band_file, write_boxes,
                                    write_footprints, write_labels, write_lines, write_stats, write_transform)
from rawband.coreg import FillPolicy, apply_coarse_coregistration, registration_quality
from rawband.errors import DataError, UsageError
from rawband.georef import compute_download_polygon
from rawband.hotspot import cluster_mask, detect_events
from rawband.l1c import GeoRaster, L1CTile, crop_to_footprint, mosaic_tiles, resample_to_coarsest
from rawband.patch import (PatchGridSpec, PatchLabel, dataset_stats, extract_patches, label_patches,
                           patch_grid, patch_study)
from rawband.pipeline import PipelineConfig, PipelineEngine, calibrate_table, granule_footprints
from rawband.raster import REFERENCE_RESOLUTION, GeoPoint, Raster, Window
from rawband.warp import l1c_to_raw_transform, warp_boxes
from utils.config_handler import ConfigHandler
from utils.display import Display
from utils.logger import pipeline_logger

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

SUBCOMMANDS = ["coregister", "georef", "mosaic", "detect", "warp", "patchify", "bench",
               "pipeline", "polygon", "calibrate"]


class RawbandArgumentParser(argparse.ArgumentParser):
    """Argument parser that reports bad invocations as UsageError"""

    def error(self, message):
        raise UsageError(message)


class RawbandApp:
    def __init__(self, display: Optional[Display] = None):
        self.display = display or Display()
        self.args = None
        self.config: Optional[PipelineConfig] = None

    def build_parser(self) -> argparse.ArgumentParser:
        parser = RawbandArgumentParser(prog="rawband", description="Raw Sentinel-2 granule processing")
        parser.add_argument("subcommand", choices=SUBCOMMANDS)
        parser.add_argument("--config", help="key=value config file")
        parser.add_argument("--in", dest="input", help="input directory")
        parser.add_argument("--out", dest="output", default=".", help="output directory")
        parser.add_argument("--shift-table", dest="shift_table", help="shift table file")
        parser.add_argument("--patch-size", dest="patch_size", type=int)
        parser.add_argument("--overlap", type=float)
        parser.add_argument("--min-cluster", dest="min_cluster", type=int)
        parser.add_argument("--buffer", type=int)
        parser.add_argument("--footprints", help="footprints file to crop the mosaic with")
        parser.add_argument("--study", action="store_true", help="print the patch study table")
        parser.add_argument("--export-patches", dest="export_patches", action="store_true",
                            help="write each reference-band patch under <out>/patches/<label>/")
        parser.add_argument("--lat", type=float)
        parser.add_argument("--lon", type=float)
        parser.add_argument("--k", type=float, default=10.0, help="polygon width in km")
        return parser

    def load_config(self, args) -> PipelineConfig:
        """Config file values overridden by flags"""
        handler = ConfigHandler.from_file(args.config) if args.config else ConfigHandler()
        handler.override({
            "patch_size": args.patch_size,
            "overlap": args.overlap,
            "min_cluster": args.min_cluster,
            "buffer": args.buffer,
        })
        config = PipelineConfig.from_handler(handler)
        if args.shift_table:
            config = dataclasses.replace(config, shift_table=args.shift_table)
        return config

    def require_input(self) -> str:
        if not self.args.input:
            raise UsageError(f"'{self.args.subcommand}' needs --in")
        return self.args.input

    def run(self, argv: Optional[List[str]] = None) -> int:
        """Run one subcommand and return the process exit code"""
        try:
            self.args = self.build_parser().parse_args(argv)
            self.config = self.load_config(self.args)
            pipeline_logger.attach_file(self.config.log_dir)
            handler = getattr(self, "cmd_" + self.args.subcommand)
            handler()
            return EXIT_OK
        except UsageError as e:
            pipeline_logger.exception_caught(e, "main", {"argv": argv})
            self.display.show_error(str(e))
            return EXIT_USAGE
        except DataError as e:
            pipeline_logger.exception_caught(e, "main", {"argv": argv})
            self.display.show_error(str(e))
            return EXIT_DATA
        except Exception as e:
            pipeline_logger.exception_caught(e, "main", {"argv": argv})
            self.display.show_error(f"internal error: {e}")
            return EXIT_INTERNAL
        finally:
            pipeline_logger.detach_files()

    def cmd_coregister(self):
        """Align B_S of one granule bundle; writes <out>/granule"""
        granule = load_granule_bundle(self.require_input())
        if self.config.fill == FillPolicy.ADJACENT_FILL:
            self.display.show_warning("single granule input: vacated pixels are zero-filled")
        aligned = apply_coarse_coregistration(granule, self.config.bands, self.config.load_table(),
                                              self.config.fill)
        target = os.path.join(self.args.output, "granule")
        save_granule_bundle(aligned, target)
        self.display.show_success(f"coregistered {len(aligned.bands)} bands into {target}")

    def cmd_georef(self):
        """Footprints of every band; writes <out>/footprints.txt"""
        granule = load_granule_bundle(self.require_input())
        footprints = granule_footprints(granule, self.config.load_table())
        BundleManager.ensure_directories(self.args.output)
        write_footprints(os.path.join(self.args.output, "footprints.txt"), footprints)
        rows = [[fp.band.value] + [f"{p.lat:.6f},{p.lon:.6f}" for p in fp.points] for fp in footprints]
        self.display.show_table(["band", "PC0", "PC1", "AC0", "AC1"], rows)

    def cmd_mosaic(self):
        """Mosaic the tiles under <in>/tiles, cropped to --footprints when given"""
        tiles = BundleManager(self.require_input()).load_tiles()
        footprint = None
        if self.args.footprints:
            by_band = {fp.band: fp for fp in read_footprints(self.args.footprints)}
            if self.config.reference_band not in by_band:
                raise UsageError(f"{self.args.footprints} has no {self.config.reference_band.value} footprint")
            footprint = by_band[self.config.reference_band]

        rasters = {}
        for band in self.config.bands:
            mosaic = mosaic_tiles(tiles, band)
            rasters[band] = crop_to_footprint(mosaic, footprint) if footprint else mosaic
        coarsest = max(rasters, key=lambda b: b.resolution)
        scale = REFERENCE_RESOLUTION / coarsest.resolution
        tile = L1CTile("crop" if footprint else "mosaic",
                       {band: Raster(geo.array) for band, geo in rasters.items()},
                       rasters[coarsest].transform * Affine.scale(scale),
                       rasters[coarsest].quantification)
        target = os.path.join(self.args.output, tile.tile_id)
        save_tile_bundle(tile, target)
        self.display.show_success(f"{len(tiles)} tiles merged into {target}")

    def cmd_detect(self):
        """Hotspot boxes of an L1C tile bundle; writes boxes_l1c.txt and l1c_transform.txt"""
        tile = load_tile_bundle(self.require_input())
        geo = {band: GeoRaster(tile.bands[band].samples, tile.band_transform(band),
                               quantification=tile.quantification)
               for band in self.config.bands if band in tile.bands}
        stack = resample_to_coarsest(geo, self.config.resampling)
        hotmap, boxes = detect_events(stack, self.config.min_cluster, self.config.connectivity)
        BundleManager.ensure_directories(self.args.output)
        write_boxes(os.path.join(self.args.output, "boxes_l1c.txt"), boxes)
        write_transform(os.path.join(self.args.output, "l1c_transform.txt"), stack.transform)
        clustered = cluster_mask(hotmap, self.config.min_cluster, self.config.connectivity)
        self.display.show_message(f"{int(hotmap.sum())} hot pixels, {int(clustered.sum())} clustered, "
                                  f"{len(boxes)} event boxes")

    def cmd_warp(self):
        """Warp boxes_l1c.txt into the raw frame of <in>/granule; writes boxes.txt and transform.txt"""
        work = self.require_input()
        granule = load_granule_bundle(os.path.join(work, "granule"))
        reference = self.config.reference_band
        by_band = {fp.band: fp for fp in read_footprints(os.path.join(work, "footprints.txt"))}
        if reference not in by_band:
            raise UsageError(f"footprints.txt has no {reference.value} footprint")
        raster = granule.band(reference)
        crop_transform = read_transform(os.path.join(work, "l1c_transform.txt"))
        transform = l1c_to_raw_transform(by_band[reference], raster.height, raster.width, crop_transform)
        granule_id = os.path.basename(os.path.normpath(work))
        boxes = warp_boxes(transform, read_boxes(os.path.join(work, "boxes_l1c.txt")), raster.shape,
                           self.config.buffer, self.config.offsets.get(granule_id, (0, 0)))
        BundleManager.ensure_directories(self.args.output)
        write_transform(os.path.join(self.args.output, "transform.txt"), transform)
        write_boxes(os.path.join(self.args.output, "boxes.txt"), boxes)
        verdict = "useful" if boxes else "discarded"
        self.display.show_message(f"{verdict}: {len(boxes)} boxes in the raw {reference.value} frame")

    def cmd_patchify(self):
        """Label patches of <in>/granule against <in>/boxes.txt"""
        work = self.require_input()
        granule = load_granule_bundle(os.path.join(work, "granule"))
        shape = granule.band(self.config.reference_band).shape
        boxes = read_boxes(os.path.join(work, "boxes.txt"))
        if self.args.study:
            rows = [[f"{r.overlap:.2f}", f"({r.patch_size}, {r.patch_size})", r.stats.event_count,
                     r.stats.nonevent_count, f"{r.stats.proportion:.6f}"]
                    for r in patch_study([(shape, boxes)], min_pixels=self.config.min_pixels,
                                         strict=self.config.strict_threshold)]
            self.display.show_table(["overlap", "size", "events", "nonevents", "proportion"], rows)
            return
        spec = PatchGridSpec(self.config.patch_size, self.config.overlap)
        windows = patch_grid(shape[0], shape[1], spec)
        labels = label_patches(windows, boxes, self.config.min_pixels, self.config.strict_threshold, shape)
        stats = dataset_stats(labels)
        BundleManager.ensure_directories(self.args.output)
        write_labels(os.path.join(self.args.output, "labels.txt"), windows, labels)
        write_stats(os.path.join(self.args.output, "stats.txt"), stats)
        if self.args.export_patches:
            self.export_patches(granule.band(self.config.reference_band), windows, labels)
        self.display.show_message(f"{stats.event_count} events, {stats.nonevent_count} non-events, "
                                  f"proportion {stats.proportion:.6f}")

    def cmd_pipeline(self):
        """Useful-granule filter over <in>/granules and <in>/tiles"""
        manager = BundleManager(self.require_input())
        engine = PipelineEngine(self.config)
        verdicts = engine.process_all(manager)
        stats = engine.write_outputs(verdicts, self.args.output)
        self.display.show_table(["granule", "verdict", "boxes", "reason"],
                                [[v.granule_id, v.verdict.value, len(v.boxes), v.reason or ""]
                                 for v in verdicts])
        if stats is not None:
            self.display.show_message(f"patches: {stats.event_count} events, "
                                      f"{stats.nonevent_count} non-events")

    def cmd_bench(self):
        """Time CSC against the correlation baseline on <in>/granules"""
        manager = BundleManager(self.require_input())
        granules = [manager.load_granule(g) for g in manager.list_granules()]
        report = benchmark_registration(granules, self.config.load_table(), self.config.bands,
                                        self.config.runs, self.config.warmups, self.config.max_shift)
        self.display.show_title("Registration latency")
        self.display.show_table(REPORT_HEADERS, format_report(report))
        speedup = report.speedup()
        if speedup is not None:
            self.display.show_message(f"speedup: {speedup:.1f}x "
                                      f"(reference {REFERENCE_MATCHER_MS / REFERENCE_CSC_MS:.0f}x)")
        quality = registration_quality(granules, self.config.load_table(), self.config.bands)
        self.display.show_title("Residual after CSC (px)")
        self.display.show_table(QUALITY_HEADERS, format_quality(quality))
        BundleManager.ensure_directories(self.args.output)
        write_lines(os.path.join(self.args.output, "bench.txt"), report_lines(report))
        write_lines(os.path.join(self.args.output, "quality.txt"), quality_lines(quality))

    def export_patches(self, raster: Raster, windows: Sequence[Window], labels: Sequence[PatchLabel]):
        """Write <out>/patches/<label>/r<row0>_c<col0>.rawb for every window"""
        root = os.path.join(self.args.output, "patches")
        for window, label, patch in zip(windows, labels, extract_patches(raster, windows)):
            directory = os.path.join(root, label.value)
            BundleManager.ensure_directories(directory)
            write_band_file(os.path.join(directory, f"r{window.row0}_c{window.col0}.rawb"), patch)
        pipeline_logger.info("Patches exported", {"directory": root, "count": len(windows)})

    def cmd_polygon(self):
        """Download polygon around an event"""
        if self.args.lat is None or self.args.lon is None:
            raise UsageError("'polygon' needs --lat and --lon")
        if self.args.k <= 0:
            raise UsageError(f"--k must be positive, got {self.args.k}")
        ring = compute_download_polygon(GeoPoint(self.args.lat, self.args.lon), self.args.k)
        for point in ring:
            self.display.show_message(f"{point.lat!r},{point.lon!r}")

    def cmd_calibrate(self):
        """Estimate a shift table from the granules under <in>; writes <out>/shift_table.txt"""
        manager = BundleManager(self.require_input())
        granules = [manager.load_granule(g) for g in manager.list_granules()]
        table = calibrate_table(granules, self.config)
        BundleManager.ensure_directories(self.args.output)
        save_shift_table(table, os.path.join(self.args.output, "shift_table.txt"))
        rows = []
        for key in table.keys():
            coefficients = table.get(*key)
            for couple, vector in coefficients.coefficients.items():
                rows.append([key[0].value, key[1], f"{couple[0].value}->{couple[1].value}",
                             f"{vector.along:.2f}", f"{vector.across:.2f}",
                             coefficients.sample_counts.get(couple, "")])
        self.display.show_table(["satellite", "detector", "couple", "along", "across", "samples"], rows)


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point of the application"""
    return RawbandApp().run(argv)


if __name__ == "__main__":
    sys.exit(main())
