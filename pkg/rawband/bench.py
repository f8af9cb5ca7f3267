"""
Registration latency harness: fixed-shift CSC against the exhaustive correlation baseline
"""

import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

from .coreg import (BandLike, RegistrationQuality, ShiftTable, apply_coarse_coregistration,
                    register_by_correlation)
from .errors import EmptyInputError
from .raster import BandId, Granule
from utils.logger import pipeline_logger

DEFAULT_BANDS = (BandId.B8A, BandId.B11, BandId.B12)
DEFAULT_RUNS = 3
DEFAULT_WARMUPS = 15
BASELINE_MAX_SHIFT = 192

# Reference CPU figures for a single granule, kept for the report footer
REFERENCE_CSC_MS = 16.63
REFERENCE_MATCHER_MS = 5167.45

REPORT_HEADERS = ["method", "mean_ms", "per_granule_ms", "runs_ms"]

Registrar = Callable[[Granule], Granule]


@dataclass
class MethodTiming:
    """Wall times of one registration method"""
    method: str
    run_ms: List[float]
    granule_count: int

    @property
    def mean_ms(self) -> float:
        return sum(self.run_ms) / len(self.run_ms)

    @property
    def per_granule_ms(self) -> float:
        return self.mean_ms / self.granule_count


@dataclass
class BenchReport:
    granule_count: int
    bands: List[BandId]
    warmups: int
    runs: int
    timings: Dict[str, MethodTiming] = field(default_factory=dict)

    def speedup(self, fast: str = "csc", slow: str = "correlation") -> Optional[float]:
        """How many times faster ``fast`` is than ``slow``"""
        if fast not in self.timings or slow not in self.timings:
            return None
        fast_ms = self.timings[fast].mean_ms
        if fast_ms <= 0:
            return float("inf")
        return self.timings[slow].mean_ms / fast_ms


def default_methods(table: ShiftTable, bands: Sequence[BandLike],
                    max_shift: int = BASELINE_MAX_SHIFT) -> Dict[str, Registrar]:
    """CSC with the resident table and the correlation baseline"""
    def csc(granule: Granule) -> Granule:
        return apply_coarse_coregistration(granule, bands, table)

    def correlation(granule: Granule) -> Granule:
        reference = granule.band(BandId.parse(bands[0]) if isinstance(bands[0], str) else bands[0])
        limit = min(max_shift, (min(reference.shape) - 1) // 2)
        return register_by_correlation(granule, bands, limit)

    return {"csc": csc, "correlation": correlation}


def benchmark_registration(granules: Sequence[Granule], table: ShiftTable,
                           bands: Sequence[BandLike] = DEFAULT_BANDS, runs: int = DEFAULT_RUNS,
                           warmups: int = DEFAULT_WARMUPS, max_shift: int = BASELINE_MAX_SHIFT,
                           methods: Optional[Dict[str, Registrar]] = None,
                           timer: Callable[[], float] = time.perf_counter) -> BenchReport:
    """Untimed warm-ups on one granule, then ``runs`` timed passes over all granules per method"""
    if not granules:
        raise EmptyInputError("no granules to benchmark")
    if runs < 1:
        raise ValueError(f"runs must be at least 1, got {runs}")
    if warmups < 0:
        raise ValueError(f"warmups must be non-negative, got {warmups}")
    band_ids = [BandId.parse(b) if isinstance(b, str) else b for b in bands]
    if methods is None:
        methods = default_methods(table, band_ids, max_shift)

    report = BenchReport(len(granules), band_ids, warmups, runs)
    for name, register in methods.items():
        for _ in range(warmups):
            register(granules[0])
        times = []
        for _ in range(runs):
            start = timer()
            for granule in granules:
                register(granule)
            times.append((timer() - start) * 1000.0)
        report.timings[name] = MethodTiming(name, times, len(granules))
        pipeline_logger.bench_result(name, report.timings[name].mean_ms, runs)
    return report


def format_report(report: BenchReport) -> List[List[str]]:
    """Table rows: method, mean, per-granule mean, then each run"""
    rows = []
    for name, timing in report.timings.items():
        rows.append([name, f"{timing.mean_ms:.3f}", f"{timing.per_granule_ms:.3f}",
                     " ".join(f"{t:.3f}" for t in timing.run_ms)])
    return rows


def report_lines(report: BenchReport) -> List[str]:
    """Machine-readable lines: method mean_ms run1_ms run2_ms ..."""
    return [" ".join([name, repr(timing.mean_ms)] + [repr(t) for t in timing.run_ms])
            for name, timing in report.timings.items()]


QUALITY_HEADERS = ["satellite", "detector", "band", "mean along", "mean across", "std along", "std across",
                   "granules"]


def format_quality(quality: Sequence[RegistrationQuality]) -> List[List[str]]:
    """Table rows of the residual left after CSC, one per (satellite, detector, band)"""
    return [[q.satellite.value, str(q.detector), q.band.value, f"{q.mean[0]:.2f}", f"{q.mean[1]:.2f}",
             f"{q.std[0]:.2f}", f"{q.std[1]:.2f}", str(q.count)]
            for q in quality]


def quality_lines(quality: Sequence[RegistrationQuality]) -> List[str]:
    """Machine-readable lines: satellite detector band mean_along mean_across std_along std_across count"""
    return [" ".join([q.satellite.value, str(q.detector), q.band.value, repr(q.mean[0]), repr(q.mean[1]),
                      repr(q.std[0]), repr(q.std[1]), str(q.count)])
            for q in quality]
