"""
Coarse spatial coregistration: shift-table algebra, fixed-shift band
alignment, and shift-coefficient estimation with a correlation matcher.

Sign convention: a ShiftVector S of band n relative to band m is the
translation (rows, cols) that moves band n's content onto band m, measured
in pixels of the band it belongs to. Applying it means
``out[i, j] = band[i - S.along, j - S.across]``. Band n therefore shows at
pixel (i, j) the ground that band m shows at (i + S.along, j + S.across).

Chain rule: the adjacent coefficient of couple (I(k), I(k+1)) is expressed
in pixels of I(k), so each chain term is converted with R_I(k) / R_n. The
printed relation scales by R_I(k+1) / R_n instead; both readings agree
whenever the couple shares one resolution.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import cv2
import numpy as np
from scipy import fft as sp_fft

from .errors import (DegenerateShiftError, EmptyInputError, NoTextureError,
                     OutlierRejectionError, ResampleError, ShiftLookupError,
                     UnknownBandError)
from .raster import (BandId, Granule, Raster, Satellite, Window, round_half_away,
                     translate_array)
from utils.logger import pipeline_logger

# Acquisition-delay order relative to B02
BAND_ORDER: Tuple[BandId, ...] = (
    BandId.B02, BandId.B08, BandId.B03, BandId.B10, BandId.B04, BandId.B05,
    BandId.B11, BandId.B06, BandId.B07, BandId.B8A, BandId.B12, BandId.B01,
    BandId.B09,
)

ADJACENT_COUPLES: Tuple[Tuple[BandId, BandId], ...] = tuple(zip(BAND_ORDER, BAND_ORDER[1:]))

_BAND_POSITION = {band: index for index, band in enumerate(BAND_ORDER)}

Couple = Tuple[BandId, BandId]
BandLike = Union[BandId, str]


class FillPolicy(Enum):
    """How pixels vacated by a shift are handled"""
    ZERO_FILL = "zero_fill"
    CROP_TO_VALID = "crop_to_valid"
    ADJACENT_FILL = "adjacent_fill"


@dataclass(frozen=True)
class ShiftVector:
    """Along/across-track translation in pixels of a band of the given resolution"""
    along: float
    across: float
    resolution: Optional[int] = None

    def __post_init__(self):
        if not (math.isfinite(self.along) and math.isfinite(self.across)):
            raise ValueError(f"shift must be finite, got ({self.along}, {self.across})")

    def rounded(self) -> Tuple[int, int]:
        """Integer pixel shift, halves rounded away from zero"""
        return (round_half_away(self.along), round_half_away(self.across))

    def to_resolution(self, resolution: int) -> "ShiftVector":
        """Same ground displacement expressed in pixels of another resolution"""
        if self.resolution is None:
            raise ValueError("shift has no resolution to convert from")
        return ShiftVector(self.along * self.resolution / resolution,
                           self.across * self.resolution / resolution, resolution)

    def as_tuple(self) -> Tuple[float, float]:
        return (self.along, self.across)


@dataclass
class ShiftCoefficientSet:
    """Adjacent-couple coefficients N for one (satellite, detector)"""
    satellite: Satellite
    detector: int
    coefficients: Dict[Couple, ShiftVector] = field(default_factory=dict)
    sample_counts: Dict[Couple, int] = field(default_factory=dict)
    deviations: Dict[Couple, Tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        for couple, vector in self.coefficients.items():
            self._check(couple, vector)

    @staticmethod
    def _check(couple: Couple, vector: ShiftVector):
        if couple not in ADJACENT_COUPLES:
            raise ShiftLookupError(
                f"{couple[0].value}->{couple[1].value} is not an adjacent couple of the band order")
        if vector.resolution != couple[0].resolution:
            raise ShiftLookupError(
                f"coefficient {couple[0].value}->{couple[1].value} must be in "
                f"{couple[0].resolution} m pixels, got {vector.resolution}")

    def set_coefficient(self, couple: Couple, vector: ShiftVector,
                        count: Optional[int] = None, deviation: Optional[Tuple[float, float]] = None):
        """Store one adjacent coefficient"""
        self._check(couple, vector)
        self.coefficients[couple] = vector
        if count is not None:
            self.sample_counts[couple] = count
        if deviation is not None:
            self.deviations[couple] = deviation

    def coefficient(self, couple: Couple) -> ShiftVector:
        if couple not in self.coefficients:
            raise ShiftLookupError(
                f"{self.satellite.value} detector {self.detector}: no coefficient for "
                f"{couple[0].value}->{couple[1].value}")
        return self.coefficients[couple]


class ShiftTable:
    """Coefficient sets keyed by (satellite, detector); absent keys never default to zero"""

    def __init__(self, sets: Iterable[ShiftCoefficientSet] = ()):
        self.sets: Dict[Tuple[Satellite, int], ShiftCoefficientSet] = {}
        for coefficient_set in sets:
            self.add(coefficient_set)

    def add(self, coefficient_set: ShiftCoefficientSet):
        self.sets[(coefficient_set.satellite, coefficient_set.detector)] = coefficient_set

    def get(self, satellite: Satellite, detector: int) -> ShiftCoefficientSet:
        """Get the coefficient set or fail explicitly"""
        key = (satellite, detector)
        if key not in self.sets:
            raise ShiftLookupError(f"no shift coefficients for {satellite.value} detector {detector}")
        return self.sets[key]

    def __contains__(self, key) -> bool:
        return key in self.sets

    def keys(self) -> List[Tuple[Satellite, int]]:
        return sorted(self.sets, key=lambda k: (k[0].value, k[1]))

    def __len__(self) -> int:
        return len(self.sets)


def band_position(band: BandLike) -> int:
    """Index of a band in the acquisition-delay order"""
    if isinstance(band, str):
        band = BandId.parse(band)
    if band not in _BAND_POSITION:
        raise UnknownBandError(str(band))
    return _BAND_POSITION[band]


def compose_shift(coefficients: ShiftCoefficientSet, n: BandLike, m: BandLike) -> ShiftVector:
    """Shift of band n relative to band m, in pixels of band n"""
    i_n, i_m = band_position(n), band_position(m)
    band_n, band_m = BAND_ORDER[i_n], BAND_ORDER[i_m]
    r_n = band_n.resolution
    if i_n == i_m:
        return ShiftVector(0.0, 0.0, r_n)
    if i_n < i_m:
        reverse = compose_shift(coefficients, band_m, band_n)
        r_m = band_m.resolution
        return ShiftVector(-reverse.along * r_m / r_n, -reverse.across * r_m / r_n, r_n)

    along, across = 0.0, 0.0
    for k in range(i_m, i_n):
        term = coefficients.coefficient((BAND_ORDER[k], BAND_ORDER[k + 1]))
        along += term.along * BAND_ORDER[k].resolution / r_n
        across += term.across * BAND_ORDER[k].resolution / r_n
    return ShiftVector(along, across, r_n)


def lookup_shift(table: ShiftTable, satellite: Satellite, detector: int,
                 n: BandLike, m: BandLike) -> ShiftVector:
    """compose_shift on the stored coefficient set of (satellite, detector)"""
    return compose_shift(table.get(satellite, detector), n, m)


def solve_adjacent_coefficient(coefficients: ShiftCoefficientSet, couple: Couple,
                               n: BandLike, m: BandLike, measured: ShiftVector) -> ShiftVector:
    """Recover one unreliable adjacent coefficient from a measured longer-range shift.

    ``measured`` is the shift of n relative to m in n pixels, and ``couple``
    must lie on the chain between them. Every other couple of the chain has
    to be present in ``coefficients``.
    """
    i_n, i_m = band_position(n), band_position(m)
    band_n, band_m = BAND_ORDER[i_n], BAND_ORDER[i_m]
    if i_n < i_m:
        # solve on the forward chain
        measured = ShiftVector(-measured.along * band_n.resolution / band_m.resolution,
                               -measured.across * band_n.resolution / band_m.resolution,
                               band_m.resolution)
        i_n, i_m, band_n, band_m = i_m, i_n, band_m, band_n
    chain = [(BAND_ORDER[k], BAND_ORDER[k + 1]) for k in range(i_m, i_n)]
    if couple not in chain:
        raise ShiftLookupError(
            f"{couple[0].value}->{couple[1].value} is not on the chain "
            f"{band_m.value}..{band_n.value}")

    r_n = band_n.resolution
    along, across = measured.along, measured.across
    for other in chain:
        if other == couple:
            continue
        term = coefficients.coefficient(other)
        along -= term.along * other[0].resolution / r_n
        across -= term.across * other[0].resolution / r_n
    r_k = couple[0].resolution
    return ShiftVector(along * r_n / r_k, across * r_n / r_k, r_k)


def match_resolution(raster: Raster, from_resolution: int, to_resolution: int) -> Raster:
    """Resample to another resolution by pixel repetition or block mean"""
    if from_resolution == to_resolution:
        return raster
    samples = raster.samples
    if from_resolution > to_resolution:
        factor, remainder = divmod(from_resolution, to_resolution)
        if remainder:
            raise ResampleError(f"non-integer ratio {from_resolution}/{to_resolution}")
        return Raster(np.repeat(np.repeat(samples, factor, axis=0), factor, axis=1))

    factor, remainder = divmod(to_resolution, from_resolution)
    if remainder:
        raise ResampleError(f"non-integer ratio {to_resolution}/{from_resolution}")
    rows, cols = samples.shape[0] // factor, samples.shape[1] // factor
    if rows == 0 or cols == 0:
        raise ResampleError(f"raster {samples.shape} smaller than one {factor}x{factor} block")
    blocks = samples[:rows * factor, :cols * factor].astype(np.float64)
    means = blocks.reshape(rows, factor, cols, factor).mean(axis=(1, 3))
    return Raster(np.rint(means).astype(np.uint16))


def _band_shift(coefficients: Optional[ShiftCoefficientSet], band: BandId,
                reference: BandId, raster: Raster) -> Tuple[int, int]:
    if band == reference:
        return (0, 0)
    shift = compose_shift(coefficients, band, reference).rounded()
    if abs(shift[0]) >= raster.height or abs(shift[1]) >= raster.width:
        raise DegenerateShiftError(
            f"{band.value}: shift {shift} not smaller than band size {raster.shape}")
    return shift


def _neighbour_rows(granule: Optional[Granule], band: BandId, width: int) -> Optional[np.ndarray]:
    if granule is None or band not in granule.bands:
        return None
    samples = granule.bands[band].samples
    return samples if samples.shape[1] == width else None


def apply_coarse_coregistration(granule: Granule, bands: Sequence[BandLike], table: ShiftTable,
                                fill: FillPolicy = FillPolicy.ZERO_FILL,
                                previous: Optional[Granule] = None,
                                following: Optional[Granule] = None) -> Granule:
    """Align the bands of B_S onto their first band with the stored fixed shifts.

    ``previous`` / ``following`` are the along-track neighbours used by
    ADJACENT_FILL; vacated pixels without a neighbour stay zero.
    """
    band_ids = [BandId.parse(b) if isinstance(b, str) else b for b in bands]
    if not band_ids:
        raise EmptyInputError("band collection is empty")
    reference = band_ids[0]
    for band in band_ids:
        granule.band(band)

    coefficients = None
    if any(band != reference for band in band_ids):
        coefficients = table.get(granule.metadata.satellite, granule.metadata.detector)

    shifts = {band: _band_shift(coefficients, band, reference, granule.bands[band])
              for band in band_ids}

    shifted: Dict[BandId, np.ndarray] = {}
    for band in band_ids:
        samples = granule.bands[band].samples
        shift = shifts[band]
        pipeline_logger.shift_applied(band.value, reference.value, shift, fill.value)
        if fill == FillPolicy.ADJACENT_FILL:
            above = _neighbour_rows(previous, band, samples.shape[1])
            below = _neighbour_rows(following, band, samples.shape[1])
            parts = [p for p in (above, samples, below) if p is not None]
            offset = 0 if above is None else above.shape[0]
            stacked = translate_array(np.concatenate(parts, axis=0), shift)
            shifted[band] = stacked[offset:offset + samples.shape[0]]
        else:
            shifted[band] = translate_array(samples, shift)

    if fill != FillPolicy.CROP_TO_VALID:
        return Granule(granule.metadata, {band: Raster(a) for band, a in shifted.items()})

    windows = _common_valid_windows(granule, band_ids, shifts)
    out = {band: Raster(shifted[band][w.row0:w.row1, w.col0:w.col1]) for band, w in windows.items()}
    return Granule(granule.metadata, out, valid_windows=windows)


def _common_valid_windows(granule: Granule, band_ids: List[BandId],
                          shifts: Dict[BandId, Tuple[int, int]]) -> Dict[BandId, Window]:
    """Intersect the post-shift valid regions in ground meters and map back to each band"""
    lows = [0.0, 0.0]
    highs = [math.inf, math.inf]
    for band in band_ids:
        resolution = band.resolution
        shape = granule.bands[band].shape
        for axis in (0, 1):
            d = shifts[band][axis]
            lows[axis] = max(lows[axis], max(0, d) * resolution)
            highs[axis] = min(highs[axis], min(shape[axis], shape[axis] + d) * resolution)

    windows: Dict[BandId, Window] = {}
    for band in band_ids:
        resolution = band.resolution
        start = [math.ceil(lows[axis] / resolution) for axis in (0, 1)]
        stop = [math.floor(highs[axis] / resolution) for axis in (0, 1)]
        if stop[0] <= start[0] or stop[1] <= start[1]:
            raise DegenerateShiftError(f"{band.value}: no common valid region after shifting")
        windows[band] = Window(start[0], start[1], stop[0] - start[0], stop[1] - start[1])
    return windows


def _stretch_to_u16(values: np.ndarray) -> np.ndarray:
    low, high = float(values.min()), float(values.max())
    scaled = (values.astype(np.float64) - low) / (high - low) * 65535.0
    return np.rint(scaled).astype(np.uint16)


def equalize_contrast(raster: Raster, tile: int = 8, clip: float = 2.0) -> Raster:
    """Contrast-limited adaptive histogram equalization spanning the 16-bit range.

    The raster is normalized to 8 bits, equalized with OpenCV's CLAHE on a
    grid of roughly ``tile``-pixel tiles, then stretched to 0..65535. A
    raster smaller than one tile gets global histogram equalization instead.
    """
    if tile < 2:
        raise ValueError(f"tile must be at least 2, got {tile}")
    if clip <= 0:
        raise ValueError(f"clip must be positive, got {clip}")

    samples = raster.samples
    low, high = int(samples.min()), int(samples.max())
    if low == high:
        return raster

    if raster.height < tile or raster.width < tile:
        levels, inverse, counts = np.unique(samples, return_inverse=True, return_counts=True)
        cdf = np.cumsum(counts).astype(np.float64)
        return Raster(_stretch_to_u16(cdf[inverse].reshape(samples.shape)))

    eight = np.rint((samples.astype(np.float64) - low) / (high - low) * 255.0).astype(np.uint8)
    grid = (max(1, raster.width // tile), max(1, raster.height // tile))
    equalized = cv2.createCLAHE(clipLimit=float(clip), tileGridSize=grid).apply(eight)
    if equalized.min() == equalized.max():
        equalized = eight
    return Raster(_stretch_to_u16(equalized))


def _normalized(samples: np.ndarray, name: str) -> np.ndarray:
    values = samples.astype(np.float64)
    std = values.std()
    if std == 0.0:
        raise NoTextureError(f"{name}: no texture (zero variance)")
    return (values - values.mean()) / std


def correlation_surface(a: Raster, b: Raster, max_shift: int) -> np.ndarray:
    """Normalized cross-correlation over the overlap for every |shift| <= max_shift.

    Entry [dy + max_shift, dx + max_shift] scores b ~ translate(a, (dy, dx)).
    Shifts whose overlap has no variance score -inf.
    """
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    height, width = a.shape
    if max_shift < 0 or 2 * max_shift >= min(height, width):
        raise ValueError(f"max_shift {max_shift} must be below half of {min(height, width)}")

    fa = _normalized(a.samples, "reference")
    fb = _normalized(b.samples, "moving")
    ones = np.ones_like(fa)
    shape = (sp_fft.next_fast_len(2 * height - 1, real=True),
             sp_fft.next_fast_len(2 * width - 1, real=True))

    def spectrum(x: np.ndarray) -> np.ndarray:
        return sp_fft.rfft2(x, s=shape)

    rows = np.arange(-max_shift, max_shift + 1) % shape[0]
    cols = np.arange(-max_shift, max_shift + 1) % shape[1]

    def corr(spec_f: np.ndarray, spec_g: np.ndarray) -> np.ndarray:
        # sum_p f[p] g[p + s]
        full = sp_fft.irfft2(np.conj(spec_f) * spec_g, s=shape)
        return full[np.ix_(rows, cols)]

    spec_a, spec_a2, spec_ma = spectrum(fa), spectrum(fa * fa), spectrum(ones)
    spec_b, spec_b2 = spectrum(fb), spectrum(fb * fb)
    spec_mb = spec_ma

    count = np.rint(corr(spec_ma, spec_mb))
    sum_a = corr(spec_a, spec_mb)
    sum_b = corr(spec_ma, spec_b)
    sum_aa = corr(spec_a2, spec_mb)
    sum_bb = corr(spec_ma, spec_b2)
    sum_ab = corr(spec_a, spec_b)

    var_a = np.maximum(sum_aa - sum_a * sum_a / count, 0.0)
    var_b = np.maximum(sum_bb - sum_b * sum_b / count, 0.0)
    denominator = np.sqrt(var_a * var_b)
    numerator = sum_ab - sum_a * sum_b / count
    surface = np.full(numerator.shape, -np.inf)
    valid = denominator > 1e-9 * count
    surface[valid] = numerator[valid] / denominator[valid]
    return surface


def phase_correlate(a: Raster, b: Raster, max_shift: int, resolution: Optional[int] = None,
                    tie_tolerance: float = 1e-9) -> ShiftVector:
    """Integer translation s with b ~ translate(a, s), maximizing normalized cross-correlation.

    Ties (within ``tie_tolerance``) go to the smallest magnitude, then to the
    shift with the smaller across-track component.
    """
    surface = correlation_surface(a, b, max_shift)
    best = surface.max()
    if not np.isfinite(best):
        raise NoTextureError("no shift with textured overlap")
    candidates = np.argwhere(surface >= best - tie_tolerance) - max_shift
    dy, dx = min(((int(r), int(c)) for r, c in candidates),
                 key=lambda s: (s[0] * s[0] + s[1] * s[1], abs(s[1]), s[0], s[1]))
    return ShiftVector(float(dy), float(dx), resolution)


@dataclass(frozen=True)
class TrimResult:
    """Outcome of outlier trimming over per-pair estimates"""
    along: float
    across: float
    std_along: float
    std_across: float
    kept: int
    total: int
    low: Tuple[float, float]
    high: Tuple[float, float]


def trim_and_average(estimates: Sequence[Tuple[float, float]], n_sigma: float = 2.0,
                     min_sigma: float = 0.5) -> TrimResult:
    """Drop estimates outside center +/- n_sigma * sigma per axis, average the rest.

    Center is the median and sigma the MAD-based robust deviation (floored at
    ``min_sigma`` pixels).
    """
    if not estimates:
        raise EmptyInputError("no shift estimates to average")
    values = np.array(sorted(estimates), dtype=np.float64)
    center = np.median(values, axis=0)
    mad = np.median(np.abs(values - center), axis=0)
    sigma = np.maximum(1.4826 * mad, min_sigma)
    low, high = center - n_sigma * sigma, center + n_sigma * sigma
    keep = np.all((values >= low) & (values <= high), axis=1)
    kept = values[keep]
    if kept.size == 0:
        return TrimResult(math.nan, math.nan, math.nan, math.nan, 0, len(values),
                          tuple(low), tuple(high))
    mean = kept.mean(axis=0)
    std = kept.std(axis=0)
    return TrimResult(float(mean[0]), float(mean[1]), float(std[0]), float(std[1]),
                      int(keep.sum()), len(values), tuple(low), tuple(high))


def estimate_pair_shift(earlier: Raster, later: Raster, couple: Couple, max_shift: Optional[int] = None,
                        tile: int = 8, clip: float = 2.0) -> Tuple[float, float]:
    """Coefficient of one (I(k), I(k+1)) raster pair in I(k) pixels"""
    band_k, band_next = couple
    later = match_resolution(later, band_next.resolution, band_k.resolution)
    rows = min(earlier.height, later.height)
    cols = min(earlier.width, later.width)
    a = equalize_contrast(Raster(earlier.samples[:rows, :cols]), tile, clip)
    b = equalize_contrast(Raster(later.samples[:rows, :cols]), tile, clip)
    limit = (min(rows, cols) - 1) // 2
    max_shift = limit if max_shift is None else min(max_shift, limit)
    measured = phase_correlate(a, b, max_shift)
    # later ~ translate(earlier, s), so moving later onto earlier takes -s
    return (-measured.along, -measured.across)


def _fit_couple(couple: Couple, couple_pairs: Sequence[Tuple[Raster, Raster]], max_shift: Optional[int],
                tile: int, clip: float, workers: int) -> TrimResult:
    couple_pairs = list(couple_pairs)
    name = f"{couple[0].value}->{couple[1].value}"
    if not couple_pairs:
        raise EmptyInputError(f"no pairs for {name}")

    def estimate(pair: Tuple[Raster, Raster]) -> Tuple[float, float]:
        return estimate_pair_shift(pair[0], pair[1], couple, max_shift, tile, clip)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            estimates = list(executor.map(estimate, couple_pairs))
    else:
        estimates = [estimate(pair) for pair in couple_pairs]

    trimmed = trim_and_average(estimates)
    pipeline_logger.outliers_trimmed(name, trimmed.kept, trimmed.total, trimmed.low, trimmed.high)
    if trimmed.kept == 0:
        raise OutlierRejectionError(f"{name}: all {trimmed.total} estimates rejected")
    return trimmed


def bridge_chain(coefficients: ShiftCoefficientSet, couple: Couple, measured: ShiftVector,
                 count: Optional[int] = None, deviation: Optional[Tuple[float, float]] = None) -> Couple:
    """Store a measured non-adjacent coefficient on the chain it spans.

    ``measured`` is the coefficient of (earlier, later) in pixels of the earlier
    band. The first chain couple without a coefficient carries it through
    solve_adjacent_coefficient; the other missing couples are set to zero.
    Returns the carrying couple.
    """
    earlier, later = couple
    i_a, i_b = band_position(earlier), band_position(later)
    if i_a >= i_b:
        raise ShiftLookupError(f"{earlier.value}->{later.value} does not run forward in the band order")
    chain = [(BAND_ORDER[k], BAND_ORDER[k + 1]) for k in range(i_a, i_b)]
    missing = [c for c in chain if c not in coefficients.coefficients]
    if not missing:
        raise ShiftLookupError(f"every couple between {earlier.value} and {later.value} is already set")
    carrier = missing[0]
    for other in missing[1:]:
        coefficients.set_coefficient(other, ShiftVector(0.0, 0.0, other[0].resolution))
    scale = earlier.resolution / later.resolution
    shift = ShiftVector(measured.along * scale, measured.across * scale, later.resolution)
    solved = solve_adjacent_coefficient(coefficients, carrier, later, earlier, shift)
    coefficients.set_coefficient(carrier, solved, count, deviation)
    return carrier


def estimate_shift_coefficients(pairs: Dict[Couple, Sequence[Tuple[Raster, Raster]]],
                                satellite: Satellite, detector: int,
                                max_shift: Optional[int] = None, tile: int = 8, clip: float = 2.0,
                                workers: int = 1) -> ShiftCoefficientSet:
    """Fit coefficients from stacked-granule band pairs, trimming outliers.

    Adjacent couples are stored directly. A forward non-adjacent couple is
    measured the same way and bridged onto its chain with bridge_chain.
    """
    result = ShiftCoefficientSet(satellite, detector)
    ordered = sorted(pairs, key=lambda c: (c not in ADJACENT_COUPLES, band_position(c[0]),
                                           band_position(c[1])))
    for couple in ordered:
        trimmed = _fit_couple(couple, pairs[couple], max_shift, tile, clip, workers)
        vector = ShiftVector(trimmed.along, trimmed.across, couple[0].resolution)
        deviation = (trimmed.std_along, trimmed.std_across)
        if couple in ADJACENT_COUPLES:
            result.set_coefficient(couple, vector, count=trimmed.kept, deviation=deviation)
        else:
            carrier = bridge_chain(result, couple, vector, trimmed.kept, deviation)
            pipeline_logger.info("Bridged band couple", {
                "couple": f"{couple[0].value}->{couple[1].value}",
                "carrier": f"{carrier[0].value}->{carrier[1].value}"})
    return result


def register_by_correlation(granule: Granule, bands: Sequence[BandLike], max_shift: int) -> Granule:
    """Heavy baseline: estimate every band's shift against B_x by exhaustive correlation"""
    band_ids = [BandId.parse(b) if isinstance(b, str) else b for b in bands]
    if not band_ids:
        raise EmptyInputError("band collection is empty")
    reference = band_ids[0]
    ref_raster = granule.band(reference)
    out: Dict[BandId, Raster] = {reference: ref_raster}
    for band in band_ids[1:]:
        raster = granule.band(band)
        moving = match_resolution(raster, band.resolution, reference.resolution)
        rows = min(ref_raster.height, moving.height)
        cols = min(ref_raster.width, moving.width)
        measured = phase_correlate(Raster(ref_raster.samples[:rows, :cols]),
                                   Raster(moving.samples[:rows, :cols]),
                                   max_shift, reference.resolution)
        correction = ShiftVector(-measured.along, -measured.across, reference.resolution)
        shift = correction.to_resolution(band.resolution).rounded()
        out[band] = Raster(translate_array(raster.samples, shift))
    return Granule(granule.metadata, out)


@dataclass(frozen=True)
class RegistrationQuality:
    """Residual offset statistics of CSC against the correlation matcher"""
    satellite: Satellite
    detector: int
    band: BandId
    mean: Tuple[float, float]
    std: Tuple[float, float]
    count: int


def registration_quality(granules: Sequence[Granule], table: ShiftTable, bands: Sequence[BandLike],
                         max_shift: int = 8) -> List[RegistrationQuality]:
    """Per (satellite, detector, band) mean/std of the residual left after CSC"""
    band_ids = [BandId.parse(b) if isinstance(b, str) else b for b in bands]
    if not granules:
        raise EmptyInputError("no granules to assess")
    residuals: Dict[Tuple[Satellite, int, BandId], List[Tuple[float, float]]] = {}
    reference = band_ids[0]
    for granule in granules:
        aligned = apply_coarse_coregistration(granule, band_ids, table, FillPolicy.CROP_TO_VALID)
        ref_raster = aligned.bands[reference]
        for band in band_ids[1:]:
            moving = match_resolution(aligned.bands[band], band.resolution, reference.resolution)
            rows = min(ref_raster.height, moving.height)
            cols = min(ref_raster.width, moving.width)
            limit = min(max_shift, (min(rows, cols) - 1) // 2)
            measured = phase_correlate(Raster(ref_raster.samples[:rows, :cols]),
                                       Raster(moving.samples[:rows, :cols]), limit)
            key = (granule.metadata.satellite, granule.metadata.detector, band)
            residuals.setdefault(key, []).append(measured.as_tuple())

    report = []
    for (satellite, detector, band) in sorted(residuals, key=lambda k: (k[0].value, k[1], k[2].value)):
        values = np.array(residuals[(satellite, detector, band)], dtype=np.float64)
        report.append(RegistrationQuality(
            satellite, detector, band,
            (float(values[:, 0].mean()), float(values[:, 1].mean())),
            (float(values[:, 0].std()), float(values[:, 1].std())),
            len(values)))
    return report
