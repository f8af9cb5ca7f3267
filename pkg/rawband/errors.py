"""
Exception hierarchy for the raw-granule processing pipeline
"""

from typing import Optional


class RawbandError(Exception):
    """Base class for every error raised by the package"""


class DataError(RawbandError):
    """Input data is malformed, inconsistent or unusable (CLI exit code 2)"""


class UsageError(RawbandError):
    """Invalid invocation or configuration (CLI exit code 1)"""


class ConfigError(UsageError):
    """A configuration key is missing or holds an invalid value"""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"config key '{key}': {message}")


class BundleIOError(DataError):
    """Filesystem failure while reading or writing a bundle"""

    def __init__(self, path: str, cause: Exception):
        self.path = path
        self.cause = cause
        super().__init__(f"{path}: {cause}")


class BundleFormatError(DataError):
    """Band file header is not a valid RAWB header"""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class TruncatedDataError(DataError):
    """Band file carries fewer samples than its header declares"""

    def __init__(self, path: str, expected: int, actual: int):
        self.path = path
        self.expected = expected
        self.actual = actual
        super().__init__(f"{path}: expected {expected} samples, found {actual}")


class UnknownBandError(DataError):
    """Band identifier outside the 13 Sentinel-2 bands"""

    def __init__(self, band: str, path: Optional[str] = None):
        self.band = band
        self.path = path
        where = f"{path}: " if path else ""
        super().__init__(f"{where}unknown band id '{band}'")


class MetadataError(DataError):
    """A metadata key is missing or cannot be parsed"""

    def __init__(self, key: str, message: str, path: Optional[str] = None):
        self.path = path
        self.key = key
        self.message = message
        where = f"{path}: " if path else ""
        super().__init__(f"{where}key '{key}': {message}")


class WindowError(DataError):
    """Window does not lie inside the target raster"""


class ShiftLookupError(DataError):
    """No shift coefficients stored for the requested key"""


class DegenerateShiftError(DataError):
    """Shift magnitude is not smaller than the band dimension"""


class NoTextureError(DataError):
    """Correlation input has zero variance"""


class OutlierRejectionError(DataError):
    """Every estimate of a band couple was rejected as an outlier"""


class GeoRefError(DataError):
    """Coarse georeferencing cannot be computed"""


class FootprintOverlapError(DataError):
    """Footprint does not overlap the mosaic"""


class TileConsistencyError(DataError):
    """L1C tiles disagree on resolution, orientation or quantification"""


class ResampleError(DataError):
    """Band resolutions are not integer multiples of each other"""


class AffineError(DataError):
    """Correspondences are collinear or the transform is singular"""


class PatchGridError(DataError):
    """Patch specification does not fit the raster"""


class EmptyInputError(DataError):
    """An operation received an empty collection"""


class NaNInputError(DataError):
    """Reflectance input contains NaN"""


class StageError(DataError):
    """A pipeline stage failed; wraps the original error with the stage name"""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
