"""Exception hierarchy shared by all qmrisim modules."""


class QMRISimError(Exception):
    """Base class for all qmrisim errors."""


class InvalidGridError(QMRISimError):
    """Grid has a zero dimension, non-positive spacing, or singular affine."""


class GridMismatchError(QMRISimError):
    """Two volumes that must share a grid do not."""


class NegativePDError(QMRISimError):
    """Proton-density map contains a negative voxel."""


class NonPositiveRateError(QMRISimError):
    """A relaxation-rate (or scale) map contains a voxel <= 0."""


class MTOutOfRangeError(QMRISimError):
    """Magnetisation-transfer map contains a voxel outside [0, 1)."""


class OutOfBoundsError(QMRISimError):
    """Requested region extends past the volume bounds."""


class CropTooLargeError(QMRISimError):
    """Crop size exceeds the available grid."""


class SequenceKindError(QMRISimError):
    """Acquisition parameters inconsistent with the requested sequence kind."""


class NonBinaryMaskError(QMRISimError):
    """A volume expected to be a binary mask contains other values."""


class EmptyMaskError(QMRISimError):
    """Boundary-distance metrics are undefined on an empty mask."""


class SchemaMismatchError(QMRISimError):
    """Manifest schema version is not supported."""


class MissingSourceError(QMRISimError):
    """Manifest references a source map set that is not available."""


class MissingMapError(QMRISimError):
    """A required quantitative map (pd, r1 or r2) was not found."""


class NiftiError(QMRISimError):
    """Base class for NIfTI read/write failures."""


class MalformedNiftiError(NiftiError):
    """File is truncated or its header is not valid NIfTI-1."""


class UnsupportedDatatypeError(NiftiError):
    """NIfTI datatype code has no supported mapping."""


class UnsupportedDimsError(NiftiError):
    """Only 3-dimensional NIfTI volumes are supported."""
