"""Exception and warning types shared across the package.

Two error families matter for the CLI exit-code contract: ValidationError
(bad parameters or shapes, exit code 2) and DataError (unreadable or
inconsistent input files, exit code 3).
"""


class HsrError(Exception):
    """Base class for all package errors."""


class ValidationError(HsrError):
    """Invalid configuration, parameter, or input shape."""


class ShapeMismatch(ValidationError):
    """Signal cannot be tiled into the declared block layout."""


class DataError(HsrError):
    """A data file is missing, unreadable, or internally inconsistent."""


class BadMagic(DataError):
    """File starts with the wrong magic number."""


class TruncatedFile(DataError):
    """File ends before the declared payload."""


class CountMismatch(DataError):
    """Image and label files disagree on the sample count."""


class UnreadableImage(DataError):
    """An image file could not be decoded."""


class EmptyDirectory(DataError):
    """No usable image files were found."""


class VersionMismatch(DataError):
    """Model file was written by an incompatible format version."""


class CorruptFile(DataError):
    """Model file payload fails its checksum."""


class MissingAngle(DataError):
    """A class lacks one of the required training views."""


class DegenerateDataWarning(UserWarning):
    """Training data has too little rank to support the requested atoms."""


class RipDegradedWarning(UserWarning):
    """Measured isometry distortion exceeds the quality threshold."""


class NonConvergenceWarning(UserWarning):
    """Iterative solver hit its iteration cap before reaching tolerance."""
