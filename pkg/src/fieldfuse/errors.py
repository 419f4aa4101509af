"""Typed errors raised by the engine.

Two broad families: format errors (a file on disk is not what it claims
to be) and validation errors (well-formed inputs that violate a domain
contract). The CLI maps validation failures to exit code 1 and plain IO
failures to exit code 2.
"""


class FieldFuseError(Exception):
    """Base class for every error raised by this package."""


class FormatError(FieldFuseError):
    """A file could not be decoded as the format it claims to be."""


class BadMagic(FormatError):
    pass


class UnsupportedVersion(FormatError):
    pass


class TruncatedPayload(FormatError):
    """Declared dims and actual byte count disagree, or the file ends early."""


class UnsupportedDtype(FormatError):
    pass


class BadPly(FormatError):
    pass


class ValidationError(FieldFuseError):
    """An input violates a documented invariant."""


class InvalidPointCloud(ValidationError):
    pass


class InvalidCamera(ValidationError):
    pass


class InconsistentFeatureDim(ValidationError):
    pass


class MissingDepth(ValidationError):
    pass


class BadManifest(ValidationError):
    pass


class DimMismatch(ValidationError):
    pass


class EmptyBatch(ValidationError):
    pass


class NoSupervision(ValidationError):
    pass


class EmptyLabel(ValidationError):
    pass


class UnknownPrompt(ValidationError):
    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__("unknown prompt(s): " + ", ".join(repr(m) for m in self.missing))


class ZeroQuery(ValidationError):
    pass


class NoRegions(ValidationError):
    pass


class UnmappedPrompt(ValidationError):
    pass


class LabelOutOfRange(ValidationError):
    pass
