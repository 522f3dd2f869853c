"""Exception types raised across the pipeline."""


class AvtreeError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(AvtreeError):
    """A file does not conform to the expected on-disk layout."""


class BadMagic(FormatError):
    pass


class TruncatedFile(FormatError):
    pass


class TrailingData(FormatError):
    pass


class NonFiniteSample(FormatError):
    pass


class IoFailure(AvtreeError):
    pass


class DimensionMismatch(AvtreeError):
    pass


class EvenKernel(AvtreeError):
    pass


class EmptyBranch(AvtreeError):
    pass


class DisconnectedGraph(AvtreeError):
    pass


class UnassignedVesselPixel(AvtreeError):
    pass


class DegenerateClass(AvtreeError):
    pass


class EmptyStratum(AvtreeError):
    """Raised only when a caller asks for a strict per-stratum result."""


class SkeletonOutsideMask(AvtreeError):
    pass


class EmptyList(AvtreeError):
    pass


class MissingClassInAnnulus(AvtreeError):
    pass


class MissingClass(AvtreeError):
    pass


class SpecInfeasible(AvtreeError):
    pass


class ConfigError(AvtreeError):
    pass


class StageError(AvtreeError):
    """Wraps an error from one pipeline stage with the stage name."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
