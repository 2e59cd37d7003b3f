"""Exception types raised across the package."""


class EkgDipoleError(Exception):
    """Base class for all package errors."""


class DegenerateGeometry(EkgDipoleError):
    """A dipole sits closer than the guard distance to an electrode."""

    def __init__(self, message, electrode_index=None):
        super().__init__(message)
        self.electrode_index = electrode_index


class DimensionMismatch(EkgDipoleError, ValueError):
    pass


class NoObservedData(EkgDipoleError):
    pass


class InsufficientData(EkgDipoleError):
    pass


class InsufficientLength(EkgDipoleError):
    pass


class ParseError(EkgDipoleError, ValueError):
    pass


class NonUniformSampling(ParseError):
    pass


class UnknownLeadHeader(ParseError):
    pass


class NoHeldOutData(EkgDipoleError):
    pass


class EmptyInput(EkgDipoleError, ValueError):
    pass


class RecordSetMismatch(EkgDipoleError):
    pass
