"""Exception and warning types."""


class WhitePetError(Exception):
    """Base class for package errors."""


class InvalidGeometry(WhitePetError, ValueError):
    """Scanner or pair geometry violates a modelling assumption."""


class NoCoincidencePossible(InvalidGeometry):
    """No pair of active crystals can record a coincidence through the FOV."""


class MismatchedShapes(WhitePetError, ValueError):
    """Arrays that must share a grid or sinogram layout do not."""


class LowAcceptance(WhitePetError, RuntimeError):
    """Event simulation accepts almost nothing; the geometry is likely wrong."""


class InvalidPhantom(WhitePetError, ValueError):
    """Phantom parameters are inconsistent or does not fit the grid."""


class DataFormatError(WhitePetError, ValueError):
    """An input file is missing, truncated or malformed."""


class InconsistentDataWarning(UserWarning):
    """Counts were measured on rays whose forward projection is zero."""


class NoAcceptedEventsWarning(UserWarning):
    """A Monte Carlo run accepted no events; the returned image is zero."""
