# src/errors.py


class FinslerError(Exception):
    """Base class for every error raised by the library.

    `exit_code` is what the command line returns when the error escapes a run.
    """

    exit_code = 2


# --- Domain / precondition errors (exit 2) ---
class ZeroVector(FinslerError):
    pass


class NotPositive(FinslerError):
    pass


class OutsideDomain(FinslerError):
    pass


class BranchMissing(FinslerError):
    pass


class BadParameter(FinslerError):
    pass


class Inadmissible(FinslerError):
    pass


class WrongClass(FinslerError):
    pass


class LeftDomain(FinslerError):
    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class SegmentExitsDomain(FinslerError):
    pass


class DegenerateFormula(FinslerError):
    pass


class CoordinateSingularity(FinslerError):
    pass


class NotUpperHemisphere(FinslerError):
    pass


class BadInput(FinslerError):
    pass


class OriginExcluded(FinslerError):
    pass


# --- Numerical failures (exit 3) ---
class NumericalFailure(FinslerError):
    exit_code = 3


class NonFinite(NumericalFailure):
    pass


class NoConvergence(NumericalFailure):
    pass


class IntegrationFailure(NumericalFailure):
    pass


# --- Command line ---
class ParseError(FinslerError):
    exit_code = 1

    def __init__(self, message, field=None):
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field
