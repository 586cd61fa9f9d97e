"""Exception hierarchy shared by all modules."""


class ResilienceError(Exception):
    """Base class for errors raised by this package."""


class DefectiveMatrix(ResilienceError):
    """The eigenvector basis is numerically rank deficient (Jordan chain case)."""


class SingularRealPart(ResilienceError):
    """Some eigenvalue has a (numerically) zero real part."""


class SingularAbsoluteMatrix(ResilienceError):
    """|P||J||P^-1| is numerically singular."""


class ParseError(SyntaxError, ResilienceError):
    """Malformed formula or expression text. ``offset`` is the byte offset."""

    def __init__(self, message, text="", offset=0):
        super().__init__(f"{message} at offset {offset}")
        self.message = message
        self.text = text
        self.offset = offset


class StateIndexError(IndexError, ResilienceError):
    """A state index ``x<i>`` exceeds the declared dimension."""


class UnknownVariable(ResilienceError):
    pass


class HorizonExceeded(ResilienceError):
    """The signal is too short to evaluate the formula at the requested time."""


class SampleBudgetExceeded(ResilienceError):
    """The delta-cover needs more samples than the configured cap."""


class NotEquilibrium(ResilienceError):
    pass


class RegionExcludesEquilibrium(ResilienceError):
    pass


class NonFinite(ResilienceError):
    """The integrated state left the finite floats."""

    def __init__(self, time):
        super().__init__(f"state became non-finite at t={time:g}")
        self.time = time


class ConfigError(ResilienceError):
    """Invalid analysis configuration. ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


class MissingCertificate(ResilienceError):
    pass
