"""Exception hierarchy shared by all decolens modules."""


class DecolensError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(DecolensError):
    """Invalid experiment configuration.

    ``key`` and ``line`` point at the offending entry when known.
    """

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")


class GridMismatch(DecolensError, ValueError):
    pass


class PacketOutOfDomain(DecolensError, ValueError):
    pass


class NumericalError(DecolensError, ArithmeticError):
    """Base class for failures of the numerical machinery itself."""


class UnstableParameters(NumericalError):
    pass


class ZeroResult(NumericalError):
    pass


class SamplingStalled(NumericalError):
    pass


class EmptyDensity(NumericalError):
    pass


class DomainError(DecolensError, ValueError):
    pass


class GeometryInvalid(DecolensError, ValueError):
    pass


class NotProductForm(DecolensError, ValueError):
    pass


class NotTwoByTwo(DecolensError, ValueError):
    pass


class SupportOutOfDomain(DecolensError, ValueError):
    pass


class NoIntersection(DecolensError, ValueError):
    pass
