"""Exception hierarchy shared by the numerical modules and the CLI."""


class AgeSpecError(Exception):
    """Base class for all errors raised by :mod:`agespec`."""


class InvalidArgument(AgeSpecError, ValueError):
    pass


class ConfigError(AgeSpecError):
    """Malformed or inconsistent run configuration (CLI exit code 2)."""


class NumericalError(AgeSpecError):
    """Base for numerical failures (CLI exit code 3)."""


class NumericalSingularity(NumericalError):
    pass


class QuadratureNonconvergence(NumericalError):
    pass


class EigensolverFailure(NumericalError):
    pass


class BracketInvalid(NumericalError):
    """The root-finding bracket does not straddle a sign change."""
