"""Exception hierarchy shared by all metabias modules.

Every error raised deliberately by this package derives from
:class:`MetabiasError`, so callers (and the simulation harness, which must
keep running when a single estimator fails on a single replicate) can catch
one base class.
"""


class MetabiasError(Exception):
    """Base class for all errors raised by metabias."""


class DomainError(MetabiasError, ValueError):
    """An argument lies outside the mathematical domain of the function."""


class LengthMismatch(MetabiasError, ValueError):
    """Paired vectors have different lengths."""


class SingularDesign(MetabiasError):
    """A regression design matrix is rank-deficient (e.g. constant regressor)."""


class NoBracket(MetabiasError):
    """A root solve could not establish a sign change on the search interval."""


class EmptyInput(MetabiasError, ValueError):
    """An operation requiring at least one study received none."""


class InsufficientStudies(MetabiasError):
    """A method's minimum study count is not met."""


class NotSignificant(MetabiasError):
    """A conditional-probability evaluation was asked for a non-significant study."""


class NoSignificantStudies(MetabiasError):
    """p-uniform received no study passing its significance filter."""


class EstimateAtBoundary(MetabiasError):
    """The p-uniform defining equation has no root (degenerate input)."""


class NumericUnderflow(MetabiasError):
    """A selection probability underflowed below 1e-300."""


class NoConvergedPoint(MetabiasError):
    """No grid point of a Copas sensitivity fit converged."""


class TargetUnreachable(MetabiasError):
    """The requested publishing rate is below the significant fraction."""


class AllFailed(MetabiasError):
    """Every replicate failed for a method; nothing to aggregate."""


class ConfigError(MetabiasError, ValueError):
    """A run-configuration file is malformed; message carries the field path."""


class ParseError(MetabiasError, ValueError):
    """A dataset file is malformed; message carries the offending line number."""
