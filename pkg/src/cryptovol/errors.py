"""Exception types shared across the package."""


class CryptovolError(Exception):
    """Base class for all package-specific errors."""


class ParseError(CryptovolError):
    """A CSV row failed to parse; message carries the 1-based line number."""


class OrderingError(CryptovolError):
    """Timestamps are not strictly increasing."""


class DuplicateTimestampError(OrderingError):
    """Two rows share a timestamp; message names the offending timestamp."""


class InsufficientDataError(CryptovolError):
    """Not enough observations for the requested computation."""


class UnsupportedFrequencyError(CryptovolError):
    """Resample target finer than (or equal to) the source frequency."""


class NonStationaryError(CryptovolError):
    """Model parameters violate the stationarity region."""


class NumericalError(CryptovolError):
    """A numerical routine failed to converge or produced invalid values."""


class NumericalOverflowError(NumericalError):
    """A variance recursion produced a non-finite intermediate value."""


class EstimationError(CryptovolError):
    """Maximum-likelihood estimation failed to converge.

    Carries ``best`` (the best point found, possibly None) so callers can
    inspect or log the failure.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class NoSolutionError(CryptovolError):
    """Option premium lies outside the invertible no-arbitrage range."""


class NoImpliedVolError(CryptovolError):
    """Every trade in a group failed implied-volatility inversion."""


class AlignmentError(CryptovolError):
    """Series lengths or dates do not line up."""


class CollinearityError(CryptovolError):
    """Regression design matrix is rank deficient; names offending columns."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class DegenerateSmileError(CryptovolError):
    """Smile slope undefined because a delta gap is zero."""
