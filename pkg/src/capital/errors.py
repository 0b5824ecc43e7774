"""Exception hierarchy shared across the package."""


class CapitalError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(CapitalError):
    """Input data or parameters violate a documented invariant."""


class SchemaError(ValidationError):
    """A delimited file does not match the expected column layout."""


class ParseError(ValidationError):
    """A cell in a delimited file could not be parsed as a number."""


class InfeasibleThresholdError(CapitalError):
    """The requested effect threshold exceeds what the contrast sample can attain."""
