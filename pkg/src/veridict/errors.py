"""Exception hierarchy shared across the pipeline."""


class VeridictError(Exception):
    """Base class for all domain errors raised by this package."""


class ClientError(VeridictError):
    """A generator/judge backend failed after bounded retries."""


class EmptyExtraction(VeridictError):
    """Meta-attribute extraction returned unparseable or empty output."""


class LengthUnsatisfiable(VeridictError):
    """Generated text could not be brought within the length tolerance."""


class UnknownToken(VeridictError):
    """A symbol outside the policy vocabulary was used where ids are required."""


class ShapeMismatch(VeridictError):
    """Gradient or parameter arrays do not share the expected shapes."""


class ConfigError(VeridictError):
    """Invalid or unresolvable experiment configuration."""


class EmptyInput(VeridictError):
    """An operation that requires at least one sample received none."""


class BackendError(VeridictError):
    """A detection backend produced no usable completion."""
