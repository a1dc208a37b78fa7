"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class PreconditionError(ValueError):
    """A call was made before its inputs satisfy the operation's requirements."""


class ConfigurationError(Exception):
    """An experiment or policy configuration is invalid or incomplete."""


class FormatError(Exception):
    """A checkpoint or data file is malformed or has an unsupported version."""
