"""Exception hierarchy for the extractor; the CLI maps these to exit codes."""


class ExtractorError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class InvalidArgumentError(ExtractorError, ValueError):
    """A caller-supplied value violates an operation's precondition."""

    exit_code = 2


class FormatError(ExtractorError):
    """An input file was readable but its contents do not conform."""

    exit_code = 3
