"""Exception hierarchy shared by all somcodes modules.

The CLI maps these onto process exit codes, so every raise site should pick
the class that matches the failure category rather than a bare ValueError.
"""


class SomcodesError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class InvalidArgumentError(SomcodesError, ValueError):
    """A caller-supplied value violates an operation's precondition."""

    exit_code = 2


class FormatError(SomcodesError):
    """A serialized file is malformed (bad magic, version, or truncation).

    Distinct from OSError: the file was readable but its contents do not
    conform to the expected layout.
    """

    exit_code = 3


class NumericError(SomcodesError):
    """A computation cannot proceed for numerical reasons.

    Examples: degenerate covariance in density estimation, zero variance
    in a significance test.
    """

    exit_code = 4
