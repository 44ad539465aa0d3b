"""Exception types raised across the calibration pipeline."""


class NpEoError(Exception):
    """Base class for all errors raised by this package."""


class EmptyCell(NpEoError):
    """A (label, group) cell required by an operation has no samples."""


class Infeasible(NpEoError):
    """No order statistic meets the type I guarantee at this sample size."""


class OutOfRange(NpEoError):
    """An order index falls outside 1..n for the given score sequence."""


class EmptyCandidates(NpEoError):
    """All class-1 scores of some group lie at or below its pivot."""


class NoViablePair(NpEoError):
    """No candidate order pair satisfies the disparity criterion."""


class DegenerateLabels(NpEoError):
    """Training data contains a single label class."""


class ParseError(NpEoError):
    """A data file could not be parsed.

    Carries the 1-based line number when one is known.
    """

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class InvalidGroupOrLabel(ParseError):
    """A group or label field holds a value outside the accepted set."""


class NonMonotoneLikelihoodRatio(NpEoError):
    """Within-group class densities do not give a monotone likelihood ratio."""


class RootNotBracketed(NpEoError):
    """A root finder could not bracket a sign change."""
