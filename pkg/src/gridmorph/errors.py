"""Exception hierarchy.

Two branches matter to callers: InputError for defects in what the user
handed us (files, flags, indices), NumericalError for computations that
are impossible or unstable on otherwise well-formed data. The CLI maps
them to exit codes 2 and 3 respectively.
"""

from __future__ import annotations


class GridmorphError(Exception):
    pass


class InputError(GridmorphError):
    pass


class NumericalError(GridmorphError):
    pass


class ParseError(InputError):
    """Malformed input file; carries a 1-based line or row number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(InputError):
    pass


class HomologyError(InputError):
    pass


class InsufficientLandmarksError(InputError):
    pass


class DegenerateConfigurationError(NumericalError):
    pass


class DegenerateBaselineError(NumericalError):
    pass


class CollinearTemplateError(NumericalError):
    pass


class CoincidentLandmarksError(NumericalError):
    pass


class RankDeficiencyError(NumericalError):
    pass


class SingularSystemError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class OutsideDomainError(NumericalError):
    pass


class NonConvexSourceError(NumericalError):
    pass


class DegenerateQuadError(NumericalError):
    pass


class DegeneratePolygonError(NumericalError):
    pass


class VanishingLineError(NumericalError):
    pass


class ZeroLengthSegmentError(NumericalError):
    pass
