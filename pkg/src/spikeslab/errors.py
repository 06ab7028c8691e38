"""Exception hierarchy.

Input problems derive from ``InputError`` (a ``ValueError``); failures of a
numerical routine derive from ``NumericalError``.  The CLI maps the two
families to exit codes 2 and 1.
"""


class SpikeSlabError(Exception):
    pass


class InputError(SpikeSlabError, ValueError):
    pass


class NumericalError(SpikeSlabError, ArithmeticError):
    pass


class DimensionError(InputError):
    pass


class DegenerateColumnError(InputError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"column {column!r} is constant across rows")


class DomainError(InputError):
    pass


class RankDeficiencyError(NumericalError):
    def __init__(self, rank, ncols, what="design"):
        self.rank = rank
        self.ncols = ncols
        super().__init__(f"{what} is rank deficient: numerical rank {rank} < {ncols} columns")


class CollinearityError(NumericalError):
    def __init__(self, position, name=None):
        self.position = position
        label = f" ({name})" if name is not None else ""
        super().__init__(
            f"ordered column at position {position}{label} is collinear with its predecessors"
        )


class ZeroVarianceError(NumericalError):
    """Residual variance is zero, so Z-statistics and rescaling are undefined."""


class QuadratureError(NumericalError):
    def __init__(self, message, achieved):
        self.achieved = achieved
        super().__init__(f"{message} (achieved abs error {achieved:.3g})")


class SamplerError(NumericalError):
    def __init__(self, message, coordinate=None, sweep=None):
        self.coordinate = coordinate
        self.sweep = sweep
        where = []
        if sweep is not None:
            where.append(f"sweep {sweep}")
        if coordinate is not None:
            where.append(f"coordinate {coordinate}")
        suffix = f" at {', '.join(where)}" if where else ""
        super().__init__(message + suffix)
