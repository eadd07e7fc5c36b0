"""Exception types raised across the package."""


class NetDepError(Exception):
    """Base class for all package errors."""


class OutOfRangeProbability(NetDepError, ValueError):
    def __init__(self, i, j, value):
        self.pair = (i, j)
        self.value = value
        super().__init__(
            f"inner product X_{i}.X_{j} = {value!r} is not a probability"
        )


class InvalidDimension(NetDepError, ValueError):
    pass


class InvalidAlpha(NetDepError, ValueError):
    pass


class InvalidSpec(NetDepError, ValueError):
    pass


class NonPositiveEigenvalue(NetDepError, ValueError):
    pass


class SingularSystem(NetDepError, ValueError):
    pass


class MaxIterations(NetDepError, RuntimeError):
    pass


class NonUniqueMax(NetDepError, ValueError):
    pass


class DegenerateGram(NetDepError, ValueError):
    pass


class OutOfKnotRange(NetDepError, ValueError):
    pass


class NonPositiveVariance(NetDepError, ValueError):
    pass


class SingularCovariance(NetDepError, ValueError):
    pass


class NotPositiveDefinite(NetDepError, ValueError):
    pass


class ParseError(NetDepError, ValueError):
    def __init__(self, path, lineno, message):
        self.path = path
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


class AsymmetricInput(NetDepError, ValueError):
    pass


class MissingNode(NetDepError, KeyError):
    def __init__(self, ids):
        self.ids = list(ids)
        super().__init__(f"covariates missing for nodes: {', '.join(map(str, self.ids))}")

    def __str__(self):
        return self.args[0]


class NonNumericCell(NetDepError, ValueError):
    def __init__(self, row, column, value):
        self.row = row
        self.column = column
        super().__init__(f"non-numeric cell at row {row}, column {column!r}: {value!r}")


class NearSingular(UserWarning):
    """Emitted when a constructed covariance matrix is (numerically) singular."""
