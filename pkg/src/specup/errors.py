"""Exception taxonomy shared by the whole package.

Every error carries an ``exit_code`` so the CLI can map failures onto its
documented exit codes: 2 = input/parse, 3 = graph construction,
4 = numeric invariant violation, 5 = non-convergence.
"""


class SpecupError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class InputError(SpecupError):
    """Malformed files, missing inputs, dimension mismatches."""

    exit_code = 2


class ConstructionError(SpecupError):
    """Graph/Laplacian construction failures."""

    exit_code = 3


class NumericError(SpecupError):
    """A numeric invariant or precondition was violated."""

    exit_code = 4


class ConvergenceError(SpecupError):
    """An iteration failed to converge."""

    exit_code = 5


# --- input / dimension problems ---------------------------------------------

class DimensionMismatch(InputError):
    pass


class MissingTrace(InputError):
    """Mean surrogate requested without a trace or a matrix to compute it."""


class MissingS(InputError):
    """Second-order secular evaluation without the tail moment s."""


class MissingMatrix(InputError):
    """Second-order eigenvector formula without a matrix for A·r."""


# --- numeric invariants ------------------------------------------------------

class AsymmetricInput(NumericError):
    pass


class NotOrthonormal(NumericError):
    pass


class NotDescending(NumericError):
    pass


class DegenerateResidual(NumericError):
    """Weighted-mean surrogate undefined: the residual mass is ~0."""


class InvalidSurrogate(NumericError):
    """Chosen surrogate value does not sit below the known spectrum."""


class PoleEvaluation(NumericError):
    """Secular function evaluated exactly at a pole."""


class PoleCollision(NumericError):
    """An updated eigenvalue estimate collides with a known eigenvalue."""


class RankDeficient(NumericError):
    pass


class AllDeflated(NumericError):
    """Every coupling coefficient and the residual mass vanished."""


class ZeroMatrix(NumericError):
    pass


# --- construction ------------------------------------------------------------

class ZeroDegree(ConstructionError):
    """A vertex with zero degree; the normalized Laplacian is undefined."""


class IsolatedVertexWithoutSelfLoop(ConstructionError):
    pass


# --- convergence -------------------------------------------------------------

class NoSignChange(ConvergenceError):
    """A root bracket has endpoints of equal sign."""

    def __init__(self, message, bracket_index=None):
        super().__init__(message)
        self.bracket_index = bracket_index


class MaxIterations(ConvergenceError):
    pass


class NonConvergence(ConvergenceError):
    pass
