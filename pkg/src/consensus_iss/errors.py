"""Exception types raised across the package.

All of them derive from ``ValueError`` so callers that only care about
"bad input" can catch a single type.
"""


class ConsensusISSError(ValueError):
    """Base class for every error raised by this package."""


class DimensionError(ConsensusISSError):
    pass


class NotSymmetricError(ConsensusISSError):
    pass


class NotSchurError(ConsensusISSError):
    pass


class GraphError(ConsensusISSError):
    """Malformed graph: self-loop, duplicate edge, bad vertex id."""


class DisconnectedGraphError(GraphError):
    pass


class WeightError(ConsensusISSError):
    """Edge weights missing, extra, or non-positive."""


class SpectrumError(ConsensusISSError):
    """A weight matrix has an eigenvalue outside the admissible interval."""

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class AssumptionError(ConsensusISSError):
    """The problem fails the Lipschitz / strong-convexity requirements."""


class BracketError(ConsensusISSError):
    pass


class GammaRangeError(ConsensusISSError):
    def __init__(self, message, gamma_star=None):
        super().__init__(message)
        self.gamma_star = gamma_star


class NonFiniteStateError(ConsensusISSError):
    pass


class ConstructionError(ConsensusISSError):
    """An internal invariant failed after construction."""


class ConfigError(ConsensusISSError):
    pass
