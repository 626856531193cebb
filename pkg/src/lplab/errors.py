"""Exception types shared across modules."""
from .dyadic import SelfVerificationFailed
from .orlicz import DivergentSupremum


class HypothesisViolation(ValueError):
    """A configuration fails a hypothesis of the inequality under test (e.g. a divergent B_p test)."""


class UnknownExperiment(KeyError):
    pass


class NonSummable(ValueError):
    """Rubio de Francia normalizer too small for the observed growth."""


__all__ = ["HypothesisViolation", "UnknownExperiment", "NonSummable", "SelfVerificationFailed",
           "DivergentSupremum"]
