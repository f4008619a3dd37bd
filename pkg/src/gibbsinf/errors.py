"""Exception taxonomy for gibbsinf.

Each class marks a distinct failure mode so callers (and the CLI) can map
errors to exit codes without string matching.
"""


class GibbsInfError(Exception):
    """Base class for all gibbsinf errors."""


class DomainError(GibbsInfError):
    """A point lies outside a basis domain beyond tolerance."""


class ShapeError(GibbsInfError):
    """Dimension/variant mismatch between a parameter, loss, prior, or dataset."""


class PreconditionError(GibbsInfError):
    """An operation's stated precondition was violated (empty data, bad counts, ...)."""


class ConditioningError(GibbsInfError):
    """A linear system is too ill-conditioned to solve reliably."""


class DegenerateEstimateError(GibbsInfError):
    """A data-driven estimate is degenerate (e.g. nonpositive variance proxy)."""


class InitializationError(GibbsInfError):
    """No valid initial state could be found for a sampler."""


class OverflowGuardError(GibbsInfError):
    """An exponentiated quantity would overflow (loss effectively unbounded
    below on the drawn sample), so the annealed-moment check is inapplicable."""


class ConfigError(GibbsInfError):
    """A run configuration is malformed or inconsistent."""
