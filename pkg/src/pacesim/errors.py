"""Exception types shared across the package.

The CLI maps these onto stable exit codes, so new failure modes should
reuse an existing class or get a new one here rather than a bare
ValueError deep inside a module.
"""


class ConfigurationError(ValueError):
    """A mechanism, agent, scenario, or bid profile is malformed."""


class PreconditionError(ValueError):
    """A documented precondition of an operation was violated by the caller."""


class StoppedAgentError(RuntimeError):
    """An operation was attempted on an agent that has already stopped."""


class InvariantViolationError(RuntimeError):
    """An internal invariant failed; signals a bug on the auction side."""


class BoundInapplicableError(ValueError):
    """The hypotheses of the requested analytic bound do not hold."""


class CapacityError(ValueError):
    """The instance is too large for the exact solver."""


class SmoothingRequiredError(ValueError):
    """The expected-spend curve is discontinuous; add bid noise first."""


class EnvironmentError_(ValueError):
    """The per-round environment cannot be reconstructed from the scenario."""


class StatisticsError(ValueError):
    """Not enough replications for the requested confidence statement."""
