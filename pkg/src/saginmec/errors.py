"""Exception types shared across the package."""


class ScenarioError(ValueError):
    """Malformed scenario document or schema violation."""


class InfeasibleError(RuntimeError):
    """A plan or subproblem admits no feasible point.

    ``culprits`` lists ``(device, frame)`` pairs (0-based) when the failure can be
    localised, otherwise it is empty.
    """

    def __init__(self, message, culprits=()):
        super().__init__(message)
        self.culprits = list(culprits)


class ZeroSpeedError(ValueError):
    """Propulsion model evaluated below the fixed-wing speed floor."""
