"""Exception types shared across the package."""


class GraphDomainError(ValueError):
    """Invalid graph-level input: bad node index, reversed interval, etc."""


class CapacityError(RuntimeError):
    """Exhaustive search refused: input above the configured size limit."""


class UnsupportedScheduleError(ValueError):
    """Schedule is not eventually periodic (cannot happen with the bundled
    schedule type, kept for interface completeness)."""


class ScenarioError(ValueError):
    """Scenario file or object violates a declared constraint.

    ``key`` is the dotted path of the offending field, ``constraint`` the
    human-readable rule that failed (tagged with A2/P1/P2 where applicable).
    """

    def __init__(self, key: str, constraint: str):
        self.key = key
        self.constraint = constraint
        super().__init__(f"{key}: {constraint}")


class RootSetMismatchError(ValueError):
    """Declared root set disagrees with the detected one."""


class StructuralCheckError(RuntimeError):
    """Connectivity precondition failed while resolving the root set."""


class IntegrationDivergedError(RuntimeError):
    """State became non-finite during integration.

    Carries the last valid time and, when available, the partial trajectory
    arrays recorded up to that point.
    """

    def __init__(self, t_last: float, times=None, states=None):
        self.t_last = t_last
        self.times = times
        self.states = states
        super().__init__(f"integration diverged; last finite state at t={t_last:g}")


class CheckUsageError(ValueError):
    """An inequality check was applied to the wrong kind of trajectory."""
