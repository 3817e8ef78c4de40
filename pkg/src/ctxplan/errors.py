"""Exception types raised across the planning stack."""


class CtxPlanError(Exception):
    """Base class for all package errors."""


class DimensionError(CtxPlanError, ValueError):
    pass


class ModelError(CtxPlanError, ValueError):
    pass


class ScenarioError(CtxPlanError, ValueError):
    """Scenario failed validation or could not be parsed.

    ``violations`` holds one message per problem found, each prefixed with
    the path into the scenario (e.g. ``robots[1].start``).
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class InconsistentObservation(CtxPlanError):
    pass


class AssignmentInfeasible(CtxPlanError):
    pass


class TransitInfeasible(CtxPlanError):
    pass


class AmbiguousContext(CtxPlanError):
    pass


class PlanInfeasible(CtxPlanError):
    pass


class PlanTimeout(CtxPlanError):
    """Raised when a planner exceeds its wall-clock budget.

    ``diagnostics`` carries search statistics at the moment of the timeout.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class OracleGuardError(CtxPlanError):
    pass


class SamplingError(CtxPlanError):
    pass


class GenerationError(CtxPlanError):
    pass
