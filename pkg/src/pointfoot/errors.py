"""Exception hierarchy shared by all subpackages."""


class PointfootError(Exception):
    pass


class ModelError(PointfootError):
    """Bad robot description, unknown body, or state/model dimension mismatch."""


class SingularContactError(PointfootError):
    def __init__(self, message, singular_values=None):
        super().__init__(message)
        self.singular_values = singular_values


class IllConditionedTaskError(PointfootError):
    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class DegenerateGeometryError(PointfootError):
    pass


class UndefinedInternalForceError(PointfootError):
    """Internal forces only exist with two or more contacts."""


class TransitionSetupError(PointfootError):
    pass


class EstimatorError(PointfootError):
    pass


class SingularSurfaceError(PointfootError):
    pass


class PlannerError(PointfootError):
    def __init__(self, message, axis=None):
        if axis is not None:
            message = f"[{axis}] {message}"
        super().__init__(message)
        self.axis = axis


class SimulationDivergedError(PointfootError):
    def __init__(self, message, state_dump=None):
        super().__init__(message)
        self.state_dump = state_dump


class ConfigError(PointfootError):
    def __init__(self, message, problems=None):
        super().__init__(message)
        self.problems = list(problems or [])
