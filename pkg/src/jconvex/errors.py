"""Exception hierarchy shared by all modules."""


class JConvexError(Exception):
    """Base class for every error raised by the package."""


class NonInvertible(JConvexError):
    pass


class StructureInvalid(JConvexError):
    pass


class NotCentered(JConvexError):
    pass


class NotNormalized(JConvexError):
    pass


class OutOfChart(JConvexError):
    pass


class NoConvergence(JConvexError):
    pass


class IllConditioned(JConvexError):
    pass


class NewtonDiverged(JConvexError):
    pass


class SingularJacobian(JConvexError):
    pass


class OutsideCollar(JConvexError):
    pass


class OutsideDomain(JConvexError):
    pass


class PreconditionFailed(JConvexError):
    pass


class SearchExhausted(JConvexError):
    pass


class DegenerateBoundary(JConvexError):
    pass


class FrameIllConditioned(JConvexError):
    pass


class RootFindFailed(JConvexError):
    pass


class CriticalLevel(JConvexError):
    pass


class ConfigInvalid(JConvexError):
    def __init__(self, message, fields=()):
        super().__init__(message)
        self.fields = list(fields)


class TaskFailed(JConvexError):
    pass


class MissingSection(JConvexError):
    pass
