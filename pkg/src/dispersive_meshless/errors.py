"""Exception types raised across the package."""


class MeshlessError(Exception):
    """Base class for every error raised by this package."""


class NonConformingSpacing(MeshlessError, ValueError):
    pass


class EmptyRegion(MeshlessError, ValueError):
    pass


class IsolatedNode(MeshlessError):
    pass


class SingularMomentMatrix(MeshlessError):
    pass


class ShapeMismatch(MeshlessError, ValueError):
    pass


class PoleAtZero(MeshlessError, ZeroDivisionError):
    pass


class NonFiniteField(MeshlessError, FloatingPointError):
    """The time march produced a non-finite or runaway field value."""

    def __init__(self, step, node, value, message=None):
        self.step = step
        self.node = node
        self.value = value
        super().__init__(
            message or f"field diverged at step {step}, node {node}: value {value!r}"
        )


class TooShort(MeshlessError, ValueError):
    pass


class InvalidMode(MeshlessError, ValueError):
    pass


class NoConvergence(MeshlessError):
    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class ConfigParseError(MeshlessError):
    pass


class ConfigValidationError(MeshlessError, ValueError):
    pass
