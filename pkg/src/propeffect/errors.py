"""Exception hierarchy.

Every error carries a stable ``kind`` (the class name) and the process exit
code the CLI maps it to: 2 for input/config problems, 3 for adapter or
runtime failures.
"""


class PropEffectError(Exception):
    exit_code = 2

    @property
    def kind(self) -> str:
        return type(self).__name__


class DegenerateGrid(PropEffectError, ValueError):
    """Grid points are duplicated, unordered, non-finite or too few."""


class InsufficientStencil(PropEffectError, ValueError):
    """Derivative order is not below the number of stencil points."""


class ShapeMismatch(PropEffectError, ValueError):
    pass


class InvalidSeries(PropEffectError, ValueError):
    pass


class UndefinedCorrelation(PropEffectError, ValueError):
    """Pearson correlation requested for a zero-variance input."""


class InvalidConfig(PropEffectError, ValueError):
    pass


class GeometryError(PropEffectError, ValueError):
    pass


class FormatError(PropEffectError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class OrderError(PropEffectError, ValueError):
    pass


class FeatureError(PropEffectError, ValueError):
    pass


class EvalError(PropEffectError, RuntimeError):
    exit_code = 3

    def __init__(self, message: str, index: int | None = None):
        if index is not None:
            message = f"entry {index}: {message}"
        super().__init__(message)
        self.index = index
