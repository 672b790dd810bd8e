from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSeries


def _frozen(values) -> np.ndarray:
    a = np.array(values, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class InterventionSeries:
    """Model outputs along one gradual intervention, ordered by property value.

    A single-entry series is representable (an adapter can produce one) but
    every scoring routine rejects it.
    """

    grid: np.ndarray
    outputs: np.ndarray
    output_label: str = "output"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        grid = _frozen(self.grid)
        outputs = _frozen(self.outputs)
        if grid.ndim != 1 or outputs.ndim != 1:
            raise InvalidSeries("grid and outputs must be one-dimensional")
        if grid.size != outputs.size:
            raise InvalidSeries(f"{outputs.size} outputs for {grid.size} property values")
        if grid.size == 0:
            raise InvalidSeries("empty series")
        if not (np.all(np.isfinite(grid)) and np.all(np.isfinite(outputs))):
            raise InvalidSeries("series contains non-finite values")
        if np.any(np.diff(grid) <= 0):
            raise InvalidSeries("property values must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "outputs", outputs)

    def __len__(self):
        return self.grid.size

    def __eq__(self, other):
        if not isinstance(other, InterventionSeries):
            return NotImplemented
        return (
            self.output_label == other.output_label
            and np.array_equal(self.grid, other.grid)
            and np.array_equal(self.outputs, other.outputs)
        )

    @classmethod
    def unit(cls, outputs, label="output"):
        """Series on the grid 0, 1, ..., n-1."""
        return cls(np.arange(len(outputs), dtype=np.float64), outputs, label)

    def with_outputs(self, outputs):
        return InterventionSeries(self.grid, outputs, self.output_label, dict(self.meta))

    def reversed(self):
        """Same series traversed backwards, re-anchored so the grid still increases."""
        return InterventionSeries(-self.grid[::-1], self.outputs[::-1], self.output_label)


def require_scoreable(series: InterventionSeries) -> None:
    if not isinstance(series, InterventionSeries):
        raise InvalidSeries(f"expected InterventionSeries, got {type(series).__name__}")
    if len(series) < 2:
        raise InvalidSeries("at least 2 observations are needed to estimate a gradient")
