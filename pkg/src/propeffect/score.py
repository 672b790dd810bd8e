"""Impact scores for a single intervention series.

The central quantity is the expected property gradient magnitude: the mean
absolute finite-difference derivative of the model output along the
property axis, with every property value weighted equally.
"""
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidSeries, UndefinedCorrelation
from .findiff import DiffScheme, gradient_series
from .series import InterventionSeries, require_scoreable
from .stattest import TestConfig, permutation_test

DEFAULT_THRESHOLD = 0.5


def expected_gradient_magnitude(series: InterventionSeries, scheme: DiffScheme = DiffScheme()) -> float:
    """Mean of ``|d output / d property|`` over the grid.

    A score of 0.01 on a unit-spaced grid means the output moves by one
    percentage point per intervention step on average.
    """
    require_scoreable(series)
    g = gradient_series(series.grid, series.outputs, scheme)
    return float(np.abs(g).sum() / g.size)


def cace_binary(f0: float, f1: float) -> float:
    """Effect of a two-state intervention, ``|f1 - f0|``."""
    return abs(float(f1) - float(f0))


def pearson(series: InterventionSeries) -> float:
    """Sample Pearson correlation between property values and outputs."""
    require_scoreable(series)
    x = series.grid - series.grid.mean()
    y = series.outputs - series.outputs.mean()
    sxx, syy = float(x @ x), float(y @ y)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelation("correlation is not defined for a constant input")
    r = float(x @ y) / np.sqrt(sxx * syy)
    return float(np.clip(r, -1.0, 1.0))


def detect_flips(outputs, threshold: float = DEFAULT_THRESHOLD):
    """Count crossings of ``threshold`` along ``outputs``.

    Values exactly at the threshold keep the side of the previous value (a
    leading run at the threshold takes the first side actually visited).
    Returns ``(count, positions)`` where each position is the index at which
    the new side is first reached.
    """
    y = np.asarray(outputs, dtype=np.float64)
    if y.ndim != 1 or y.size == 0:
        raise InvalidSeries("flip detection needs a non-empty 1-d series")
    if not np.isfinite(threshold):
        raise InvalidSeries("threshold must be finite")
    signs = np.sign(y - threshold)
    nonzero = np.flatnonzero(signs)
    if nonzero.size == 0:
        return 0, []
    side = signs[nonzero[0]]
    positions = []
    for i in nonzero[1:]:
        if signs[i] != side:
            positions.append(int(i))
            side = signs[i]
    return len(positions), positions


@dataclass
class PropertyImpactReport:
    score: float
    p_value: float | None
    significant: bool
    delta: float
    n_steps: int
    flips: int
    flip_positions: list
    threshold: float
    pearson: float | None
    pearson_defined: bool
    statistic_name: str
    side: str
    K: int
    seed: int
    scheme: dict = field(default_factory=dict)
    output_label: str = "output"
    test_warning: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(
    series: InterventionSeries,
    cfg: TestConfig = TestConfig(),
    threshold: float = DEFAULT_THRESHOLD,
) -> PropertyImpactReport:
    """Score, significance, flips and Pearson correlation for one series."""
    require_scoreable(series)
    score = expected_gradient_magnitude(series, cfg.scheme)
    test = permutation_test(series, cfg)
    flips, positions = detect_flips(series.outputs, threshold)
    try:
        rho, defined = pearson(series), True
    except UndefinedCorrelation:
        rho, defined = None, False
    return PropertyImpactReport(
        score=score,
        p_value=test.p_value,
        significant=bool(test.p_value < cfg.delta),
        delta=cfg.delta,
        n_steps=len(series),
        flips=flips,
        flip_positions=positions,
        threshold=float(threshold),
        pearson=rho,
        pearson_defined=defined,
        statistic_name=cfg.statistic,
        side=cfg.side,
        K=cfg.K,
        seed=int(cfg.seed),
        scheme={"boundary_order": cfg.scheme.boundary_order, "mode": cfg.scheme.mode},
        output_label=series.output_label,
        test_warning=test.warning,
    )
